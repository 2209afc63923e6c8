#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "witnesskit/noise.hpp"
#include "witnesskit/qstate.hpp"
#include "witnesskit/sdp.hpp"

namespace witnesskit {

/// Thrown when an SDP ends in numerical failure; the question stays open.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Either the PPT set or the inner approximation of the unfaithful set with
/// parameter D.
struct CertSet {
  enum class Kind { ppt, u_tilde };
  Kind kind = Kind::ppt;
  int big_d = 2;

  static CertSet ppt() { return {Kind::ppt, 2}; }
  static CertSet u_tilde(int big_d = 2);

  std::string name() const;
};

/// Feasible point of the unfaithfulness program for one state.
struct UnfaithfulCertificate {
  double mu = 0.0;
  CMatrix m_a;
  CMatrix m_b;
};

/// k witness states with shared dimensions.
class WitnessTuple {
 public:
  explicit WitnessTuple(std::vector<PureState> psis);

  const std::vector<PureState>& psis() const { return psis_; }
  int size() const { return static_cast<int>(psis_.size()); }
  const BipartiteDims& dims() const { return psis_.front().dims(); }

 private:
  std::vector<PureState> psis_;
};

struct EnvelopePoint {
  enum class Status { feasible, infeasible, failed };
  double c = 0.0;
  double c_solved = 0.0;  // differs from c when the point was nudged inside the range
  double v = 0.0;         // meaningful only when feasible
  Status status = Status::failed;
};

struct EnvelopeCurve {
  CertSet set;
  double c_max = 0.0;  // largest first fidelity reachable inside the set
  std::vector<EnvelopePoint> points;
};

// --- SDP assembly helpers -------------------------------------------------

/// n*n real variables spanning the n x n Hermitian matrices:
/// first the diagonal, then (Re, Im) of each strictly upper entry, row-major.
struct HermitianVars {
  int first = 0;
  int n = 0;

  int count() const { return n * n; }
  /// Adds the variables to `prob` with no bounds.
  static HermitianVars add(sdp::SdpProblem& prob, int n);
  /// Adds `scale * X` (or `scale * X^{T_B}` when dims is set) to a block.
  void add_to_block(sdp::LmiBlock& block, Complex scale = 1.0,
                    const std::optional<BipartiteDims>& pt_dims = std::nullopt) const;
  /// Adds tr(A X) to a linear equality, A Hermitian.
  void add_trace_with(sdp::LinearEquality& eq, const CMatrix& a, double scale = 1.0) const;
  /// Adds scale * tr(X) to a linear equality.
  void add_trace(sdp::LinearEquality& eq, double scale = 1.0) const;
  CMatrix value(const RVector& x) const;
};

// --- Unfaithfulness program -----------------------------------------------

/// Certificate that rho lies in U_tilde(D), or nullopt. Absence does not mean
/// the state is faithful. Throws SolverFailure when the solve is inconclusive.
std::optional<UnfaithfulCertificate> in_unfaithful_approx(const DensityMatrix& rho, int big_d = 2);

/// Largest violation of the certificate constraints for rho (0 when exact).
double certificate_violation(const UnfaithfulCertificate& cert, const DensityMatrix& rho, int big_d);

/// Set membership through a margin program; tol is the accepted negative margin.
bool in_set(const DensityMatrix& rho, const CertSet& set, double tol = 1e-8);

/// Smallest p in [0,1] with rho(p) in the set, from one SDP with p as a variable.
/// Falls back to bisection (tolerance 1e-7) on solver failure.
double noise_threshold(const NoisyFamily& family, const CertSet& set,
                       const sdp::SolverOptions& opts = {});

// --- k-tuple fidelity witnesses ------------------------------------------

/// Max t with sigma - tI, sigma^{T_B} - tI PSD, tr sigma = 1 and
/// <psi_i|sigma|psi_i> = fidelities[i]. Nonnegative iff a PPT state matches.
/// Returns -infinity when even t = -1 is impossible. Where the margin program
/// is degenerate (boundary points) the result is minus the smallest fidelity
/// mismatch over PPT states, so the sign keeps its meaning.
double ppt_fidelity_margin(const WitnessTuple& tuple, const std::vector<double>& fidelities);

/// True iff some PPT state shares rho's fidelities with every tuple member.
/// False certifies that rho is entangled.
bool in_wk(const DensityMatrix& rho, const WitnessTuple& tuple, double tol = 1e-8);

struct TupleThreshold {
  double value = 0.0;   // the threshold p*
  CMatrix sigma;        // optimal PPT state matching rho(p*)'s fidelities
  RVector fidelity_duals;  // one multiplier per tuple member
  int iterations = 0;
};

/// Smallest p with rho(p) in the k-tuple set, with the solve details needed
/// for dual sensitivities.
TupleThreshold tuple_threshold_detail(const NoisyFamily& family, const WitnessTuple& tuple,
                                      const sdp::SolverOptions& opts = {});

double tuple_threshold(const NoisyFamily& family, const WitnessTuple& tuple,
                       const sdp::SolverOptions& opts = {});

/// Gradient of tuple_threshold with respect to each (unnormalized) witness
/// vector, as complex vectors g with dV = Re<g, dpsi>. Valid where the optimal
/// dual is unique.
std::vector<CVector> tuple_threshold_gradient(const NoisyFamily& family, const WitnessTuple& tuple,
                                              const TupleThreshold& solved);

// --- Envelopes ------------------------------------------------------------

/// Upper boundary of the set's image under sigma -> (<psi1|sigma|psi1>, <psi2|sigma|psi2>).
/// The grid spans [0, c_max_override] when given, else [0, c_max of the set].
EnvelopeCurve fidelity_envelope(const PureState& psi1, const PureState& psi2, const CertSet& set,
                                int grid_size = 61, std::optional<double> c_max_override = std::nullopt);

/// Largest <psi|sigma|psi> over states sigma in the set.
double max_fidelity_in_set(const PureState& psi, const CertSet& set);

// --- Maximally entangled pairs -------------------------------------------

/// U with psi2 = (I (x) U) psi1. Both inputs must be maximally entangled with
/// equal local dimensions; std::invalid_argument otherwise.
std::optional<CMatrix> correlation_unitary(const PureState& psi1, const PureState& psi2);

/// Whether 0 lies in the convex hull of U's eigenvalues (its numerical range).
bool zero_in_numerical_range(const CMatrix& u);

// --- Faithfulness ---------------------------------------------------------

/// A pure state psi with <psi|rho|psi> > s_1(psi)^2 + margin, if one is found.
/// Searches maximally entangled states by polar iteration plus the leading
/// eigenvectors. A result proves rho faithful; nullopt proves nothing.
std::optional<PureState> find_fidelity_witness(const DensityMatrix& rho, double margin = 1e-9,
                                               int restarts = 8, std::uint64_t seed = 0);

/// Maximally entangled state aligned with psi: d^{-1/2} sum_i a_i (x) b_i over
/// its Schmidt bases.
PureState aligned_maximally_entangled(const PureState& psi);

}  // namespace witnesskit
