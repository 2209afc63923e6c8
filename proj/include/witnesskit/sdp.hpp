#pragma once

#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "witnesskit/qstate.hpp"

namespace witnesskit::sdp {

/// One entry of the upper triangle (row <= col) of a Hermitian matrix.
struct HermitianEntry {
  int row;
  int col;
  Complex value;
};

/// Affine Hermitian-valued map x -> B0 + sum_i x_i B_i, constrained PSD.
///
/// Entries are added on either triangle; the Hermitian partner is implied.
/// Repeated additions at the same position accumulate.
class LmiBlock {
 public:
  explicit LmiBlock(int dim);

  int dim() const { return dim_; }

  void add_constant(int row, int col, Complex value);
  void add_constant(const CMatrix& m);
  void add_coefficient(int var, int row, int col, Complex value);
  void add_coefficient(int var, const CMatrix& m);

  const std::vector<HermitianEntry>& constant() const { return constant_; }
  const std::map<int, std::vector<HermitianEntry>>& coefficients() const { return coeffs_; }

  CMatrix evaluate(std::span<const double> x) const;

 private:
  int dim_;
  std::vector<HermitianEntry> constant_;
  std::map<int, std::vector<HermitianEntry>> coeffs_;
};

/// sum_j coeffs[j].second * x[coeffs[j].first] == rhs
struct LinearEquality {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;
};

/// minimize c^T x subject to every LmiBlock PSD, the linear equalities, and
/// per-variable bounds (infinite bounds are ignored).
struct SdpProblem {
  explicit SdpProblem(int num_vars = 0);

  int num_vars;
  RVector objective;
  std::vector<LmiBlock> blocks;
  std::vector<LinearEquality> equalities;
  RVector lower;
  RVector upper;

  int add_variable(double lower_bound = -std::numeric_limits<double>::infinity(),
                   double upper_bound = std::numeric_limits<double>::infinity());
  void set_bounds(int var, double lower_bound, double upper_bound);
  void validate() const;
};

enum class SdpStatus { optimal, infeasible, unbounded, numerical_failure };

std::string to_string(SdpStatus s);

struct SdpSolution {
  SdpStatus status = SdpStatus::numerical_failure;
  RVector x;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  /// One dual matrix per LmiBlock, normalized so that
  /// sum_b tr(W_b B_{b,i}) + sum_k nu_k a_{k,i} + bound duals = c_i.
  std::vector<CMatrix> block_duals;
  /// Multipliers of the equalities, same order as SdpProblem::equalities.
  RVector equality_duals;
  int iterations = 0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
};

struct SolverOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iterations = 200;
};

/// Primal-dual interior-point solve (HKM direction with Mehrotra correction).
/// A Phase-I program decides infeasibility when the main iteration stalls.
/// Deterministic: the same problem always yields the same solution.
SdpSolution solve(const SdpProblem& problem, const SolverOptions& options = {});

/// [[X, -Y], [Y, X]] for H = X + iY. Positive semidefinite iff H is.
RMatrix hermitian_to_real_embedding(const CMatrix& h);

}  // namespace witnesskit::sdp
