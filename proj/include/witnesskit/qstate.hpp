#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace witnesskit {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Raised when two objects with incompatible bipartite dimensions meet.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Local dimensions of a two-party system. Basis index of |a>|b> is a*d_b + b.
struct BipartiteDims {
  int d_a = 2;
  int d_b = 2;

  BipartiteDims() = default;
  BipartiteDims(int a, int b);

  int total() const { return d_a * d_b; }
  bool square() const { return d_a == d_b; }
  bool operator==(const BipartiteDims&) const = default;
};

void require_same_dims(const BipartiteDims& x, const BipartiteDims& y, const char* where);

/// Complex matrix equal to its own conjugate transpose (within 1e-12).
class HermitianMatrix {
 public:
  explicit HermitianMatrix(CMatrix mat);

  const CMatrix& mat() const { return mat_; }
  int dim() const { return static_cast<int>(mat_.rows()); }
  double min_eigenvalue() const;

 private:
  CMatrix mat_;
};

/// Unit-norm amplitude vector on C^{d_a} (x) C^{d_b}.
class PureState {
 public:
  PureState(CVector amps, BipartiteDims dims);

  /// Rescales `amps` to unit norm. Throws on a zero vector.
  static PureState normalized(const CVector& amps, BipartiteDims dims);

  const CVector& amps() const { return amps_; }
  const BipartiteDims& dims() const { return dims_; }
  CMatrix projector() const { return amps_ * amps_.adjoint(); }

 private:
  CVector amps_;
  BipartiteDims dims_;
};

/// Trace-one positive semidefinite Hermitian matrix with bipartite tags.
///
/// Construction checks Hermiticity and unit trace to 1e-12 and accepts a
/// minimum eigenvalue down to -1e-9 without clipping.
class DensityMatrix {
 public:
  DensityMatrix(CMatrix mat, BipartiteDims dims);

  static DensityMatrix from_pure(const PureState& psi);
  static DensityMatrix maximally_mixed(BipartiteDims dims);

  const CMatrix& mat() const { return mat_; }
  const BipartiteDims& dims() const { return dims_; }

 private:
  CMatrix mat_;
  BipartiteDims dims_;
};

/// psi = sum_i coeffs[i] * basis_a.col(i) (x) basis_b.col(i); coefficients are
/// amplitudes (their squares sum to one), sorted descending.
struct SchmidtDecomposition {
  RVector coeffs;
  CMatrix basis_a;
  CMatrix basis_b;
  BipartiteDims dims;

  CVector reconstruct() const;
};

SchmidtDecomposition schmidt_decompose(const PureState& psi);

/// <psi|rho|psi>; the imaginary residue is discarded.
double fidelity(const DensityMatrix& rho, const PureState& psi);

/// Transpose of the B indices of any d_a*d_b square matrix.
CMatrix partial_transpose(const CMatrix& m, BipartiteDims dims);
HermitianMatrix partial_transpose(const DensityMatrix& rho);

bool is_ppt(const DensityMatrix& rho, double tol = 1e-8);

PureState maximally_entangled(int d);
/// |i>|j> with 0-based local labels.
PureState basis_product(int i, int j, BipartiteDims dims);
/// (|0000> + |1111>)/sqrt(2) with qubits 1,2 on A and 3,4 on B.
PureState ghz4();

PureState haar_random_pure(BipartiteDims dims, std::uint64_t seed);

enum class RandomMeasure { hilbert_schmidt, bures };

RandomMeasure parse_measure(const std::string& name);
std::string to_string(RandomMeasure m);

DensityMatrix random_mixed(BipartiteDims dims, int rank, RandomMeasure measure, std::uint64_t seed);

using Rng = std::mt19937_64;

/// Matrix of i.i.d. standard complex normal entries (E|z|^2 = 1).
CMatrix ginibre(int rows, int cols, Rng& rng);
/// Haar-distributed unitary of size n.
CMatrix haar_unitary(int n, Rng& rng);

/// Periodic XY chain H = -J sum[(1+g)/2 XX + (1-g)/2 YY] - h sum Z. Qubit 1 is
/// the most significant bit of the basis index.
HermitianMatrix heisenberg_xy(int n_qubits, double j, double gamma, double h);

struct Eigenpair {
  double energy;
  PureState state;
};

/// The `count` lowest eigenpairs, ascending. States are tagged with the
/// contiguous split 2^floor(N/2) | 2^ceil(N/2); for N=4 this is (4,4).
std::vector<Eigenpair> eigenstates(const HermitianMatrix& h, int count);

/// Zeroes every off-diagonal entry.
DensityMatrix dephase(const DensityMatrix& rho);

}  // namespace witnesskit
