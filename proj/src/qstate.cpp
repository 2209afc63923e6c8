#include "witnesskit/qstate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace witnesskit {

namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kNormTol = 1e-12;
constexpr double kPsdTol = 1e-9;

double hermitian_defect(const CMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

std::string dims_string(const BipartiteDims& d) {
  std::ostringstream os;
  os << "(" << d.d_a << "," << d.d_b << ")";
  return os.str();
}

}  // namespace

BipartiteDims::BipartiteDims(int a, int b) : d_a(a), d_b(b) {
  if (a < 2 || b < 2) {
    throw std::invalid_argument("local dimensions must be at least 2");
  }
}

void require_same_dims(const BipartiteDims& x, const BipartiteDims& y, const char* where) {
  if (!(x == y)) {
    throw DimensionMismatch(std::string(where) + ": dimensions " + dims_string(x) + " and " +
                            dims_string(y) + " differ");
  }
}

HermitianMatrix::HermitianMatrix(CMatrix mat) : mat_(std::move(mat)) {
  if (mat_.rows() != mat_.cols() || mat_.rows() == 0) {
    throw std::invalid_argument("HermitianMatrix: matrix must be square and non-empty");
  }
  if (hermitian_defect(mat_) > kHermitianTol) {
    throw std::invalid_argument("HermitianMatrix: matrix is not Hermitian");
  }
}

double HermitianMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(mat_, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

PureState::PureState(CVector amps, BipartiteDims dims) : amps_(std::move(amps)), dims_(dims) {
  if (amps_.size() != dims_.total()) {
    throw DimensionMismatch("PureState: amplitude count does not match dimensions " +
                            dims_string(dims_));
  }
  if (std::abs(amps_.norm() - 1.0) > kNormTol) {
    throw std::invalid_argument("PureState: amplitudes are not unit norm");
  }
}

PureState PureState::normalized(const CVector& amps, BipartiteDims dims) {
  const double n = amps.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("PureState: cannot normalize a zero vector");
  }
  CVector v = amps / n;
  // One more pass pins the norm to rounding level.
  v /= v.norm();
  return PureState(std::move(v), dims);
}

DensityMatrix::DensityMatrix(CMatrix mat, BipartiteDims dims) : mat_(std::move(mat)), dims_(dims) {
  if (mat_.rows() != dims_.total() || mat_.cols() != dims_.total()) {
    throw DimensionMismatch("DensityMatrix: matrix size does not match dimensions " +
                            dims_string(dims_));
  }
  if (hermitian_defect(mat_) > kHermitianTol) {
    throw std::invalid_argument("DensityMatrix: matrix is not Hermitian");
  }
  if (std::abs(mat_.trace() - Complex(1.0)) > kHermitianTol) {
    throw std::invalid_argument("DensityMatrix: trace is not one");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(mat_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -kPsdTol) {
    throw std::invalid_argument("DensityMatrix: matrix is not positive semidefinite");
  }
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
  CMatrix m = psi.projector();
  m = 0.5 * (m + m.adjoint()).eval();
  return DensityMatrix(std::move(m), psi.dims());
}

DensityMatrix DensityMatrix::maximally_mixed(BipartiteDims dims) {
  const int n = dims.total();
  return DensityMatrix(CMatrix::Identity(n, n) / static_cast<double>(n), dims);
}

CVector SchmidtDecomposition::reconstruct() const {
  CVector out = CVector::Zero(dims.total());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    for (int a = 0; a < dims.d_a; ++a) {
      for (int b = 0; b < dims.d_b; ++b) {
        out(a * dims.d_b + b) += coeffs(i) * basis_a(a, i) * basis_b(b, i);
      }
    }
  }
  return out;
}

SchmidtDecomposition schmidt_decompose(const PureState& psi) {
  const auto& dims = psi.dims();
  CMatrix reshaped(dims.d_a, dims.d_b);
  for (int a = 0; a < dims.d_a; ++a) {
    for (int b = 0; b < dims.d_b; ++b) {
      reshaped(a, b) = psi.amps()(a * dims.d_b + b);
    }
  }
  // Full bases so that callers can build states on the whole local spaces.
  Eigen::JacobiSVD<CMatrix> svd(reshaped, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SchmidtDecomposition out;
  out.dims = dims;
  const int r = std::min(dims.d_a, dims.d_b);
  out.coeffs = svd.singularValues().head(r);
  out.basis_a = svd.matrixU();
  out.basis_b = svd.matrixV().conjugate();
  return out;
}

double fidelity(const DensityMatrix& rho, const PureState& psi) {
  require_same_dims(rho.dims(), psi.dims(), "fidelity");
  const Complex f = psi.amps().dot(rho.mat() * psi.amps());
  return f.real();
}

CMatrix partial_transpose(const CMatrix& m, BipartiteDims dims) {
  const int n = dims.total();
  if (m.rows() != n || m.cols() != n) {
    throw DimensionMismatch("partial_transpose: matrix size does not match dimensions");
  }
  CMatrix out(n, n);
  const int db = dims.d_b;
  for (int a = 0; a < dims.d_a; ++a) {
    for (int b = 0; b < db; ++b) {
      for (int a2 = 0; a2 < dims.d_a; ++a2) {
        for (int b2 = 0; b2 < db; ++b2) {
          out(a * db + b, a2 * db + b2) = m(a * db + b2, a2 * db + b);
        }
      }
    }
  }
  return out;
}

HermitianMatrix partial_transpose(const DensityMatrix& rho) {
  return HermitianMatrix(partial_transpose(rho.mat(), rho.dims()));
}

bool is_ppt(const DensityMatrix& rho, double tol) {
  if (tol < 0.0) throw std::invalid_argument("is_ppt: tolerance must be non-negative");
  return partial_transpose(rho).min_eigenvalue() >= -tol;
}

PureState maximally_entangled(int d) {
  BipartiteDims dims(d, d);
  CVector v = CVector::Zero(dims.total());
  for (int i = 0; i < d; ++i) v(i * d + i) = 1.0;
  return PureState::normalized(v, dims);
}

PureState basis_product(int i, int j, BipartiteDims dims) {
  if (i < 0 || i >= dims.d_a || j < 0 || j >= dims.d_b) {
    throw std::out_of_range("basis_product: local label out of range");
  }
  CVector v = CVector::Zero(dims.total());
  v(i * dims.d_b + j) = 1.0;
  return PureState(std::move(v), dims);
}

PureState ghz4() {
  CVector v = CVector::Zero(16);
  v(0) = 1.0;
  v(15) = 1.0;
  return PureState::normalized(v, BipartiteDims(4, 4));
}

CMatrix ginibre(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CMatrix g(rows, cols);
  // Column-major fill with real part drawn before imaginary part, fixed order.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(r, c) = Complex(re, im);
    }
  }
  return g;
}

CMatrix haar_unitary(int n, Rng& rng) {
  CMatrix g = ginibre(n, n, rng);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    const double mag = std::abs(r(i, i));
    const Complex phase = mag > 0.0 ? r(i, i) / mag : Complex(1.0);
    q.col(i) *= phase;
  }
  return q;
}

PureState haar_random_pure(BipartiteDims dims, std::uint64_t seed) {
  Rng rng(seed);
  CMatrix g = ginibre(dims.total(), 1, rng);
  return PureState::normalized(g.col(0), dims);
}

RandomMeasure parse_measure(const std::string& name) {
  if (name == "hilbert-schmidt" || name == "haar") return RandomMeasure::hilbert_schmidt;
  if (name == "bures") return RandomMeasure::bures;
  throw std::invalid_argument("unknown random-state measure '" + name + "'");
}

std::string to_string(RandomMeasure m) {
  return m == RandomMeasure::bures ? "bures" : "hilbert-schmidt";
}

DensityMatrix random_mixed(BipartiteDims dims, int rank, RandomMeasure measure,
                           std::uint64_t seed) {
  const int n = dims.total();
  if (rank < 1 || rank > n) {
    throw std::invalid_argument("random_mixed: rank must lie in [1, d_a*d_b]");
  }
  Rng rng(seed);
  CMatrix g = ginibre(n, rank, rng);
  if (measure == RandomMeasure::bures) {
    const CMatrix u = haar_unitary(n, rng);
    g = (CMatrix::Identity(n, n) + u) * g;
  }
  CMatrix rho = g * g.adjoint();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  return DensityMatrix(std::move(rho), dims);
}

HermitianMatrix heisenberg_xy(int n_qubits, double j, double gamma, double h) {
  if (n_qubits < 2 || n_qubits > 12) {
    throw std::invalid_argument("heisenberg_xy: qubit count must lie in [2, 12]");
  }
  const Eigen::Index dim = Eigen::Index(1) << n_qubits;
  CMatrix x(2, 2), y(2, 2), z(2, 2);
  x << 0, 1, 1, 0;
  y << 0, Complex(0, -1), Complex(0, 1), 0;
  z << 1, 0, 0, -1;

  // Single-site operator embedded at `site` (site 0 is the leftmost factor).
  auto site_op = [&](const CMatrix& op, int site) {
    CMatrix out = CMatrix::Ones(1, 1);
    for (int s = 0; s < n_qubits; ++s) {
      const CMatrix& f = (s == site) ? op : CMatrix::Identity(2, 2).eval();
      CMatrix next(out.rows() * 2, out.cols() * 2);
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
          next.block(2 * r, 2 * c, 2, 2) = out(r, c) * f;
        }
      }
      out = std::move(next);
    }
    return out;
  };

  CMatrix hm = CMatrix::Zero(dim, dim);
  for (int i = 0; i < n_qubits; ++i) {
    const int next = (i + 1) % n_qubits;
    hm -= j * (0.5 * (1.0 + gamma)) * (site_op(x, i) * site_op(x, next));
    hm -= j * (0.5 * (1.0 - gamma)) * (site_op(y, i) * site_op(y, next));
    hm -= h * site_op(z, i);
  }
  hm = 0.5 * (hm + hm.adjoint()).eval();
  return HermitianMatrix(std::move(hm));
}

std::vector<Eigenpair> eigenstates(const HermitianMatrix& h, int count) {
  const int dim = h.dim();
  if (count < 0 || count > dim) {
    throw std::invalid_argument("eigenstates: requested more eigenpairs than the dimension");
  }
  if (!std::has_single_bit(static_cast<unsigned>(dim)) || dim < 4) {
    throw std::invalid_argument("eigenstates: dimension must be 2^N with N >= 2");
  }
  const int n_qubits = std::countr_zero(static_cast<unsigned>(dim));
  const BipartiteDims dims(1 << (n_qubits / 2), 1 << (n_qubits - n_qubits / 2));
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.mat());
  std::vector<Eigenpair> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    out.push_back({es.eigenvalues()(k), PureState::normalized(es.eigenvectors().col(k), dims)});
  }
  return out;
}

DensityMatrix dephase(const DensityMatrix& rho) {
  CMatrix d = CMatrix::Zero(rho.mat().rows(), rho.mat().cols());
  d.diagonal() = rho.mat().diagonal().real().cast<Complex>();
  return DensityMatrix(std::move(d), rho.dims());
}

}  // namespace witnesskit
