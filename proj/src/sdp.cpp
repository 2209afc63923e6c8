#include "witnesskit/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace witnesskit::sdp {

// ---------------------------------------------------------------------------
// Public model

LmiBlock::LmiBlock(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("LmiBlock: dimension must be positive");
}

namespace {

HermitianEntry upper_entry(int dim, int row, int col, Complex value) {
  if (row < 0 || col < 0 || row >= dim || col >= dim) {
    throw std::out_of_range("LmiBlock: entry outside the block");
  }
  if (row > col) return {col, row, std::conj(value)};
  if (row == col) return {row, col, Complex(value.real(), 0.0)};
  return {row, col, value};
}

void append_dense(std::vector<HermitianEntry>& out, const CMatrix& m, int dim) {
  if (m.rows() != dim || m.cols() != dim) {
    throw std::invalid_argument("LmiBlock: matrix size does not match block dimension");
  }
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("LmiBlock: coefficient matrix is not Hermitian");
  }
  for (int c = 0; c < dim; ++c) {
    for (int r = 0; r <= c; ++r) {
      // Average the two triangles so that tiny asymmetries cancel.
      const Complex v = (r == c) ? Complex(m(r, r).real(), 0.0) : 0.5 * (m(r, c) + std::conj(m(c, r)));
      if (v != Complex(0.0)) out.push_back({r, c, v});
    }
  }
}

}  // namespace

void LmiBlock::add_constant(int row, int col, Complex value) {
  constant_.push_back(upper_entry(dim_, row, col, value));
}

void LmiBlock::add_constant(const CMatrix& m) { append_dense(constant_, m, dim_); }

void LmiBlock::add_coefficient(int var, int row, int col, Complex value) {
  if (var < 0) throw std::out_of_range("LmiBlock: negative variable index");
  coeffs_[var].push_back(upper_entry(dim_, row, col, value));
}

void LmiBlock::add_coefficient(int var, const CMatrix& m) {
  if (var < 0) throw std::out_of_range("LmiBlock: negative variable index");
  append_dense(coeffs_[var], m, dim_);
}

CMatrix LmiBlock::evaluate(std::span<const double> x) const {
  CMatrix out = CMatrix::Zero(dim_, dim_);
  auto put = [&](const HermitianEntry& e, double scale) {
    out(e.row, e.col) += scale * e.value;
    if (e.row != e.col) out(e.col, e.row) += scale * std::conj(e.value);
  };
  for (const auto& e : constant_) put(e, 1.0);
  for (const auto& [var, entries] : coeffs_) {
    if (var >= static_cast<int>(x.size())) {
      throw std::out_of_range("LmiBlock::evaluate: variable index beyond x");
    }
    for (const auto& e : entries) put(e, x[var]);
  }
  return out;
}

SdpProblem::SdpProblem(int n)
    : num_vars(n),
      objective(RVector::Zero(n)),
      lower(RVector::Constant(n, -std::numeric_limits<double>::infinity())),
      upper(RVector::Constant(n, std::numeric_limits<double>::infinity())) {
  if (n < 0) throw std::invalid_argument("SdpProblem: negative variable count");
}

int SdpProblem::add_variable(double lower_bound, double upper_bound) {
  const int idx = num_vars++;
  objective.conservativeResize(num_vars);
  objective(idx) = 0.0;
  lower.conservativeResize(num_vars);
  upper.conservativeResize(num_vars);
  set_bounds(idx, lower_bound, upper_bound);
  return idx;
}

void SdpProblem::set_bounds(int var, double lower_bound, double upper_bound) {
  if (var < 0 || var >= num_vars) throw std::out_of_range("SdpProblem: variable out of range");
  if (lower_bound > upper_bound) throw std::invalid_argument("SdpProblem: empty bound interval");
  lower(var) = lower_bound;
  upper(var) = upper_bound;
}

void SdpProblem::validate() const {
  if (objective.size() != num_vars || lower.size() != num_vars || upper.size() != num_vars) {
    throw std::invalid_argument("SdpProblem: vector sizes disagree with variable count");
  }
  for (const auto& b : blocks) {
    for (const auto& [var, entries] : b.coefficients()) {
      (void)entries;
      if (var >= num_vars) throw std::out_of_range("SdpProblem: block references unknown variable");
    }
  }
  for (const auto& eq : equalities) {
    for (const auto& [var, coef] : eq.coeffs) {
      (void)coef;
      if (var < 0 || var >= num_vars) {
        throw std::out_of_range("SdpProblem: equality references unknown variable");
      }
    }
  }
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::infeasible: return "infeasible";
    case SdpStatus::unbounded: return "unbounded";
    case SdpStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

RMatrix hermitian_to_real_embedding(const CMatrix& h) {
  const Eigen::Index n = h.rows();
  if (h.cols() != n) throw std::invalid_argument("hermitian_to_real_embedding: matrix not square");
  const RMatrix x = h.real();
  const RMatrix y = h.imag();
  RMatrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = x;
  out.topRightCorner(n, n) = -y;
  out.bottomLeftCorner(n, n) = y;
  out.bottomRightCorner(n, n) = x;
  return out;
}

// ---------------------------------------------------------------------------
// Real-symmetric core

namespace {

struct Entry {
  int r;
  int c;
  double v;
};

struct SymBlock {
  int n = 0;
  RMatrix constant;
  std::vector<int> vars;
  std::vector<std::vector<Entry>> mats;  // full storage, both triangles
  std::vector<RMatrix> dense;            // filled only for dense coefficient matrices
};

// Rows s_k = constant_k + sum a_ki x_i >= 0.
struct LinearBlock {
  RVector constant;
  std::vector<std::vector<std::pair<int, double>>> rows;
  int size() const { return static_cast<int>(constant.size()); }
};

struct CoreProblem {
  int n = 0;
  RVector c;
  std::vector<SymBlock> psd;
  LinearBlock lp;
  RMatrix g;  // equalities g x = h
  RVector h;
};

enum class CoreExit { converged, max_iterations, stalled, diverged };

struct CoreResult {
  CoreExit exit = CoreExit::stalled;
  RVector x;
  std::vector<RMatrix> z;
  RVector z_lp;
  RVector nu;
  double pobj = 0.0;
  double dobj = 0.0;
  double pinf = 0.0;
  double dinf = 0.0;
  int iterations = 0;
};

std::vector<Entry> merge_entries(std::vector<Entry> es) {
  std::sort(es.begin(), es.end(), [](const Entry& a, const Entry& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  std::vector<Entry> out;
  for (const auto& e : es) {
    if (!out.empty() && out.back().r == e.r && out.back().c == e.c) {
      out.back().v += e.v;
    } else {
      out.push_back(e);
    }
  }
  std::erase_if(out, [](const Entry& e) { return e.v == 0.0; });
  return out;
}

// Real embedding of the Hermitian entries of one block, full storage.
std::vector<Entry> realify(const std::vector<HermitianEntry>& in, int m) {
  std::vector<Entry> out;
  out.reserve(in.size() * 8);
  for (const auto& e : in) {
    const double a = e.value.real();
    const double b = e.value.imag();
    const int r = e.row;
    const int c = e.col;
    if (r == c) {
      out.push_back({r, r, a});
      out.push_back({m + r, m + r, a});
      continue;
    }
    out.push_back({r, c, a});
    out.push_back({c, r, a});
    out.push_back({m + r, m + c, a});
    out.push_back({m + c, m + r, a});
    out.push_back({r, m + c, -b});
    out.push_back({m + c, r, -b});
    out.push_back({m + r, c, b});
    out.push_back({c, m + r, b});
  }
  return merge_entries(std::move(out));
}

RMatrix to_dense(const std::vector<Entry>& es, int n) {
  RMatrix m = RMatrix::Zero(n, n);
  for (const auto& e : es) m(e.r, e.c) += e.v;
  return m;
}

// <F, M> for sparse symmetric F.
double inner(const std::vector<Entry>& f, const RMatrix& m) {
  double s = 0.0;
  for (const auto& e : f) s += e.v * m(e.r, e.c);
  return s;
}

RMatrix sym(const RMatrix& m) { return 0.5 * (m + m.transpose()); }

// Largest alpha in (0, inf] with S + alpha*dS PSD, given chol(S).
double max_step_psd(const Eigen::LLT<RMatrix>& chol_s, const RMatrix& ds) {
  const auto& l = chol_s.matrixL();
  RMatrix t = l.solve(ds);
  t = l.solve(t.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(sym(t), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

double max_step_lp(const RVector& s, const RVector& ds) {
  double a = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (ds(k) < 0.0) a = std::min(a, -s(k) / ds(k));
  }
  return a;
}

class InteriorPoint {
 public:
  InteriorPoint(const CoreProblem& p, const SolverOptions& opt) : p_(p), opt_(opt) {}

  CoreResult run();

 private:
  struct Direction {
    RVector dx;
    RVector dnu;
    std::vector<RMatrix> ds;
    std::vector<RMatrix> dz;
    RVector ds_lp;
    RVector dz_lp;
  };

  RMatrix block_value(const SymBlock& b, const RVector& x) const {
    RMatrix m = b.constant;
    for (size_t k = 0; k < b.vars.size(); ++k) {
      const double xv = x(b.vars[k]);
      if (xv == 0.0) continue;
      for (const auto& e : b.mats[k]) m(e.r, e.c) += xv * e.v;
    }
    return m;
  }

  RVector lp_value(const RVector& x) const {
    RVector s = p_.lp.constant;
    for (int k = 0; k < p_.lp.size(); ++k) {
      for (const auto& [v, a] : p_.lp.rows[k]) s(k) += a * x(v);
    }
    return s;
  }

  // A*(M): per-variable inner products accumulated over blocks.
  void add_adjoint(RVector& out, const std::vector<RMatrix>& m, const RVector& m_lp) const {
    for (size_t bi = 0; bi < p_.psd.size(); ++bi) {
      const auto& b = p_.psd[bi];
      for (size_t k = 0; k < b.vars.size(); ++k) out(b.vars[k]) += inner(b.mats[k], m[bi]);
    }
    for (int k = 0; k < p_.lp.size(); ++k) {
      for (const auto& [v, a] : p_.lp.rows[k]) out(v) += a * m_lp(k);
    }
  }

  // H v computed blockwise as A*(S^-1 A(v) Z).
  RVector apply_schur(const RVector& v) const {
    RVector out = RVector::Zero(p_.n);
    for (size_t bi = 0; bi < p_.psd.size(); ++bi) {
      const auto& b = p_.psd[bi];
      RMatrix dm = RMatrix::Zero(b.n, b.n);
      for (size_t k = 0; k < b.vars.size(); ++k) {
        const double vk = v(b.vars[k]);
        if (vk == 0.0) continue;
        for (const auto& e : b.mats[k]) dm(e.r, e.c) += vk * e.v;
      }
      const RMatrix m = s_inv_[bi] * dm * z_[bi];
      for (size_t k = 0; k < b.vars.size(); ++k) out(b.vars[k]) += inner(b.mats[k], m);
    }
    for (int k = 0; k < p_.lp.size(); ++k) {
      double av = 0.0;
      for (const auto& [var, a] : p_.lp.rows[k]) av += a * v(var);
      const double w = z_lp_(k) / s_lp_(k) * av;
      for (const auto& [var, a] : p_.lp.rows[k]) out(var) += a * w;
    }
    return out;
  }

  // Solves H dx - G^T dnu = q, G dx = rg with the current factorizations.
  void kkt_solve(const RVector& q, const RVector& rg, RVector& dx, RVector& dnu) const {
    const RVector hq = schur_chol_.solve(q);
    if (p_.g.rows() > 0) {
      dnu = gh_chol_.solve(RVector(rg - p_.g * hq));
      dx = hq + hinv_gt_ * dnu;
    } else {
      dnu = RVector::Zero(0);
      dx = hq;
    }
  }

  void build_schur();
  bool factor_schur();
  Direction solve_direction(double sigma_mu, const Direction* predictor);

  const CoreProblem& p_;
  const SolverOptions& opt_;

  RVector x_, nu_, s_lp_, z_lp_;
  std::vector<RMatrix> s_, z_, s_inv_;
  std::vector<Eigen::LLT<RMatrix>> chol_s_;
  std::vector<RMatrix> rp_;
  RVector rp_lp_, rd_, rg_;
  RMatrix schur_;
  Eigen::LLT<RMatrix> schur_chol_;
  RMatrix hinv_gt_;
  Eigen::LLT<RMatrix> gh_chol_;
  bool gh_ok_ = true;
};

void InteriorPoint::build_schur() {
  const int n = p_.n;
  schur_.setZero(n, n);
  for (size_t bi = 0; bi < p_.psd.size(); ++bi) {
    const auto& b = p_.psd[bi];
    const RMatrix& si = s_inv_[bi];
    const RMatrix& z = z_[bi];
    const size_t nv = b.vars.size();
    std::vector<RMatrix> prod(nv);
    for (size_t k = 0; k < nv; ++k) {
      if (b.dense[k].size() > 0) prod[k].noalias() = si * b.dense[k] * z;
    }
    // H_ij = tr(F_i S^-1 F_j Z) = sum_{(a,b) in F_i} F_i(a,b) (S^-1 F_j Z)(b,a)
    for (size_t j = 0; j < nv; ++j) {
      for (size_t i = 0; i <= j; ++i) {
        double hij = 0.0;
        if (prod[j].size() > 0) {
          for (const auto& e : b.mats[i]) hij += e.v * prod[j](e.c, e.r);
        } else if (prod[i].size() > 0) {
          for (const auto& e : b.mats[j]) hij += e.v * prod[i](e.c, e.r);
        } else {
          for (const auto& ei : b.mats[i]) {
            double acc = 0.0;
            for (const auto& ej : b.mats[j]) acc += ej.v * si(ei.c, ej.r) * z(ej.c, ei.r);
            hij += ei.v * acc;
          }
        }
        schur_(b.vars[i], b.vars[j]) += hij;
        if (i != j) schur_(b.vars[j], b.vars[i]) += hij;
      }
    }
  }
  for (int k = 0; k < p_.lp.size(); ++k) {
    const double w = z_lp_(k) / s_lp_(k);
    const auto& row = p_.lp.rows[k];
    for (const auto& [vi, ai] : row) {
      for (const auto& [vj, aj] : row) schur_(vi, vj) += w * ai * aj;
    }
  }
}

bool InteriorPoint::factor_schur() {
  const int n = p_.n;
  double reg = 0.0;
  const double scale = std::max(1e-300, schur_.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 6; ++attempt) {
    RMatrix h = schur_;
    if (reg > 0.0) h.diagonal().array() += reg;
    // Variables that appear in no constraint still need a pivot.
    for (int i = 0; i < n; ++i) {
      if (h(i, i) <= 0.0) h(i, i) = std::max(reg, 1e-14 * scale);
    }
    schur_chol_.compute(h);
    if (schur_chol_.info() == Eigen::Success) break;
    reg = (reg == 0.0) ? 1e-14 * scale : reg * 100.0;
  }
  if (schur_chol_.info() != Eigen::Success) return false;
  if (p_.g.rows() > 0) {
    hinv_gt_ = schur_chol_.solve(p_.g.transpose());
    RMatrix m = p_.g * hinv_gt_;
    gh_chol_.compute(sym(m));
    gh_ok_ = gh_chol_.info() == Eigen::Success;
    if (!gh_ok_) return false;
  }
  return true;
}

InteriorPoint::Direction InteriorPoint::solve_direction(double sigma_mu, const Direction* pred) {
  const size_t nb = p_.psd.size();
  // Right-hand side q = A*(sigma mu S^-1 - Z - S^-1 Rp Z - S^-1 C) - Rd.
  std::vector<RMatrix> centre(nb);
  for (size_t bi = 0; bi < nb; ++bi) {
    RMatrix m = sigma_mu * s_inv_[bi] - z_[bi] - s_inv_[bi] * rp_[bi] * z_[bi];
    if (pred != nullptr) m -= s_inv_[bi] * pred->ds[bi] * pred->dz[bi];
    centre[bi] = std::move(m);
  }
  RVector centre_lp(p_.lp.size());
  for (int k = 0; k < p_.lp.size(); ++k) {
    double v = sigma_mu / s_lp_(k) - z_lp_(k) - rp_lp_(k) * z_lp_(k) / s_lp_(k);
    if (pred != nullptr) v -= pred->ds_lp(k) * pred->dz_lp(k) / s_lp_(k);
    centre_lp(k) = v;
  }
  RVector q = RVector::Zero(p_.n);
  add_adjoint(q, centre, centre_lp);
  q -= rd_;

  Direction d;
  kkt_solve(q, rg_, d.dx, d.dnu);
  // Refine against the operator itself; the assembled Schur matrix loses
  // accuracy as mu goes to zero.
  for (int round = 0; round < 2; ++round) {
    RVector rq = q - apply_schur(d.dx);
    if (p_.g.rows() > 0) rq += p_.g.transpose() * d.dnu;
    const RVector rg = p_.g.rows() > 0 ? RVector(rg_ - p_.g * d.dx) : RVector::Zero(0);
    RVector cx, cnu;
    kkt_solve(rq, rg, cx, cnu);
    d.dx += cx;
    d.dnu += cnu;
  }

  d.ds.resize(nb);
  d.dz.resize(nb);
  for (size_t bi = 0; bi < nb; ++bi) {
    const auto& b = p_.psd[bi];
    RMatrix ds = rp_[bi];
    for (size_t k = 0; k < b.vars.size(); ++k) {
      const double v = d.dx(b.vars[k]);
      if (v == 0.0) continue;
      for (const auto& e : b.mats[k]) ds(e.r, e.c) += v * e.v;
    }
    RMatrix dz = sigma_mu * s_inv_[bi] - z_[bi] - s_inv_[bi] * ds * z_[bi];
    if (pred != nullptr) dz -= s_inv_[bi] * pred->ds[bi] * pred->dz[bi];
    d.dz[bi] = sym(dz);
    d.ds[bi] = std::move(ds);
  }
  d.ds_lp = rp_lp_;
  for (int k = 0; k < p_.lp.size(); ++k) {
    for (const auto& [v, a] : p_.lp.rows[k]) d.ds_lp(k) += a * d.dx(v);
  }
  d.dz_lp.resize(p_.lp.size());
  for (int k = 0; k < p_.lp.size(); ++k) {
    double v = sigma_mu / s_lp_(k) - z_lp_(k) - d.ds_lp(k) * z_lp_(k) / s_lp_(k);
    if (pred != nullptr) v -= pred->ds_lp(k) * pred->dz_lp(k) / s_lp_(k);
    d.dz_lp(k) = v;
  }
  return d;
}

CoreResult InteriorPoint::run() {
  const int n = p_.n;
  const size_t nb = p_.psd.size();
  const int q = static_cast<int>(p_.g.rows());
  CoreResult res;

  // Minimum-norm point on the equality subspace.
  x_ = RVector::Zero(n);
  if (q > 0) x_ = p_.g.completeOrthogonalDecomposition().solve(p_.h);
  nu_ = RVector::Zero(q);

  int total_dim = p_.lp.size();
  double scale = 1.0;
  for (const auto& b : p_.psd) {
    total_dim += b.n;
    scale = std::max(scale, block_value(b, x_).cwiseAbs().maxCoeff());
  }
  if (p_.lp.size() > 0) scale = std::max(scale, lp_value(x_).cwiseAbs().maxCoeff());
  const double cnorm = p_.c.size() ? p_.c.cwiseAbs().maxCoeff() : 0.0;
  const double s0 = 10.0 * scale;
  const double z0 = std::max(1.0, 10.0 * cnorm);

  s_.assign(nb, RMatrix());
  z_.assign(nb, RMatrix());
  s_inv_.assign(nb, RMatrix());
  chol_s_.assign(nb, Eigen::LLT<RMatrix>());
  rp_.assign(nb, RMatrix());
  for (size_t bi = 0; bi < nb; ++bi) {
    const int bn = p_.psd[bi].n;
    s_[bi] = s0 * RMatrix::Identity(bn, bn);
    z_[bi] = z0 * RMatrix::Identity(bn, bn);
  }
  s_lp_ = RVector::Constant(p_.lp.size(), s0);
  z_lp_ = RVector::Constant(p_.lp.size(), z0);

  double f0norm = 0.0;
  for (const auto& b : p_.psd) f0norm = std::max(f0norm, b.constant.cwiseAbs().maxCoeff());
  if (p_.lp.size() > 0) f0norm = std::max(f0norm, p_.lp.constant.cwiseAbs().maxCoeff());
  const double hnorm = q > 0 ? p_.h.cwiseAbs().maxCoeff() : 0.0;

  int slow_steps = 0;
  for (int it = 0; it <= opt_.max_iterations; ++it) {
    res.iterations = it;
    // Residuals.
    double pinf = 0.0;
    for (size_t bi = 0; bi < nb; ++bi) {
      rp_[bi] = block_value(p_.psd[bi], x_) - s_[bi];
      pinf = std::max(pinf, rp_[bi].cwiseAbs().maxCoeff());
    }
    rp_lp_ = lp_value(x_) - s_lp_;
    if (rp_lp_.size() > 0) pinf = std::max(pinf, rp_lp_.cwiseAbs().maxCoeff());
    rg_ = q > 0 ? RVector(p_.h - p_.g * x_) : RVector::Zero(0);
    if (q > 0) pinf = std::max(pinf, rg_.cwiseAbs().maxCoeff());
    rd_ = p_.c;
    {
      RVector az = RVector::Zero(n);
      add_adjoint(az, z_, z_lp_);
      rd_ -= az;
      if (q > 0) rd_ -= p_.g.transpose() * nu_;
    }
    const double dinf = rd_.size() ? rd_.cwiseAbs().maxCoeff() : 0.0;

    double comp = s_lp_.dot(z_lp_);
    for (size_t bi = 0; bi < nb; ++bi) comp += (s_[bi].cwiseProduct(z_[bi])).sum();
    const double mu = total_dim > 0 ? comp / total_dim : 0.0;

    double pobj = p_.c.dot(x_);
    double dobj = (q > 0 ? p_.h.dot(nu_) : 0.0) - p_.lp.constant.dot(z_lp_);
    for (size_t bi = 0; bi < nb; ++bi) dobj -= (p_.psd[bi].constant.cwiseProduct(z_[bi])).sum();

    res.pobj = pobj;
    res.dobj = dobj;
    res.pinf = pinf / (1.0 + std::max(f0norm, hnorm));
    res.dinf = dinf / (1.0 + cnorm);
    const double gap = std::abs(pobj - dobj);
    const double gap_ref = std::max(1.0, std::abs(pobj));
    if (res.pinf <= opt_.feas_tol && res.dinf <= opt_.feas_tol && gap <= opt_.gap_tol * gap_ref &&
        comp <= opt_.gap_tol * gap_ref) {
      res.exit = CoreExit::converged;
      break;
    }
    if (it == opt_.max_iterations) {
      res.exit = CoreExit::max_iterations;
      break;
    }
    double znorm = z_lp_.size() ? z_lp_.cwiseAbs().maxCoeff() : 0.0;
    for (const auto& z : z_) znorm = std::max(znorm, z.cwiseAbs().maxCoeff());
    if (znorm > 1e12 || x_.cwiseAbs().maxCoeff() > 1e12 || !std::isfinite(mu)) {
      res.exit = CoreExit::diverged;
      break;
    }

    // Factorizations.
    bool ok = true;
    for (size_t bi = 0; bi < nb && ok; ++bi) {
      chol_s_[bi].compute(s_[bi]);
      if (chol_s_[bi].info() != Eigen::Success) {
        ok = false;
        break;
      }
      s_inv_[bi] = chol_s_[bi].solve(RMatrix::Identity(s_[bi].rows(), s_[bi].cols()));
      s_inv_[bi] = sym(s_inv_[bi]);
    }
    if (!ok) {
      res.exit = CoreExit::stalled;
      break;
    }
    build_schur();
    if (!factor_schur()) {
      res.exit = CoreExit::stalled;
      break;
    }

    // Predictor.
    Direction aff = solve_direction(0.0, nullptr);
    double ap = 1.0, ad = 1.0;
    for (size_t bi = 0; bi < nb; ++bi) {
      ap = std::min(ap, max_step_psd(chol_s_[bi], aff.ds[bi]));
      Eigen::LLT<RMatrix> cz(z_[bi]);
      ad = std::min(ad, max_step_psd(cz, aff.dz[bi]));
    }
    ap = std::min(ap, max_step_lp(s_lp_, aff.ds_lp));
    ad = std::min(ad, max_step_lp(z_lp_, aff.dz_lp));
    double comp_aff = (s_lp_ + ap * aff.ds_lp).dot(z_lp_ + ad * aff.dz_lp);
    for (size_t bi = 0; bi < nb; ++bi) {
      comp_aff += ((s_[bi] + ap * aff.ds[bi]).cwiseProduct(z_[bi] + ad * aff.dz[bi])).sum();
    }
    double sigma = std::pow(std::max(0.0, comp_aff) / std::max(comp, 1e-300), 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    Direction d = solve_direction(sigma * mu, &aff);
    double ap_max = std::numeric_limits<double>::infinity();
    double ad_max = std::numeric_limits<double>::infinity();
    for (size_t bi = 0; bi < nb; ++bi) {
      ap_max = std::min(ap_max, max_step_psd(chol_s_[bi], d.ds[bi]));
      Eigen::LLT<RMatrix> cz(z_[bi]);
      ad_max = std::min(ad_max, max_step_psd(cz, d.dz[bi]));
    }
    ap_max = std::min(ap_max, max_step_lp(s_lp_, d.ds_lp));
    ad_max = std::min(ad_max, max_step_lp(z_lp_, d.dz_lp));
    const double tau = 0.95;
    ap = std::min(1.0, tau * ap_max);
    ad = std::min(1.0, tau * ad_max);
    if (!std::isfinite(ap) || !std::isfinite(ad)) {
      res.exit = CoreExit::stalled;
      break;
    }

    x_ += ap * d.dx;
    for (size_t bi = 0; bi < nb; ++bi) {
      s_[bi] = sym(s_[bi] + ap * d.ds[bi]);
      z_[bi] = sym(z_[bi] + ad * d.dz[bi]);
    }
    s_lp_ += ap * d.ds_lp;
    z_lp_ += ad * d.dz_lp;
    if (q > 0) nu_ += ad * d.dnu;

    slow_steps = (ap < 1e-6 && ad < 1e-6) ? slow_steps + 1 : 0;
    if (slow_steps >= 8) {
      res.exit = CoreExit::stalled;
      break;
    }
  }

  res.x = x_;
  res.z = z_;
  res.z_lp = z_lp_;
  res.nu = nu_;
  return res;
}

// ---------------------------------------------------------------------------
// Translation from the public model

struct Translation {
  CoreProblem core;
  std::vector<int> kept_rows;   // original equality index per core row
  std::vector<double> row_scale;
  bool inconsistent = false;
};

Translation translate(const SdpProblem& prob) {
  Translation t;
  CoreProblem& core = t.core;
  core.n = prob.num_vars;
  core.c = prob.objective;

  for (const auto& blk : prob.blocks) {
    SymBlock sb;
    const int m = blk.dim();
    sb.n = 2 * m;
    sb.constant = to_dense(realify(blk.constant(), m), sb.n);
    for (const auto& [var, entries] : blk.coefficients()) {
      auto es = realify(entries, m);
      if (es.empty()) continue;
      sb.vars.push_back(var);
      RMatrix dense;
      if (static_cast<int>(es.size()) > 2 * sb.n) dense = to_dense(es, sb.n);
      sb.dense.push_back(std::move(dense));
      sb.mats.push_back(std::move(es));
    }
    core.psd.push_back(std::move(sb));
  }

  std::vector<double> lp_const;
  for (int i = 0; i < prob.num_vars; ++i) {
    if (std::isfinite(prob.lower(i))) {
      lp_const.push_back(-prob.lower(i));
      core.lp.rows.push_back({{i, 1.0}});
    }
    if (std::isfinite(prob.upper(i))) {
      lp_const.push_back(prob.upper(i));
      core.lp.rows.push_back({{i, -1.0}});
    }
  }
  core.lp.constant = Eigen::Map<RVector>(lp_const.data(), static_cast<Eigen::Index>(lp_const.size()));

  // Equalities: normalize rows, drop dependent ones, detect inconsistency.
  const int q = static_cast<int>(prob.equalities.size());
  RMatrix g = RMatrix::Zero(q, prob.num_vars);
  RVector h = RVector::Zero(q);
  std::vector<double> scale(q, 1.0);
  for (int k = 0; k < q; ++k) {
    for (const auto& [v, a] : prob.equalities[k].coeffs) g(k, v) += a;
    h(k) = prob.equalities[k].rhs;
    const double nrm = g.row(k).norm();
    if (nrm > 0.0) {
      scale[k] = nrm;
      g.row(k) /= nrm;
      h(k) /= nrm;
    }
  }
  std::vector<int> keep;
  if (q > 0) {
    Eigen::ColPivHouseholderQR<RMatrix> qr(g.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    for (int k = 0; k < rank; ++k) keep.push_back(qr.colsPermutation().indices()(k));
    std::sort(keep.begin(), keep.end());
    if (rank < q) {
      RMatrix gk(keep.size(), prob.num_vars);
      RVector hk(keep.size());
      for (size_t k = 0; k < keep.size(); ++k) {
        gk.row(k) = g.row(keep[k]);
        hk(k) = h(keep[k]);
      }
      RVector x0 = keep.empty() ? RVector::Zero(prob.num_vars)
                                : RVector(gk.completeOrthogonalDecomposition().solve(hk));
      if ((g * x0 - h).cwiseAbs().maxCoeff() > 1e-9) t.inconsistent = true;
    }
  }
  core.g.resize(keep.size(), prob.num_vars);
  core.h.resize(keep.size());
  for (size_t k = 0; k < keep.size(); ++k) {
    core.g.row(k) = g.row(keep[k]);
    core.h(k) = h(keep[k]);
    t.row_scale.push_back(scale[keep[k]]);
  }
  t.kept_rows = keep;
  return t;
}

// min t s.t. every block + t I >= 0, every lp row + t >= 0, equalities, t >= -1.
CoreProblem phase_one(const CoreProblem& p) {
  CoreProblem out = p;
  const int t = p.n;
  out.n = p.n + 1;
  out.c = RVector::Zero(out.n);
  out.c(t) = 1.0;
  for (auto& b : out.psd) {
    std::vector<Entry> id;
    for (int i = 0; i < b.n; ++i) id.push_back({i, i, 1.0});
    b.vars.push_back(t);
    b.mats.push_back(std::move(id));
    b.dense.emplace_back();
  }
  for (auto& row : out.lp.rows) row.push_back({t, 1.0});
  out.lp.rows.push_back({{t, 1.0}});
  out.lp.constant.conservativeResize(out.lp.constant.size() + 1);
  out.lp.constant(out.lp.constant.size() - 1) = 1.0;
  out.g.conservativeResize(out.g.rows(), out.n);
  if (out.g.rows() > 0) out.g.col(t).setZero();
  return out;
}

}  // namespace

SdpSolution solve(const SdpProblem& problem, const SolverOptions& options) {
  problem.validate();
  SdpSolution sol;
  sol.x = RVector::Zero(problem.num_vars);
  sol.equality_duals = RVector::Zero(problem.equalities.size());

  Translation tr = translate(problem);
  if (tr.inconsistent) {
    sol.status = SdpStatus::infeasible;
    return sol;
  }

  InteriorPoint ipm(tr.core, options);
  CoreResult res = ipm.run();
  sol.x = res.x;
  sol.iterations = res.iterations;
  sol.primal_objective = problem.objective.dot(res.x);
  sol.dual_objective = res.dobj;
  sol.primal_infeasibility = res.pinf;
  sol.dual_infeasibility = res.dinf;
  for (size_t bi = 0; bi < problem.blocks.size(); ++bi) {
    const int m = problem.blocks[bi].dim();
    const RMatrix& z = res.z[bi];
    CMatrix w(m, m);
    w.real() = z.topLeftCorner(m, m) + z.bottomRightCorner(m, m);
    w.imag() = z.bottomLeftCorner(m, m) - z.topRightCorner(m, m);
    sol.block_duals.push_back(0.5 * (w + w.adjoint()));
  }
  for (size_t k = 0; k < tr.kept_rows.size(); ++k) {
    sol.equality_duals(tr.kept_rows[k]) = res.nu(k) / tr.row_scale[k];
  }

  if (res.exit == CoreExit::converged) {
    sol.status = SdpStatus::optimal;
    return sol;
  }

  // Decide between infeasibility and numerical trouble.
  CoreProblem p1 = phase_one(tr.core);
  SolverOptions p1opt = options;
  InteriorPoint ipm1(p1, p1opt);
  CoreResult r1 = ipm1.run();
  if (r1.exit != CoreExit::converged) {
    sol.status = SdpStatus::numerical_failure;
    return sol;
  }
  const double tstar = r1.x(p1.n - 1);
  if (tstar > options.feas_tol) {
    sol.status = SdpStatus::infeasible;
  } else if (res.exit == CoreExit::diverged && sol.primal_objective < -1e8 &&
             res.pinf < 1e-6) {
    sol.status = SdpStatus::unbounded;
  } else {
    sol.status = SdpStatus::numerical_failure;
  }
  return sol;
}

}  // namespace witnesskit::sdp
