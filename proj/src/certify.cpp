#include "witnesskit/certify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/KroneckerProduct>

namespace witnesskit {

using sdp::LinearEquality;
using sdp::LmiBlock;
using sdp::SdpProblem;
using sdp::SdpSolution;
using sdp::SdpStatus;

CertSet CertSet::u_tilde(int big_d) {
  if (big_d < 2) throw std::invalid_argument("CertSet: D must be at least 2");
  return {Kind::u_tilde, big_d};
}

std::string CertSet::name() const {
  return kind == Kind::ppt ? "PPT" : "U_tilde" + std::to_string(big_d);
}

WitnessTuple::WitnessTuple(std::vector<PureState> psis) : psis_(std::move(psis)) {
  if (psis_.empty()) throw std::invalid_argument("WitnessTuple: need at least one state");
  for (const auto& p : psis_) require_same_dims(psis_.front().dims(), p.dims(), "WitnessTuple");
}

// ---------------------------------------------------------------------------
// Hermitian variables

namespace {

using Mapper = std::function<void(int, int, const std::function<void(int, int)>&)>;

// Visits every basis element of the Hermitian variable block and reports each
// image position (R, C) of the entry (r, c) under `map`.
void add_mapped(const HermitianVars& h, LmiBlock& block, double scale, const Mapper& map) {
  const int n = h.n;
  for (int r = 0; r < n; ++r) {
    map(r, r, [&](int rr, int cc) { block.add_coefficient(h.first + r, rr, cc, scale); });
  }
  int var = h.first + n;
  for (int r = 0; r < n; ++r) {
    for (int c = r + 1; c < n; ++c) {
      const int re = var++;
      const int im = var++;
      map(r, c, [&](int rr, int cc) {
        block.add_coefficient(re, rr, cc, Complex(scale, 0.0));
        block.add_coefficient(im, rr, cc, Complex(0.0, scale));
      });
    }
  }
}

int pt_index(int row, int col, const BipartiteDims& d, bool want_row) {
  const int a = row / d.d_b, b = row % d.d_b;
  const int a2 = col / d.d_b, b2 = col % d.d_b;
  return want_row ? a * d.d_b + b2 : a2 * d.d_b + b;
}

}  // namespace

HermitianVars HermitianVars::add(SdpProblem& prob, int n) {
  HermitianVars h{prob.num_vars, n};
  for (int k = 0; k < n * n; ++k) prob.add_variable();
  return h;
}

void HermitianVars::add_to_block(LmiBlock& block, Complex scale,
                                 const std::optional<BipartiteDims>& pt_dims) const {
  if (scale.imag() != 0.0) throw std::invalid_argument("HermitianVars: scale must be real");
  if (pt_dims) {
    const BipartiteDims d = *pt_dims;
    add_mapped(*this, block, scale.real(), [d](int r, int c, const std::function<void(int, int)>& put) {
      put(pt_index(r, c, d, true), pt_index(r, c, d, false));
    });
  } else {
    add_mapped(*this, block, scale.real(),
               [](int r, int c, const std::function<void(int, int)>& put) { put(r, c); });
  }
}

void HermitianVars::add_trace_with(LinearEquality& eq, const CMatrix& a, double scale) const {
  for (int r = 0; r < n; ++r) {
    const double v = a(r, r).real();
    if (v != 0.0) eq.coeffs.push_back({first + r, scale * v});
  }
  int var = first + n;
  for (int r = 0; r < n; ++r) {
    for (int c = r + 1; c < n; ++c) {
      // tr(A E) for E = e_rc + e_cr and E = i e_rc - i e_cr.
      const Complex arc = 0.5 * (a(r, c) + std::conj(a(c, r)));
      const double re = 2.0 * arc.real();
      const double im = 2.0 * arc.imag();
      if (re != 0.0) eq.coeffs.push_back({var, scale * re});
      if (im != 0.0) eq.coeffs.push_back({var + 1, scale * im});
      var += 2;
    }
  }
}

void HermitianVars::add_trace(LinearEquality& eq, double scale) const {
  for (int r = 0; r < n; ++r) eq.coeffs.push_back({first + r, scale});
}

CMatrix HermitianVars::value(const RVector& x) const {
  CMatrix m(n, n);
  for (int r = 0; r < n; ++r) m(r, r) = x(first + r);
  int var = first + n;
  for (int r = 0; r < n; ++r) {
    for (int c = r + 1; c < n; ++c) {
      m(r, c) = Complex(x(var), x(var + 1));
      m(c, r) = std::conj(m(r, c));
      var += 2;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Program assembly

namespace {

constexpr double kBisectionTol = 1e-7;

void add_margin(LmiBlock& block, int tvar) {
  if (tvar < 0) return;
  for (int i = 0; i < block.dim(); ++i) block.add_coefficient(tvar, i, i, -1.0);
}

// What the state inside the unfaithfulness system looks like.
struct StateTerm {
  const CMatrix* constant = nullptr;  // rho, or rho0 of an affine family
  const CMatrix* slope = nullptr;     // coefficient of pvar
  int pvar = -1;
  const HermitianVars* sigma = nullptr;  // state given by variables
};

struct UnfaithfulVars {
  int mu = -1;
  HermitianVars ma;
  HermitianVars mb;
};

UnfaithfulVars add_unfaithful_system(SdpProblem& prob, const BipartiteDims& dims, int big_d,
                                     const StateTerm& state, int tvar) {
  const int da = dims.d_a, db = dims.d_b, n = dims.total();
  UnfaithfulVars u;
  u.mu = prob.add_variable(0.0, 1.0);
  u.ma = HermitianVars::add(prob, da);
  u.mb = HermitianVars::add(prob, db);

  // M_A (x) I + I (x) M_B - rho >= 0
  LmiBlock main(n);
  add_mapped(u.ma, main, 1.0, [db](int r, int c, const std::function<void(int, int)>& put) {
    for (int j = 0; j < db; ++j) put(r * db + j, c * db + j);
  });
  add_mapped(u.mb, main, 1.0, [da, db](int r, int c, const std::function<void(int, int)>& put) {
    for (int i = 0; i < da; ++i) put(i * db + r, i * db + c);
  });
  if (state.constant != nullptr) main.add_constant(-*state.constant);
  if (state.slope != nullptr) main.add_coefficient(state.pvar, -*state.slope);
  if (state.sigma != nullptr) state.sigma->add_to_block(main, -1.0);
  add_margin(main, tvar);
  prob.blocks.push_back(std::move(main));

  const double dm1 = big_d - 1.0;
  LinearEquality tra;
  u.ma.add_trace(tra);
  tra.coeffs.push_back({u.mu, -dm1});
  tra.rhs = 0.0;
  LinearEquality trb;
  u.mb.add_trace(trb);
  trb.coeffs.push_back({u.mu, dm1});
  trb.rhs = dm1;
  prob.equalities.push_back(std::move(tra));
  prob.equalities.push_back(std::move(trb));

  // mu I - M_A >= 0, (1 - mu) I - M_B >= 0
  LmiBlock cap_a(da);
  for (int i = 0; i < da; ++i) cap_a.add_coefficient(u.mu, i, i, 1.0);
  u.ma.add_to_block(cap_a, -1.0);
  add_margin(cap_a, tvar);
  LmiBlock cap_b(db);
  for (int i = 0; i < db; ++i) {
    cap_b.add_constant(i, i, 1.0);
    cap_b.add_coefficient(u.mu, i, i, -1.0);
  }
  u.mb.add_to_block(cap_b, -1.0);
  add_margin(cap_b, tvar);
  prob.blocks.push_back(std::move(cap_a));
  prob.blocks.push_back(std::move(cap_b));

  LmiBlock pos_a(da);
  u.ma.add_to_block(pos_a);
  add_margin(pos_a, tvar);
  LmiBlock pos_b(db);
  u.mb.add_to_block(pos_b);
  add_margin(pos_b, tvar);
  prob.blocks.push_back(std::move(pos_a));
  prob.blocks.push_back(std::move(pos_b));
  return u;
}

// sigma >= 0 and sigma^{T_B} >= 0 (each shifted by the margin), tr sigma = 1.
HermitianVars add_ppt_state(SdpProblem& prob, const BipartiteDims& dims, int tvar) {
  const int n = dims.total();
  HermitianVars sigma = HermitianVars::add(prob, n);
  LmiBlock pos(n);
  sigma.add_to_block(pos);
  add_margin(pos, tvar);
  LmiBlock pt(n);
  sigma.add_to_block(pt, 1.0, dims);
  add_margin(pt, tvar);
  prob.blocks.push_back(std::move(pos));
  prob.blocks.push_back(std::move(pt));
  LinearEquality tr;
  sigma.add_trace(tr);
  tr.rhs = 1.0;
  prob.equalities.push_back(std::move(tr));
  return sigma;
}

// State variables constrained to the set (no margin).
HermitianVars add_state_in_set(SdpProblem& prob, const BipartiteDims& dims, const CertSet& set) {
  if (set.kind == CertSet::Kind::ppt) return add_ppt_state(prob, dims, -1);
  const int n = dims.total();
  HermitianVars sigma = HermitianVars::add(prob, n);
  LmiBlock pos(n);
  sigma.add_to_block(pos);
  prob.blocks.push_back(std::move(pos));
  LinearEquality tr;
  sigma.add_trace(tr);
  tr.rhs = 1.0;
  prob.equalities.push_back(std::move(tr));
  StateTerm st;
  st.sigma = &sigma;
  add_unfaithful_system(prob, dims, set.big_d, st, -1);
  return sigma;
}

void require_square_dims(const BipartiteDims& d, const char* where) {
  if (d.d_a != d.d_b) throw DimensionMismatch(std::string(where) + ": needs equal local dimensions");
}

double projector_expectation(const CMatrix& m, const CVector& v) {
  return (v.adjoint() * m * v)(0).real();
}

void throw_failure(const char* where, const SdpSolution& s) {
  throw SolverFailure(std::string(where) + ": solver ended with status " + sdp::to_string(s.status));
}

// Bisection over p for the smallest member of an upward-closed family.
template <typename Member>
double bisect_threshold(Member&& member) {
  if (member(0.0)) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > kBisectionTol) {
    const double mid = 0.5 * (lo + hi);
    (member(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

// ---------------------------------------------------------------------------
// Unfaithfulness

std::optional<UnfaithfulCertificate> in_unfaithful_approx(const DensityMatrix& rho, int big_d) {
  if (big_d < 2) throw std::invalid_argument("in_unfaithful_approx: D must be at least 2");
  SdpProblem prob;
  const int t = prob.add_variable(-1.0, 1.0);
  prob.objective(t) = -1.0;
  StateTerm st;
  st.constant = &rho.mat();
  const UnfaithfulVars u = add_unfaithful_system(prob, rho.dims(), big_d, st, t);
  const SdpSolution s = sdp::solve(prob);
  if (s.status == SdpStatus::infeasible) return std::nullopt;
  if (s.status != SdpStatus::optimal) throw_failure("in_unfaithful_approx", s);
  if (s.x(t) < -1e-8) return std::nullopt;
  UnfaithfulCertificate cert;
  cert.mu = s.x(u.mu);
  cert.m_a = u.ma.value(s.x);
  cert.m_b = u.mb.value(s.x);
  return cert;
}

double certificate_violation(const UnfaithfulCertificate& cert, const DensityMatrix& rho, int big_d) {
  const int da = rho.dims().d_a, db = rho.dims().d_b;
  auto min_eig = [](const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  };
  const CMatrix ia = CMatrix::Identity(da, da), ib = CMatrix::Identity(db, db);
  const CMatrix lifted = Eigen::kroneckerProduct(cert.m_a, ib).eval() +
                         Eigen::kroneckerProduct(ia, cert.m_b).eval() - rho.mat();
  double worst = 0.0;
  worst = std::max(worst, -min_eig(lifted));
  worst = std::max(worst, -min_eig(cert.mu * ia - cert.m_a));
  worst = std::max(worst, -min_eig((1.0 - cert.mu) * ib - cert.m_b));
  worst = std::max(worst, -min_eig(cert.m_a));
  worst = std::max(worst, -min_eig(cert.m_b));
  worst = std::max(worst, std::abs(cert.m_a.trace().real() - cert.mu * (big_d - 1)));
  worst = std::max(worst, std::abs(cert.m_b.trace().real() - (1.0 - cert.mu) * (big_d - 1)));
  worst = std::max(worst, std::max(-cert.mu, cert.mu - 1.0));
  return worst;
}

bool in_set(const DensityMatrix& rho, const CertSet& set, double tol) {
  if (set.kind == CertSet::Kind::ppt) return is_ppt(rho, tol);
  SdpProblem prob;
  const int t = prob.add_variable(-1.0, 1.0);
  prob.objective(t) = -1.0;
  StateTerm st;
  st.constant = &rho.mat();
  add_unfaithful_system(prob, rho.dims(), set.big_d, st, t);
  const SdpSolution s = sdp::solve(prob);
  if (s.status == SdpStatus::infeasible) return false;
  if (s.status != SdpStatus::optimal) throw_failure("in_set", s);
  return s.x(t) >= -tol;
}

double noise_threshold(const NoisyFamily& family, const CertSet& set, const sdp::SolverOptions& opts) {
  const BipartiteDims dims = family.dims();
  const CMatrix rho = family.base().mat();
  const CMatrix slope = family.endpoint().mat() - rho;
  SdpProblem prob;
  const int p = prob.add_variable(0.0, 1.0);
  prob.objective(p) = 1.0;
  if (set.kind == CertSet::Kind::ppt) {
    LmiBlock b(dims.total());
    b.add_constant(partial_transpose(rho, dims));
    b.add_coefficient(p, partial_transpose(slope, dims));
    prob.blocks.push_back(std::move(b));
  } else {
    StateTerm st;
    st.constant = &rho;
    st.slope = &slope;
    st.pvar = p;
    add_unfaithful_system(prob, dims, set.big_d, st, -1);
  }
  const SdpSolution s = sdp::solve(prob, opts);
  if (s.status == SdpStatus::optimal) return std::clamp(s.x(p), 0.0, 1.0);
  if (s.status == SdpStatus::infeasible) {
    throw std::logic_error("noise_threshold: family never enters " + set.name());
  }
  return bisect_threshold([&](double q) { return in_set(apply_noise(family, q), set); });
}

// ---------------------------------------------------------------------------
// Tuples

double ppt_fidelity_margin(const WitnessTuple& tuple, const std::vector<double>& fidelities) {
  if (static_cast<int>(fidelities.size()) != tuple.size()) {
    throw std::invalid_argument("ppt_fidelity_margin: one fidelity per tuple member required");
  }
  SdpProblem prob;
  const int t = prob.add_variable(-1.0, 1.0);
  prob.objective(t) = -1.0;
  const HermitianVars sigma = add_ppt_state(prob, tuple.dims(), t);
  for (int i = 0; i < tuple.size(); ++i) {
    LinearEquality eq;
    sigma.add_trace_with(eq, tuple.psis()[i].projector());
    eq.rhs = fidelities[i];
    prob.equalities.push_back(std::move(eq));
  }
  const SdpSolution s = sdp::solve(prob);
  if (s.status == SdpStatus::infeasible) return -std::numeric_limits<double>::infinity();
  if (s.status == SdpStatus::optimal) return s.x(t);

  // Points on the boundary of the fidelity image leave the margin program
  // without a bounded dual. Fall back to the distance
  // min_sigma max_i |<psi_i|sigma|psi_i> - f_i| over PPT states, whose
  // negative carries the same sign information.
  SdpProblem dist;
  const int e = dist.add_variable(0.0, 1.0);
  dist.objective(e) = 1.0;
  const HermitianVars near = add_ppt_state(dist, tuple.dims(), -1);
  for (int i = 0; i < tuple.size(); ++i) {
    LinearEquality fid;
    near.add_trace_with(fid, tuple.psis()[i].projector());
    for (double sign : {1.0, -1.0}) {
      LmiBlock row(1);
      row.add_coefficient(e, 0, 0, 1.0);
      for (const auto& [var, coef] : fid.coeffs) row.add_coefficient(var, 0, 0, -sign * coef);
      row.add_constant(0, 0, sign * fidelities[i]);
      dist.blocks.push_back(std::move(row));
    }
  }
  const SdpSolution d = sdp::solve(dist);
  if (d.status != SdpStatus::optimal) throw_failure("ppt_fidelity_margin", d);
  return -std::max(d.x(e), 0.0);
}

bool in_wk(const DensityMatrix& rho, const WitnessTuple& tuple, double tol) {
  require_same_dims(rho.dims(), tuple.dims(), "in_wk");
  std::vector<double> f;
  for (const auto& psi : tuple.psis()) f.push_back(fidelity(rho, psi));
  return ppt_fidelity_margin(tuple, f) >= -tol;
}

TupleThreshold tuple_threshold_detail(const NoisyFamily& family, const WitnessTuple& tuple,
                                      const sdp::SolverOptions& opts) {
  require_same_dims(family.dims(), tuple.dims(), "tuple_threshold");
  const CMatrix& rho = family.base().mat();
  const CMatrix& target = family.endpoint().mat();
  SdpProblem prob;
  const int p = prob.add_variable(0.0, 1.0);
  prob.objective(p) = 1.0;
  const HermitianVars sigma = add_ppt_state(prob, tuple.dims(), -1);
  const int first_fid = static_cast<int>(prob.equalities.size());
  for (const auto& psi : tuple.psis()) {
    const double f0 = projector_expectation(rho, psi.amps());
    const double f1 = projector_expectation(target, psi.amps());
    // <psi|sigma|psi> = (1-p) f0 + p f1
    LinearEquality eq;
    sigma.add_trace_with(eq, psi.projector());
    eq.coeffs.push_back({p, f0 - f1});
    eq.rhs = f0;
    prob.equalities.push_back(std::move(eq));
  }
  const SdpSolution s = sdp::solve(prob, opts);
  if (s.status == SdpStatus::infeasible) {
    throw std::logic_error("tuple_threshold: noisy family never matches a PPT state");
  }
  TupleThreshold out;
  if (s.status != SdpStatus::optimal) {
    out.value = bisect_threshold([&](double q) { return in_wk(apply_noise(family, q), tuple); });
    out.fidelity_duals = RVector::Zero(tuple.size());
    return out;
  }
  out.value = std::clamp(s.x(p), 0.0, 1.0);
  out.sigma = sigma.value(s.x);
  out.fidelity_duals = s.equality_duals.segment(first_fid, tuple.size());
  out.iterations = s.iterations;
  return out;
}

double tuple_threshold(const NoisyFamily& family, const WitnessTuple& tuple, const sdp::SolverOptions& opts) {
  return tuple_threshold_detail(family, tuple, opts).value;
}

std::vector<CVector> tuple_threshold_gradient(const NoisyFamily& family, const WitnessTuple& tuple,
                                              const TupleThreshold& solved) {
  std::vector<CVector> grads;
  if (solved.sigma.size() == 0) {
    for (const auto& psi : tuple.psis()) grads.push_back(CVector::Zero(psi.amps().size()));
    return grads;
  }
  const double p = solved.value;
  const CMatrix noisy = p * family.endpoint().mat() + (1.0 - p) * family.base().mat();
  const CMatrix diff = solved.sigma - noisy;
  for (int i = 0; i < tuple.size(); ++i) {
    grads.push_back(-2.0 * solved.fidelity_duals(i) * (diff * tuple.psis()[i].amps()));
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Envelopes

double max_fidelity_in_set(const PureState& psi, const CertSet& set) {
  SdpProblem prob;
  const HermitianVars sigma = add_state_in_set(prob, psi.dims(), set);
  LinearEquality obj;
  sigma.add_trace_with(obj, psi.projector(), -1.0);
  for (const auto& [v, a] : obj.coeffs) prob.objective(v) += a;
  const SdpSolution s = sdp::solve(prob);
  if (s.status != SdpStatus::optimal) throw_failure("max_fidelity_in_set", s);
  return -s.primal_objective;
}

EnvelopeCurve fidelity_envelope(const PureState& psi1, const PureState& psi2, const CertSet& set,
                                int grid_size, std::optional<double> c_max_override) {
  if (grid_size < 2) throw std::invalid_argument("fidelity_envelope: grid_size must be at least 2");
  require_same_dims(psi1.dims(), psi2.dims(), "fidelity_envelope");
  EnvelopeCurve curve;
  curve.set = set;
  curve.c_max = max_fidelity_in_set(psi1, set);
  const double top = c_max_override.value_or(curve.c_max);

  auto solve_point = [&](double c) {
    SdpProblem prob;
    const HermitianVars sigma = add_state_in_set(prob, psi1.dims(), set);
    LinearEquality eq;
    sigma.add_trace_with(eq, psi1.projector());
    eq.rhs = c;
    prob.equalities.push_back(std::move(eq));
    LinearEquality obj;
    sigma.add_trace_with(obj, psi2.projector(), -1.0);
    for (const auto& [v, a] : obj.coeffs) prob.objective(v) += a;
    return sdp::solve(prob);
  };

  for (int g = 0; g < grid_size; ++g) {
    EnvelopePoint pt;
    pt.c = top * g / (grid_size - 1);
    if (pt.c > curve.c_max + 1e-7) {
      pt.status = EnvelopePoint::Status::infeasible;
      curve.points.push_back(pt);
      continue;
    }
    pt.c_solved = std::min(pt.c, curve.c_max);
    SdpSolution s = solve_point(pt.c_solved);
    // Both ends of the range sit on faces without interior points; step
    // inward when the solver cannot finish there.
    const double inward = pt.c_solved < 0.5 * curve.c_max ? 1.0 : -1.0;
    for (double delta : {1e-7, 1e-6, 1e-5}) {
      if (s.status != SdpStatus::numerical_failure) break;
      pt.c_solved = std::min(pt.c, curve.c_max) + inward * delta * std::max(curve.c_max, 1e-3);
      s = solve_point(pt.c_solved);
    }
    if (s.status == SdpStatus::optimal) {
      pt.status = EnvelopePoint::Status::feasible;
      pt.v = -s.primal_objective;
    } else if (s.status == SdpStatus::infeasible) {
      pt.status = EnvelopePoint::Status::infeasible;
    }
    curve.points.push_back(pt);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Maximally entangled pairs

namespace {

CMatrix reshape_amps(const PureState& psi) {
  const auto& d = psi.dims();
  CMatrix m(d.d_a, d.d_b);
  for (int a = 0; a < d.d_a; ++a) {
    for (int b = 0; b < d.d_b; ++b) m(a, b) = psi.amps()(a * d.d_b + b);
  }
  return m;
}

CVector flatten(const CMatrix& m) {
  CVector v(m.size());
  for (int a = 0; a < m.rows(); ++a) {
    for (int b = 0; b < m.cols(); ++b) v(a * m.cols() + b) = m(a, b);
  }
  return v;
}

void require_maximally_entangled(const PureState& psi) {
  require_square_dims(psi.dims(), "correlation_unitary");
  const double expected = 1.0 / std::sqrt(static_cast<double>(psi.dims().d_a));
  const RVector s = schmidt_decompose(psi).coeffs;
  if ((s.array() - expected).abs().maxCoeff() > 1e-8) {
    throw std::invalid_argument("correlation_unitary: state is not maximally entangled");
  }
}

CMatrix polar_unitary(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace

std::optional<CMatrix> correlation_unitary(const PureState& psi1, const PureState& psi2) {
  require_same_dims(psi1.dims(), psi2.dims(), "correlation_unitary");
  require_maximally_entangled(psi1);
  require_maximally_entangled(psi2);
  const double d = psi1.dims().d_a;
  // Reshape of (I (x) U) psi is M U^T.
  const CMatrix u = (d * reshape_amps(psi1).adjoint() * reshape_amps(psi2)).transpose();
  const CMatrix id = CMatrix::Identity(u.rows(), u.cols());
  if ((u.adjoint() * u - id).cwiseAbs().maxCoeff() > 1e-8) return std::nullopt;
  return u;
}

bool zero_in_numerical_range(const CMatrix& u) {
  if (u.rows() != u.cols() || u.rows() == 0) {
    throw std::invalid_argument("zero_in_numerical_range: matrix must be square");
  }
  const CMatrix id = CMatrix::Identity(u.rows(), u.cols());
  if ((u.adjoint() * u - id).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::invalid_argument("zero_in_numerical_range: matrix is not unitary");
  }
  Eigen::ComplexEigenSolver<CMatrix> es(u, false);
  std::vector<double> angles;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) angles.push_back(std::arg(es.eigenvalues()(i)));
  std::sort(angles.begin(), angles.end());
  // The hull of points on the unit circle contains 0 iff no angular gap
  // exceeds pi.
  double widest = angles.front() + 2.0 * std::numbers::pi - angles.back();
  for (size_t i = 1; i < angles.size(); ++i) widest = std::max(widest, angles[i] - angles[i - 1]);
  return widest <= std::numbers::pi + 1e-9;
}

// ---------------------------------------------------------------------------
// Faithfulness

PureState aligned_maximally_entangled(const PureState& psi) {
  const SchmidtDecomposition s = schmidt_decompose(psi);
  const int r = std::min(psi.dims().d_a, psi.dims().d_b);
  CVector v = CVector::Zero(psi.dims().total());
  for (int i = 0; i < r; ++i) {
    v += Eigen::kroneckerProduct(s.basis_a.col(i), s.basis_b.col(i)).eval();
  }
  return PureState::normalized(v, psi.dims());
}

std::optional<PureState> find_fidelity_witness(const DensityMatrix& rho, double margin, int restarts,
                                               std::uint64_t seed) {
  const BipartiteDims dims = rho.dims();
  auto violates = [&](const PureState& psi) {
    return -classic_witness_value(rho, psi) > margin;
  };

  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.mat());
  const int n = dims.total();
  std::vector<PureState> starts;
  for (int k = 0; k < std::min(3, n); ++k) {
    const PureState v = PureState::normalized(es.eigenvectors().col(n - 1 - k), dims);
    if (violates(v)) return v;
    starts.push_back(v);
  }
  if (!dims.square()) return std::nullopt;

  // Maximize <phi_U|rho|phi_U> over maximally entangled phi_U = vec(U)/sqrt(d).
  const int d = dims.d_a;
  Rng rng(seed);
  std::vector<CMatrix> inits;
  for (const auto& v : starts) inits.push_back(std::sqrt(double(d)) * reshape_amps(aligned_maximally_entangled(v)));
  for (int r = 0; r < restarts; ++r) inits.push_back(haar_unitary(d, rng));
  for (CMatrix u : inits) {
    double last = -1.0;
    for (int it = 0; it < 500; ++it) {
      u = polar_unitary(reshape_amps(PureState::normalized(rho.mat() * flatten(u), dims)));
      const CVector phi = flatten(u) / std::sqrt(double(d));
      const double f = projector_expectation(rho.mat(), phi);
      if (f - last < 1e-14) break;
      last = f;
    }
    const PureState phi = PureState::normalized(flatten(u), dims);
    if (violates(phi)) return phi;
  }
  return std::nullopt;
}

}  // namespace witnesskit
