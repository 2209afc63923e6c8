#include "witnesskit/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace witnesskit {

GradientMethod parse_gradient_method(const std::string& name) {
  if (name == "dual") return GradientMethod::dual;
  if (name == "finite-difference") return GradientMethod::finite_difference;
  throw std::invalid_argument("unknown gradient method '" + name + "'");
}

std::string to_string(GradientMethod g) {
  return g == GradientMethod::dual ? "dual" : "finite-difference";
}

void OptimizerConfig::validate() const {
  if (restarts < 1) throw std::invalid_argument("optimizer: restarts must be at least 1");
  if (steps_per_stage < 0) throw std::invalid_argument("optimizer: steps_per_stage must be nonnegative");
  if (!(step_size > 0.0)) throw std::invalid_argument("optimizer: step_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("optimizer: moment constants must lie in [0, 1)");
  }
  if (!(fd_step > 0.0)) throw std::invalid_argument("optimizer: fd_step must be positive");
  if (!(m0 >= 0.0) || !std::isfinite(m0)) throw std::invalid_argument("optimizer: m0 must be finite and nonnegative");
  if (!(m_decay > 0.0 && m_decay < 1.0)) throw std::invalid_argument("optimizer: m_decay must lie in (0, 1)");
  if (!(m_floor > 0.0)) throw std::invalid_argument("optimizer: m_floor must be positive");
  if (!(perturbation >= 0.0)) throw std::invalid_argument("optimizer: perturbation must be nonnegative");
  if (jobs < 1) throw std::invalid_argument("optimizer: jobs must be at least 1");
}

std::vector<double> OptimizerConfig::m_schedule() const {
  std::vector<double> ms;
  for (double m = m0; m >= m_floor && m > 0.0; m *= m_decay) ms.push_back(m);
  ms.push_back(0.0);
  return ms;
}

// ---------------------------------------------------------------------------
// Embedding

namespace {

CVector jitter(Eigen::Index n) {
  Rng rng(0x9e3779b97f4a7c15ULL);
  return ginibre(static_cast<int>(n), 1, rng).col(0);
}

struct Embedded {
  PureState psi;
  double u_norm;
  double x_norm;
  CVector x_hat;
};

Embedded embed_detail(const CVector& x, const EmbeddingParams& params, int i) {
  if (i < 0 || i >= static_cast<int>(params.anchors.size())) {
    throw std::out_of_range("embed: anchor index out of range");
  }
  const PureState& phi = params.anchors[i];
  if (x.size() != phi.amps().size()) throw DimensionMismatch("embed: vector length differs from anchor");
  const double xn = x.norm();
  if (!(xn > 0.0) || !std::isfinite(xn)) throw std::invalid_argument("embed: zero input vector");
  const CVector x_hat = x / xn;
  CVector u = x_hat + params.m * phi.amps();
  double un = u.norm();
  if (un < 1e-12) {
    u += 1e-9 * jitter(u.size());
    un = u.norm();
  }
  return {PureState::normalized(u, phi.dims()), un, xn, x_hat};
}

}  // namespace

PureState embed(const CVector& x, const EmbeddingParams& params, int i) {
  return embed_detail(x, params, i).psi;
}

double objective(const std::vector<CVector>& xs, const EmbeddingParams& params, const NoisyFamily& family) {
  std::vector<PureState> psis;
  for (size_t i = 0; i < xs.size(); ++i) psis.push_back(embed(xs[i], params, static_cast<int>(i)));
  return tuple_threshold(family, WitnessTuple(std::move(psis)));
}

RVector fd_gradient(const std::function<double(const RVector&)>& f, const RVector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  RVector g(x.size());
  RVector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + h;
    const double up = f(probe);
    probe(j) = x(j) - h;
    const double down = f(probe);
    probe(j) = x(j);
    g(j) = (up - down) / (2.0 * h);
  }
  return g;
}

RVector pack(const std::vector<CVector>& xs) {
  Eigen::Index total = 0;
  for (const auto& x : xs) total += 2 * x.size();
  RVector theta(total);
  Eigen::Index at = 0;
  for (const auto& x : xs) {
    theta.segment(at, x.size()) = x.real();
    theta.segment(at + x.size(), x.size()) = x.imag();
    at += 2 * x.size();
  }
  return theta;
}

std::vector<CVector> unpack(const RVector& theta, int k, int n) {
  if (theta.size() != 2 * static_cast<Eigen::Index>(k) * n) {
    throw std::invalid_argument("unpack: length does not match k and n");
  }
  std::vector<CVector> xs;
  for (int i = 0; i < k; ++i) {
    CVector x(n);
    x.real() = theta.segment(2 * i * n, n);
    x.imag() = theta.segment(2 * i * n + n, n);
    xs.push_back(std::move(x));
  }
  return xs;
}

RVector fd_gradient(const std::vector<CVector>& xs, const EmbeddingParams& params,
                    const NoisyFamily& family, double h) {
  const int k = static_cast<int>(xs.size());
  const int n = static_cast<int>(xs.front().size());
  return fd_gradient([&](const RVector& t) { return objective(unpack(t, k, n), params, family); },
                     pack(xs), h);
}

RVector dual_gradient(const std::vector<CVector>& xs, const EmbeddingParams& params,
                      const NoisyFamily& family, double* value) {
  std::vector<Embedded> em;
  std::vector<PureState> psis;
  for (size_t i = 0; i < xs.size(); ++i) {
    em.push_back(embed_detail(xs[i], params, static_cast<int>(i)));
    psis.push_back(em.back().psi);
  }
  const WitnessTuple tuple(psis);
  const TupleThreshold solved = tuple_threshold_detail(family, tuple);
  if (value != nullptr) *value = solved.value;
  const std::vector<CVector> gpsi = tuple_threshold_gradient(family, tuple, solved);
  std::vector<CVector> gx;
  for (size_t i = 0; i < xs.size(); ++i) {
    const CVector& psi = em[i].psi.amps();
    // psi = u/|u| with u = x_hat + m phi, x_hat = x/|x|.
    CVector gu = (gpsi[i] - psi.dot(gpsi[i]).real() * psi) / em[i].u_norm;
    CVector g = (gu - em[i].x_hat.dot(gu).real() * em[i].x_hat) / em[i].x_norm;
    gx.push_back(std::move(g));
  }
  return pack(gx);
}

// ---------------------------------------------------------------------------
// Search

std::vector<PureState> seed_tuple(const DensityMatrix& rho, int k) {
  if (k < 1) throw std::invalid_argument("seed_tuple: k must be at least 1");
  const BipartiteDims dims = rho.dims();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.mat());
  const int n = dims.total();
  std::vector<PureState> pool;
  for (int j = 0; j < n && static_cast<int>(pool.size()) < k; ++j) {
    const PureState v = PureState::normalized(es.eigenvectors().col(n - 1 - j), dims);
    if (j == 0) {
      pool.push_back(aligned_maximally_entangled(v));
      pool.push_back(v);
    } else {
      pool.push_back(v);
      pool.push_back(aligned_maximally_entangled(v));
    }
  }
  pool.resize(k, pool.front());
  return pool;
}

namespace {

struct RestartOutcome {
  RestartTrace trace;
  std::vector<PureState> best;
  double best_value = -1.0;
};

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

RestartOutcome run_restart(const NoisyFamily& family, int k, const OptimizerConfig& cfg,
                           const std::vector<PureState>& starts, int restart) {
  RestartOutcome out;
  out.trace.seed = restart_seed(cfg.seed, restart);
  Rng rng(out.trace.seed);
  const int n = family.dims().total();

  std::vector<CVector> xs;
  for (int i = 0; i < k; ++i) {
    CVector x = starts[i].amps();
    if (restart > 0 && cfg.perturbation > 0.0) {
      const CVector z = ginibre(n, 1, rng).col(0);
      x += cfg.perturbation * z / z.norm();
    }
    xs.push_back(x / x.norm());
  }
  EmbeddingParams params;
  for (const auto& x : xs) params.anchors.push_back(PureState::normalized(x, family.dims()));

  auto evaluate = [&](const std::vector<CVector>& cur, RVector* grad) {
    double value = 0.0;
    if (cfg.gradient == GradientMethod::dual) {
      *grad = dual_gradient(cur, params, family, &value);
    } else {
      value = objective(cur, params, family);
      *grad = fd_gradient(cur, params, family, cfg.fd_step);
    }
    ++out.trace.evaluations;
    if (value > out.best_value) {
      out.best_value = value;
      out.best.clear();
      for (int i = 0; i < k; ++i) out.best.push_back(embed(cur[i], params, i));
    }
    return value;
  };

  try {
    for (double m : cfg.m_schedule()) {
      params.m = m;
      RVector theta = pack(xs);
      RVector m1 = RVector::Zero(theta.size());
      RVector m2 = RVector::Zero(theta.size());
      RVector grad;
      for (int step = 1; step <= cfg.steps_per_stage; ++step) {
        evaluate(unpack(theta, k, n), &grad);
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(cfg.beta1, step);
        const double c2 = 1.0 - std::pow(cfg.beta2, step);
        theta.array() += cfg.step_size * (m1.array() / c1) / ((m2.array() / c2).sqrt() + 1e-8);
        // The objective depends on x only through x/|x|; keep each x on the sphere.
        xs = unpack(theta, k, n);
        for (auto& x : xs) x /= x.norm();
        theta = pack(xs);
      }
      evaluate(unpack(theta, k, n), &grad);
      out.trace.stage_m.push_back(m);
      out.trace.stage_best.push_back(out.best_value);
      if (cfg.anchor_refresh) {
        // Restart the next stage from the best tuple so far; with x equal to
        // the anchor the embedding returns it unchanged for every m.
        params.anchors = out.best;
        xs.clear();
        for (const auto& p : out.best) xs.push_back(p.amps());
      }
    }
  } catch (const SolverFailure&) {
    out.trace.aborted = true;
  } catch (const std::logic_error&) {
    out.trace.aborted = true;
  }
  out.trace.final_value = out.best_value;
  return out;
}

}  // namespace

OptResult optimize_tuple(const NoisyFamily& family, int k, const OptimizerConfig& config) {
  if (k < 1) throw std::invalid_argument("optimize_tuple: k must be at least 1");
  config.validate();
  std::vector<PureState> starts = config.initial_anchors;
  if (starts.empty()) starts = seed_tuple(family.base(), k);
  if (static_cast<int>(starts.size()) != k) {
    throw std::invalid_argument("optimize_tuple: initial_anchors must hold k states");
  }
  for (const auto& s : starts) require_same_dims(s.dims(), family.dims(), "optimize_tuple");

  std::vector<RestartOutcome> outcomes(config.restarts);
  const int workers = std::min(config.jobs, config.restarts);
  if (workers <= 1) {
    for (int r = 0; r < config.restarts; ++r) outcomes[r] = run_restart(family, k, config, starts, r);
  } else {
    std::mutex mu;
    int next = 0;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          int r;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= config.restarts) return;
            r = next++;
          }
          outcomes[r] = run_restart(family, k, config, starts, r);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  OptResult result;
  int best = -1;
  for (int r = 0; r < config.restarts; ++r) {
    result.trace.push_back(outcomes[r].trace);
    if (!outcomes[r].best.empty() && (best < 0 || outcomes[r].best_value > outcomes[best].best_value)) best = r;
  }
  if (best < 0) throw SolverFailure("optimize_tuple: every restart failed");
  result.best_tuple = outcomes[best].best;
  result.best_value = tuple_threshold(family, WitnessTuple(result.best_tuple));
  return result;
}

}  // namespace witnesskit
