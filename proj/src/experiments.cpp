#include "witnesskit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace witnesskit::cli {

using nlohmann::json;

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"pure-thresholds", "table1", "ghz", "xy", "random-scan", "envelope"};
  return names;
}

// ---------------------------------------------------------------------------
// Small utilities

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) os << ',';
      os << csv_field(cells[i]);
    }
    os << "\r\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(std::max(n, 0));
  const int workers = std::clamp(jobs, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::mutex mu;
    int next = 0;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          int i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= n) return;
            i = next++;
          }
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool ThresholdReport::consistent(double tol) const {
  for (const auto& [k, v] : tuple_thresholds) {
    (void)k;
    if (v > p_sep_inf + tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

CVector parse_vector(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigError("config key '" + key + "' must be a non-empty array");
  CVector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    if (e.is_number()) {
      v(i) = e.get<double>();
    } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
      v(i) = Complex(e[0].get<double>(), e[1].get<double>());
    } else {
      throw ConfigError("config key '" + key + "' entries must be numbers or [re, im] pairs");
    }
  }
  return v;
}

json vector_to_json(const CVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v(i).real(), v(i).imag()});
  return a;
}

void load_optimizer(OptimizerConfig& o, const json& j) {
  if (!j.is_object()) throw ConfigError("config key 'optimizer' must be an object");
  static const std::set<std::string> allowed{"restarts", "steps_per_stage", "step_size", "beta1", "beta2",
                                             "fd_step",  "m0",              "m_decay",   "m_floor", "anchor_refresh",
                                             "gradient", "perturbation"};
  for (const auto& [key, val] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown optimizer key '" + key + "'");
    const std::string name = "optimizer." + key;
    if (key == "restarts") o.restarts = get_as<int>(val, name);
    if (key == "steps_per_stage") o.steps_per_stage = get_as<int>(val, name);
    if (key == "step_size") o.step_size = get_as<double>(val, name);
    if (key == "beta1") o.beta1 = get_as<double>(val, name);
    if (key == "beta2") o.beta2 = get_as<double>(val, name);
    if (key == "fd_step") o.fd_step = get_as<double>(val, name);
    if (key == "m0") o.m0 = get_as<double>(val, name);
    if (key == "m_decay") o.m_decay = get_as<double>(val, name);
    if (key == "m_floor") o.m_floor = get_as<double>(val, name);
    if (key == "anchor_refresh") o.anchor_refresh = get_as<bool>(val, name);
    if (key == "perturbation") o.perturbation = get_as<double>(val, name);
    if (key == "gradient") {
      try {
        o.gradient = parse_gradient_method(get_as<std::string>(val, name));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
}

}  // namespace

RunConfig load_config(const std::string& experiment, const json& j) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end()) {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> allowed{
      "experiment", "seed",    "out",       "jobs",    "optimize", "k",        "d",           "count",
      "rank",       "measure", "state",     "require_faithful",    "noise_models", "q1_grid", "n_qubits",
      "J",          "gamma",   "h",         "weights", "excited_index",        "preset",   "grid_size",
      "psi1",       "psi2",    "optimizer"};
  RunConfig c;
  c.experiment = experiment;
  for (const auto& [key, val] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "'");
    if (key == "experiment") {
      if (get_as<std::string>(val, key) != experiment) {
        throw ConfigError("config is for experiment '" + val.get<std::string>() + "', not '" + experiment + "'");
      }
    }
    if (key == "seed") {
      if (!val.is_number_integer() || val.get<std::int64_t>() < 0) {
        throw ConfigError("config key 'seed' must be a nonnegative integer");
      }
      c.seed = val.get<std::uint64_t>();
    }
    if (key == "out") c.out = get_as<std::string>(val, key);
    if (key == "jobs") c.jobs = get_as<int>(val, key);
    if (key == "optimize") c.optimize = get_as<bool>(val, key);
    if (key == "k") {
      c.ks = val.is_array() ? get_as<std::vector<int>>(val, key) : std::vector<int>{get_as<int>(val, key)};
    }
    if (key == "d") c.d = get_as<int>(val, key);
    if (key == "count") c.count = get_as<int>(val, key);
    if (key == "rank") c.rank = get_as<int>(val, key);
    if (key == "measure") c.measure = get_as<std::string>(val, key);
    if (key == "state") c.state = get_as<std::string>(val, key);
    if (key == "require_faithful") c.require_faithful = get_as<bool>(val, key);
    if (key == "noise_models") {
      for (const auto& s : get_as<std::vector<std::string>>(val, key)) {
        try {
          c.noise_models.push_back(parse_noise_model(s));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
    }
    if (key == "q1_grid") c.q1_grid = get_as<std::vector<double>>(val, key);
    if (key == "n_qubits") c.n_qubits = get_as<int>(val, key);
    if (key == "J") c.coupling_j = get_as<double>(val, key);
    if (key == "gamma") c.gamma = get_as<double>(val, key);
    if (key == "h") c.field_h = get_as<double>(val, key);
    if (key == "weights") c.weights = get_as<std::vector<double>>(val, key);
    if (key == "excited_index") c.excited_index = get_as<int>(val, key);
    if (key == "preset") c.preset = get_as<std::string>(val, key);
    if (key == "grid_size") c.grid_size = get_as<int>(val, key);
    if (key == "psi1") c.psi1 = parse_vector(val, key);
    if (key == "psi2") c.psi2 = parse_vector(val, key);
    if (key == "optimizer") load_optimizer(c.optimizer, val);
  }
  finalize_config(c);
  return c;
}

RunConfig load_config_file(const std::string& experiment, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return load_config(experiment, j);
}

void finalize_config(RunConfig& c) {
  const std::string& e = c.experiment;
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.jobs >= 1, "jobs must be at least 1");
  for (int k : c.ks) need(k >= 1, "k must be at least 1");

  if (e == "pure-thresholds") {
    if (c.d == 0) c.d = 3;
    if (c.count == 0) c.count = 20;
    if (c.rank == 0) c.rank = 1;
    need(c.d >= 2 && c.d <= 4, "pure-thresholds: d must be 2, 3 or 4");
    need(c.count >= 1, "pure-thresholds: count must be at least 1");
    need(c.rank >= 1 && c.rank <= c.d * c.d, "pure-thresholds: rank must lie in [1, d^2]");
    need(c.state == "random" || c.state == "maximally-entangled",
         "pure-thresholds: state must be 'random' or 'maximally-entangled'");
    try {
      parse_measure(c.measure);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what());
    }
    if (c.noise_models.empty()) c.noise_models = {NoiseModel::depolarizing, NoiseModel::dephasing};
  } else if (e == "table1") {
    if (c.d == 0) c.d = 4;
    need(c.d >= 2, "table1: d must be at least 2");
    if (c.q1_grid.empty()) {
      for (int i = 1; i <= 9; ++i) c.q1_grid.push_back(i / 10.0);
    }
    for (double q : c.q1_grid) need(q >= 0.0 && q <= 1.0, "table1: q1 values must lie in [0, 1]");
    if (c.noise_models.empty()) c.noise_models = {NoiseModel::depolarizing};
    if (c.ks.empty()) c.ks = {2};
  } else if (e == "ghz") {
    if (c.d == 0) c.d = 4;
    need(c.d == 4, "ghz: the state is fixed to local dimension 4");
    if (c.ks.empty()) c.ks = {2};
    for (int k : c.ks) need(k == 2 || k == 4 || k == 8, "ghz: k must be 2, 4 or 8");
    if (c.noise_models.empty()) c.noise_models = {NoiseModel::depolarizing};
  } else if (e == "xy") {
    need(c.n_qubits >= 2 && c.n_qubits <= 12 && c.n_qubits % 2 == 0, "xy: n_qubits must be even and in [2, 12]");
    if (c.weights.empty()) c.weights = {0.7, 0.3};
    need(c.weights.size() == 2, "xy: weights must hold two numbers");
    need(c.weights[0] >= 0 && c.weights[1] >= 0 && std::abs(c.weights[0] + c.weights[1] - 1.0) < 1e-12,
         "xy: weights must be nonnegative and sum to 1");
    need(c.excited_index >= 1 && c.excited_index < (1 << c.n_qubits), "xy: excited_index out of range");
    if (c.noise_models.empty()) c.noise_models = {NoiseModel::depolarizing, NoiseModel::dephasing};
    if (c.ks.empty()) c.ks = {2};
  } else if (e == "random-scan") {
    if (c.d == 0) c.d = 4;
    if (c.count == 0) c.count = 10;
    if (c.rank == 0) c.rank = 4;
    need(c.d >= 2, "random-scan: d must be at least 2");
    need(c.count >= 1, "random-scan: count must be at least 1");
    need(c.rank >= 1 && c.rank <= c.d * c.d, "random-scan: rank must lie in [1, d^2]");
    try {
      parse_measure(c.measure);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what());
    }
    if (c.ks.empty()) c.ks = {2};
    if (c.noise_models.empty()) c.noise_models = {NoiseModel::depolarizing};
  } else if (e == "envelope") {
    if (c.d == 0) c.d = 4;
    need(c.d >= 2, "envelope: d must be at least 2");
    need(c.grid_size >= 2, "envelope: grid_size must be at least 2");
    const bool explicit_states = c.psi1.has_value() || c.psi2.has_value();
    if (explicit_states) {
      need(c.psi1.has_value() && c.psi2.has_value(), "envelope: give both psi1 and psi2");
      need(c.psi1->size() == c.d * c.d && c.psi2->size() == c.d * c.d, "envelope: psi1/psi2 need d^2 entries");
      need(c.psi1->norm() > 0 && c.psi2->norm() > 0, "envelope: psi1/psi2 must be nonzero");
      c.preset = "explicit";
    } else {
      need(c.preset == "maxent-vs-product" || c.preset == "orthogonal-maxent",
           "envelope: preset must be 'maxent-vs-product' or 'orthogonal-maxent'");
    }
  }
  try {
    c.optimizer.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
}

json to_json(const RunConfig& c) {
  json o = {{"restarts", c.optimizer.restarts},
            {"steps_per_stage", c.optimizer.steps_per_stage},
            {"step_size", c.optimizer.step_size},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"fd_step", c.optimizer.fd_step},
            {"m0", c.optimizer.m0},
            {"m_decay", c.optimizer.m_decay},
            {"m_floor", c.optimizer.m_floor},
            {"anchor_refresh", c.optimizer.anchor_refresh},
            {"gradient", to_string(c.optimizer.gradient)},
            {"perturbation", c.optimizer.perturbation}};
  json j = {{"experiment", c.experiment}, {"seed", c.seed},          {"out", c.out},
            {"jobs", c.jobs},             {"optimize", c.optimize}, {"k", c.ks},
            {"optimizer", o}};
  json models = json::array();
  for (auto m : c.noise_models) models.push_back(to_string(m));
  const std::string& e = c.experiment;
  if (e == "pure-thresholds") {
    j.update({{"d", c.d}, {"count", c.count}, {"rank", c.rank}, {"measure", c.measure}, {"state", c.state},
              {"require_faithful", c.require_faithful}, {"noise_models", models}});
  } else if (e == "table1") {
    j.update({{"d", c.d}, {"q1_grid", c.q1_grid}, {"noise_models", models}});
  } else if (e == "ghz") {
    j.update({{"d", c.d}, {"noise_models", models}});
  } else if (e == "xy") {
    j.update({{"n_qubits", c.n_qubits}, {"J", c.coupling_j}, {"gamma", c.gamma}, {"h", c.field_h},
              {"weights", c.weights}, {"excited_index", c.excited_index}, {"noise_models", models}});
  } else if (e == "random-scan") {
    j.update({{"d", c.d}, {"count", c.count}, {"rank", c.rank}, {"measure", c.measure}, {"noise_models", models}});
  } else if (e == "envelope") {
    j.update({{"d", c.d}, {"preset", c.preset}, {"grid_size", c.grid_size}});
    if (c.psi1) j["psi1"] = vector_to_json(*c.psi1);
    if (c.psi2) j["psi2"] = vector_to_json(*c.psi2);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const double kNaN = std::numeric_limits<double>::quiet_NaN();

OptimizerConfig optimizer_for(const RunConfig& cfg, std::uint64_t seed, int jobs) {
  OptimizerConfig o = cfg.optimizer;
  o.seed = seed;
  o.jobs = jobs;
  return o;
}

DensityMatrix rank2_state(int d, double q1) {
  const BipartiteDims dims(d, d);
  const CMatrix m = q1 * maximally_entangled(d).projector() + (1.0 - q1) * basis_product(0, 1, dims).projector();
  return DensityMatrix(m, dims);
}

std::string id_with_index(const std::string& prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%04d", prefix.c_str(), i);
  return buf;
}

// Thresholds that every tabular experiment shares.
struct BaseThresholds {
  double p_sep = kNaN;
  double p_u2 = kNaN;
};

BaseThresholds base_thresholds(const NoisyFamily& f) {
  return {noise_threshold(f, CertSet::ppt()), noise_threshold(f, CertSet::u_tilde(2))};
}

std::string restarts_cell(const RunConfig& cfg, bool optimized) {
  return optimized ? std::to_string(cfg.optimizer.restarts) : "";
}

}  // namespace

ExperimentResult cmd_pure_thresholds(const RunConfig& cfg) {
  ExperimentResult res;
  res.header = {"state_id", "d", "rank", "measure", "noise_model", "p_sep_inf", "p_u2_sup", "closed_form_sep",
                "closed_form_u2"};
  const BipartiteDims dims(cfg.d, cfg.d);
  const RandomMeasure measure = parse_measure(cfg.measure);

  // Candidate states; the faithful filter keeps sampling until enough pass.
  struct Item {
    std::string id;
    DensityMatrix rho;
    std::optional<PureState> pure;
  };
  std::vector<Item> items;
  if (cfg.state == "maximally-entangled") {
    const PureState phi = maximally_entangled(cfg.d);
    items.push_back({"maxent", DensityMatrix::from_pure(phi), phi});
  } else {
    const int max_candidates = 200 * cfg.count;
    for (int j = 0; j < max_candidates && static_cast<int>(items.size()) < cfg.count; ++j) {
      const std::uint64_t s = derive_seed(cfg.seed, j);
      std::optional<PureState> pure;
      std::optional<DensityMatrix> rho;
      if (cfg.rank == 1 && measure == RandomMeasure::hilbert_schmidt) {
        pure = haar_random_pure(dims, s);
        rho = DensityMatrix::from_pure(*pure);
      } else {
        rho = random_mixed(dims, cfg.rank, measure, s);
      }
      if (cfg.require_faithful && !find_fidelity_witness(*rho, 1e-9, 8, s)) continue;
      items.push_back({id_with_index("s", j), *rho, pure});
    }
    if (static_cast<int>(items.size()) < cfg.count) {
      res.warnings.push_back("only " + std::to_string(items.size()) + " faithful states found");
    }
  }

  const int nm = static_cast<int>(cfg.noise_models.size());
  std::vector<std::vector<std::string>> rows(items.size() * nm);
  std::vector<std::string> failed(items.size() * nm);
  std::vector<double> secs(items.size() * nm, 0.0);
  parallel_for(static_cast<int>(rows.size()), cfg.jobs, [&](int t) {
    const Item& it = items[t / nm];
    const NoiseModel model = cfg.noise_models[t % nm];
    const auto t0 = Clock::now();
    BaseThresholds b;
    try {
      b = base_thresholds(NoisyFamily(it.rho, model));
    } catch (const SolverFailure&) {
      failed[t] = it.id + "/" + to_string(model);
    }
    double cf_sep = kNaN, cf_u2 = kNaN;
    if (it.pure && model == NoiseModel::depolarizing) {
      const SchmidtDecomposition s = schmidt_decompose(*it.pure);
      cf_sep = pure_separable_threshold(s, cfg.d);
      cf_u2 = pure_unfaithful_threshold(s, cfg.d);
    }
    rows[t] = {it.id,        std::to_string(cfg.d), std::to_string(cfg.rank), to_string(measure),
               to_string(model), format_number(b.p_sep), format_number(b.p_u2), format_number(cf_sep),
               format_number(cf_u2)};
    secs[t] = seconds_since(t0);
  });
  res.rows = std::move(rows);
  for (size_t t = 0; t < failed.size(); ++t) {
    if (!failed[t].empty()) res.failed_ids.push_back(failed[t]);
    res.timing[res.rows[t][0] + "/" + res.rows[t][4]] = secs[t];
  }
  return res;
}

ExperimentResult cmd_table1(const RunConfig& cfg) {
  ExperimentResult res;
  res.header = {"state_id", "q1", "d", "noise_model", "p_sep_inf", "p_u2_sup", "f_phi1_phi2", "max_f_k2", "restarts",
                "seed"};
  const int nm = static_cast<int>(cfg.noise_models.size());
  const int n = static_cast<int>(cfg.q1_grid.size()) * nm;
  std::vector<ThresholdReport> reports(n);
  std::vector<double> fixed(n, kNaN);
  std::vector<std::string> failed(n);
  parallel_for(n, cfg.jobs, [&](int t) {
    const double q1 = cfg.q1_grid[t / nm];
    ThresholdReport& r = reports[t];
    r.state_id = "rank2_q" + format_number(q1);
    r.d = cfg.d;
    r.noise_model = cfg.noise_models[t % nm];
    r.seed = derive_seed(cfg.seed, t / nm);
    r.p_sep_inf = r.p_u2_sup = kNaN;
    const auto t0 = Clock::now();
    try {
      const NoisyFamily fam(rank2_state(cfg.d, q1), r.noise_model);
      const BaseThresholds b = base_thresholds(fam);
      r.p_sep_inf = b.p_sep;
      r.p_u2_sup = b.p_u2;
      const BipartiteDims dims(cfg.d, cfg.d);
      fixed[t] = tuple_threshold(fam, WitnessTuple({maximally_entangled(cfg.d), basis_product(0, 1, dims)}));
      if (cfg.optimize) {
        const OptResult o = optimize_tuple(fam, 2, optimizer_for(cfg, r.seed, 1));
        r.tuple_thresholds[2] = o.best_value;
        r.restarts = cfg.optimizer.restarts;
      }
    } catch (const SolverFailure&) {
      failed[t] = r.state_id + "/" + to_string(r.noise_model);
    }
    r.wall_seconds = seconds_since(t0);
  });
  for (int t = 0; t < n; ++t) {
    const ThresholdReport& r = reports[t];
    const auto it = r.tuple_thresholds.find(2);
    res.rows.push_back({r.state_id, format_number(cfg.q1_grid[t / nm]), std::to_string(r.d), to_string(r.noise_model),
                        format_number(r.p_sep_inf), format_number(r.p_u2_sup), format_number(fixed[t]),
                        it == r.tuple_thresholds.end() ? "" : format_number(it->second),
                        restarts_cell(cfg, cfg.optimize), std::to_string(r.seed)});
    if (!failed[t].empty()) res.failed_ids.push_back(failed[t]);
    if (!r.consistent()) res.warnings.push_back(r.state_id + ": tuple threshold exceeds p_sep_inf");
    res.timing[r.state_id + "/" + to_string(r.noise_model)] = r.wall_seconds;
  }
  return res;
}

namespace {

// Shared by the GHZ and XY commands: one family per noise model, one
// optimization per k, restarts spread over the worker threads.
void threshold_sweep(const RunConfig& cfg, const std::string& state_id, const DensityMatrix& rho,
                     ExperimentResult& res) {
  res.header = {"state_id", "noise_model", "k", "p_sep_inf", "p_u2_sup", "max_f", "restarts", "seed"};
  for (size_t mi = 0; mi < cfg.noise_models.size(); ++mi) {
    const NoiseModel model = cfg.noise_models[mi];
    const NoisyFamily fam(rho, model);
    const auto t0 = Clock::now();
    BaseThresholds b;
    try {
      b = base_thresholds(fam);
    } catch (const SolverFailure&) {
      res.failed_ids.push_back(state_id + "/" + to_string(model));
    }
    res.timing[state_id + "/" + to_string(model)] = seconds_since(t0);
    for (size_t ki = 0; ki < cfg.ks.size(); ++ki) {
      const int k = cfg.ks[ki];
      const std::uint64_t seed = derive_seed(cfg.seed, mi * 1000 + ki);
      const auto t1 = Clock::now();
      double best = kNaN;
      try {
        best = optimize_tuple(fam, k, optimizer_for(cfg, seed, cfg.jobs)).best_value;
      } catch (const SolverFailure&) {
        res.failed_ids.push_back(state_id + "/" + to_string(model) + "/k" + std::to_string(k));
      }
      if (!std::isnan(best) && !std::isnan(b.p_sep) && best > b.p_sep + 1e-6) {
        res.warnings.push_back(state_id + ": tuple threshold exceeds p_sep_inf");
      }
      res.timing[state_id + "/" + to_string(model) + "/k" + std::to_string(k)] = seconds_since(t1);
      res.rows.push_back({state_id, to_string(model), std::to_string(k), format_number(b.p_sep),
                          format_number(b.p_u2), format_number(best), std::to_string(cfg.optimizer.restarts),
                          std::to_string(seed)});
    }
  }
}

}  // namespace

ExperimentResult cmd_ghz(const RunConfig& cfg) {
  ExperimentResult res;
  threshold_sweep(cfg, "ghz4", DensityMatrix::from_pure(ghz4()), res);
  return res;
}

ExperimentResult cmd_xy(const RunConfig& cfg) {
  ExperimentResult res;
  const HermitianMatrix h = heisenberg_xy(cfg.n_qubits, cfg.coupling_j, cfg.gamma, cfg.field_h);
  const auto eig = eigenstates(h, cfg.excited_index + 1);
  const PureState& ground = eig[0].state;
  const PureState& excited = eig[cfg.excited_index].state;
  const CMatrix m = cfg.weights[0] * ground.projector() + cfg.weights[1] * excited.projector();
  threshold_sweep(cfg, "xy", DensityMatrix(m, ground.dims()), res);
  json energies = json::array();
  for (const auto& e : eig) energies.push_back(e.energy);
  res.summary["energies"] = energies;
  return res;
}

ExperimentResult cmd_random_scan(const RunConfig& cfg) {
  ExperimentResult res;
  res.header = {"state_id", "rank", "seed", "p_sep_inf", "p_u2_sup", "max_f", "advantage"};
  const BipartiteDims dims(cfg.d, cfg.d);
  const RandomMeasure measure = parse_measure(cfg.measure);
  const NoiseModel model = cfg.noise_models.front();
  const int k = cfg.ks.front();

  // Only entangled samples enter the scan; PPT ones are skipped.
  struct Item {
    std::string id;
    std::uint64_t seed;
    DensityMatrix rho;
  };
  std::vector<Item> items;
  const int max_candidates = 200 * cfg.count;
  for (int j = 0; j < max_candidates && static_cast<int>(items.size()) < cfg.count; ++j) {
    const std::uint64_t s = derive_seed(cfg.seed, j);
    DensityMatrix rho = random_mixed(dims, cfg.rank, measure, s);
    if (is_ppt(rho)) continue;
    items.push_back({id_with_index("r", j), s, std::move(rho)});
  }
  if (static_cast<int>(items.size()) < cfg.count) {
    res.warnings.push_back("only " + std::to_string(items.size()) + " entangled states found");
  }

  const int n = static_cast<int>(items.size());
  std::vector<ThresholdReport> reports(n);
  std::vector<std::string> failed(n);
  parallel_for(n, cfg.jobs, [&](int t) {
    ThresholdReport& r = reports[t];
    r.state_id = items[t].id;
    r.d = cfg.d;
    r.noise_model = model;
    r.seed = items[t].seed;
    r.p_sep_inf = r.p_u2_sup = kNaN;
    const auto t0 = Clock::now();
    try {
      const NoisyFamily fam(items[t].rho, model);
      const BaseThresholds b = base_thresholds(fam);
      r.p_sep_inf = b.p_sep;
      r.p_u2_sup = b.p_u2;
      r.tuple_thresholds[k] = optimize_tuple(fam, k, optimizer_for(cfg, r.seed, 1)).best_value;
      r.restarts = cfg.optimizer.restarts;
    } catch (const SolverFailure&) {
      failed[t] = r.state_id;
    }
    r.wall_seconds = seconds_since(t0);
  });

  int denominator = 0, wins = 0;
  double ratio_sum = 0.0;
  for (int t = 0; t < n; ++t) {
    const ThresholdReport& r = reports[t];
    const auto it = r.tuple_thresholds.find(k);
    const double f = it == r.tuple_thresholds.end() ? kNaN : it->second;
    // States already inside the unfaithful approximation at p = 0 have no
    // room for an advantage and are left out of the fraction.
    const bool counted = !std::isnan(f) && r.p_u2_sup > 1e-7;
    const bool win = counted && f > r.p_u2_sup + 1e-9;
    if (counted) {
      ++denominator;
      wins += win ? 1 : 0;
      ratio_sum += f / r.p_u2_sup - 1.0;
    }
    res.rows.push_back({r.state_id, std::to_string(cfg.rank), std::to_string(r.seed),
                        format_number(r.p_sep_inf), format_number(r.p_u2_sup), format_number(f),
                        counted ? (win ? "1" : "0") : ""});
    if (!failed[t].empty()) res.failed_ids.push_back(failed[t]);
    if (!r.consistent()) res.warnings.push_back(r.state_id + ": tuple threshold exceeds p_sep_inf");
    res.timing[r.state_id] = r.wall_seconds;
  }
  res.summary = {{"states", n},
                 {"k", k},
                 {"advantage_denominator", denominator},
                 {"advantage_count", wins},
                 {"advantage_fraction", denominator ? static_cast<double>(wins) / denominator : 0.0},
                 {"mean_advantage_ratio", denominator ? ratio_sum / denominator : 0.0},
                 {"mean_advantage_definition", "mean over counted states of max_f / p_u2_sup - 1"}};
  return res;
}

ExperimentResult cmd_envelope(const RunConfig& cfg) {
  ExperimentResult res;
  res.header = {"c", "v_ppt", "v_u2"};
  const BipartiteDims dims(cfg.d, cfg.d);
  PureState psi1 = maximally_entangled(cfg.d);
  PureState psi2 = basis_product(0, 1, dims);
  if (cfg.preset == "orthogonal-maxent") {
    CVector v = CVector::Zero(dims.total());
    for (int a = 0; a < cfg.d; ++a) v(a * cfg.d + (a + 1) % cfg.d) = 1.0;
    psi2 = PureState::normalized(v, dims);
  } else if (cfg.preset == "explicit") {
    psi1 = PureState::normalized(*cfg.psi1, dims);
    psi2 = PureState::normalized(*cfg.psi2, dims);
  }
  const auto t0 = Clock::now();
  double cmax_ppt = 0.0, cmax_u2 = 0.0;
  try {
    cmax_ppt = max_fidelity_in_set(psi1, CertSet::ppt());
    cmax_u2 = max_fidelity_in_set(psi1, CertSet::u_tilde(2));
  } catch (const SolverFailure&) {
    res.failed_ids.push_back("c_max");
    return res;
  }
  const double top = std::max(cmax_ppt, cmax_u2);
  std::vector<EnvelopeCurve> curves(2);
  parallel_for(2, cfg.jobs, [&](int s) {
    curves[s] = fidelity_envelope(psi1, psi2, s == 0 ? CertSet::ppt() : CertSet::u_tilde(2), cfg.grid_size, top);
  });
  for (int g = 0; g < cfg.grid_size; ++g) {
    std::vector<std::string> row{format_number(curves[0].points[g].c)};
    for (int s = 0; s < 2; ++s) {
      const EnvelopePoint& p = curves[s].points[g];
      row.push_back(p.status == EnvelopePoint::Status::feasible ? format_number(p.v) : "");
      if (p.status == EnvelopePoint::Status::failed) {
        res.failed_ids.push_back(std::string(s == 0 ? "ppt" : "u2") + "/c=" + format_number(p.c));
      }
    }
    res.rows.push_back(std::move(row));
  }
  res.summary = {{"preset", cfg.preset}, {"c_max_ppt", cmax_ppt}, {"c_max_u2", cmax_u2}};
  res.timing["envelope"] = seconds_since(t0);
  return res;
}

// ---------------------------------------------------------------------------
// Driver

int run_experiment(const RunConfig& cfg, const std::vector<std::string>& argv, std::ostream& log) {
  namespace fs = std::filesystem;
  const auto t0 = Clock::now();
  ExperimentResult res;
  const std::string& e = cfg.experiment;
  if (e == "pure-thresholds") res = cmd_pure_thresholds(cfg);
  else if (e == "table1") res = cmd_table1(cfg);
  else if (e == "ghz") res = cmd_ghz(cfg);
  else if (e == "xy") res = cmd_xy(cfg);
  else if (e == "random-scan") res = cmd_random_scan(cfg);
  else if (e == "envelope") res = cmd_envelope(cfg);
  else throw ConfigError("unknown experiment '" + e + "'");

  fs::create_directories(cfg.out);
  std::vector<std::string> outputs{e + ".csv"};
  {
    std::ofstream csv(fs::path(cfg.out) / (e + ".csv"), std::ios::binary);
    write_csv(csv, res.header, res.rows);
  }
  if (!res.summary.empty()) {
    outputs.push_back(e + ".summary.json");
    std::ofstream sj(fs::path(cfg.out) / (e + ".summary.json"), std::ios::binary);
    sj << res.summary.dump(2) << "\n";
  }
  const int exit_code = res.failed_ids.empty() ? 0 : 3;
  outputs.push_back(e + ".manifest.json");
  json manifest = {{"tool", "witnesskit"},
                   {"version", kVersion},
                   {"experiment", e},
                   {"command_line", argv},
                   {"config", to_json(cfg)},
                   {"seed", cfg.seed},
                   {"outputs", outputs},
                   {"rows", res.rows.size()},
                   {"failed_ids", res.failed_ids},
                   {"warnings", res.warnings},
                   {"exit_code", exit_code},
                   {"wall_seconds", seconds_since(t0)},
                   {"item_wall_seconds", res.timing},
                   {"libraries", {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION)},
                                  {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
  {
    std::ofstream mj(fs::path(cfg.out) / (e + ".manifest.json"), std::ios::binary);
    mj << manifest.dump(2) << "\n";
  }
  for (const auto& w : res.warnings) log << "warning: " << w << "\n";
  if (!res.failed_ids.empty()) {
    log << "solver failures:";
    for (const auto& id : res.failed_ids) log << " " << id;
    log << "\n";
  }
  log << "wrote " << (fs::path(cfg.out) / (e + ".csv")).string() << " (" << res.rows.size() << " rows)\n";
  return exit_code;
}

}  // namespace witnesskit::cli
