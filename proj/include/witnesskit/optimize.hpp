#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "witnesskit/certify.hpp"

namespace witnesskit {

/// Pull strength m and the anchors phi_i of the map x -> normalize(x/|x| + m phi_i).
struct EmbeddingParams {
  double m = 0.0;
  std::vector<PureState> anchors;
};

enum class GradientMethod { finite_difference, dual };

GradientMethod parse_gradient_method(const std::string& name);
std::string to_string(GradientMethod g);

struct OptimizerConfig {
  int restarts = 16;
  int steps_per_stage = 100;
  double step_size = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double fd_step = 1e-4;
  double m0 = 4.0;
  double m_decay = 0.5;
  /// Stages run for m = m0, m0*decay, ... while m >= m_floor, then once at m = 0.
  double m_floor = 0.05;
  bool anchor_refresh = true;
  std::uint64_t seed = 0;
  GradientMethod gradient = GradientMethod::dual;
  /// Scale of the random offset added to the starting vectors of restarts 1, 2, ...
  double perturbation = 0.5;
  /// Starting vectors for every restart; empty means derive them from the state.
  std::vector<PureState> initial_anchors;
  /// Worker threads for restarts. Results do not depend on it.
  int jobs = 1;

  void validate() const;
  std::vector<double> m_schedule() const;
};

struct RestartTrace {
  std::uint64_t seed = 0;
  std::vector<double> stage_m;
  std::vector<double> stage_best;  // best value seen up to the end of each stage
  double final_value = 0.0;
  int evaluations = 0;
  bool aborted = false;
};

struct OptResult {
  std::vector<PureState> best_tuple;
  double best_value = 0.0;  // tuple_threshold(family, best_tuple), recomputed
  std::vector<RestartTrace> trace;
};

/// normalize(x/|x| + m phi_i). Throws on a zero x.
PureState embed(const CVector& x, const EmbeddingParams& params, int i);

/// tuple_threshold of the embedded tuple.
double objective(const std::vector<CVector>& xs, const EmbeddingParams& params, const NoisyFamily& family);

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h for every coordinate.
RVector fd_gradient(const std::function<double(const RVector&)>& f, const RVector& x, double h);

/// [Re x_1, Im x_1, Re x_2, ...] and back.
RVector pack(const std::vector<CVector>& xs);
std::vector<CVector> unpack(const RVector& theta, int k, int n);

/// Finite-difference gradient of `objective` in packed coordinates.
RVector fd_gradient(const std::vector<CVector>& xs, const EmbeddingParams& params,
                    const NoisyFamily& family, double h);

/// Gradient of `objective` in packed coordinates from the optimal dual of a
/// single solve. Also returns the objective value through `value`.
RVector dual_gradient(const std::vector<CVector>& xs, const EmbeddingParams& params,
                      const NoisyFamily& family, double* value = nullptr);

/// Starting witnesses derived from the leading eigenvectors of rho.
std::vector<PureState> seed_tuple(const DensityMatrix& rho, int k);

/// Multi-start moment-smoothed gradient ascent with anchor annealing.
OptResult optimize_tuple(const NoisyFamily& family, int k, const OptimizerConfig& config);

}  // namespace witnesskit
