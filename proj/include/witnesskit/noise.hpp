#pragma once

#include <string>

#include "witnesskit/qstate.hpp"

namespace witnesskit {

enum class NoiseModel { depolarizing, dephasing };

NoiseModel parse_noise_model(const std::string& name);
std::string to_string(NoiseModel m);

/// rho(p) = p N(rho) + (1-p) rho, where N(rho) = I/(d_a d_b) or dephase(rho).
class NoisyFamily {
 public:
  NoisyFamily(DensityMatrix base, NoiseModel model);

  const DensityMatrix& base() const { return base_; }
  NoiseModel model() const { return model_; }
  const BipartiteDims& dims() const { return base_.dims(); }
  /// State reached at p = 1.
  const DensityMatrix& endpoint() const { return endpoint_; }

 private:
  DensityMatrix base_;
  NoiseModel model_;
  DensityMatrix endpoint_;
};

/// Throws std::domain_error unless p is in [0, 1]. p = 0 returns the base exactly.
DensityMatrix apply_noise(const NoisyFamily& family, double p);

/// Depolarizing strength above which the pure state is unfaithful.
/// Returns 0 for a product state.
double pure_unfaithful_threshold(const SchmidtDecomposition& schmidt, int d);

/// Depolarizing strength above which the pure state is separable.
double pure_separable_threshold(const SchmidtDecomposition& schmidt, int d);

/// tr(rho W) with W = s_1(psi)^2 I - |psi><psi|. Negative certifies entanglement.
double classic_witness_value(const DensityMatrix& rho, const PureState& psi);

}  // namespace witnesskit
