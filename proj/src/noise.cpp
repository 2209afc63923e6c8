#include "witnesskit/noise.hpp"

#include <stdexcept>

namespace witnesskit {

NoiseModel parse_noise_model(const std::string& name) {
  if (name == "depolarizing") return NoiseModel::depolarizing;
  if (name == "dephasing") return NoiseModel::dephasing;
  throw std::invalid_argument("unknown noise model '" + name + "'");
}

std::string to_string(NoiseModel m) {
  return m == NoiseModel::depolarizing ? "depolarizing" : "dephasing";
}

namespace {

DensityMatrix noise_target(const DensityMatrix& rho, NoiseModel model) {
  if (model == NoiseModel::depolarizing) return DensityMatrix::maximally_mixed(rho.dims());
  return dephase(rho);
}

void require_square(const SchmidtDecomposition& s, int d) {
  if (s.dims.d_a != d || s.dims.d_b != d) {
    throw DimensionMismatch("pure-state thresholds need equal local dimensions d");
  }
}

}  // namespace

NoisyFamily::NoisyFamily(DensityMatrix base, NoiseModel model)
    : base_(std::move(base)), model_(model), endpoint_(noise_target(base_, model)) {}

DensityMatrix apply_noise(const NoisyFamily& family, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("noise strength must lie in [0, 1]");
  if (p == 0.0) return family.base();
  CMatrix m = p * family.endpoint().mat() + (1.0 - p) * family.base().mat();
  m = 0.5 * (m + m.adjoint());
  return DensityMatrix(std::move(m), family.dims());
}

double pure_unfaithful_threshold(const SchmidtDecomposition& schmidt, int d) {
  require_square(schmidt, d);
  const double sum = schmidt.coeffs.sum();
  const double t = d * sum * sum;
  // Sum of amplitudes is 1 only for product states, where the formula is 0/(d-1).
  if (t - d <= 1e-12) return 0.0;
  return (t - d) / (t - 1.0);
}

double pure_separable_threshold(const SchmidtDecomposition& schmidt, int d) {
  require_square(schmidt, d);
  const double s1 = schmidt.coeffs.size() > 0 ? schmidt.coeffs(0) : 0.0;
  const double s2 = schmidt.coeffs.size() > 1 ? schmidt.coeffs(1) : 0.0;
  const double x = static_cast<double>(d) * d * s1 * s2;
  return x / (1.0 + x);
}

double classic_witness_value(const DensityMatrix& rho, const PureState& psi) {
  require_same_dims(rho.dims(), psi.dims(), "classic_witness_value");
  const double s1 = schmidt_decompose(psi).coeffs(0);
  return s1 * s1 - fidelity(rho, psi);
}

}  // namespace witnesskit
