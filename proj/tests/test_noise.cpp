#include <cmath>

#include "doctest.h"
#include "test_helpers.hpp"
#include "witnesskit/certify.hpp"
#include "witnesskit/noise.hpp"

using namespace witnesskit;
using namespace witnesskit::testing;

TEST_SUITE("noise") {

TEST_CASE("noise is the straight line to the endpoint") {
  const DensityMatrix rho = random_mixed(BipartiteDims(2, 3), 2, RandomMeasure::hilbert_schmidt, 11);
  for (auto model : {NoiseModel::depolarizing, NoiseModel::dephasing}) {
    const NoisyFamily fam(rho, model);
    CHECK(max_abs(apply_noise(fam, 0.0).mat() - rho.mat()) == 0.0);
    CHECK(max_abs(apply_noise(fam, 1.0).mat() - fam.endpoint().mat()) < 1e-15);
    for (double p : {0.1, 0.37, 0.8}) {
      const CMatrix expect = (1 - p) * rho.mat() + p * fam.endpoint().mat();
      CHECK(max_abs(apply_noise(fam, p).mat() - expect) < 1e-15);
    }
    CHECK_THROWS_AS(apply_noise(fam, -1e-9), std::domain_error);
    CHECK_THROWS_AS(apply_noise(fam, 1.0 + 1e-9), std::domain_error);
    CHECK_THROWS_AS(apply_noise(fam, std::nan("")), std::domain_error);
  }
  const NoisyFamily dep(rho, NoiseModel::depolarizing);
  CHECK(max_abs(dep.endpoint().mat() - CMatrix::Identity(6, 6) / 6.0) < 1e-15);
  const NoisyFamily deph(rho, NoiseModel::dephasing);
  CHECK(max_abs(deph.endpoint().mat() - dephase(rho).mat()) == 0.0);
}

TEST_CASE("noise model names round-trip") {
  CHECK(parse_noise_model("depolarizing") == NoiseModel::depolarizing);
  CHECK(parse_noise_model(to_string(NoiseModel::dephasing)) == NoiseModel::dephasing);
  CHECK_THROWS_AS(parse_noise_model("amplitude-damping"), std::invalid_argument);
}

TEST_CASE("closed forms for the maximally entangled qubit pair") {
  const SchmidtDecomposition s = schmidt_decompose(maximally_entangled(2));
  CHECK(pure_separable_threshold(s, 2) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(pure_unfaithful_threshold(s, 2) == doctest::Approx(2.0 / 3).epsilon(1e-12));
}

TEST_CASE("closed forms vanish on product states") {
  const SchmidtDecomposition s = schmidt_decompose(basis_product(0, 2, BipartiteDims(3, 3)));
  CHECK(pure_separable_threshold(s, 3) == 0.0);
  CHECK(pure_unfaithful_threshold(s, 3) == 0.0);
}

TEST_CASE("closed forms are ordered for entangled pure states") {
  for (int d = 2; d <= 4; ++d) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SchmidtDecomposition s = schmidt_decompose(random_pure(d, 500 + 10 * d + seed));
      const double sep = pure_separable_threshold(s, d);
      const double u2 = pure_unfaithful_threshold(s, d);
      CHECK(sep >= u2 - 1e-12);
      CHECK(u2 >= 0.0);
      CHECK(sep < 1.0);
    }
  }
}

TEST_CASE("classic witness value is s1^2 minus the fidelity") {
  const PureState psi = random_pure(3, 77);
  const DensityMatrix rho = random_mixed(BipartiteDims(3, 3), 2, RandomMeasure::bures, 78);
  const double s1 = schmidt_decompose(psi).coeffs(0);
  CHECK(classic_witness_value(rho, psi) == doctest::Approx(s1 * s1 - fidelity(rho, psi)).epsilon(1e-12));
  CHECK(classic_witness_value(DensityMatrix::from_pure(maximally_entangled(2)), maximally_entangled(2)) ==
        doctest::Approx(-0.5));
}

TEST_CASE("PPT noise threshold reproduces the pure-state closed form") {
  for (int d = 2; d <= 3; ++d) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const PureState psi = random_pure(d, 900 + 10 * d + seed);
      const NoisyFamily fam(DensityMatrix::from_pure(psi), NoiseModel::depolarizing);
      const double expect = pure_separable_threshold(schmidt_decompose(psi), d);
      CHECK(noise_threshold(fam, CertSet::ppt()) == doctest::Approx(expect).epsilon(1e-6));
    }
  }
}

TEST_CASE("unfaithfulness threshold reproduces the pure-state closed form") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const PureState psi = random_pure(2, 1200 + seed);
    const NoisyFamily fam(DensityMatrix::from_pure(psi), NoiseModel::depolarizing);
    const double expect = pure_unfaithful_threshold(schmidt_decompose(psi), 2);
    CHECK(noise_threshold(fam, CertSet::u_tilde(2)) == doctest::Approx(expect).epsilon(1e-6));
  }
}

}  // TEST_SUITE
