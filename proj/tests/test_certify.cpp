#include <cmath>
#include <numbers>

#include <unsupported/Eigen/KroneckerProduct>

#include "doctest.h"
#include "test_helpers.hpp"
#include "witnesskit/certify.hpp"
#include "witnesskit/noise.hpp"

using namespace witnesskit;
using namespace witnesskit::testing;

namespace {

PureState shifted_maxent(int d) {
  CVector v = CVector::Zero(d * d);
  for (int a = 0; a < d; ++a) v(a * d + (a + 1) % d) = 1.0;
  return PureState::normalized(v, BipartiteDims(d, d));
}

DensityMatrix rank2(int d, double q1) {
  const BipartiteDims dims(d, d);
  return DensityMatrix(q1 * maximally_entangled(d).projector() + (1 - q1) * basis_product(0, 1, dims).projector(),
                       dims);
}

}  // namespace

TEST_SUITE("certify") {

TEST_CASE("Hermitian variables follow the documented order") {
  sdp::SdpProblem prob(2);
  const HermitianVars x = HermitianVars::add(prob, 3);
  CHECK(x.first == 2);
  CHECK(prob.num_vars == 11);
  RVector v = RVector::Zero(11);
  v(2) = 1.0;   // X(0,0)
  v(5) = 0.25;  // Re X(0,1)
  v(6) = -0.5;  // Im X(0,1)
  v(10) = 2.0;  // Im X(1,2)
  const CMatrix m = x.value(v);
  CHECK(m(0, 0) == Complex(1.0));
  CHECK(m(0, 1) == Complex(0.25, -0.5));
  CHECK(m(1, 0) == Complex(0.25, 0.5));
  CHECK(m(1, 2) == Complex(0.0, 2.0));
  CHECK(m(2, 1) == Complex(0.0, -2.0));
}

TEST_CASE("the maximally mixed state carries an exact certificate") {
  const auto cert = in_unfaithful_approx(DensityMatrix::maximally_mixed(BipartiteDims(4, 4)));
  REQUIRE(cert.has_value());
  CHECK(certificate_violation(*cert, DensityMatrix::maximally_mixed(BipartiteDims(4, 4)), 2) < 1e-7);
}

TEST_CASE("membership in the unfaithful approximation along the GHZ line") {
  const NoisyFamily fam(DensityMatrix::from_pure(ghz4()), NoiseModel::depolarizing);
  CHECK_FALSE(in_unfaithful_approx(fam.base()).has_value());
  const auto cert = in_unfaithful_approx(apply_noise(fam, 0.6));
  REQUIRE(cert.has_value());
  CHECK(certificate_violation(*cert, apply_noise(fam, 0.6), 2) < 1e-7);
  CHECK(in_set(apply_noise(fam, 0.6), CertSet::u_tilde(2)));
  CHECK_FALSE(in_set(apply_noise(fam, 0.5), CertSet::u_tilde(2)));
}

TEST_CASE("PPT membership agrees with the eigenvalue test away from the boundary") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const DensityMatrix rho = random_mixed(BipartiteDims(2, 2), 2 + seed % 3, RandomMeasure::hilbert_schmidt, seed);
    const double lam = partial_transpose(rho).min_eigenvalue();
    if (std::abs(lam) < 1e-4) continue;
    CHECK(in_set(rho, CertSet::ppt()) == (lam > 0));
    ++checked;
  }
  CHECK(checked >= 8);
}

TEST_CASE("noise thresholds bracket set membership") {
  const NoisyFamily fam(rank2(3, 0.6), NoiseModel::dephasing);
  for (const CertSet& set : {CertSet::ppt(), CertSet::u_tilde(2)}) {
    const double p = noise_threshold(fam, set);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(in_set(apply_noise(fam, std::min(1.0, p + 1e-4)), set));
    CHECK_FALSE(in_set(apply_noise(fam, p - 1e-4), set));
  }
}

TEST_CASE("GHZ depolarizing thresholds") {
  const NoisyFamily fam(DensityMatrix::from_pure(ghz4()), NoiseModel::depolarizing);
  CHECK(noise_threshold(fam, CertSet::ppt()) == doctest::Approx(8.0 / 9).epsilon(1e-6));
  CHECK(noise_threshold(fam, CertSet::u_tilde(2)) == doctest::Approx(4.0 / 7).epsilon(1e-6));
}

TEST_CASE("separable starting states have threshold zero") {
  const NoisyFamily fam(DensityMatrix::from_pure(basis_product(0, 1, BipartiteDims(2, 2))), NoiseModel::depolarizing);
  CHECK(noise_threshold(fam, CertSet::ppt()) == doctest::Approx(0.0));
}

TEST_CASE("tuple thresholds never exceed the PPT threshold and grow with the tuple") {
  const BipartiteDims dims(3, 3);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const DensityMatrix rho = random_mixed(dims, 2, RandomMeasure::hilbert_schmidt, 3100 + seed);
    const NoisyFamily fam(rho, NoiseModel::depolarizing);
    const double p_sep = noise_threshold(fam, CertSet::ppt());
    std::vector<PureState> psis;
    double previous = 0.0;
    for (int k = 1; k <= 3; ++k) {
      psis.push_back(random_pure(3, 3200 + 10 * seed + k));
      const double t = tuple_threshold(fam, WitnessTuple(psis));
      CHECK(t <= p_sep + 1e-6);
      CHECK(t >= previous - 1e-6);
      previous = t;
    }
  }
}

TEST_CASE("PPT states are always in the tuple set") {
  const BipartiteDims dims(2, 3);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const DensityMatrix rho = random_mixed(dims, 6, RandomMeasure::bures, 4000 + seed);
    const NoisyFamily fam(rho, NoiseModel::depolarizing);
    const DensityMatrix noisy = apply_noise(fam, 0.9);
    REQUIRE(is_ppt(noisy));
    const WitnessTuple tuple({PureState::normalized(random_vector(6, seed), dims),
                              PureState::normalized(random_vector(6, seed + 50), dims)});
    CHECK(in_wk(noisy, tuple));
  }
}

TEST_CASE("a tuple that rejects a state certifies entanglement") {
  const PureState phi = maximally_entangled(3);
  const DensityMatrix rho = DensityMatrix::from_pure(phi);
  const WitnessTuple tuple({phi, basis_product(0, 1, BipartiteDims(3, 3))});
  CHECK_FALSE(in_wk(rho, tuple));
  CHECK_FALSE(is_ppt(rho));
}

TEST_CASE("corner points for orthogonal maximally entangled states") {
  const int d = 4;
  const WitnessTuple tuple({maximally_entangled(d), shifted_maxent(d)});
  CHECK(ppt_fidelity_margin(tuple, {0.25, 0.25}) >= -1e-6);
  CHECK(ppt_fidelity_margin(tuple, {0.25, 0.0}) >= -1e-6);
  CHECK(ppt_fidelity_margin(tuple, {0.0, 0.0}) >= -1e-6);
  CHECK(ppt_fidelity_margin(tuple, {0.3, 0.0}) < 0.0);
  CHECK(ppt_fidelity_margin(tuple, {0.9, 0.1}) < 0.0);
}

TEST_CASE("maximal fidelity inside each set") {
  const PureState phi = maximally_entangled(3);
  CHECK(max_fidelity_in_set(phi, CertSet::ppt()) == doctest::Approx(1.0 / 3).epsilon(1e-6));
  CHECK(max_fidelity_in_set(basis_product(0, 0, BipartiteDims(3, 3)), CertSet::ppt()) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("orthogonal maximally entangled envelopes coincide") {
  const EnvelopeCurve ppt = fidelity_envelope(maximally_entangled(3), shifted_maxent(3), CertSet::ppt(), 4);
  const EnvelopeCurve u2 = fidelity_envelope(maximally_entangled(3), shifted_maxent(3), CertSet::u_tilde(2), 4);
  REQUIRE(ppt.points.size() == 4);
  REQUIRE(u2.points.size() == 4);
  CHECK(ppt.points.front().c == 0.0);
  CHECK(ppt.points.back().c == doctest::Approx(ppt.c_max));
  for (size_t i = 0; i < 4; ++i) {
    REQUIRE(ppt.points[i].status == EnvelopePoint::Status::feasible);
    REQUIRE(u2.points[i].status == EnvelopePoint::Status::feasible);
    CHECK(std::abs(ppt.points[i].v - u2.points[i].v) <= 1e-4);
    CHECK(ppt.points[i].v == doctest::Approx(1.0 / 3).epsilon(1e-4));
  }
}

TEST_CASE("correlation unitary links maximally entangled states") {
  const int d = 3;
  Rng rng(12);
  const CMatrix u = haar_unitary(d, rng);
  const PureState phi = maximally_entangled(d);
  const CVector rotated = Eigen::kroneckerProduct(CMatrix::Identity(d, d), u).eval() * phi.amps();
  const PureState psi(rotated, phi.dims());
  const auto w = correlation_unitary(phi, psi);
  REQUIRE(w.has_value());
  const CVector back = Eigen::kroneckerProduct(CMatrix::Identity(d, d), *w).eval() * phi.amps();
  CHECK((back - rotated).norm() < 1e-10);
  CHECK_THROWS_AS(correlation_unitary(phi, basis_product(0, 0, phi.dims())), std::invalid_argument);
}

TEST_CASE("zero in the numerical range of unitaries") {
  CMatrix flip = CMatrix::Zero(2, 2);
  flip(0, 0) = 1.0;
  flip(1, 1) = -1.0;
  CHECK(zero_in_numerical_range(flip));
  CMatrix quarter = CMatrix::Zero(2, 2);
  quarter(0, 0) = 1.0;
  quarter(1, 1) = Complex(0, 1);
  CHECK_FALSE(zero_in_numerical_range(quarter));
  CMatrix third = CMatrix::Zero(3, 3);
  for (int i = 0; i < 3; ++i) third(i, i) = std::polar(1.0, 2 * std::numbers::pi * i / 3);
  CHECK(zero_in_numerical_range(third));
  CHECK_THROWS_AS(zero_in_numerical_range(2.0 * CMatrix::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("fidelity witnesses are found for faithful states only") {
  const auto w = find_fidelity_witness(DensityMatrix::from_pure(maximally_entangled(3)));
  REQUIRE(w.has_value());
  CHECK(classic_witness_value(DensityMatrix::from_pure(maximally_entangled(3)), *w) < 0);
  CHECK_FALSE(find_fidelity_witness(DensityMatrix::maximally_mixed(BipartiteDims(3, 3))).has_value());
}

TEST_CASE("aligned maximally entangled state shares the Schmidt bases") {
  const PureState psi = random_pure(3, 55);
  const PureState me = aligned_maximally_entangled(psi);
  const SchmidtDecomposition s = schmidt_decompose(psi);
  CHECK(std::abs(me.amps().dot(psi.amps())) == doctest::Approx(s.coeffs.sum() / std::sqrt(3.0)).epsilon(1e-10));
}

TEST_CASE("tuple threshold gradient matches finite differences") {
  const NoisyFamily fam(rank2(3, 0.4), NoiseModel::depolarizing);
  std::vector<PureState> psis{random_pure(3, 61), random_pure(3, 62)};
  const WitnessTuple tuple(psis);
  const TupleThreshold solved = tuple_threshold_detail(fam, tuple);
  const auto grad = tuple_threshold_gradient(fam, tuple, solved);
  REQUIRE(grad.size() == 2);
  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 9; j += 4) {
      for (Complex dir : {Complex(1, 0), Complex(0, 1)}) {
        auto shifted = [&](double s) {
          std::vector<PureState> p = psis;
          CVector v = p[i].amps();
          v(j) += s * dir;
          p[i] = PureState::normalized(v, p[i].dims());
          return tuple_threshold(fam, WitnessTuple(p));
        };
        const double fd = (shifted(h) - shifted(-h)) / (2 * h);
        CVector e = CVector::Zero(9);
        e(j) = dir;
        const double analytic = grad[i].dot(e).real();
        CHECK(analytic == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
      }
    }
  }
}

TEST_CASE("certificate set names") {
  CHECK(CertSet::ppt().name() != CertSet::u_tilde(2).name());
}

}  // TEST_SUITE
