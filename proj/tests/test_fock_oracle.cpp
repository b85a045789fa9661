#include <solitonlab/solitonlab.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace solitonlab;

namespace {

AnsatzParams displacement_only(const std::vector<Complex>& alphas) {
  AnsatzParams p = AnsatzParams::zero(static_cast<int>(alphas.size()));
  p.deltas = alphas;
  return p;
}

}  // namespace

TEST_CASE("oracle coherent amplitudes match the exponential series", "[fock]") {
  const Complex alpha(0.6, -0.3);
  const FockVector f = oracle_prepare(displacement_only({alpha}), 24);
  REQUIRE(f.leakage() < 1e-12);
  double norm_check = 0.0;
  Complex amp = std::exp(-0.5 * std::norm(alpha));
  for (int k = 0; k < 12; ++k) {
    REQUIRE(std::abs(f.amplitudes()(f.index({k})) - amp) < 1e-12);
    norm_check += std::norm(amp);
    amp *= alpha / std::sqrt(static_cast<double>(k + 1));
  }
  REQUIRE(norm_check == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("oracle squeezed vacuum occupies even levels only", "[fock]") {
  AnsatzParams p = AnsatzParams::zero(1);
  p.zetas[0] = {0.6, 0.9};
  const FockVector f = oracle_prepare(p, 30);
  for (int k = 1; k < 30; k += 2) {
    REQUIRE(std::abs(f.amplitudes()(f.index({k}))) < 1e-13);
  }
  // The truncated vector is renormalised, lifting every population by the
  // O(1e-9) tail weight, so absolute levels get a matching margin while the
  // ratio, which the renormalisation cancels from, stays tight.
  const double t = std::tanh(0.6), c = std::cosh(0.6);
  const double p0 = std::norm(f.amplitudes()(f.index({0})));
  const double p2 = std::norm(f.amplitudes()(f.index({2})));
  REQUIRE(p0 == Catch::Approx(1.0 / c).epsilon(1e-8));
  REQUIRE(p2 == Catch::Approx(t * t / (2.0 * c)).epsilon(1e-8));
  REQUIRE(p2 / p0 == Catch::Approx(t * t / 2.0).epsilon(1e-12));
}

TEST_CASE("oracle refuses cutoffs that leak", "[fock]") {
  // |alpha|^2 = 9 photons on average: cutoff 12 drops a visible tail.
  const AnsatzParams p = displacement_only({Complex(3.0, 0.0)});
  try {
    oracle_prepare(p, 12);
    FAIL("expected CutoffError");
  } catch (const CutoffError& err) {
    REQUIRE(err.suggested_cutoff > 12);
    REQUIRE_NOTHROW(oracle_prepare(p, err.suggested_cutoff));
  }
}

TEST_CASE("oracle enforces its size guards", "[fock]") {
  REQUIRE_THROWS_AS(oracle_prepare(AnsatzParams::zero(5), 8),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(oracle_prepare(AnsatzParams::zero(4), 64),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(oracle_prepare(AnsatzParams::zero(1), 1),
                    std::invalid_argument);
}

TEST_CASE("oracle mixing conserves norm and photon number", "[fock]") {
  std::mt19937_64 rng(127);
  AnsatzParams p = AnsatzParams::zero(2);
  p.deltas = {Complex(0.5, -0.2), Complex(-0.3, 0.4)};
  p.zetas = {{0.4, 0.7}, {-0.35, 2.1}};
  AnsatzParams mixed = p;
  for (auto& h : mixed.mixer) h = detail::uniform(rng, -0.5, 0.5);

  const FockVector plain = oracle_prepare(p, 28);
  const FockVector stirred = oracle_prepare(mixed, 28);
  REQUIRE(stirred.amplitudes().norm() == Catch::Approx(1.0).epsilon(1e-12));

  const double before =
      oracle_mean_photon(plain, 0) + oracle_mean_photon(plain, 1);
  const double after =
      oracle_mean_photon(stirred, 0) + oracle_mean_photon(stirred, 1);
  REQUIRE(after == Catch::Approx(before).margin(1e-8));
}

TEST_CASE("oracle quadratic moments are Hermitian", "[fock]") {
  std::mt19937_64 rng(131);
  AnsatzParams p = AnsatzParams::zero(2);
  p.deltas = {Complex(0.4, 0.3), Complex(0.1, -0.6)};
  p.zetas = {{0.3, -0.5}, {0.45, 1.3}};
  for (auto& h : p.mixer) h = detail::uniform(rng, -0.4, 0.4);
  const FockVector f = oracle_prepare(p, 30);
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 2; ++k) {
      REQUIRE(std::abs(oracle_quadratic(f, j, k) -
                       std::conj(oracle_quadratic(f, k, j))) < 1e-10);
    }
    REQUIRE(oracle_quadratic(f, j, j).real() ==
            Catch::Approx(oracle_mean_photon(f, j)).margin(1e-12));
  }
}

TEST_CASE("oracle pattern probabilities are squared amplitudes", "[fock]") {
  const Complex alpha(0.8, 0.1);
  const FockVector f = oracle_prepare(displacement_only({alpha}), 26);
  double p0 = std::exp(-std::norm(alpha));
  for (int k = 0; k <= 3; ++k) {
    REQUIRE(oracle_pattern_probability(f, PhotonPattern({k})) ==
            Catch::Approx(p0).margin(1e-12));
    p0 *= std::norm(alpha) / (k + 1);
  }
}

TEST_CASE("oracle certifies the closed-form moments end to end", "[fock]") {
  std::mt19937_64 rng(137);
  for (int trial = 0; trial < 3; ++trial) {
    const int n = 2 + trial % 2;
    AnsatzParams p = AnsatzParams::zero(n);
    for (int j = 0; j < n; ++j) {
      p.deltas[j] = Complex(detail::uniform(rng, -0.7, 0.7),
                            detail::uniform(rng, -0.7, 0.7));
      p.zetas[j] = {detail::uniform(rng, -0.6, 0.6),
                    detail::uniform(rng, -3.1, 3.1)};
    }
    for (auto& h : p.mixer) h = detail::uniform(rng, -0.4, 0.4);

    const GaussianState s = prepare_state(p);
    const FockVector f = oracle_prepare(p, 40);
    const LatticeHamiltonian lat = LatticeHamiltonian::open_chain(n, -1.0);

    for (int j = 0; j < n; ++j) {
      REQUIRE(mean_photon(s, j) ==
              Catch::Approx(oracle_mean_photon(f, j)).margin(1e-7));
      REQUIRE(quartic_expectation(s, j) ==
              Catch::Approx(oracle_quartic(f, j)).margin(1e-6));
    }
    REQUIRE(hamiltonian_expectation(s, lat) ==
            Catch::Approx(oracle_expectation(f, lat)).margin(1e-6));

    std::vector<int> counts(n, 0);
    counts[0] = 2;
    counts[n - 1] = 1;
    REQUIRE(pattern_probability(s, PhotonPattern(counts)) ==
            Catch::Approx(oracle_pattern_probability(f, PhotonPattern(counts)))
                .margin(1e-8));
  }
}
