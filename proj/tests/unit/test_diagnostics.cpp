#include "mimohmc/diagnostics.hpp"
#include "selftest/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace mimohmc;

TEST_SUITE("diagnostics") {
  TEST_CASE("constant chains: ESS equals the draw count and R-hat is 1") {
    const ChainSamples s = ChainSamples::from_array(3, 50, 1, std::vector<double>(150, 0.25));
    CHECK(ess(s, 0) == doctest::Approx(150.0));
    CHECK(r_hat(s, 0) == doctest::Approx(1.0));
  }

  TEST_CASE("distinct constant chains give infinite R-hat") {
    std::vector<double> data(100, 0.0);
    std::fill(data.begin() + 50, data.end(), 1.0);
    CHECK(std::isinf(r_hat(ChainSamples::from_array(2, 50, 1, data), 0)));
  }

  TEST_CASE("R-hat on a hand-computed pair of chains") {
    // Chain means 2 and 5, within-chain variances 1 and 1 (I = 3).
    const ChainSamples s = ChainSamples::from_array(2, 3, 1, {1, 2, 3, 4, 5, 6});
    // W = 1, B = I·var(means) = 3·4.5 = 13.5, Var⁺ = 2/3 + 13.5/3 = 5.1667.
    CHECK(r_hat(s, 0) == doctest::Approx(std::sqrt(2.0 / 3.0 + 4.5)));
  }

  TEST_CASE("autocorrelation starts at 1 and follows an AR(1) decay") {
    const ChainSamples s = selftest::ar1_chains(4, 20000, 0.6, 3);
    const auto acf = autocorrelation(s, 0, 3);
    REQUIRE(acf.size() == 4u);
    CHECK(acf[0] == doctest::Approx(1.0));
    CHECK(acf[1] == doctest::Approx(0.6).epsilon(0.05));
    CHECK(acf[2] == doctest::Approx(0.36).epsilon(0.1));
  }

  TEST_CASE("AR(1) effective sample size") {
    const double phi = 0.5;
    const ChainSamples s = selftest::ar1_chains(4, 10000, phi, 4);
    CHECK(ess(s, 0) == doctest::Approx((1 - phi) / (1 + phi) * 40000).epsilon(0.15));
  }

  TEST_CASE("R-hat separates mixed and separated chains") {
    CHECK(r_hat(selftest::shifted_normal_chains({0, 0, 0, 0}, 2000, 5), 0) < 1.05);
    CHECK(r_hat(selftest::shifted_normal_chains({0, 10}, 2000, 6), 0) > 1.1);
  }

  TEST_CASE("two-state eigenvalue") {
    for (double p : {0.1, 0.3, 0.5, 0.9}) {
      Matrix t(2, 2);
      t << 1 - p, p, p, 1 - p;
      CHECK(second_largest_modulus(t) == doctest::Approx(std::abs(1 - 2 * p)).epsilon(1e-12));
    }
  }

  TEST_CASE("flip chain transition matrix and convergence rate") {
    const Constellation c = Constellation::build(4, 0.5);
    PriorConfig sharp;
    sharp.t_scale = 1e-6;
    const ChainSamples s = selftest::two_state_flip_chain(c.min_level(), c.max_level());
    const TransitionMatrix t = transition_matrix(s, c, sharp);
    CHECK(t.p(0, 1) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(t.p(1, 0) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(convergence_rate(s, c, sharp) == doctest::Approx(0.4).epsilon(1e-9));
  }

  TEST_CASE("unvisited components get uniform rows") {
    const Constellation c = Constellation::build(16, 0.5);
    PriorConfig sharp;
    sharp.t_scale = 1e-6;
    const ChainSamples s = ChainSamples::from_array(1, 4, 1, std::vector<double>(4, c.level(0)));
    const TransitionMatrix t = transition_matrix(s, c, sharp);
    for (int k = 0; k < 4; ++k) CHECK(t.p.row(k).sum() == doctest::Approx(1.0));
    CHECK_FALSE(t.empty_rows[0]);
    CHECK(t.empty_rows[2]);
    CHECK(t.p(2, 3) == doctest::Approx(0.25));
  }

  TEST_CASE("responsibilities sum to one per draw and dimension") {
    const Constellation c = Constellation::build(64, 0.5);
    PriorConfig p;
    p.t_scale = 0.0531;
    p.t_dof = 2.5;
    const ChainSamples s = selftest::ar1_chains(2, 30, 0.2, 7);
    const auto g = responsibilities(s, c, p);
    REQUIRE(g.size() == 2u * 30u * 8u);
    for (std::size_t i = 0; i < g.size(); i += 8) {
      double sum = 0.0;
      for (int k = 0; k < 8; ++k) sum += g[i + static_cast<std::size_t>(k)];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("soft SER vanishes on draws at the truth and bounds the hard SER") {
    const Constellation c = Constellation::build(4, 0.5);
    PriorConfig p;
    Vector truth(2);
    truth << 0.5, -0.5;
    const ChainSamples exact = ChainSamples::from_array(1, 2, 2, {0.5, -0.5, 0.5, -0.5});
    // Draws sitting on a level still give the other level the density ratio
    // r = (1 + d²/(νσ²))^(−(ν+1)/2) at distance d = 1.
    const double r = std::pow(1.0 + 1.0 / (p.t_dof * p.t_scale * p.t_scale), -(p.t_dof + 1.0) / 2.0);
    CHECK(soft_ser(exact, truth, c, p) == doctest::Approx(r / (1.0 + r)).epsilon(1e-10));
    CHECK(hard_ser_of_draws(exact, truth, c) == 0.0);
    const ChainSamples half = ChainSamples::from_array(1, 2, 2, {0.1, -0.5, -0.5, -0.5});
    CHECK(hard_ser_of_draws(half, truth, c) == doctest::Approx(0.25));
    CHECK(soft_ser(half, truth, c, p) > 0.25);
  }

  TEST_CASE("report aggregates per-dimension statistics") {
    const Constellation c = Constellation::build(4, 0.5);
    PriorConfig p;
    const ChainSamples s = selftest::ar1_chains(4, 500, 0.3, 8);
    const DiagnosticsReport r = diagnose(s, c, p, nullptr, 5);
    CHECK(r.acf.size() == 6u);
    CHECK(r.r_hat_max >= r.r_hat);
    CHECK(r.soft_ser < 0.0);
    CHECK(r.ess_per_chain == doctest::Approx(ess(s, 0) / 4));
    CHECK(r.conv_rate >= 0.0);
    CHECK(r.conv_rate <= 1.0);
  }
}
