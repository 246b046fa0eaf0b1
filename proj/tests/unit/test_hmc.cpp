#include "mimohmc/diagnostics.hpp"
#include "mimohmc/hmc.hpp"

#include <doctest.h>

#include <cmath>

using namespace mimohmc;

namespace {

FunctionDensity standard_normal(int dim) {
  return FunctionDensity(dim, [](const Vector& x, Vector& g) {
    g = -x;
    return -0.5 * x.squaredNorm();
  });
}

FunctionDensity scaled_normal(const Vector& sd) {
  return FunctionDensity(sd.size(), [sd](const Vector& x, Vector& g) {
    const Vector z = x.cwiseQuotient(sd);
    g = -z.cwiseQuotient(sd);
    return -0.5 * z.squaredNorm();
  });
}

struct Moments {
  Vector mean;
  Vector var;
};

Moments moments(const ChainSamples& s) {
  Moments m{Vector::Zero(s.dims), Vector::Zero(s.dims)};
  for (int j = 0; j < s.chains; ++j)
    for (int i = 0; i < s.steps; ++i) m.mean += s.draw_vector(j, i);
  m.mean /= static_cast<double>(s.total_draws());
  for (int j = 0; j < s.chains; ++j)
    for (int i = 0; i < s.steps; ++i) m.var += (s.draw_vector(j, i) - m.mean).cwiseAbs2();
  m.var /= static_cast<double>(s.total_draws());
  return m;
}

}  // namespace

TEST_SUITE("hmc") {
  TEST_CASE("detection budget") {
    const HmcConfig c96 = HmcConfig::detection_default(96, false);
    CHECK(c96.steps_per_chain == 192);
    CHECK(c96.n_chains == 5);
    CHECK(c96.warmup == 12);
    const HmcConfig c2 = HmcConfig::detection_default(2, true);
    CHECK(c2.warmup == 24);
    CHECK(c2.steps_per_chain == 32);
    CHECK(c2.n_chains == 31);
  }

  TEST_CASE("invalid configurations are rejected") {
    HmcConfig c;
    c.warmup = c.steps_per_chain;
    CHECK_THROWS(c.validate());
    c = HmcConfig{};
    c.n_chains = 0;
    CHECK_THROWS(c.validate());
    c = HmcConfig{};
    c.target_accept = 1.0;
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("leapfrog is time-reversible") {
    const FunctionDensity target = scaled_normal(Vector::LinSpaced(4, 0.5, 2.0));
    PhasePoint z = make_point(target, Vector::LinSpaced(4, -1.0, 1.0));
    const Vector x0 = z.x;
    Vector r = Vector::LinSpaced(4, 0.3, -0.3);
    const Vector r0 = r;
    REQUIRE(leapfrog(target, z, r, 0.1, 25));
    r = -r;
    REQUIRE(leapfrog(target, z, r, 0.1, 25));
    CHECK((z.x - x0).norm() < 1e-12);
    CHECK((-r - r0).norm() < 1e-12);
  }

  TEST_CASE("leapfrog energy error shrinks quadratically with the step") {
    const FunctionDensity target = standard_normal(3);
    auto energy_error = [&](double eps) {
      PhasePoint z = make_point(target, Vector::Constant(3, 1.0));
      Vector r = Vector::Constant(3, 0.5);
      const double h0 = -z.logp + 0.5 * r.squaredNorm();
      leapfrog(target, z, r, eps, static_cast<int>(std::lround(1.0 / eps)));
      return std::abs(-z.logp + 0.5 * r.squaredNorm() - h0);
    };
    const double ratio = energy_error(0.1) / energy_error(0.05);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.15));
  }

  TEST_CASE("leapfrog reports non-finite densities") {
    const FunctionDensity cliff(1, [](const Vector& x, Vector& g) {
      g = -x;
      return x[0] > 1.0 ? std::nan("") : -0.5 * x.squaredNorm();
    });
    PhasePoint z = make_point(cliff, Vector::Zero(1));
    Vector r = Vector::Constant(1, 10.0);
    CHECK_FALSE(leapfrog(cliff, z, r, 0.2, 5));
  }

  TEST_CASE("flat potential never turns around") {
    const FunctionDensity flat(2, [](const Vector&, Vector& g) {
      g.setZero();
      return 0.0;
    });
    PhasePoint z = make_point(flat, Vector::Zero(2));
    Rng rng = make_rng(1);
    const TransitionInfo info = nuts_step(flat, z, 0.1, 5, rng);
    CHECK(info.max_depth_hit);
    CHECK(info.depth == 5);
    CHECK(info.n_leapfrog == 31);
  }

  TEST_CASE("divergence threshold flags a blown-up trajectory") {
    const FunctionDensity steep(1, [](const Vector& x, Vector& g) {
      g = -1e6 * x;
      return -0.5e6 * x.squaredNorm();
    });
    PhasePoint z = make_point(steep, Vector::Constant(1, 0.1));
    Rng rng = make_rng(2);
    CHECK(nuts_step(steep, z, 1.0, 6, rng).diverged);
  }

  TEST_CASE("reasonable step size is positive and brackets acceptance 1/2") {
    const FunctionDensity target = scaled_normal(Vector::Constant(5, 0.01));
    Rng rng = make_rng(3);
    const double eps = find_reasonable_step_size(target, make_point(target, Vector::Zero(5)), 1.0, rng);
    CHECK(eps > 0.0);
    CHECK(eps < 0.1);
  }

  TEST_CASE("dual averaging settles on the target acceptance") {
    DualAveraging da(1.0, 0.8);
    // Acceptance falls with the step size: a(ε) = exp(−ε).
    double eps = da.current();
    for (int i = 0; i < 2000; ++i) eps = da.update(std::exp(-eps));
    CHECK(da.final_step() == doctest::Approx(-std::log(0.8)).epsilon(0.02));
  }

  TEST_CASE("NUTS recovers standard normal moments") {
    const FunctionDensity target = standard_normal(5);
    HmcConfig cfg;
    cfg.n_chains = 4;
    cfg.steps_per_chain = 1500;
    cfg.warmup = 300;
    cfg.seed = 4;
    const ChainSamples s = run_chains(target, cfg);
    const Moments m = moments(s);
    CHECK(m.mean.cwiseAbs().maxCoeff() < 0.1);
    CHECK((m.var.array() - 1.0).abs().maxCoeff() < 0.1);
    CHECK(s.mean_accept() == doctest::Approx(0.8).epsilon(0.12));
    CHECK(s.divergences == 0);
  }

  TEST_CASE("static HMC recovers scaled normal moments") {
    Vector sd(3);
    sd << 0.5, 1.0, 1.5;
    const FunctionDensity target = scaled_normal(sd);
    HmcConfig cfg;
    cfg.engine = Engine::StaticHmc;
    cfg.n_chains = 4;
    cfg.steps_per_chain = 3000;
    cfg.warmup = 300;
    cfg.seed = 5;
    cfg.leapfrog_steps = 7;
    const Moments m = moments(run_chains(target, cfg));
    for (int d = 0; d < 3; ++d) CHECK(m.var[d] == doctest::Approx(sd[d] * sd[d]).epsilon(0.12));
  }

  TEST_CASE("a trajectory of one full period stalls that coordinate") {
    // The adapted step is close to 0.6, so ten steps span about 2π and the
    // unit-scale coordinate returns to where it started.
    Vector sd(3);
    sd << 0.5, 1.0, 1.5;
    HmcConfig cfg;
    cfg.engine = Engine::StaticHmc;
    cfg.n_chains = 4;
    cfg.steps_per_chain = 3000;
    cfg.warmup = 300;
    cfg.seed = 5;
    const ChainSamples s = run_chains(scaled_normal(sd), cfg);
    CHECK(ess(s, 1) < 500.0);
    CHECK(ess(s, 2) > 5000.0);
  }

  TEST_CASE("chains are reproducible and independent of thread count") {
    const FunctionDensity target = standard_normal(3);
    HmcConfig cfg;
    cfg.n_chains = 3;
    cfg.steps_per_chain = 60;
    cfg.warmup = 20;
    cfg.seed = 6;
    const ChainSamples a = run_chains(target, cfg);
    const ChainSamples b = run_chains(target, cfg);
    cfg.threads = 3;
    const ChainSamples c = run_chains(target, cfg);
    CHECK(a.draws == b.draws);
    CHECK(a.draws == c.draws);
    CHECK(a.step_size == c.step_size);
    cfg.seed = 7;
    CHECK(run_chains(target, cfg).draws != a.draws);
  }

  TEST_CASE("sample layout and auxiliary-dimension slicing") {
    const FunctionDensity target = standard_normal(4);
    HmcConfig cfg;
    cfg.n_chains = 2;
    cfg.steps_per_chain = 30;
    cfg.warmup = 10;
    cfg.keep_warmup = true;
    const ChainSamples s = run_chains(target, cfg);
    CHECK(s.chains == 2);
    CHECK(s.steps == 20);
    CHECK(s.draws.size() == 2u * 20u * 4u);
    CHECK(s.warmup_draws.size() == 2u * 10u * 4u);
    CHECK(s.accept_stat.size() == 40u);
    const ChainSamples head = s.head_dims(2);
    CHECK(head.dims == 2);
    CHECK(head.draw(1, 5, 1) == s.draw(1, 5, 1));
    CHECK(head.warmup_draws.size() == 2u * 10u * 2u);
  }

  TEST_CASE("draws from different chains are uncorrelated") {
    const FunctionDensity target = standard_normal(1);
    HmcConfig cfg;
    cfg.n_chains = 2;
    cfg.steps_per_chain = 2200;
    cfg.warmup = 200;
    cfg.seed = 8;
    const ChainSamples s = run_chains(target, cfg);
    double xy = 0.0;
    for (int i = 0; i < s.steps; ++i) xy += s.draw(0, i, 0) * s.draw(1, i, 0);
    const double corr = xy / s.steps;
    CHECK(std::abs(corr) < 3.0 * 2.0 / std::sqrt(static_cast<double>(s.steps)));
  }
}
