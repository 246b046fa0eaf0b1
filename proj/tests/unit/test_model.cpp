#include "mimohmc/model.hpp"
#include "selftest/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mimohmc;

namespace {

RealLinearSystem small_system(std::uint64_t seed, double noise_var = 0.3) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  RealLinearSystem sys;
  sys.h = Matrix(6, 6);
  for (Eigen::Index i = 0; i < sys.h.size(); ++i) sys.h.data()[i] = g(rng);
  sys.y = Vector(6);
  for (auto& v : sys.y) v = g(rng);
  sys.noise_var = noise_var;
  return sys;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("Student-t log-density matches reference values") {
    CHECK(log_student_t(0.3, 0.5, 0.1242, 1.8) == doctest::Approx(-0.21552847706345846).epsilon(1e-12));
    CHECK(log_student_t(-1.0, 0.0, 0.0531, 2.5) == doctest::Approx(-6.764369208849637).epsilon(1e-12));
  }

  TEST_CASE("QPSK mixture prior matches a reference value") {
    const Constellation c = Constellation::build(4, 0.5);
    PriorConfig p;
    Vector u(1);
    u << 0.2;
    CHECK(log_prior_mixture_t(u, c, p) == doctest::Approx(-1.5638851000103937).epsilon(1e-12));
  }

  TEST_CASE("mixture prior: midpoint gradient vanishes and levels beat midpoints") {
    const Constellation c = Constellation::build(4, 0.5);
    const RealLinearSystem sys = small_system(1);
    PriorConfig p;
    p.likelihood_enabled = false;
    const PosteriorModel m(sys, c, p);
    Vector grad(6);
    m.log_density(Vector::Zero(6), grad);
    CHECK(grad.norm() < 1e-12);
    Vector at_level = Vector::Constant(6, 0.5);
    CHECK(m.log_density(at_level, grad) > m.log_density(Vector::Zero(6), grad));
  }

  TEST_CASE("degenerate weights reduce the mixture to one component") {
    const Constellation c = Constellation::build(4, 0.5);
    PriorConfig p;
    p.weights = Matrix(2, 2);
    p.weights << 0.0, 1.0, 0.0, 1.0;
    Vector u(2);
    u << 0.5, 0.5;
    CHECK(log_prior_mixture_t(u, c, p) == doctest::Approx(2 * log_student_t(0.5, 0.5, p.t_scale, p.t_dof)));
  }

  TEST_CASE("mixture stays finite far from the constellation") {
    const Constellation c = Constellation::build(64, 0.5);
    PriorConfig p;
    Vector u(2);
    u << 1e6, -1e6;
    CHECK(std::isfinite(log_prior_mixture_t(u, c, p)));
  }

  TEST_CASE("likelihood maximum and temperature identity") {
    RealLinearSystem sys = small_system(2);
    const Vector u = Vector::LinSpaced(6, -0.5, 0.5);
    sys.y = sys.h * u;
    AugmentedState s{u, Vector()};
    const double peak = -(6.0 / 2.0) * std::log(std::numbers::pi * sys.noise_var);
    CHECK(log_likelihood(s, sys) == doctest::Approx(peak));
    AugmentedState unit{u, Vector::Zero(6)};
    CHECK(log_likelihood(unit, sys) == doctest::Approx(peak));
    AugmentedState global{u, Vector::Zero(1)};
    CHECK(log_likelihood(global, sys, TemperatureMode::Global) == doctest::Approx(peak));
  }

  TEST_CASE("doubling the residual quadruples the quadratic term") {
    RealLinearSystem sys = small_system(3);
    const Vector u = Vector::Zero(6);
    const double base = log_likelihood({u, Vector()}, sys);
    const double r2 = sys.y.squaredNorm();
    sys.y *= 2.0;
    const double doubled = log_likelihood({u, Vector()}, sys);
    CHECK(base - doubled == doctest::Approx(3.0 * r2 / (2.0 * sys.real_noise_var())));
  }

  TEST_CASE("ridge prior value, gradient and monotonicity") {
    const Vector zero = Vector::Zero(4);
    CHECK(log_prior_ridge(zero, 0.3) == doctest::Approx(-2.0 * std::log(2 * std::numbers::pi * 0.3)));
    Vector u(4);
    u << 0.1, -0.2, 0.3, 0.0;
    CHECK(log_prior_ridge(u, 0.3) < log_prior_ridge(zero, 0.3));
    CHECK(log_prior_ridge(2 * u, 0.3) < log_prior_ridge(u, 0.3));
    const Constellation c = Constellation::build(4, 0.5);
    RealLinearSystem sys = small_system(4);
    sys.h = sys.h.topLeftCorner(4, 4).eval();
    sys.y = sys.y.head(4).eval();
    PriorConfig p;
    p.likelihood_enabled = false;
    p.mixture_enabled = false;
    p.ridge_enabled = true;
    p.ridge_var = 0.3;
    const PosteriorModel m(sys, c, p);
    Vector grad(4);
    m.log_density(u, grad);
    CHECK((grad + u / 0.3).norm() < 1e-12);
  }

  TEST_CASE("ridge variance from the largest singular value") {
    Matrix h = Matrix::Zero(3, 3);
    h.diagonal() << 2.0, 1.0, 0.5;
    CHECK(ridge_variance_from_svd(0.1, h, 15.0) == doctest::Approx(0.375));
    CHECK(ridge_variance_from_svd(0.2, Matrix::Identity(4, 4), 62.0) == doctest::Approx(0.2 * 62.0));
    CHECK_THROWS(ridge_variance_from_svd(0.1, Matrix::Zero(2, 2), 15.0));
    CHECK_THROWS(ridge_variance_from_svd(0.1, h, 1.0));
  }

  TEST_CASE("half-Cauchy with Jacobian at the scale point is −log π") {
    for (double s : {3.5, 5.0, 3.0}) {
      Vector l(1);
      l << std::log(s);
      CHECK(log_prior_half_cauchy(l, s) == doctest::Approx(-std::log(std::numbers::pi)));
    }
  }

  TEST_CASE("half-Cauchy in log space has an interior maximum at λ = scale") {
    const double s = 3.5;
    Vector l(1);
    double best = -1e300, arg = 0.0;
    for (double x = -5.0; x <= 5.0; x += 0.001) {
      l << x;
      const double v = log_prior_half_cauchy(l, s);
      if (v > best) best = v, arg = x;
    }
    CHECK(arg == doctest::Approx(std::log(s)).epsilon(1e-3));
  }

  TEST_CASE("tuned parameters per modulation") {
    CHECK(tuned_parameters(4).t_scale == 0.1242);
    CHECK(tuned_parameters(16).cauchy_scale == 5.0);
    CHECK(tuned_parameters(64).lambda_ridge == 230.0);
    CHECK(tuned_parameters(64).t_dof == 2.5);
    CHECK_THROWS(tuned_parameters(8));
  }

  TEST_CASE("posterior value is the sum of its terms") {
    const Constellation c = Constellation::build(16, 0.5);
    const RealLinearSystem sys = small_system(5);
    PriorConfig p;
    p.ridge_enabled = true;
    p.ridge_var = 0.7;
    p.temperature_enabled = true;
    const PosteriorModel m(sys, c, p);
    Rng rng = make_rng(6);
    for (int t = 0; t < 20; ++t) {
      const Vector x = m.initial_state(rng);
      Vector grad(m.dim());
      const double total = m.log_density(x, grad);
      const AugmentedState s = m.split(x);
      const double by_parts = log_likelihood(s, sys) + log_prior_mixture_t(s.u, c, p) + log_prior_ridge(s.u, 0.7) +
                              log_prior_half_cauchy(s.log_lambda, p.cauchy_scale);
      CHECK(std::abs(total - by_parts) < 1e-12 * std::max(1.0, std::abs(total)));
      CHECK(std::abs(m.terms(x).total() - total) < 1e-12 * std::max(1.0, std::abs(total)));
    }
  }

  TEST_CASE("likelihood-only gradient is the least-squares gradient") {
    const Constellation c = Constellation::build(4, 0.5);
    const RealLinearSystem sys = small_system(7);
    PriorConfig p;
    p.mixture_enabled = false;
    const PosteriorModel m(sys, c, p);
    const Vector u = Vector::LinSpaced(6, -1.0, 1.0);
    Vector grad(6);
    m.log_density(u, grad);
    const Vector ls = sys.h.transpose() * (sys.y - sys.h * u) / sys.real_noise_var();
    CHECK((grad - ls).norm() < 1e-10 * ls.norm());
  }

  TEST_CASE("ridge-only posterior mode equals the closed-form mean") {
    const Constellation c = Constellation::build(4, 0.5);
    const RealLinearSystem sys = small_system(8);
    PriorConfig p;
    p.mixture_enabled = false;
    p.ridge_enabled = true;
    p.ridge_var = 0.25;
    const PosteriorModel m(sys, c, p);
    const Vector mean = selftest::ridge_posterior(sys, 0.25).mean;
    Vector grad(6);
    m.log_density(mean, grad);
    CHECK(grad.norm() < 1e-9);
  }

  TEST_CASE("gradients match finite differences in every flag combination") {
    const Constellation c = Constellation::build(16, 0.5);
    const RealLinearSystem sys = small_system(9);
    Rng rng = make_rng(10);
    for (int flags = 0; flags < 16; ++flags) {
      PriorConfig p;
      p.t_scale = 0.3;
      p.mixture_enabled = flags & 1;
      p.ridge_enabled = flags & 2;
      p.temperature_enabled = flags & 4;
      p.temperature_mode = flags & 8 ? TemperatureMode::Global : TemperatureMode::PerDimension;
      p.ridge_var = 0.4;
      const PosteriorModel m(sys, c, p);
      for (int t = 0; t < 10; ++t) CHECK(selftest::gradient_relative_error(m, m.initial_state(rng)) < 1e-6);
    }
  }

  TEST_CASE("temperature dimensions follow the attachment mode") {
    const RealLinearSystem sys = small_system(11);
    PriorConfig p;
    CHECK(temperature_dims(sys, p) == 0);
    p.temperature_enabled = true;
    CHECK(temperature_dims(sys, p) == 6);
    p.temperature_mode = TemperatureMode::Global;
    CHECK(temperature_dims(sys, p) == 1);
  }

  TEST_CASE("non-finite evaluations name the offending term") {
    const Constellation c = Constellation::build(4, 0.5);
    const RealLinearSystem sys = small_system(12);
    PriorConfig p;
    AugmentedState s{Vector::Constant(6, std::nan("")), Vector()};
    try {
      log_posterior_and_grad(s, sys, c, p);
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      CHECK(!e.term().empty());
    }
  }
}
