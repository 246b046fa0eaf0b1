#include "mimohmc/channel.hpp"

#include <doctest.h>

#include <cmath>

using namespace mimohmc;

TEST_SUITE("channel") {
  TEST_CASE("noise variance follows SNR = N·P_t/σ²") {
    const ComplexSystemSpec spec{16, 16, 0.0, 10.0, 0.5};
    CHECK(spec.noise_var() == doctest::Approx(0.8));
    const ComplexSystemSpec zero_db{4, 8, 0.0, 0.0, 0.5};
    CHECK(zero_db.noise_var() == doctest::Approx(2.0));
  }

  TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS(ComplexSystemSpec{0, 4, 0.0, 10.0, 0.5}.validate());
    CHECK_THROWS(ComplexSystemSpec{4, 4, 1.0, 10.0, 0.5}.validate());
    CHECK_THROWS(ComplexSystemSpec{4, 4, 0.0, 10.0, 0.0}.validate());
  }

  TEST_CASE("real block form matches complex multiplication") {
    Rng rng = make_rng(3);
    const ComplexMatrix h = generate_channel({3, 5, 0.4, 10.0, 0.5}, rng);
    ComplexVector u(3);
    u << std::complex<double>(1, -2), std::complex<double>(0.5, 0.5), std::complex<double>(-1, 0);
    const Matrix hr = real_block(h);
    CHECK(hr.rows() == 10);
    CHECK(hr.cols() == 6);
    CHECK((hr * real_stack(u) - real_stack(h * u)).norm() < 1e-12);
  }

  TEST_CASE("stacking round-trips") {
    ComplexVector v(2);
    v << std::complex<double>(1, 2), std::complex<double>(-3, 4);
    const Vector s = real_stack(v);
    CHECK(s[0] == 1.0);
    CHECK(s[1] == -3.0);
    CHECK(s[2] == 2.0);
    CHECK(s[3] == 4.0);
    CHECK((complex_unstack(s) - v).norm() == 0.0);
  }

  TEST_CASE("exponential correlation and its square root") {
    const Matrix r = exponential_correlation(4, 0.5);
    CHECK(r(0, 3) == doctest::Approx(0.125));
    CHECK(r(2, 1) == doctest::Approx(0.5));
    const Matrix s = symmetric_sqrt(r);
    CHECK((s * s - r).norm() < 1e-12);
    CHECK((s - s.transpose()).norm() < 1e-14);
  }

  TEST_CASE("uncorrelated channel entries have unit power") {
    Rng rng = make_rng(5);
    double power = 0.0;
    const int reps = 400;
    for (int i = 0; i < reps; ++i) power += generate_channel({8, 8, 0.0, 0.0, 0.5}, rng).squaredNorm();
    CHECK(power / (reps * 64) == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("correlated channel covariance follows the Kronecker model") {
    Rng rng = make_rng(6);
    const double rho = 0.6;
    std::complex<double> c01 = 0.0;
    const int reps = 20000;
    for (int i = 0; i < reps; ++i) {
      const ComplexMatrix h = generate_channel({2, 2, rho, 0.0, 0.5}, rng);
      c01 += h(0, 0) * std::conj(h(0, 1));
    }
    CHECK(std::real(c01) / reps == doctest::Approx(rho).epsilon(0.05));
  }

  TEST_CASE("transmit adds noise of variance σ²/2 per real component") {
    Rng rng = make_rng(8);
    const Matrix h = Matrix::Identity(2000, 2000);
    const Vector u = Vector::Zero(2000);
    const Vector y = transmit(h, u, 0.6, rng);
    CHECK(y.squaredNorm() / 2000 == doctest::Approx(0.3).epsilon(0.1));
  }

  TEST_CASE("to_real keeps ground truth and noise convention") {
    ComplexMatrix h = ComplexMatrix::Identity(2, 2);
    ComplexVector u(2);
    u << std::complex<double>(0.5, -0.5), std::complex<double>(-0.5, 0.5);
    const RealLinearSystem sys = to_real(h * u, h, u, 0.2);
    REQUIRE(sys.u_true);
    CHECK((sys.y - *sys.u_true).norm() == 0.0);
    CHECK(sys.real_noise_var() == doctest::Approx(0.1));
  }

  TEST_CASE("channel-estimation error inflates the noise") {
    const double v = effective_noise_variance(0.8, 16, 0.5);
    CHECK(v == doctest::Approx(0.8 * (1.0 + 1.0 / (1.0 + 0.8 / 16.0))));
    CHECK(v > 0.8);
    CHECK(v < 1.6);
  }
}
