#pragma once

// Independent reference computations used by the acceptance checks. Nothing
// here calls into the sampler; each oracle is a closed form or a brute-force
// evaluation that the library's fast paths are compared against.

#include "mimohmc/channel.hpp"
#include "mimohmc/hmc.hpp"
#include "mimohmc/model.hpp"

#include <cstdint>
#include <vector>

namespace mimohmc::selftest {

/// Largest |analytic − central difference| over all coordinates, divided by
/// max(‖analytic‖∞, 1e-300).
double gradient_relative_error(const LogDensity& target, const Vector& x, double step = 1e-5);

/// Gaussian posterior of the likelihood combined with a ridge prior:
/// precision A = HᵀH/(σ_w²/2) + I/ridge_var, mean A⁻¹Hᵀy/(σ_w²/2).
struct GaussianPosterior {
  Vector mean;
  Matrix cov;
};
GaussianPosterior ridge_posterior(const RealLinearSystem& sys, double ridge_var);

/// (HᵀH + (σ_w²/P_t)·I)⁻¹Hᵀy through an explicit inverse.
Vector mmse_by_inverse(const RealLinearSystem& sys, double avg_power);

/// P(X ≥ k) for X ~ Binomial(n, 1/2).
double binomial_upper_tail(int k, int n);

/// One-sided sign test: `wins` successes among `wins + losses` untied pairs.
struct SignTest {
  int wins = 0;
  int losses = 0;
  double p_value = 1.0;
};
SignTest sign_test(int wins, int losses);

/// J chains of I steps of x_t = φ·x_{t−1} + e_t with unit innovations,
/// started from the stationary distribution.
ChainSamples ar1_chains(int chains, int steps, double phi, std::uint64_t seed);

/// Chains of I i.i.d. standard normal draws shifted by the given means.
ChainSamples shifted_normal_chains(const std::vector<double>& means, int steps, std::uint64_t seed);

/// One-dimensional chain visiting the two QPSK levels in the run pattern
/// A³B³A³B³A⁴B⁴A: every level is left with frequency exactly 3/10.
ChainSamples two_state_flip_chain(double level_a, double level_b);

/// P(λ > q·scale) for λ ~ C⁺(0, scale).
double half_cauchy_tail(double q);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mimohmc::selftest
