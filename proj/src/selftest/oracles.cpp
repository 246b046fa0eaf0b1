#include "selftest/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mimohmc::selftest {

double gradient_relative_error(const LogDensity& target, const Vector& x, double step) {
  Vector grad(target.dim());
  target.log_density(x, grad);
  Vector scratch(target.dim());
  Vector probe = x;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = target.log_density(probe, scratch);
    probe[i] = x[i] - step;
    const double down = target.log_density(probe, scratch);
    probe[i] = x[i];
    worst = std::max(worst, std::abs((up - down) / (2.0 * step) - grad[i]));
  }
  return worst / std::max(grad.lpNorm<Eigen::Infinity>(), 1e-300);
}

GaussianPosterior ridge_posterior(const RealLinearSystem& sys, double ridge_var) {
  const double v = sys.real_noise_var();
  const auto n = sys.tx_dims();
  const Matrix precision = sys.h.transpose() * sys.h / v + Matrix::Identity(n, n) / ridge_var;
  GaussianPosterior out;
  out.cov = precision.inverse();
  out.mean = out.cov * (sys.h.transpose() * sys.y) / v;
  return out;
}

Vector mmse_by_inverse(const RealLinearSystem& sys, double avg_power) {
  const auto n = sys.tx_dims();
  const Matrix a = sys.h.transpose() * sys.h + (sys.noise_var / avg_power) * Matrix::Identity(n, n);
  return a.inverse() * (sys.h.transpose() * sys.y);
}

double binomial_upper_tail(int k, int n) {
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  double total = 0.0;
  for (int i = k; i <= n; ++i)
    total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(total, 1.0);
}

SignTest sign_test(int wins, int losses) {
  return {wins, losses, binomial_upper_tail(wins, wins + losses)};
}

ChainSamples ar1_chains(int chains, int steps, double phi, std::uint64_t seed) {
  if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("ar1_chains: |phi| must be < 1");
  std::vector<double> data(static_cast<std::size_t>(chains) * steps);
  for (int j = 0; j < chains; ++j) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(j));
    std::normal_distribution<double> e(0.0, 1.0);
    double x = e(rng) / std::sqrt(1.0 - phi * phi);
    for (int i = 0; i < steps; ++i) {
      x = phi * x + e(rng);
      data[static_cast<std::size_t>(j) * steps + i] = x;
    }
  }
  return ChainSamples::from_array(chains, steps, 1, std::move(data));
}

ChainSamples shifted_normal_chains(const std::vector<double>& means, int steps, std::uint64_t seed) {
  const int chains = static_cast<int>(means.size());
  std::vector<double> data(static_cast<std::size_t>(chains) * steps);
  for (int j = 0; j < chains; ++j) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(j));
    std::normal_distribution<double> e(means[static_cast<std::size_t>(j)], 1.0);
    for (int i = 0; i < steps; ++i) data[static_cast<std::size_t>(j) * steps + i] = e(rng);
  }
  return ChainSamples::from_array(chains, steps, 1, std::move(data));
}

ChainSamples two_state_flip_chain(double level_a, double level_b) {
  std::vector<double> data;
  const int runs[] = {3, 3, 3, 3, 4, 4, 1};
  for (int r = 0; r < 7; ++r) data.insert(data.end(), static_cast<std::size_t>(runs[r]), r % 2 == 0 ? level_a : level_b);
  const int steps = static_cast<int>(data.size());
  return ChainSamples::from_array(1, steps, 1, std::move(data));
}

double half_cauchy_tail(double q) { return 1.0 - 2.0 / std::numbers::pi * std::atan(q); }

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("log_log_slope: need two or more points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace mimohmc::selftest
