#include "mimohmc/channel.hpp"

#include <cmath>

namespace mimohmc {

void ComplexSystemSpec::validate() const {
  if (n_tx < 1) throw std::invalid_argument("n_tx must be >= 1");
  if (n_rx < 1) throw std::invalid_argument("n_rx must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in [0, 1)");
  if (!(avg_tx_power > 0.0)) throw std::invalid_argument("avg_tx_power must be > 0");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
}

double ComplexSystemSpec::noise_var() const {
  return static_cast<double>(n_tx) * avg_tx_power / std::pow(10.0, snr_db / 10.0);
}

Matrix exponential_correlation(int n, double rho) {
  Matrix r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(i, j) = std::pow(rho, std::abs(i - j));
  return r;
}

Matrix symmetric_sqrt(const Matrix& r) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(r);
  Vector d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

ComplexMatrix generate_channel(const ComplexSystemSpec& spec, Rng& rng) {
  spec.validate();
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  ComplexMatrix g(spec.n_rx, spec.n_tx);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = {re, im};
    }
  if (spec.rho == 0.0) return g;
  const Matrix rx_half = symmetric_sqrt(exponential_correlation(spec.n_rx, spec.rho));
  const Matrix tx_half = symmetric_sqrt(exponential_correlation(spec.n_tx, spec.rho));
  return rx_half.cast<std::complex<double>>() * g * tx_half.cast<std::complex<double>>();
}

Matrix real_block(const ComplexMatrix& h) {
  const Eigen::Index m = h.rows();
  const Eigen::Index n = h.cols();
  Matrix out(2 * m, 2 * n);
  out.topLeftCorner(m, n) = h.real();
  out.topRightCorner(m, n) = -h.imag();
  out.bottomLeftCorner(m, n) = h.imag();
  out.bottomRightCorner(m, n) = h.real();
  return out;
}

Vector real_stack(const ComplexVector& v) {
  Vector out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

ComplexVector complex_unstack(const Vector& v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("complex_unstack: odd length");
  const Eigen::Index n = v.size() / 2;
  ComplexVector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = {v[i], v[n + i]};
  return out;
}

RealLinearSystem to_real(const ComplexVector& y_c, const ComplexMatrix& h_c, const ComplexVector& u_c,
                         double noise_var) {
  if (y_c.size() != h_c.rows())
    throw std::invalid_argument("to_real: y has " + std::to_string(y_c.size()) + " entries, H has " +
                                std::to_string(h_c.rows()) + " rows");
  if (u_c.size() != 0 && u_c.size() != h_c.cols())
    throw std::invalid_argument("to_real: u has " + std::to_string(u_c.size()) + " entries, H has " +
                                std::to_string(h_c.cols()) + " columns");
  RealLinearSystem sys;
  sys.y = real_stack(y_c);
  sys.h = real_block(h_c);
  if (u_c.size() != 0) sys.u_true = real_stack(u_c);
  sys.noise_var = noise_var;
  return sys;
}

Vector transmit(const Matrix& h, const Vector& u, double noise_var, Rng& rng) {
  if (h.cols() != u.size()) throw std::invalid_argument("transmit: dimension mismatch");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("transmit: noise_var must be >= 0");
  Vector y = h * u;
  if (noise_var == 0.0) return y;
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * noise_var));
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += normal(rng);
  return y;
}

double effective_noise_variance(double noise_var, int n_tx, double avg_tx_power) {
  if (!(noise_var > 0.0) || n_tx < 1 || !(avg_tx_power > 0.0))
    throw std::invalid_argument("effective_noise_variance: inputs must be positive");
  const double pilot_energy = 2.0 * static_cast<double>(n_tx) * avg_tx_power;
  return noise_var * (1.0 + 1.0 / (1.0 + noise_var / pilot_energy));
}

}  // namespace mimohmc
