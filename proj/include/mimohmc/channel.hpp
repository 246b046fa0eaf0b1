#pragma once

#include "mimohmc/common.hpp"

#include <optional>

namespace mimohmc {

/// Complex-baseband MIMO configuration.
///
/// Noise convention used across the library: `noise_var` (σ_w²) is the
/// variance per complex receive component, so each real component carries
/// σ_w²/2, and the average received SNR per receive antenna is
/// SNR = N·P_t / σ_w².
struct ComplexSystemSpec {
  int n_tx = 1;
  int n_rx = 1;
  double rho = 0.0;
  double snr_db = 10.0;
  double avg_tx_power = 0.5;

  void validate() const;
  /// σ_w² implied by `snr_db`.
  double noise_var() const;
};

/// Real-valued y = H·u + w after stacking real over imaginary parts.
struct RealLinearSystem {
  Vector y;
  Matrix h;
  std::optional<Vector> u_true;
  double noise_var = 1.0;  // σ_w², complex convention

  Eigen::Index rx_dims() const { return h.rows(); }
  Eigen::Index tx_dims() const { return h.cols(); }
  /// Variance of each real noise component (σ_w²/2).
  double real_noise_var() const { return 0.5 * noise_var; }
};

/// Exponential correlation profile R_ij = rho^|i-j|.
Matrix exponential_correlation(int n, double rho);

/// Symmetric square root of a symmetric positive semi-definite matrix.
Matrix symmetric_sqrt(const Matrix& r);

/// M×N channel with CN(0,1) entries, Kronecker-correlated when rho > 0:
/// H = R_rx^{1/2} G R_tx^{1/2}.
ComplexMatrix generate_channel(const ComplexSystemSpec& spec, Rng& rng);

/// Real block form [[Re H, -Im H], [Im H, Re H]].
Matrix real_block(const ComplexMatrix& h);
/// Stacks [Re v; Im v].
Vector real_stack(const ComplexVector& v);
/// Inverse of real_stack.
ComplexVector complex_unstack(const Vector& v);

/// Complex→real decomposition of a full instance. `u_c` may be empty when
/// no ground truth is known.
RealLinearSystem to_real(const ComplexVector& y_c, const ComplexMatrix& h_c, const ComplexVector& u_c,
                         double noise_var);

/// y = h·u + w, w_i ~ N(0, noise_var/2) independently.
Vector transmit(const Matrix& h, const Vector& u, double noise_var, Rng& rng);

/// Noise variance inflated by MMSE channel-estimation error with orthogonal
/// pilots of length 2N: σ_w²·[1 + 1/(1 + σ_w²/(2N·P_t))].
double effective_noise_variance(double noise_var, int n_tx, double avg_tx_power);

}  // namespace mimohmc
