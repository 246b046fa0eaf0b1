#pragma once

#include "mimohmc/channel.hpp"
#include "mimohmc/constellation.hpp"
#include "mimohmc/density.hpp"

#include <string>

namespace mimohmc {

/// How likelihood temperature coefficients attach to the residual.
enum class TemperatureMode {
  PerDimension,  // one λ per real receive dimension
  Global,        // a single λ shared by every residual component
};

/// Prior and likelihood switches for the posterior over (u, ln λ).
struct PriorConfig {
  bool likelihood_enabled = true;  // false samples the prior alone

  // Weighted mixture of Student-t components centred on the levels.
  bool mixture_enabled = true;
  double t_scale = 0.1242;  // σ
  double t_dof = 1.8;       // ν
  /// Per-dimension weights, rows × K. Empty means uniform 1/K everywhere.
  Matrix weights;

  // Zero-mean Gaussian (ridge) prior; variance per real component.
  bool ridge_enabled = false;
  double ridge_var = 1.0;

  // Likelihood temperature augmentation with a half-Cauchy prior on λ.
  bool temperature_enabled = false;
  TemperatureMode temperature_mode = TemperatureMode::PerDimension;
  double cauchy_scale = 3.5;

  void validate(Eigen::Index dims, int levels) const;
};

/// Tuned prior parameters for one modulation.
struct TunedParameters {
  double t_scale;
  double t_dof;
  double cauchy_scale;
  double lambda_ridge;
};

/// Preliminary-search values keyed by QAM order (4, 16, 64).
TunedParameters tuned_parameters(int order);

struct AugmentedState {
  Vector u;
  Vector log_lambda;  // empty unless temperature augmentation is on
};

/// Individually evaluated log-posterior contributions.
struct PosteriorTerms {
  double likelihood = 0.0;
  double mixture = 0.0;
  double ridge = 0.0;
  double half_cauchy = 0.0;
  double total() const { return likelihood + mixture + ridge + half_cauchy; }
};

/// Gaussian log-likelihood with per-component variance σ_w²/2, optionally
/// with each residual component's standard deviation scaled by λ.
double log_likelihood(const AugmentedState& state, const RealLinearSystem& sys,
                      TemperatureMode mode = TemperatureMode::PerDimension);

/// log of Π_n Σ_k ω_{n,k} T(u_n; s_k, σ, ν).
double log_prior_mixture_t(const Vector& u, const Constellation& c, const PriorConfig& cfg);
double log_student_t(double x, double loc, double scale, double dof);

/// log N(u; 0, ridge_var·I).
double log_prior_ridge(const Vector& u, double ridge_var);

/// σ_w² / (σ_max(H)² / λ_ridge). Requires lambda_ridge > 1.
double ridge_variance_from_svd(double noise_var, const Matrix& h, double lambda_ridge);

/// Σ_n [log C⁺(e^{ℓ_n}; 0, scale) + ℓ_n]: half-Cauchy on λ including the
/// Jacobian of the log transform.
double log_prior_half_cauchy(const Vector& log_lambda, double cauchy_scale);

/// Number of temperature coefficients implied by cfg for this system.
Eigen::Index temperature_dims(const RealLinearSystem& sys, const PriorConfig& cfg);

/// Sampled posterior over the flat state x = [u; ln λ]. Caches HᵀH and Hᵀy
/// so the unaugmented gradient costs O((2N)²).
class PosteriorModel final : public LogDensity {
 public:
  PosteriorModel(const RealLinearSystem& sys, const Constellation& c, PriorConfig cfg);

  Eigen::Index dim() const override { return u_dims_ + lambda_dims_; }
  double log_density(const Vector& x, Vector& grad) const override;
  /// u uniform over [min level, max level]; ln λ uniform over (−2, 2).
  Vector initial_state(Rng& rng) const override;

  Eigen::Index u_dims() const { return u_dims_; }
  Eigen::Index lambda_dims() const { return lambda_dims_; }
  AugmentedState split(const Vector& x) const;
  Vector join(const AugmentedState& s) const;

  PosteriorTerms terms(const Vector& x) const;
  const PriorConfig& config() const { return cfg_; }
  const RealLinearSystem& system() const { return sys_; }
  const Constellation& constellation() const { return c_; }

  /// Component log-weights (dims × K); −inf marks excluded components.
  const Matrix& log_weights() const { return log_weights_; }

 private:
  double mixture_term(Eigen::Ref<const Vector> u, Eigen::Ref<Vector> grad_u) const;

  RealLinearSystem sys_;
  Constellation c_;
  PriorConfig cfg_;
  Eigen::Index u_dims_;
  Eigen::Index lambda_dims_;
  Matrix gram_;   // HᵀH
  Vector hty_;    // Hᵀy
  double yty_;
  double real_var_;
  double log_norm_;  // −(2M/2)·log(2π·real_var)
  double t_log_const_;
  Matrix log_weights_;
};

/// Value and analytic gradient over the flat augmented state. Throws
/// NonFiniteError naming the first non-finite term.
std::pair<double, Vector> log_posterior_and_grad(const AugmentedState& state, const RealLinearSystem& sys,
                                                 const Constellation& c, const PriorConfig& cfg);

}  // namespace mimohmc
