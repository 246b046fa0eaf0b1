#pragma once

#include "mimohmc/channel.hpp"
#include "mimohmc/constellation.hpp"
#include "mimohmc/hmc.hpp"
#include "mimohmc/model.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace mimohmc {

enum class DetectorKind { Mmse, Mgs, Ep, HmcUncoded, HmcCodedInitial, HmcCodedSubsequent };

/// Lower-case identifier used on the command line and in CSV output:
/// mmse, mgs, ep, hmc, hmc_coded_initial, hmc_coded_subsequent.
std::string detector_name(DetectorKind kind);
/// Inverse of detector_name; also accepts "hmc_uncoded". Throws std::invalid_argument.
DetectorKind parse_detector(const std::string& name);
bool is_hmc(DetectorKind kind);

struct DetectorConfig {
  DetectorKind kind = DetectorKind::Mmse;
  int mgs_steps = 0;        // sweeps per restart; 0 means 8·N·K
  int mgs_restarts = 0;     // 0 means ⌈10000 / L_MGS⌉
  double mgs_restart_prob = -1.0;  // < 0 means 1/(2N)
  int ep_iterations = 10;
  double ep_damping = 0.7;  // weight of the new site parameters
  double ep_min_var = 1e-8;
  HmcConfig hmc;
  PriorConfig prior;        // t_scale, t_dof, cauchy_scale and temperature_mode are read from here
  double lambda_ridge = 15.0;

  void validate() const;

  /// Defaults for one modulation/size: tuned prior parameters and the
  /// detection chain budget.
  static DetectorConfig defaults(DetectorKind kind, int n_tx, const Constellation& c);
};

struct DetectionResult {
  Vector u_soft;
  Vector u_hard;
  std::vector<int> hard_indices;
  Vector u_var;  // per-dimension posterior variance estimate, empty if unavailable
  std::optional<ChainSamples> samples;  // u coordinates only
  bool degraded = false;                // more than half of the transitions diverged
  int iterations = 0;
};

/// (HᵀH + (σ_w²/P_t)·I)⁻¹ Hᵀy.
DetectionResult detect_mmse(const RealLinearSystem& sys, double avg_power);

/// Gibbs sampling over the discrete symbol prior with random restarts of
/// each coordinate; returns the highest-likelihood state over all restarts.
DetectionResult detect_mgs(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg,
                           std::uint64_t seed);

/// Expectation propagation with a factorized Gaussian approximation of the
/// discrete prior.
DetectionResult detect_ep(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg);

/// Index of the draw whose quantization has the highest likelihood.
/// Ties go to the first occurrence.
std::size_t joint_posterior_index(const ChainSamples& samples, const RealLinearSystem& sys, const Constellation& c);
Vector joint_posterior_select(const ChainSamples& samples, const RealLinearSystem& sys, const Constellation& c);
Vector marginal_posterior_mean(const ChainSamples& samples);
Vector marginal_posterior_var(const ChainSamples& samples);

/// HMC detection in the mode given by cfg.kind. `llr_feedback` must be
/// present exactly in the coded subsequent mode.
DetectionResult detect_hmc(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg,
                           std::uint64_t seed, const std::optional<LlrVector>& llr_feedback = std::nullopt);

/// Prior configuration detect_hmc builds for the given mode.
PriorConfig hmc_prior_for(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg,
                          const std::optional<LlrVector>& llr_feedback);

/// Dispatches on cfg.kind.
DetectionResult detect(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg,
                       std::uint64_t seed, const std::optional<LlrVector>& llr_feedback = std::nullopt);

/// Exhaustive ML over all K^(2N) lattice points. Only for small problems
/// (throws std::invalid_argument above 2^22 candidates).
Vector exhaustive_ml(const RealLinearSystem& sys, const Constellation& c);

/// ‖y − H·u‖² from cached Gram quantities.
class ResidualCache {
 public:
  explicit ResidualCache(const RealLinearSystem& sys);
  double squared_residual(const Vector& u) const;

 private:
  Matrix gram_;
  Vector hty_;
  double yty_;
};

}  // namespace mimohmc
