#pragma once

#include "mimohmc/density.hpp"

#include <cstdint>
#include <vector>

namespace mimohmc {

enum class Engine { Nuts, StaticHmc };

struct HmcConfig {
  int n_chains = 4;
  int steps_per_chain = 200;  // includes warm-up
  int warmup = 100;
  int max_tree_depth = 10;
  double target_accept = 0.8;
  int leapfrog_steps = 10;  // StaticHmc only
  Engine engine = Engine::Nuts;
  std::uint64_t seed = 0;
  double divergence_threshold = 1000.0;
  double initial_step_size = 0.0;  // <= 0 runs the step-size search
  bool adapt_step_size = true;
  bool keep_warmup = false;
  int threads = 1;

  void validate() const;

  /// Budget used for detection: ⌊1000/steps⌋ chains of max(2N, warmup + 8)
  /// steps, with 12 (uncoded) or 24 (coded) warm-up steps and trees of at
  /// most 2^6 leapfrog steps.
  static HmcConfig detection_default(int n_tx, bool coded);
};

/// A point of the target with its cached log-density and gradient.
struct PhasePoint {
  Vector x;
  Vector grad;
  double logp = 0.0;
};

/// Post-warm-up draws stored as [chain][step][dim].
struct ChainSamples {
  int chains = 0;
  int steps = 0;  // post-warm-up steps per chain
  int dims = 0;
  int warmup = 0;
  std::vector<double> draws;
  std::vector<double> warmup_draws;  // filled when keep_warmup is set
  std::vector<double> accept_stat;   // [chain][step], post-warm-up
  std::vector<std::vector<double>> step_size_trace;  // per chain, every iteration
  std::vector<double> step_size;                     // per chain, after adaptation
  int divergences = 0;          // post-warm-up
  int warmup_divergences = 0;
  int max_depth_hits = 0;
  long long gradient_evaluations = 0;

  double draw(int chain, int step, int dim) const {
    return draws[(static_cast<std::size_t>(chain) * steps + step) * dims + dim];
  }
  Eigen::Map<const Vector> draw_vector(int chain, int step) const {
    return {draws.data() + (static_cast<std::size_t>(chain) * steps + step) * dims, dims};
  }
  std::size_t total_draws() const { return static_cast<std::size_t>(chains) * steps; }
  double mean_accept() const;
  double divergent_fraction() const;
  /// Keeps only the first `keep` dimensions (drops auxiliary coordinates).
  ChainSamples head_dims(int keep) const;
  /// Builds from a dense [chain][step][dim] array.
  static ChainSamples from_array(int chains, int steps, int dims, std::vector<double> data);
};

struct TransitionInfo {
  double accept_stat = 0.0;
  bool accepted = false;
  bool diverged = false;
  bool max_depth_hit = false;
  int depth = 0;
  int n_leapfrog = 0;
};

/// Runs n_steps leapfrog steps in place: half kick, drift, half kick.
/// Returns false if the density or gradient became non-finite.
bool leapfrog(const LogDensity& target, PhasePoint& z, Vector& momentum, double eps, int n_steps);

PhasePoint make_point(const LogDensity& target, const Vector& x);

/// One fixed-length HMC transition with Metropolis correction.
TransitionInfo hmc_step(const LogDensity& target, PhasePoint& z, double eps, int n_leapfrog, Rng& rng,
                        double divergence_threshold = 1000.0);

/// One no-U-turn transition: tree doubling with multinomial sampling,
/// terminated when (x⁺−x⁻)·r⁻ < 0 or (x⁺−x⁻)·r⁺ < 0 on any subtree.
TransitionInfo nuts_step(const LogDensity& target, PhasePoint& z, double eps, int max_depth, Rng& rng,
                         double divergence_threshold = 1000.0);

/// Step size search by repeated halving/doubling until the one-step
/// acceptance crosses 1/2.
double find_reasonable_step_size(const LogDensity& target, const PhasePoint& z, double eps0, Rng& rng);

/// Nesterov dual averaging on log step size toward a target acceptance.
class DualAveraging {
 public:
  explicit DualAveraging(double initial_step, double target_accept = 0.8, double gamma = 0.05, double t0 = 10.0,
                         double kappa = 0.75);
  /// Feeds one acceptance statistic; returns the step size to use next.
  double update(double accept_stat);
  double current() const;
  /// Averaged iterate, used once adaptation ends.
  double final_step() const;

 private:
  double mu_;
  double target_;
  double gamma_;
  double t0_;
  double kappa_;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_ = 0.0;
  double x_bar_ = 0.0;
};

/// Runs cfg.n_chains independent chains. Chain j draws from the stream
/// derive_seed(cfg.seed, j), so results do not depend on thread count.
ChainSamples run_chains(const LogDensity& target, const HmcConfig& cfg);

}  // namespace mimohmc
