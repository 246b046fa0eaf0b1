#pragma once

#include "mimohmc/constellation.hpp"
#include "mimohmc/hmc.hpp"
#include "mimohmc/model.hpp"

#include <vector>

namespace mimohmc {

/// Autocorrelation of one dimension, averaged over chains, for lags
/// 0..max_lag (capped at steps − 1). Constant chains contribute 0 beyond lag 0.
std::vector<double> autocorrelation(const ChainSamples& s, int dim, int max_lag = -1);

/// I·J / (1 + 2·Σ_{lag=1}^{T} ACF_lag), where T is the first odd positive
/// integer with ACF_{T+1} + ACF_{T+2} < 0. A constant chain gives I·J.
double ess(const ChainSamples& s, int dim);

/// sqrt(Var⁺ / W) with Var⁺ = (I−1)/I·W + B/I. Returns 1 when W = B = 0 and
/// +inf when only W = 0.
double r_hat(const ChainSamples& s, int dim);

/// Responsibility γ^{(k)} of every mixture component for every draw,
/// laid out [chain][step][dim][k]. Uses the weights of `prior`
/// (uniform when empty).
std::vector<double> responsibilities(const ChainSamples& s, const Constellation& c, const PriorConfig& prior);

struct TransitionMatrix {
  Matrix p;                     // K × K, row-stochastic
  std::vector<bool> empty_rows; // replaced by uniform rows
};

/// Expected transition counts C^{(k→k')} = Σ_i γ_i^{(k)} γ_{i+1}^{(k')},
/// averaged over chains and dimensions, then row-normalized.
TransitionMatrix transition_matrix(const ChainSamples& s, const Constellation& c, const PriorConfig& prior);

/// Second-largest eigenvalue modulus of the transition matrix.
double convergence_rate(const ChainSamples& s, const Constellation& c, const PriorConfig& prior);
double second_largest_modulus(const Matrix& p);

/// Mean off-truth responsibility mass over chains, steps and dimensions.
double soft_ser(const ChainSamples& s, const Vector& u_true, const Constellation& c, const PriorConfig& prior);

/// Fraction of draws whose quantization differs from the true symbol.
double hard_ser_of_draws(const ChainSamples& s, const Vector& u_true, const Constellation& c);

struct DiagnosticsReport {
  double ess_per_chain = 0.0;  // mean over dimensions of ESS / J
  double r_hat = 1.0;          // mean over dimensions
  double r_hat_max = 1.0;
  double conv_rate = 0.0;
  double soft_ser = -1.0;      // < 0 when no ground truth was given
  std::vector<double> acf;     // dimension 0
  bool degenerate = false;     // some dimension had a constant chain
  bool empty_rows = false;     // the transition matrix needed the uniform-row rule
};

DiagnosticsReport diagnose(const ChainSamples& s, const Constellation& c, const PriorConfig& prior,
                           const Vector* u_true = nullptr, int acf_lags = 20);

}  // namespace mimohmc
