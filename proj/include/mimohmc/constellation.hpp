#pragma once

#include "mimohmc/common.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mimohmc {

/// LLR magnitude bound applied before exponentiation.
inline constexpr double kLlrClamp = 30.0;

/// Per-bit log-likelihood ratios ln p(b=1)/p(b=0), laid out dimension-major:
/// entry n·D + d holds bit d (MSB first) of real dimension n.
using LlrVector = std::vector<double>;

/// Square QAM in per-real-dimension form. Levels are a·(2k − K + 1) for
/// k = 0..K−1, Gray-labelled with b_1 as the most significant bit.
class Constellation {
 public:
  /// order ∈ {4, 16, 64}; the complex symbol average power equals avg_power.
  static Constellation build(int order, double avg_power);
  /// Accepts "qpsk", "4qam", "16qam", "64qam" (case-insensitive).
  static Constellation from_name(const std::string& name, double avg_power);

  int order() const { return order_; }
  int size() const { return static_cast<int>(levels_.size()); }
  int bits_per_dim() const { return bits_per_dim_; }
  double avg_power() const { return avg_power_; }
  /// Half the spacing between adjacent levels.
  double unit() const { return unit_; }
  const std::vector<double>& levels() const { return levels_; }
  double level(int k) const { return levels_[static_cast<std::size_t>(k)]; }
  double min_level() const { return levels_.front(); }
  double max_level() const { return levels_.back(); }
  std::string name() const;

  /// Gray label of level k (D bits, b_1 in the most significant position).
  std::uint32_t label(int k) const { return labels_[static_cast<std::size_t>(k)]; }
  /// Bit d (0-based from the MSB) of level k.
  int bit(int k, int d) const { return static_cast<int>((label(k) >> (bits_per_dim_ - 1 - d)) & 1u); }
  int index_of_label(std::uint32_t label) const { return index_of_label_[label]; }

  /// Nearest level index; exact midpoints resolve to the lower index.
  int nearest_index(double u) const;

 private:
  int order_ = 0;
  int bits_per_dim_ = 0;
  double avg_power_ = 0.0;
  double unit_ = 0.0;
  std::vector<double> levels_;
  std::vector<std::uint32_t> labels_;
  std::vector<int> index_of_label_;
};

struct Quantized {
  std::vector<int> indices;
  Vector values;
};

Quantized quantize(const Vector& u, const Constellation& c);

/// Maps D bits per real dimension onto levels. Throws on length mismatch.
Vector bits_to_symbols(std::span<const std::uint8_t> bits, const Constellation& c);
std::vector<std::uint8_t> indices_to_bits(std::span<const int> indices, const Constellation& c);
/// Quantizes then demaps.
std::vector<std::uint8_t> symbols_to_bits(const Vector& u, const Constellation& c);

/// Symbol prior weights ω_k = Π_d p(b_d = bit_d(k)) from D clamped LLRs.
Vector llr_to_weights(std::span<const double> llr, const Constellation& c);
/// One weight row per real dimension (dims × K) from a dimension-major LlrVector.
Matrix llr_to_weight_matrix(std::span<const double> llr, Eigen::Index dims, const Constellation& c);

enum class DemapMethod { MaxLog, Exact };

/// Soft demapper. Max-log: Λ_d = min_{b_d=0}(u−s)²/v − min_{b_d=1}(u−s)²/v;
/// Exact replaces each min by a log-sum-exp. Positive favors '1'.
LlrVector soft_symbol_to_bit_llr(const Vector& u_soft, double residual_var, const Constellation& c,
                                 DemapMethod method = DemapMethod::MaxLog);
/// Per-dimension residual variances.
LlrVector soft_symbol_to_bit_llr(const Vector& u_soft, const Vector& residual_var, const Constellation& c,
                                 DemapMethod method = DemapMethod::MaxLog);

}  // namespace mimohmc
