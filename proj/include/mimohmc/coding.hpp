#pragma once

#include "mimohmc/channel.hpp"
#include "mimohmc/constellation.hpp"
#include "mimohmc/detectors.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mimohmc {

using Bits = std::vector<std::uint8_t>;

/// Binary linear block code given by a sparse parity-check matrix, with a
/// systematic encoder derived by Gaussian elimination over GF(2).
class LdpcCode {
 public:
  /// rows[i] lists the code-bit indices taking part in check i.
  LdpcCode(int length, std::vector<std::vector<int>> rows);

  /// H = [[1,1,0,1,0,0],[0,1,1,0,1,0],[1,0,1,0,0,1]].
  static LdpcCode toy();
  /// Column-regular code with `col_weight` ones per column built by
  /// progressive edge growth; check degrees come out as even as possible.
  static LdpcCode progressive_edge_growth(int length, int col_weight, int row_weight, std::uint64_t seed);
  /// The shipped default: (3,6)-regular, length 1024.
  static LdpcCode default_regular();

  /// Text format: a `length checks` header line, then one `i: b b b ...` line per check.
  static LdpcCode parse(std::istream& in);
  static LdpcCode load(const std::string& path);
  void write(std::ostream& out) const;
  void save(const std::string& path) const;

  int length() const { return length_; }
  int checks() const { return static_cast<int>(rows_.size()); }
  int rank() const { return static_cast<int>(pivots_.size()); }
  int dimension() const { return length_ - rank(); }
  double rate() const { return static_cast<double>(dimension()) / length_; }
  const std::vector<std::vector<int>>& check_rows() const { return rows_; }
  const std::vector<std::vector<int>>& variable_checks() const { return cols_; }
  /// Code-bit positions that carry the information bits, in order.
  const std::vector<int>& info_positions() const { return info_; }

  Bits encode(std::span<const std::uint8_t> info) const;
  Bits extract_info(std::span<const std::uint8_t> codeword) const;
  /// Number of unsatisfied checks.
  int syndrome_weight(std::span<const std::uint8_t> word) const;
  bool is_codeword(std::span<const std::uint8_t> word) const { return syndrome_weight(word) == 0; }
  /// Dense k × n systematic generator.
  std::vector<Bits> generator() const;

 private:
  int length_;
  std::vector<std::vector<int>> rows_;
  std::vector<std::vector<int>> cols_;
  std::vector<int> pivots_;                   // pivot column of each reduced row
  std::vector<int> info_;                     // non-pivot columns
  std::vector<std::vector<int>> pivot_deps_;  // info indices feeding each pivot bit
};

struct DecodeResult {
  LlrVector llr;  // a-posteriori, ln p(1)/p(0)
  Bits bits;      // 1 where llr > 0
  bool converged = false;  // all checks satisfied and no zero LLR
  int iterations = 0;
};

/// Sum-product (tanh rule) decoding. Checks the input hard decision first,
/// then runs up to max_iter message-passing rounds, stopping once every
/// check is satisfied. Messages are clamped to ±19.
DecodeResult ldpc_decode(std::span<const double> llr_in, const LdpcCode& code, int max_iter = 5);

/// How the residual variance of the soft demapper is chosen.
enum class DemapVariance {
  HalfNoise,  // σ_w²/2 on every dimension
  Posterior,  // per-dimension posterior variance reported by the detector, floored at σ_w²/2·floor
};

struct IddConfig {
  int max_outer = 5;
  int decoder_iterations = 5;
  DemapMethod demap = DemapMethod::MaxLog;
  DemapVariance demap_variance = DemapVariance::HalfNoise;
  double posterior_var_floor = 0.1;
  bool early_exit = true;
};

/// Detection of one channel use. `iteration` is 0 for the initial phase;
/// `prior_llr` carries the decoder's a-posteriori LLRs for this use's bits
/// from iteration 1 on.
using UseDetector = std::function<DetectionResult(int use, int iteration, const std::optional<LlrVector>& prior_llr)>;

struct IddState {
  int iteration = 0;          // last iteration actually run
  LlrVector current_llr;      // decoder output of the last iteration
  Bits decoded_bits;          // information bits of the last iteration
  std::vector<std::size_t> bit_errors;  // per iteration, padded to max_outer + 1
  std::vector<double> ber_trace;
  std::vector<bool> converged;
  std::size_t info_bits = 0;
  bool degraded = false;
  bool exited_early = false;
};

/// Iterative detection and decoding of one codeword sent over
/// `uses.size()` channel uses. Codeword bits fill the uses sequentially;
/// bits past the codeword end are filler and receive zero prior LLR.
IddState run_idd(const std::vector<RealLinearSystem>& uses, const Constellation& c, const LdpcCode& code,
                 const Bits& info_bits, const UseDetector& detector, const IddConfig& cfg);

/// Convenience form that runs detect_hmc with the initial/subsequent phase
/// switch; `det` supplies tuned parameters and the chain budget.
IddState run_idd(const std::vector<RealLinearSystem>& uses, const Constellation& c, const LdpcCode& code,
                 const Bits& info_bits, const DetectorConfig& det, std::uint64_t seed, const IddConfig& cfg);

/// Number of channel uses needed to carry `codeword_bits` with 2N·D bits each.
int channel_uses_for(int codeword_bits, int n_tx, const Constellation& c);

}  // namespace mimohmc
