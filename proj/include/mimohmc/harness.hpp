#pragma once

#include "mimohmc/coding.hpp"
#include "mimohmc/detectors.hpp"
#include "mimohmc/diagnostics.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimohmc {

/// Invalid experiment setting; `field()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  std::string modulation = "qpsk";
  int n_tx = 4;
  int n_rx = 4;
  double rho = 0.0;
  std::vector<double> snr_grid_db{10.0};
  std::vector<DetectorKind> detectors{DetectorKind::Mmse};
  int trials = 100;
  std::uint64_t master_seed = 1;

  bool coded = false;
  std::string code_path;  // empty selects the built-in (3,6) length-1024 code
  int max_outer = 5;
  bool outer_set = false;  // max_outer was given explicitly
  bool independent_channels = false;  // coded: fresh channel per use instead of per codeword
  IddConfig idd;

  bool csi_error = false;  // inflate σ_w² for MMSE channel-estimation error
  bool timing = false;     // fill the seconds column
  int threads = 1;

  std::string output_path;
  std::string json_path;
  std::string dump_path;  // sample dump of the first HMC detection

  // Overrides of the tuned prior parameters; unset means the modulation's defaults.
  std::optional<double> t_scale;
  std::optional<double> t_dof;
  std::optional<double> cauchy_scale;
  std::optional<double> lambda_ridge;
  std::optional<Engine> engine;
  std::optional<int> hmc_chains;
  std::optional<int> hmc_steps;
  std::optional<int> hmc_warmup;
  std::optional<int> hmc_max_depth;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  /// Detector configuration for one kind under this experiment.
  DetectorConfig detector_config(DetectorKind kind, const Constellation& c) const;
};

/// Applies one `key=value` setting. Keys match the long CLI flags
/// (mod, ntx, nrx, rho, snr, detector, trials, seed, coded, outer, out, ...).
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Reads `key=value` lines ('#' starts a comment); errors carry the line number.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);
/// Names of all keys accepted by apply_setting.
const std::vector<std::string>& setting_keys();

/// Parses "10", "0,5,10" or "0:2:10" (start:step:stop, inclusive).
std::vector<double> parse_snr_grid(const std::string& text);

/// One aggregate cell: (snr, detector, iteration).
struct CellResult {
  double snr_db = 0.0;
  std::string detector;
  std::string modulation;
  int n_tx = 0;
  int n_rx = 0;
  double rho = 0.0;
  bool coded = false;
  int iteration = 0;
  int trials = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t total_bits = 0;
  std::optional<double> ber;  // unset when there were no errors
  std::optional<double> ess;  // HMC detectors only
  std::optional<double> r_hat;
  std::optional<double> conv_rate;
  std::optional<double> seconds;  // set when timing is on

  bool operator==(const CellResult&) const = default;
};

using ResultTable = std::vector<CellResult>;

/// Runs every (snr, detector, trial) combination. Trials draw their channel
/// and data from streams derived from (master_seed, snr index, trial), so all
/// detectors see identical instances and the table does not depend on
/// `threads`.
ResultTable run_experiment(const ExperimentConfig& cfg);

inline constexpr const char* kCsvHeader =
    "snr_db,detector,modulation,n_tx,n_rx,rho,coded,iteration,trials,bit_errors,total_bits,ber,ess,r_hat,conv_rate,"
    "seconds";

void write_csv(std::ostream& out, const ResultTable& table);
/// Throws std::invalid_argument for an empty table and std::runtime_error
/// (naming the path) when the file cannot be written.
void emit_csv(const std::string& path, const ResultTable& table);
ResultTable parse_csv(std::istream& in);
ResultTable read_csv(const std::string& path);
void emit_json(const std::string& path, const ResultTable& table);

/// Text sample dump: four header lines `chains`, `steps`, `dims`, `warmup`
/// (steps counts warm-up rows), then one row of `dims` values per
/// (chain, step) in [chain][step] order with the warm-up rows first.
void write_sample_dump(std::ostream& out, const ChainSamples& s);
void write_sample_dump(const std::string& path, const ChainSamples& s);
/// Returns post-warm-up draws with the warm-up rows in warmup_draws.
ChainSamples read_sample_dump(std::istream& in);
ChainSamples read_sample_dump(const std::string& path);

/// Bit error rate of the same modulation over a single-antenna AWGN link
/// with SNR = P_t/σ_w², by simulation of `n_bits` bits (rounded up to
/// whole symbols).
double siso_awgn_ber(const Constellation& c, double snr_db, std::uint64_t n_bits, std::uint64_t seed);

/// One uncoded trial: channel, data and noise drawn from `rng`.
struct UncodedInstance {
  RealLinearSystem sys;
  Bits bits;
};
UncodedInstance draw_uncoded_instance(const ComplexSystemSpec& spec, const Constellation& c, Rng& rng,
                                      bool csi_error = false);

}  // namespace mimohmc
