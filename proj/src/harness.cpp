#include "mimohmc/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace mimohmc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto t = trim(v);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(out))
    throw ConfigError(key, key + ": '" + v + "' is not a finite number");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto t = trim(v);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError(key, key + ": '" + v + "' is not an integer");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto t = trim(v);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError(key, key + ": '" + v + "' is not a non-negative integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string t = trim(v);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw ConfigError(key, key + ": '" + v + "' is not a boolean");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::vector<double> parse_snr_grid(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError("snr", "snr: empty grid");
  if (t.find(':') != std::string::npos) {
    const auto parts = split(t, ':');
    if (parts.size() != 3) throw ConfigError("snr", "snr: range must be start:step:stop");
    const double start = to_double("snr", parts[0]);
    const double step = to_double("snr", parts[1]);
    const double stop = to_double("snr", parts[2]);
    if (!(step > 0.0) || stop < start) throw ConfigError("snr", "snr: range needs step > 0 and stop >= start");
    std::vector<double> out;
    const auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
    if (count > 10000) throw ConfigError("snr", "snr: range has too many points");
    for (long long i = 0; i <= count; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
  }
  std::vector<double> out;
  for (const auto& p : split(t, ',')) out.push_back(to_double("snr", p));
  return out;
}

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = {
      "mod",       "ntx",          "nrx",          "rho",          "snr",       "detector",  "trials",
      "seed",      "coded",        "outer",        "code",         "out",       "json",      "dump",
      "threads",   "timing",       "csi_error",    "independent_channels",   "t_scale",   "t_dof",
      "cauchy_scale", "lambda_ridge", "engine",    "chains",       "steps",     "warmup",    "demap",
      "demap_var", "decoder_iterations", "early_exit", "max_depth"};
  return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(value);
  if (key == "mod") {
    cfg.modulation = v;
  } else if (key == "ntx") {
    cfg.n_tx = static_cast<int>(to_int(key, v));
  } else if (key == "nrx") {
    cfg.n_rx = static_cast<int>(to_int(key, v));
  } else if (key == "rho") {
    cfg.rho = to_double(key, v);
  } else if (key == "snr") {
    cfg.snr_grid_db = parse_snr_grid(v);
  } else if (key == "detector") {
    cfg.detectors.clear();
    for (const auto& name : split(v, ',')) {
      try {
        cfg.detectors.push_back(parse_detector(name));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key, std::string("detector: ") + e.what());
      }
    }
  } else if (key == "trials") {
    cfg.trials = static_cast<int>(to_int(key, v));
  } else if (key == "seed") {
    cfg.master_seed = to_uint(key, v);
  } else if (key == "coded") {
    cfg.coded = v.empty() ? true : to_bool(key, v);
  } else if (key == "outer") {
    cfg.max_outer = static_cast<int>(to_int(key, v));
    cfg.idd.max_outer = cfg.max_outer;
    cfg.outer_set = true;
  } else if (key == "code") {
    cfg.code_path = v;
  } else if (key == "out") {
    cfg.output_path = v;
  } else if (key == "json") {
    cfg.json_path = v;
  } else if (key == "dump") {
    cfg.dump_path = v;
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(to_int(key, v));
  } else if (key == "timing") {
    cfg.timing = v.empty() ? true : to_bool(key, v);
  } else if (key == "csi_error") {
    cfg.csi_error = v.empty() ? true : to_bool(key, v);
  } else if (key == "independent_channels") {
    cfg.independent_channels = v.empty() ? true : to_bool(key, v);
  } else if (key == "t_scale") {
    cfg.t_scale = to_double(key, v);
  } else if (key == "t_dof") {
    cfg.t_dof = to_double(key, v);
  } else if (key == "cauchy_scale") {
    cfg.cauchy_scale = to_double(key, v);
  } else if (key == "lambda_ridge") {
    cfg.lambda_ridge = to_double(key, v);
  } else if (key == "engine") {
    if (v == "nuts") cfg.engine = Engine::Nuts;
    else if (v == "hmc" || v == "static") cfg.engine = Engine::StaticHmc;
    else throw ConfigError(key, "engine: expected 'nuts' or 'static'");
  } else if (key == "chains") {
    cfg.hmc_chains = static_cast<int>(to_int(key, v));
  } else if (key == "steps") {
    cfg.hmc_steps = static_cast<int>(to_int(key, v));
  } else if (key == "warmup") {
    cfg.hmc_warmup = static_cast<int>(to_int(key, v));
  } else if (key == "max_depth") {
    cfg.hmc_max_depth = static_cast<int>(to_int(key, v));
  } else if (key == "demap") {
    if (v == "maxlog") cfg.idd.demap = DemapMethod::MaxLog;
    else if (v == "exact") cfg.idd.demap = DemapMethod::Exact;
    else throw ConfigError(key, "demap: expected 'maxlog' or 'exact'");
  } else if (key == "demap_var") {
    if (v == "half_noise") cfg.idd.demap_variance = DemapVariance::HalfNoise;
    else if (v == "posterior") cfg.idd.demap_variance = DemapVariance::Posterior;
    else throw ConfigError(key, "demap_var: expected 'half_noise' or 'posterior'");
  } else if (key == "decoder_iterations") {
    cfg.idd.decoder_iterations = static_cast<int>(to_int(key, v));
  } else if (key == "early_exit") {
    cfg.idd.early_exit = to_bool(key, v);
  } else {
    throw ConfigError(key, "unknown setting '" + key + "'");
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "config: cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config", path + ":" + std::to_string(line_no) + ": expected key=value");
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(e.field(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void ExperimentConfig::validate() const {
  try {
    (void)Constellation::from_name(modulation, 0.5);
  } catch (const std::exception&) {
    throw ConfigError("mod", "mod: unknown modulation '" + modulation + "' (expected qpsk, 16qam or 64qam)");
  }
  if (n_tx < 1) throw ConfigError("ntx", "ntx: must be >= 1");
  if (n_rx < 1) throw ConfigError("nrx", "nrx: must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho", "rho: must lie in [0, 1)");
  if (snr_grid_db.empty()) throw ConfigError("snr", "snr: empty grid");
  if (detectors.empty()) throw ConfigError("detector", "detector: no detector selected");
  if (trials < 1) throw ConfigError("trials", "trials: must be >= 1");
  if (threads < 1) throw ConfigError("threads", "threads: must be >= 1");
  if (!coded) {
    if (outer_set) throw ConfigError("outer", "outer: only meaningful together with --coded");
    if (!code_path.empty()) throw ConfigError("code", "code: only meaningful together with --coded");
    for (DetectorKind k : detectors)
      if (k == DetectorKind::HmcCodedSubsequent)
        throw ConfigError("detector", "detector: hmc_coded_subsequent needs decoder feedback (use --coded)");
  } else {
    if (max_outer < 0) throw ConfigError("outer", "outer: must be >= 0");
    if (!code_path.empty() && !std::filesystem::is_regular_file(code_path))
      throw ConfigError("code", "code: parity-check file '" + code_path + "' does not exist");
    if (idd.decoder_iterations < 0) throw ConfigError("decoder_iterations", "decoder_iterations: must be >= 0");
  }
  auto positive = [](const std::optional<double>& v, const char* name) {
    if (v && !(*v > 0.0)) throw ConfigError(name, std::string(name) + ": must be > 0");
  };
  positive(t_scale, "t_scale");
  positive(t_dof, "t_dof");
  positive(cauchy_scale, "cauchy_scale");
  if (lambda_ridge && !(*lambda_ridge > 1.0)) throw ConfigError("lambda_ridge", "lambda_ridge: must be > 1");
  if (hmc_chains && *hmc_chains < 1) throw ConfigError("chains", "chains: must be >= 1");
  if (hmc_steps && *hmc_steps < 2) throw ConfigError("steps", "steps: must be >= 2");
  if (hmc_warmup && *hmc_warmup < 0) throw ConfigError("warmup", "warmup: must be >= 0");
  if (hmc_max_depth && (*hmc_max_depth < 1 || *hmc_max_depth > 20))
    throw ConfigError("max_depth", "max_depth: must be in [1, 20]");
  for (DetectorKind k : detectors)
    if (is_hmc(k)) {
      const HmcConfig h = detector_config(k, Constellation::from_name(modulation, 0.5)).hmc;
      if (h.warmup + 2 > h.steps_per_chain)
        throw ConfigError("warmup", "warmup: must leave at least 2 post-warm-up steps per chain");
    }
}

DetectorConfig ExperimentConfig::detector_config(DetectorKind kind, const Constellation& c) const {
  DetectorConfig d = DetectorConfig::defaults(kind, n_tx, c);
  if (t_scale) d.prior.t_scale = *t_scale;
  if (t_dof) d.prior.t_dof = *t_dof;
  if (cauchy_scale) d.prior.cauchy_scale = *cauchy_scale;
  if (lambda_ridge) d.lambda_ridge = *lambda_ridge;
  if (engine) d.hmc.engine = *engine;
  if (hmc_chains) d.hmc.n_chains = *hmc_chains;
  if (hmc_warmup) d.hmc.warmup = *hmc_warmup;
  if (hmc_max_depth) d.hmc.max_tree_depth = *hmc_max_depth;
  if (hmc_steps) d.hmc.steps_per_chain = *hmc_steps;
  else if (hmc_warmup) d.hmc.steps_per_chain = std::max(d.hmc.steps_per_chain, *hmc_warmup + 8);
  return d;
}

UncodedInstance draw_uncoded_instance(const ComplexSystemSpec& spec, const Constellation& c, Rng& rng,
                                      bool csi_error) {
  const ComplexMatrix h = generate_channel(spec, rng);
  UncodedInstance inst;
  inst.bits.resize(static_cast<std::size_t>(2 * spec.n_tx * c.bits_per_dim()));
  std::uniform_int_distribution<int> coin(0, 1);
  for (auto& b : inst.bits) b = static_cast<std::uint8_t>(coin(rng));
  const Vector u = bits_to_symbols(inst.bits, c);
  double noise = spec.noise_var();
  if (csi_error) noise = effective_noise_variance(noise, spec.n_tx, spec.avg_tx_power);
  inst.sys.h = real_block(h);
  inst.sys.y = transmit(inst.sys.h, u, noise, rng);
  inst.sys.u_true = u;
  inst.sys.noise_var = noise;
  return inst;
}

namespace {

struct DiagAccumulator {
  double ess = 0.0;
  double r_hat = 0.0;
  double conv = 0.0;
  int count = 0;
  int r_hat_count = 0;

  void add(const DiagnosticsReport& r) {
    ess += r.ess_per_chain;
    conv += r.conv_rate;
    ++count;
    if (std::isfinite(r.r_hat)) {
      r_hat += r.r_hat;
      ++r_hat_count;
    }
  }
  void merge(const DiagAccumulator& o) {
    ess += o.ess;
    r_hat += o.r_hat;
    conv += o.conv;
    count += o.count;
    r_hat_count += o.r_hat_count;
  }
};

struct CellTally {
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  double seconds = 0.0;
  DiagAccumulator diag;
};

// Per trial: one tally per (detector, iteration).
using TrialTallies = std::vector<std::vector<CellTally>>;

double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::uint64_t detector_seed(std::uint64_t trial_seed, std::size_t detector) {
  return derive_seed(trial_seed, 0x1000 + detector);
}

struct SharedRun {
  const ExperimentConfig& cfg;
  const Constellation& c;
  const std::vector<DetectorConfig>& dets;
  const LdpcCode* code;
  int iterations;  // rows per detector
};

DiagnosticsReport diagnose_detection(const DetectionResult& r, const RealLinearSystem& sys, const Constellation& c,
                                     const DetectorConfig& det, const std::optional<LlrVector>& llr) {
  const PriorConfig prior = hmc_prior_for(sys, c, det, llr);
  const Vector* truth = sys.u_true ? &*sys.u_true : nullptr;
  return diagnose(*r.samples, c, prior, truth, 0);
}

TrialTallies run_uncoded_trial(const SharedRun& run, double snr_db, std::size_t snr_index, int trial,
                               std::optional<ChainSamples>* dump) {
  const ExperimentConfig& cfg = run.cfg;
  ComplexSystemSpec spec{cfg.n_tx, cfg.n_rx, cfg.rho, snr_db, run.c.avg_power()};
  const std::uint64_t trial_seed = derive_seed(cfg.master_seed, snr_index, static_cast<std::uint64_t>(trial));
  Rng rng(trial_seed);
  const UncodedInstance inst = draw_uncoded_instance(spec, run.c, rng, cfg.csi_error);

  TrialTallies out(run.dets.size(), std::vector<CellTally>(1));
  for (std::size_t d = 0; d < run.dets.size(); ++d) {
    DetectorConfig det = run.dets[d];
    if (dump && is_hmc(det.kind) && !dump->has_value()) det.hmc.keep_warmup = true;
    const auto t0 = std::chrono::steady_clock::now();
    const DetectionResult r = detect(inst.sys, run.c, det, detector_seed(trial_seed, d));
    CellTally& tally = out[d][0];
    tally.seconds = elapsed(t0);
    const Bits bits = indices_to_bits(r.hard_indices, run.c);
    for (std::size_t i = 0; i < bits.size(); ++i) tally.errors += bits[i] != inst.bits[i];
    tally.bits = bits.size();
    if (r.samples) {
      tally.diag.add(diagnose_detection(r, inst.sys, run.c, det, std::nullopt));
      if (dump && !dump->has_value()) *dump = *r.samples;
    }
  }
  return out;
}

TrialTallies run_coded_trial(const SharedRun& run, double snr_db, std::size_t snr_index, int trial,
                             std::optional<ChainSamples>* dump) {
  const ExperimentConfig& cfg = run.cfg;
  const LdpcCode& code = *run.code;
  const Constellation& c = run.c;
  ComplexSystemSpec spec{cfg.n_tx, cfg.n_rx, cfg.rho, snr_db, c.avg_power()};
  const std::uint64_t trial_seed = derive_seed(cfg.master_seed, snr_index, static_cast<std::uint64_t>(trial));
  Rng rng(trial_seed);

  std::uniform_int_distribution<int> coin(0, 1);
  Bits info(static_cast<std::size_t>(code.dimension()));
  for (auto& b : info) b = static_cast<std::uint8_t>(coin(rng));
  Bits stream = code.encode(info);
  const int uses = channel_uses_for(code.length(), cfg.n_tx, c);
  const std::size_t per_use = static_cast<std::size_t>(2 * cfg.n_tx * c.bits_per_dim());
  while (stream.size() < per_use * static_cast<std::size_t>(uses)) stream.push_back(static_cast<std::uint8_t>(coin(rng)));

  double noise = spec.noise_var();
  if (cfg.csi_error) noise = effective_noise_variance(noise, spec.n_tx, spec.avg_tx_power);
  std::vector<RealLinearSystem> systems(static_cast<std::size_t>(uses));
  Matrix h = real_block(generate_channel(spec, rng));
  for (int t = 0; t < uses; ++t) {
    if (cfg.independent_channels && t > 0) h = real_block(generate_channel(spec, rng));
    RealLinearSystem& sys = systems[static_cast<std::size_t>(t)];
    const Vector u = bits_to_symbols(std::span(stream).subspan(static_cast<std::size_t>(t) * per_use, per_use), c);
    sys.h = h;
    sys.y = transmit(h, u, noise, rng);
    sys.u_true = u;
    sys.noise_var = noise;
  }

  TrialTallies out(run.dets.size(), std::vector<CellTally>(static_cast<std::size_t>(run.iterations)));
  for (std::size_t d = 0; d < run.dets.size(); ++d) {
    const DetectorConfig& base = run.dets[d];
    const std::uint64_t seed = detector_seed(trial_seed, d);
    auto& rows = out[d];
    std::vector<double> seconds(static_cast<std::size_t>(run.iterations), 0.0);
    IddState st;
    if (is_hmc(base.kind)) {
      DetectorConfig initial = base;
      initial.kind = DetectorKind::HmcCodedInitial;
      DetectorConfig subsequent = base;
      subsequent.kind = DetectorKind::HmcCodedSubsequent;
      const bool want_dump = dump && !dump->has_value();
      if (want_dump) initial.hmc.keep_warmup = true;
      const UseDetector detector = [&](int use, int iteration, const std::optional<LlrVector>& prior) {
        const auto t0 = std::chrono::steady_clock::now();
        const RealLinearSystem& sys = systems[static_cast<std::size_t>(use)];
        const DetectorConfig& det = iteration == 0 ? initial : subsequent;
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(use), static_cast<std::uint64_t>(iteration));
        DetectionResult r = detect_hmc(sys, c, det, s, prior);
        seconds[static_cast<std::size_t>(iteration)] += elapsed(t0);
        rows[static_cast<std::size_t>(iteration)].diag.add(diagnose_detection(r, sys, c, det, prior));
        if (want_dump && !dump->has_value()) *dump = *r.samples;
        return r;
      };
      IddConfig idd = cfg.idd;
      idd.max_outer = run.iterations - 1;
      st = run_idd(systems, c, code, info, detector, idd);
    } else {
      const UseDetector detector = [&](int use, int, const std::optional<LlrVector>&) {
        const auto t0 = std::chrono::steady_clock::now();
        DetectionResult r = detect(systems[static_cast<std::size_t>(use)], c, base,
                                   derive_seed(seed, static_cast<std::uint64_t>(use)));
        seconds[0] += elapsed(t0);
        return r;
      };
      IddConfig idd = cfg.idd;
      idd.max_outer = 0;
      st = run_idd(systems, c, code, info, detector, idd);
    }
    for (std::size_t it = 0; it < rows.size() && it < st.bit_errors.size(); ++it) {
      rows[it].errors = st.bit_errors[it];
      rows[it].bits = st.info_bits;
      rows[it].seconds = seconds[it];
    }
    if (!is_hmc(base.kind)) rows.resize(1);
  }
  return out;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Constellation c = Constellation::from_name(cfg.modulation, 0.5);
  std::vector<DetectorConfig> dets;
  for (DetectorKind k : cfg.detectors) {
    DetectorConfig d = cfg.detector_config(k, c);
    d.validate();
    dets.push_back(std::move(d));
  }
  std::optional<LdpcCode> code;
  if (cfg.coded) code = cfg.code_path.empty() ? LdpcCode::default_regular() : LdpcCode::load(cfg.code_path);
  const SharedRun run{cfg, c, dets, code ? &*code : nullptr, cfg.coded ? cfg.max_outer + 1 : 1};

  ResultTable table;
  std::optional<ChainSamples> dump;
  for (std::size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
    const double snr = cfg.snr_grid_db[s];
    std::vector<TrialTallies> per_trial(static_cast<std::size_t>(cfg.trials));
    auto work = [&](int t, std::optional<ChainSamples>* d) {
      per_trial[static_cast<std::size_t>(t)] =
          cfg.coded ? run_coded_trial(run, snr, s, t, d) : run_uncoded_trial(run, snr, s, t, d);
    };
    const bool want_dump = !cfg.dump_path.empty() && s == 0;
    const int workers = std::min(cfg.threads, cfg.trials);
    if (workers <= 1) {
      for (int t = 0; t < cfg.trials; ++t) work(t, want_dump && t == 0 ? &dump : nullptr);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      std::exception_ptr failure;
      std::mutex failure_mutex;
      for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (int t = next++; t < cfg.trials; t = next++) {
            try {
              work(t, want_dump && t == 0 ? &dump : nullptr);
            } catch (...) {
              const std::lock_guard lock(failure_mutex);
              if (!failure) failure = std::current_exception();
            }
          }
        });
      for (auto& th : pool) th.join();
      if (failure) std::rethrow_exception(failure);
    }

    for (std::size_t d = 0; d < dets.size(); ++d) {
      const std::size_t rows = per_trial.front()[d].size();
      for (std::size_t it = 0; it < rows; ++it) {
        CellTally total;
        for (const auto& trial : per_trial) {
          const CellTally& x = trial[d][it];
          total.errors += x.errors;
          total.bits += x.bits;
          total.seconds += x.seconds;
          total.diag.merge(x.diag);
        }
        CellResult cell;
        cell.snr_db = snr;
        cell.detector = detector_name(dets[d].kind);
        cell.modulation = c.name();
        cell.n_tx = cfg.n_tx;
        cell.n_rx = cfg.n_rx;
        cell.rho = cfg.rho;
        cell.coded = cfg.coded;
        cell.iteration = static_cast<int>(it);
        cell.trials = cfg.trials;
        cell.bit_errors = total.errors;
        cell.total_bits = total.bits;
        if (total.errors > 0) cell.ber = static_cast<double>(total.errors) / static_cast<double>(total.bits);
        if (total.diag.count > 0) {
          cell.ess = total.diag.ess / total.diag.count;
          cell.conv_rate = total.diag.conv / total.diag.count;
          if (total.diag.r_hat_count > 0) cell.r_hat = total.diag.r_hat / total.diag.r_hat_count;
        }
        if (cfg.timing) cell.seconds = total.seconds / cfg.trials;
        table.push_back(std::move(cell));
      }
    }
  }

  if (!cfg.output_path.empty()) emit_csv(cfg.output_path, table);
  if (!cfg.json_path.empty()) emit_json(cfg.json_path, table);
  if (!cfg.dump_path.empty()) {
    if (!dump) throw std::runtime_error("dump: no HMC detection ran, nothing to dump");
    write_sample_dump(cfg.dump_path, *dump);
  }
  return table;
}

void write_csv(std::ostream& out, const ResultTable& table) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); };
  out << kCsvHeader << '\n';
  for (const auto& r : table) {
    out << fmt(r.snr_db) << ',' << r.detector << ',' << r.modulation << ',' << r.n_tx << ',' << r.n_rx << ','
        << fmt(r.rho) << ',' << (r.coded ? 1 : 0) << ',' << r.iteration << ',' << r.trials << ',' << r.bit_errors
        << ',' << r.total_bits << ',' << opt(r.ber) << ',' << opt(r.ess) << ',' << opt(r.r_hat) << ','
        << opt(r.conv_rate) << ',' << opt(r.seconds) << '\n';
  }
}

void emit_csv(const std::string& path, const ResultTable& table) {
  if (table.empty()) throw std::invalid_argument("emit_csv: empty result table");
  std::ostringstream buf;
  write_csv(buf, table);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CSV to '" + path + "'");
  out << buf.str();
  if (!out) throw std::runtime_error("error while writing CSV to '" + path + "'");
}

ResultTable parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) throw std::invalid_argument("parse_csv: unexpected header");
  ResultTable table;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 16) throw std::invalid_argument("parse_csv: line " + std::to_string(line_no) + " has " +
                                                    std::to_string(f.size()) + " fields");
    auto opt = [&](const std::string& s, const char* name) -> std::optional<double> {
      if (s == "NA") return std::nullopt;
      return to_double(name, s);
    };
    CellResult r;
    r.snr_db = to_double("snr_db", f[0]);
    r.detector = f[1];
    r.modulation = f[2];
    r.n_tx = static_cast<int>(to_int("n_tx", f[3]));
    r.n_rx = static_cast<int>(to_int("n_rx", f[4]));
    r.rho = to_double("rho", f[5]);
    r.coded = to_int("coded", f[6]) != 0;
    r.iteration = static_cast<int>(to_int("iteration", f[7]));
    r.trials = static_cast<int>(to_int("trials", f[8]));
    r.bit_errors = to_uint("bit_errors", f[9]);
    r.total_bits = to_uint("total_bits", f[10]);
    r.ber = opt(f[11], "ber");
    r.ess = opt(f[12], "ess");
    r.r_hat = opt(f[13], "r_hat");
    r.conv_rate = opt(f[14], "conv_rate");
    r.seconds = opt(f[15], "seconds");
    table.push_back(std::move(r));
  }
  return table;
}

ResultTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV '" + path + "'");
  return parse_csv(in);
}

void emit_json(const std::string& path, const ResultTable& table) {
  if (table.empty()) throw std::invalid_argument("emit_json: empty result table");
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table)
    rows.push_back({{"snr_db", r.snr_db},
                    {"detector", r.detector},
                    {"modulation", r.modulation},
                    {"n_tx", r.n_tx},
                    {"n_rx", r.n_rx},
                    {"rho", r.rho},
                    {"coded", r.coded},
                    {"iteration", r.iteration},
                    {"trials", r.trials},
                    {"bit_errors", r.bit_errors},
                    {"total_bits", r.total_bits},
                    {"ber", opt(r.ber)},
                    {"ess", opt(r.ess)},
                    {"r_hat", opt(r.r_hat)},
                    {"conv_rate", opt(r.conv_rate)},
                    {"seconds", opt(r.seconds)}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write JSON to '" + path + "'");
  out << rows.dump(2) << '\n';
}

void write_sample_dump(std::ostream& out, const ChainSamples& s) {
  const bool with_warmup = s.warmup > 0 && s.warmup_draws.size() == static_cast<std::size_t>(s.chains) * s.warmup * s.dims;
  const int warm = with_warmup ? s.warmup : 0;
  out << "chains " << s.chains << '\n'
      << "steps " << s.steps + warm << '\n'
      << "dims " << s.dims << '\n'
      << "warmup " << warm << '\n';
  for (int j = 0; j < s.chains; ++j) {
    for (int i = 0; i < warm; ++i) {
      const double* row = s.warmup_draws.data() + (static_cast<std::size_t>(j) * warm + i) * s.dims;
      for (int n = 0; n < s.dims; ++n) out << (n ? " " : "") << fmt(row[n]);
      out << '\n';
    }
    for (int i = 0; i < s.steps; ++i) {
      for (int n = 0; n < s.dims; ++n) out << (n ? " " : "") << fmt(s.draw(j, i, n));
      out << '\n';
    }
  }
}

void write_sample_dump(const std::string& path, const ChainSamples& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sample dump '" + path + "'");
  write_sample_dump(out, s);
}

ChainSamples read_sample_dump(std::istream& in) {
  auto header = [&](const char* name) {
    std::string key;
    long long v = -1;
    if (!(in >> key >> v) || key != name || v < 0)
      throw std::invalid_argument(std::string("sample dump: expected '") + name + " <count>' header line");
    return static_cast<int>(v);
  };
  const int chains = header("chains");
  const int steps = header("steps");
  const int dims = header("dims");
  const int warmup = header("warmup");
  if (chains < 1 || dims < 1 || warmup >= steps)
    throw std::invalid_argument("sample dump: need chains >= 1, dims >= 1 and warmup < steps");
  ChainSamples s;
  s.chains = chains;
  s.steps = steps - warmup;
  s.dims = dims;
  s.warmup = warmup;
  s.draws.reserve(static_cast<std::size_t>(chains) * s.steps * dims);
  s.warmup_draws.reserve(static_cast<std::size_t>(chains) * warmup * dims);
  std::string tok;
  for (int j = 0; j < chains; ++j)
    for (int i = 0; i < steps; ++i)
      for (int n = 0; n < dims; ++n) {
        if (!(in >> tok)) throw std::invalid_argument("sample dump: truncated data");
        const double v = to_double("sample dump", tok);
        (i < warmup ? s.warmup_draws : s.draws).push_back(v);
      }
  if (in >> tok) throw std::invalid_argument("sample dump: trailing data after the declared shape");
  return s;
}

ChainSamples read_sample_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sample dump '" + path + "'");
  return read_sample_dump(in);
}

double siso_awgn_ber(const Constellation& c, double snr_db, std::uint64_t n_bits, std::uint64_t seed) {
  if (n_bits == 0) throw std::invalid_argument("siso_awgn_ber: n_bits must be > 0");
  Rng rng = make_rng(seed, 0x5150);
  const double noise = c.avg_power() / std::pow(10.0, snr_db / 10.0);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * noise));
  std::uniform_int_distribution<int> pick(0, c.size() - 1);
  const int d = c.bits_per_dim();
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  while (bits < n_bits) {
    const int k = pick(rng);
    const int k_hat = c.nearest_index(c.level(k) + normal(rng));
    for (int b = 0; b < d; ++b) errors += c.bit(k, b) != c.bit(k_hat, b);
    bits += static_cast<std::uint64_t>(d);
  }
  return static_cast<double>(errors) / static_cast<double>(bits);
}

}  // namespace mimohmc
