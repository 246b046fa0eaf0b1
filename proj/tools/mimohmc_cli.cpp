// Command-line front end: `run` simulates BER tables, `diag` re-computes
// sampler diagnostics from a sample dump, `selftest` runs the oracle suites.

#include "mimohmc/harness.hpp"
#include "selftest/criteria.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>

namespace {

using namespace mimohmc;

struct RunFlag {
  const char* key;
  const char* help;
  bool is_flag;
};

constexpr RunFlag kRunFlags[] = {
    {"mod", "modulation: qpsk, 16qam, 64qam", false},
    {"ntx", "transmit antennas N", false},
    {"nrx", "receive antennas M", false},
    {"rho", "Kronecker correlation coefficient in [0,1)", false},
    {"snr", "SNR grid in dB: 10 | 0,5,10 | 0:2:10", false},
    {"detector", "comma list of mmse, mgs, ep, hmc, hmc_coded_initial", false},
    {"trials", "symbol vectors (uncoded) or codewords (coded) per SNR", false},
    {"seed", "master seed", false},
    {"coded", "LDPC-coded transmission with iterative detection and decoding", true},
    {"outer", "subsequent detection/decoding iterations (coded only)", false},
    {"code", "parity-check matrix file (coded only; default: built-in (3,6) n=1024)", false},
    {"out", "CSV output path (default: stdout)", false},
    {"json", "JSON mirror of the result table", false},
    {"dump", "write the first HMC detection's samples to this file", false},
    {"threads", "worker threads over trials", false},
    {"timing", "fill the seconds column", true},
    {"csi_error", "inflate the noise for channel-estimation error", true},
    {"independent_channels", "coded: draw a new channel for every channel use", true},
    {"t_scale", "mixture-t scale override", false},
    {"t_dof", "mixture-t degrees of freedom override", false},
    {"cauchy_scale", "half-Cauchy scale override", false},
    {"lambda_ridge", "ridge strength override", false},
    {"engine", "nuts or static", false},
    {"chains", "HMC chains override", false},
    {"steps", "HMC steps per chain override (including warm-up)", false},
    {"warmup", "HMC warm-up steps override", false},
    {"max_depth", "NUTS tree-depth limit override", false},
    {"demap", "soft demapper: maxlog or exact", false},
    {"demap_var", "demapper variance: half_noise or posterior", false},
    {"decoder_iterations", "sum-product iterations per decoding", false},
    {"early_exit", "stop the outer loop once the decoder converges (true/false)", false},
};

int run_command(const std::map<std::string, std::string>& given, const std::string& config_path) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : given) apply_setting(cfg, k, v);
  if (!config_path.empty()) apply_config_file(cfg, config_path);
  cfg.validate();
  const bool to_stdout = cfg.output_path.empty();
  const ResultTable table = run_experiment(cfg);
  if (to_stdout) write_csv(std::cout, table);
  return 0;
}

int diag_command(const std::string& path, const std::string& modulation, const std::string& json_path, int lags) {
  const ChainSamples s = read_sample_dump(path);
  const Constellation c = Constellation::from_name(modulation, 0.5);
  const TunedParameters tp = tuned_parameters(c.order());
  PriorConfig prior;
  prior.t_scale = tp.t_scale;
  prior.t_dof = tp.t_dof;
  const DiagnosticsReport r = diagnose(s, c, prior, nullptr, lags);
  std::cout << "chains " << s.chains << "\nsteps " << s.steps << "\ndims " << s.dims << "\nwarmup " << s.warmup
            << "\ness_per_chain " << r.ess_per_chain << "\nr_hat " << r.r_hat << "\nr_hat_max " << r.r_hat_max
            << "\nconv_rate " << r.conv_rate << "\ndegenerate " << r.degenerate << "\nempty_rows " << r.empty_rows
            << "\nacf";
  for (double a : r.acf) std::cout << ' ' << a;
  std::cout << '\n';
  if (!json_path.empty()) {
    const nlohmann::json j = {{"chains", s.chains},       {"steps", s.steps},
                              {"dims", s.dims},           {"warmup", s.warmup},
                              {"ess_per_chain", r.ess_per_chain}, {"r_hat", r.r_hat},
                              {"r_hat_max", r.r_hat_max}, {"conv_rate", r.conv_rate},
                              {"degenerate", r.degenerate}, {"empty_rows", r.empty_rows},
                              {"acf", r.acf}};
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot write '" + json_path + "'");
    out << j.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MIMO detection by Hamiltonian Monte Carlo: BER simulation and diagnostics"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "simulate detectors over an SNR grid and emit a CSV table");
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::vector<std::pair<std::string, CLI::Option*>> run_opts;
  for (const auto& f : kRunFlags) {
    if (f.is_flag) {
      flags[f.key] = false;
      run_opts.emplace_back(f.key, run->add_flag(std::string("--") + f.key, flags[f.key], f.help));
    } else {
      values[f.key];
      run_opts.emplace_back(f.key, run->add_option(std::string("--") + f.key, values[f.key], f.help));
    }
  }
  std::string config_path;
  run->add_option("--config", config_path, "key=value file applied after the flags");

  auto* diag = app.add_subcommand("diag", "recompute ESS, R-hat and convergence rate from a sample dump");
  std::string dump_path;
  std::string diag_mod = "qpsk";
  std::string diag_json;
  int lags = 20;
  diag->add_option("dump", dump_path, "sample dump written by `run --dump`")->required();
  diag->add_option("--mod", diag_mod, "modulation the samples were drawn for");
  diag->add_option("--json", diag_json, "also write the summary as JSON");
  diag->add_option("--lags", lags, "autocorrelation lags to print");

  auto* selftest = app.add_subcommand("selftest", "run the oracle suites; exit 0 iff all pass");
  bool all = false;
  std::vector<int> only;
  selftest->add_flag("--all", all, "include the long-running criteria");
  selftest->add_option("--criterion", only, "run only these criterion numbers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run) {
      std::map<std::string, std::string> given;
      for (const auto& [key, opt] : run_opts)
        if (opt->count() > 0) given[key] = flags.count(key) ? "true" : values[key];
      return run_command(given, config_path);
    }
    if (*diag) return diag_command(dump_path, diag_mod, diag_json, lags);
    if (*selftest) {
      const auto failed = selftest::run_criteria(std::cout, only, all ? selftest::Scope::All : selftest::Scope::Quick);
      return failed == 0 ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
