#include "mimohmc/harness.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mimohmc;

namespace {

ExperimentConfig small_uncoded() {
  ExperimentConfig cfg;
  cfg.n_tx = 3;
  cfg.n_rx = 4;
  cfg.snr_grid_db = {0.0, 10.0};
  cfg.detectors = {DetectorKind::Mmse, DetectorKind::Ep, DetectorKind::HmcUncoded};
  cfg.trials = 8;
  cfg.master_seed = 42;
  return cfg;
}

std::string csv_of(const ResultTable& t) {
  std::ostringstream out;
  write_csv(out, t);
  return out.str();
}

std::string field_of(const ConfigError& e) { return e.field(); }

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("SNR grids") {
    CHECK(parse_snr_grid("10") == std::vector<double>{10.0});
    CHECK(parse_snr_grid("0, 5,10") == std::vector<double>{0.0, 5.0, 10.0});
    CHECK(parse_snr_grid("0:2.5:10") == std::vector<double>{0.0, 2.5, 5.0, 7.5, 10.0});
    CHECK_THROWS_AS(parse_snr_grid("0:0:10"), ConfigError);
    CHECK_THROWS_AS(parse_snr_grid("ten"), ConfigError);
  }

  TEST_CASE("settings map onto the configuration") {
    ExperimentConfig cfg;
    apply_setting(cfg, "mod", "16qam");
    apply_setting(cfg, "ntx", "8");
    apply_setting(cfg, "detector", "mmse,hmc");
    apply_setting(cfg, "engine", "static");
    apply_setting(cfg, "max_depth", "7");
    apply_setting(cfg, "coded", "true");
    apply_setting(cfg, "outer", "2");
    CHECK(cfg.modulation == "16qam");
    CHECK(cfg.n_tx == 8);
    CHECK(cfg.detectors == std::vector<DetectorKind>{DetectorKind::Mmse, DetectorKind::HmcUncoded});
    CHECK(cfg.coded);
    CHECK(cfg.max_outer == 2);
    const DetectorConfig d = cfg.detector_config(DetectorKind::HmcUncoded, Constellation::build(16, 0.5));
    CHECK(d.hmc.engine == Engine::StaticHmc);
    CHECK(d.hmc.max_tree_depth == 7);
    CHECK(d.prior.t_scale == 0.0621);
    for (const auto& key : setting_keys()) CHECK_FALSE(key.empty());
  }

  TEST_CASE("bad settings name their field") {
    ExperimentConfig cfg;
    try {
      apply_setting(cfg, "ntx", "four");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(field_of(e) == "ntx");
    }
    CHECK_THROWS_AS(apply_setting(cfg, "colour", "blue"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "detector", "zf"), ConfigError);
  }

  TEST_CASE("validation rules") {
    ExperimentConfig cfg;
    cfg.rho = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.outer_set = true;
    try {
      cfg.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(field_of(e) == "outer");
    }
    cfg = ExperimentConfig{};
    cfg.detectors = {DetectorKind::HmcCodedSubsequent};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.coded = true;
    cfg.code_path = "/nonexistent/code.txt";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("config files report the failing line") {
    const auto path = std::filesystem::temp_directory_path() / "mimohmc_test_config.txt";
    {
      std::ofstream out(path);
      out << "# comment\nntx = 2\n\nrho = 2x\n";
    }
    ExperimentConfig cfg;
    CHECK_THROWS_WITH(apply_config_file(cfg, path.string()), doctest::Contains(":4"));
    CHECK(cfg.n_tx == 2);
    std::filesystem::remove(path);
  }

  TEST_CASE("uncoded table shape, ordering and determinism") {
    const ExperimentConfig cfg = small_uncoded();
    const ResultTable a = run_experiment(cfg);
    REQUIRE(a.size() == 6u);
    CHECK(a[0].detector == "mmse");
    CHECK(a[2].detector == "hmc");
    CHECK(a[3].snr_db == 10.0);
    for (const auto& r : a) {
      CHECK(r.total_bits == 8u * 6u);
      CHECK(r.bit_errors <= r.total_bits);
      CHECK_FALSE(r.seconds.has_value());
      CHECK(r.ess.has_value() == (r.detector == "hmc"));
    }
    CHECK(a[0].bit_errors >= a[3].bit_errors);
    ExperimentConfig threaded = cfg;
    threaded.threads = 3;
    CHECK(csv_of(run_experiment(threaded)) == csv_of(a));
    CHECK(run_experiment(cfg) == a);
  }

  TEST_CASE("all detectors see identical instances") {
    ExperimentConfig one = small_uncoded();
    one.detectors = {DetectorKind::Mmse};
    ExperimentConfig both = small_uncoded();
    both.detectors = {DetectorKind::Ep, DetectorKind::Mmse};
    const ResultTable a = run_experiment(one);
    const ResultTable b = run_experiment(both);
    CHECK(a[0].bit_errors == b[1].bit_errors);
    CHECK(a[1].bit_errors == b[3].bit_errors);
  }

  TEST_CASE("timing fills the seconds column") {
    ExperimentConfig cfg = small_uncoded();
    cfg.detectors = {DetectorKind::Mmse};
    cfg.timing = true;
    for (const auto& r : run_experiment(cfg)) CHECK(r.seconds.value_or(-1.0) >= 0.0);
  }

  TEST_CASE("coded runs report one row per iteration") {
    const auto path = std::filesystem::temp_directory_path() / "mimohmc_test_code.txt";
    LdpcCode::progressive_edge_growth(48, 3, 6, 2).save(path.string());
    ExperimentConfig cfg;
    cfg.n_tx = 2;
    cfg.n_rx = 2;
    cfg.coded = true;
    cfg.code_path = path.string();
    cfg.max_outer = 2;
    cfg.outer_set = true;
    cfg.snr_grid_db = {6.0};
    cfg.detectors = {DetectorKind::HmcUncoded, DetectorKind::Mmse};
    cfg.trials = 2;
    const ResultTable t = run_experiment(cfg);
    std::filesystem::remove(path);
    REQUIRE(t.size() == 4u);
    CHECK(t[0].iteration == 0);
    CHECK(t[2].iteration == 2);
    CHECK(t[3].detector == "mmse");
    CHECK(t[3].iteration == 0);
    for (const auto& r : t) {
      CHECK(r.coded);
      CHECK(r.total_bits == 2u * 24u);
    }
  }

  TEST_CASE("CSV formatting and round trip") {
    CellResult r;
    r.snr_db = 7.5;
    r.detector = "ep";
    r.modulation = "qpsk";
    r.n_tx = 4;
    r.n_rx = 4;
    r.trials = 10;
    r.bit_errors = 3;
    r.total_bits = 80;
    r.ber = 0.0375;
    const std::string text = csv_of({r});
    CHECK(text == std::string(kCsvHeader) + "\n7.5,ep,qpsk,4,4,0,0,0,10,3,80,0.0375,NA,NA,NA,NA\n");
    std::istringstream in(text);
    const ResultTable back = parse_csv(in);
    REQUIRE(back.size() == 1u);
    CHECK(back[0] == r);
    CHECK_THROWS(emit_csv("/tmp/unused.csv", {}));
    CHECK_THROWS(emit_csv("/nonexistent-dir/x.csv", {r}));
  }

  TEST_CASE("sample dump round trip") {
    ChainSamples s = ChainSamples::from_array(2, 3, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    s.warmup = 1;
    s.warmup_draws = {0.5, 0.25, -0.5, -0.25};
    std::stringstream ss;
    write_sample_dump(ss, s);
    const ChainSamples back = read_sample_dump(ss);
    CHECK(back.chains == 2);
    CHECK(back.steps == 3);
    CHECK(back.warmup == 1);
    CHECK(back.draws == s.draws);
    CHECK(back.warmup_draws == s.warmup_draws);
    std::istringstream bad("chains 2\nsteps 4\ndims 2\nwarmup 1\n1 2\n");
    CHECK_THROWS(read_sample_dump(bad));
  }

  TEST_CASE("single-antenna QPSK reference BER is Q(sqrt(SNR))") {
    const Constellation c = Constellation::build(4, 0.5);
    CHECK(siso_awgn_ber(c, 7.0, 1'000'000, 1) == doctest::Approx(0.012587033122144606).epsilon(0.05));
  }
}
