#include "mimohmc/coding.hpp"

#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

using namespace mimohmc;

namespace {

Bits random_bits(std::size_t n, Rng& rng) {
  Bits b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng() & 1u);
  return b;
}

}  // namespace

TEST_SUITE("coding") {
  TEST_CASE("toy code encodes every message to a distinct codeword") {
    const LdpcCode toy = LdpcCode::toy();
    CHECK(toy.length() == 6);
    CHECK(toy.dimension() == 3);
    std::set<Bits> words;
    for (int m = 0; m < 8; ++m) {
      const Bits info{static_cast<std::uint8_t>(m & 1), static_cast<std::uint8_t>((m >> 1) & 1),
                      static_cast<std::uint8_t>((m >> 2) & 1)};
      const Bits cw = toy.encode(info);
      CHECK(toy.is_codeword(cw));
      CHECK(toy.extract_info(cw) == info);
      words.insert(cw);
    }
    CHECK(words.size() == 8u);
  }

  TEST_CASE("generator rows are codewords") {
    const LdpcCode code = LdpcCode::progressive_edge_growth(96, 3, 6, 2);
    const auto g = code.generator();
    CHECK(static_cast<int>(g.size()) == code.dimension());
    for (const auto& row : g) CHECK(code.is_codeword(row));
  }

  TEST_CASE("default code is (3,6)-regular with rate 1/2") {
    const LdpcCode code = LdpcCode::default_regular();
    CHECK(code.length() == 1024);
    CHECK(code.checks() == 512);
    for (const auto& row : code.check_rows()) CHECK(row.size() == 6u);
    for (const auto& col : code.variable_checks()) CHECK(col.size() == 3u);
    CHECK(code.rate() == doctest::Approx(0.5).epsilon(0.01));
  }

  TEST_CASE("PEG construction is seed-deterministic and has no repeated edges") {
    const LdpcCode a = LdpcCode::progressive_edge_growth(120, 3, 6, 5);
    const LdpcCode b = LdpcCode::progressive_edge_growth(120, 3, 6, 5);
    CHECK(a.check_rows() == b.check_rows());
    for (const auto& col : a.variable_checks()) CHECK(std::set<int>(col.begin(), col.end()).size() == col.size());
    CHECK_THROWS(LdpcCode::progressive_edge_growth(10, 3, 7, 1));
  }

  TEST_CASE("text format round-trips and reports bad lines") {
    const LdpcCode code = LdpcCode::progressive_edge_growth(48, 3, 6, 3);
    std::stringstream ss;
    code.write(ss);
    const LdpcCode back = LdpcCode::parse(ss);
    CHECK(back.check_rows() == code.check_rows());

    std::istringstream bad("6 3\n0: 0 1 3\n1 1 2 4\n");
    CHECK_THROWS_WITH(LdpcCode::parse(bad), doctest::Contains("line 3"));
    std::istringstream range("6 1\n0: 0 9\n");
    CHECK_THROWS(LdpcCode::parse(range));
  }

  TEST_CASE("encoder rejects the wrong message length") {
    CHECK_THROWS(LdpcCode::toy().encode(Bits(4)));
  }

  TEST_CASE("clean LLRs decode immediately") {
    const LdpcCode code = LdpcCode::default_regular();
    Rng rng = make_rng(1);
    const Bits cw = code.encode(random_bits(static_cast<std::size_t>(code.dimension()), rng));
    std::vector<double> llr(cw.size());
    for (std::size_t i = 0; i < cw.size(); ++i) llr[i] = cw[i] ? 8.0 : -8.0;
    const DecodeResult r = ldpc_decode(llr, code, 5);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(r.bits == cw);
  }

  TEST_CASE("all-zero LLRs do not converge and fall to the tie rule") {
    const LdpcCode toy = LdpcCode::toy();
    const DecodeResult r = ldpc_decode(std::vector<double>(6, 0.0), toy, 5);
    CHECK_FALSE(r.converged);
    CHECK(r.bits == Bits(6, 0));
  }

  TEST_CASE("a weak flipped bit on the toy code is corrected") {
    const LdpcCode toy = LdpcCode::toy();
    const Bits cw = toy.encode(Bits{1, 0, 1});
    for (std::size_t f = 0; f < 6; ++f) {
      std::vector<double> llr(6);
      for (std::size_t i = 0; i < 6; ++i) llr[i] = cw[i] ? 4.0 : -4.0;
      llr[f] = cw[f] ? -1.0 : 1.0;
      const DecodeResult r = ldpc_decode(llr, toy, 10);
      CHECK(r.converged);
      CHECK(r.bits == cw);
    }
  }

  TEST_CASE("check messages follow the tanh rule on odd and even degrees") {
    // One check over three bits: the message to bit 0 is 2·atanh(tanh(a/2)·tanh(b/2))
    // in the p(1)/p(0) convention with a sign flip per pair.
    const LdpcCode tri(3, {{0, 1, 2}});
    const std::vector<double> llr{0.0, 2.0, -3.0};
    const DecodeResult r = ldpc_decode(llr, tri, 1);
    const double expected = -2.0 * std::atanh(std::tanh(1.0) * std::tanh(-1.5));
    CHECK(r.llr[0] == doctest::Approx(expected));
    CHECK(r.llr[0] > 0.0);  // bits 1 and 2 are likely 1 and 0, so bit 0 is likely 1

    const LdpcCode pair(2, {{0, 1}});
    const DecodeResult q = ldpc_decode(std::vector<double>{0.0, 2.5}, pair, 1);
    CHECK(q.llr[0] == doctest::Approx(2.5));  // a two-bit check copies its neighbour
  }

  TEST_CASE("decoder corrects AWGN noise well below threshold") {
    const LdpcCode code = LdpcCode::default_regular();
    Rng rng = make_rng(2);
    const double sigma2 = 0.35;
    std::normal_distribution<double> g(0.0, std::sqrt(sigma2));
    for (int w = 0; w < 5; ++w) {
      const Bits info = random_bits(static_cast<std::size_t>(code.dimension()), rng);
      const Bits cw = code.encode(info);
      std::vector<double> llr(cw.size());
      for (std::size_t i = 0; i < cw.size(); ++i) llr[i] = 2.0 * ((cw[i] ? 1.0 : -1.0) + g(rng)) / sigma2;
      const DecodeResult r = ldpc_decode(llr, code, 50);
      CHECK(r.converged);
      CHECK(code.extract_info(r.bits) == info);
    }
  }

  TEST_CASE("channel uses round up") {
    const Constellation q = Constellation::build(4, 0.5);
    const Constellation m16 = Constellation::build(16, 0.5);
    CHECK(channel_uses_for(1024, 16, q) == 32);
    CHECK(channel_uses_for(1024, 16, m16) == 16);
    CHECK(channel_uses_for(1000, 3, q) == 167);
  }

  TEST_CASE("IDD with a genie detector decodes at iteration 0 and pads the trace") {
    const Constellation c = Constellation::build(4, 0.5);
    const LdpcCode code = LdpcCode::progressive_edge_growth(64, 3, 6, 1);
    Rng rng = make_rng(3);
    const Bits info = random_bits(static_cast<std::size_t>(code.dimension()), rng);
    const Bits cw = code.encode(info);
    const int n = 4;
    const int uses = channel_uses_for(code.length(), n, c);
    std::vector<RealLinearSystem> systems(static_cast<std::size_t>(uses));
    std::vector<Vector> truth;
    Bits padded = cw;
    padded.resize(static_cast<std::size_t>(uses * 2 * n), 0);
    for (int u = 0; u < uses; ++u) {
      auto& s = systems[static_cast<std::size_t>(u)];
      s.h = Matrix::Identity(2 * n, 2 * n);
      s.noise_var = 0.1;
      truth.push_back(bits_to_symbols(std::span(padded).subspan(static_cast<std::size_t>(u * 2 * n), 2 * n), c));
      s.y = truth.back();
    }
    int calls = 0;
    const UseDetector genie = [&](int use, int, const std::optional<LlrVector>&) {
      ++calls;
      DetectionResult r;
      r.u_soft = truth[static_cast<std::size_t>(use)];
      r.u_hard = r.u_soft;
      return r;
    };
    IddConfig cfg;
    cfg.max_outer = 3;
    const IddState s = run_idd(systems, c, code, info, genie, cfg);
    CHECK(s.exited_early);
    CHECK(s.iteration == 0);
    CHECK(calls == uses);
    CHECK(s.bit_errors == std::vector<std::size_t>(4, 0));
    CHECK(s.ber_trace.size() == 4u);
    CHECK(s.decoded_bits == info);
  }

  TEST_CASE("IDD feeds decoder LLRs back from iteration 1") {
    const Constellation c = Constellation::build(4, 0.5);
    const LdpcCode code = LdpcCode::toy();
    std::vector<RealLinearSystem> systems(1);
    systems[0].h = Matrix::Identity(6, 6);
    systems[0].noise_var = 100.0;
    systems[0].y = Vector::Zero(6);
    std::vector<bool> had_prior;
    const UseDetector weak = [&](int, int iteration, const std::optional<LlrVector>& prior) {
      had_prior.push_back(prior.has_value());
      if (prior) CHECK(prior->size() == 6u);
      DetectionResult r;
      r.u_soft = Vector::Constant(6, iteration == 0 ? 0.0 : 0.01);
      r.u_hard = r.u_soft;
      return r;
    };
    IddConfig cfg;
    cfg.max_outer = 2;
    cfg.early_exit = false;
    const IddState s = run_idd(systems, c, code, Bits{1, 1, 0}, weak, cfg);
    CHECK(had_prior == std::vector<bool>{false, true, true});
    CHECK(s.iteration == 2);
  }
}
