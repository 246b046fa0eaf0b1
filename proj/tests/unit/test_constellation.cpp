#include "mimohmc/constellation.hpp"

#include <doctest.h>

#include <bitset>
#include <cmath>
#include <numeric>

using namespace mimohmc;

TEST_SUITE("constellation") {
  TEST_CASE("levels and unit spacing per order") {
    const Constellation q = Constellation::build(4, 0.5);
    CHECK(q.size() == 2);
    CHECK(q.bits_per_dim() == 1);
    CHECK(q.level(0) == doctest::Approx(-0.5));
    CHECK(q.level(1) == doctest::Approx(0.5));

    const Constellation m16 = Constellation::build(16, 0.5);
    CHECK(m16.unit() == doctest::Approx(std::sqrt(0.05)));
    CHECK(m16.max_level() == doctest::Approx(3 * std::sqrt(0.05)));

    const Constellation m64 = Constellation::build(64, 1.0);
    CHECK(m64.size() == 8);
    CHECK(m64.unit() == doctest::Approx(std::sqrt(1.0 / 42.0)));
  }

  TEST_CASE("average complex symbol power equals the requested power") {
    for (int order : {4, 16, 64}) {
      const Constellation c = Constellation::build(order, 0.7);
      double p = 0.0;
      for (double s : c.levels()) p += s * s;
      CHECK(2.0 * p / c.size() == doctest::Approx(0.7));
    }
  }

  TEST_CASE("unsupported orders and names are rejected") {
    CHECK_THROWS(Constellation::build(8, 0.5));
    CHECK_THROWS(Constellation::from_name("8psk", 0.5));
    CHECK(Constellation::from_name("16QAM", 0.5).order() == 16);
    CHECK(Constellation::from_name("qpsk", 0.5).order() == 4);
  }

  TEST_CASE("Gray labels differ in exactly one bit between neighbours") {
    for (int order : {4, 16, 64}) {
      const Constellation c = Constellation::build(order, 0.5);
      for (int k = 0; k + 1 < c.size(); ++k)
        CHECK(std::bitset<8>(c.label(k) ^ c.label(k + 1)).count() == 1);
      for (int k = 0; k < c.size(); ++k) CHECK(c.index_of_label(c.label(k)) == k);
    }
    const Constellation m16 = Constellation::build(16, 0.5);
    CHECK(m16.label(0) == 0b00);
    CHECK(m16.label(1) == 0b01);
    CHECK(m16.label(2) == 0b11);
    CHECK(m16.label(3) == 0b10);
  }

  TEST_CASE("quantization ties resolve to the lower index") {
    const Constellation c = Constellation::build(16, 0.5);
    const double mid = 0.5 * (c.level(1) + c.level(2));
    CHECK(c.nearest_index(mid) == 1);
    CHECK(c.nearest_index(0.0) == 1);
    CHECK(c.nearest_index(1e6) == 3);
    CHECK(c.nearest_index(-1e6) == 0);
  }

  TEST_CASE("bits survive mapping and quantization") {
    const Constellation c = Constellation::build(64, 0.5);
    Rng rng = make_rng(2);
    std::vector<std::uint8_t> bits(60);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
    const Vector u = bits_to_symbols(bits, c);
    CHECK(u.size() == 20);
    CHECK(symbols_to_bits(u, c) == bits);
    CHECK_THROWS(bits_to_symbols(std::vector<std::uint8_t>(7), c));
  }

  TEST_CASE("LLR weights: uniform, degenerate and product form") {
    const Constellation c = Constellation::build(16, 0.5);
    const Vector uniform = llr_to_weights(std::vector<double>{0.0, 0.0}, c);
    for (int k = 0; k < 4; ++k) CHECK(uniform[k] == doctest::Approx(0.25));

    // b1 → 0 and b2 → 1 puts all mass on label 01.
    const Vector sure = llr_to_weights(std::vector<double>{-1e9, 1e9}, c);
    CHECK(sure[c.index_of_label(0b01)] == doctest::Approx(1.0));

    const double l1 = 0.7, l2 = -1.3;
    const Vector w = llr_to_weights(std::vector<double>{l1, l2}, c);
    const auto p1 = [](double l) { return 1.0 / (1.0 + std::exp(-l)); };
    CHECK(w[c.index_of_label(0b10)] == doctest::Approx(p1(l1) * (1 - p1(l2))));
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("weights are a probability vector for random LLRs") {
    const Constellation c = Constellation::build(64, 0.5);
    Rng rng = make_rng(4);
    std::normal_distribution<double> g(0.0, 20.0);
    for (int t = 0; t < 200; ++t) {
      const std::vector<double> llr{g(rng), g(rng), g(rng)};
      const Vector w = llr_to_weights(llr, c);
      CHECK(std::abs(w.sum() - 1.0) < 1e-12);
      CHECK(w.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("max-log demapper values") {
    const Constellation c = Constellation::build(4, 0.5);
    Vector u(1);
    u << 0.3;
    const LlrVector l = soft_symbol_to_bit_llr(u, 0.2, c);
    CHECK(l[0] == doctest::Approx(4 * 0.5 * 0.3 / 0.2));
    const LlrVector l2 = soft_symbol_to_bit_llr(u, 0.4, c);
    CHECK(l2[0] == doctest::Approx(l[0] / 2));
  }

  TEST_CASE("demapper signs agree with the transmitted bits in the noiseless case") {
    const Constellation c = Constellation::build(16, 0.5);
    for (int k = 0; k < c.size(); ++k) {
      Vector u(1);
      u << c.level(k);
      for (auto method : {DemapMethod::MaxLog, DemapMethod::Exact}) {
        const LlrVector l = soft_symbol_to_bit_llr(u, 0.01, c, method);
        for (int d = 0; d < 2; ++d) CHECK((l[static_cast<std::size_t>(d)] > 0) == (c.bit(k, d) == 1));
      }
    }
  }
}
