#include "mimohmc/constellation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace mimohmc {

namespace {

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Constellation Constellation::build(int order, double avg_power) {
  int k = 0;
  switch (order) {
    case 4: k = 2; break;
    case 16: k = 4; break;
    case 64: k = 8; break;
    default: throw std::invalid_argument("unsupported QAM order " + std::to_string(order) + " (use 4, 16 or 64)");
  }
  if (!(avg_power > 0.0)) throw std::invalid_argument("avg_power must be > 0");

  Constellation c;
  c.order_ = order;
  c.avg_power_ = avg_power;
  c.bits_per_dim_ = static_cast<int>(std::lround(std::log2(k)));
  // Mean of (2k−K+1)² over k equals (K²−1)/3; two real dimensions per symbol.
  const double mean_sq_units = (static_cast<double>(k) * k - 1.0) / 3.0;
  c.unit_ = std::sqrt(avg_power / (2.0 * mean_sq_units));
  c.levels_.resize(static_cast<std::size_t>(k));
  c.labels_.resize(static_cast<std::size_t>(k));
  c.index_of_label_.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    c.levels_[static_cast<std::size_t>(i)] = c.unit_ * static_cast<double>(2 * i - k + 1);
    const auto gray = static_cast<std::uint32_t>(i ^ (i >> 1));
    c.labels_[static_cast<std::size_t>(i)] = gray;
    c.index_of_label_[gray] = i;
  }
  return c;
}

Constellation Constellation::from_name(const std::string& name, double avg_power) {
  std::string lower;
  for (char ch : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (lower == "qpsk" || lower == "4qam") return build(4, avg_power);
  if (lower == "16qam") return build(16, avg_power);
  if (lower == "64qam") return build(64, avg_power);
  throw std::invalid_argument("unknown modulation '" + name + "' (use qpsk, 16qam or 64qam)");
}

std::string Constellation::name() const {
  return order_ == 4 ? "qpsk" : std::to_string(order_) + "qam";
}

int Constellation::nearest_index(double u) const {
  // Level k sits at t = 2k on this axis, so midpoints are the odd integers.
  const double t = u / unit_ + static_cast<double>(size() - 1);
  const double k = std::ceil((t - 1.0) / 2.0);
  if (!(k > 0.0)) return 0;  // also catches NaN
  return static_cast<int>(std::min(k, static_cast<double>(size() - 1)));
}

Quantized quantize(const Vector& u, const Constellation& c) {
  Quantized q;
  q.indices.resize(static_cast<std::size_t>(u.size()));
  q.values.resize(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const int k = c.nearest_index(u[i]);
    q.indices[static_cast<std::size_t>(i)] = k;
    q.values[i] = c.level(k);
  }
  return q;
}

Vector bits_to_symbols(std::span<const std::uint8_t> bits, const Constellation& c) {
  const auto d = static_cast<std::size_t>(c.bits_per_dim());
  if (bits.size() % d != 0)
    throw std::invalid_argument("bits_to_symbols: " + std::to_string(bits.size()) +
                                " bits is not a multiple of " + std::to_string(d));
  Vector u(static_cast<Eigen::Index>(bits.size() / d));
  for (Eigen::Index n = 0; n < u.size(); ++n) {
    std::uint32_t label = 0;
    for (std::size_t j = 0; j < d; ++j) label = (label << 1) | (bits[static_cast<std::size_t>(n) * d + j] & 1u);
    u[n] = c.level(c.index_of_label(label));
  }
  return u;
}

std::vector<std::uint8_t> indices_to_bits(std::span<const int> indices, const Constellation& c) {
  const int d = c.bits_per_dim();
  std::vector<std::uint8_t> bits;
  bits.reserve(indices.size() * static_cast<std::size_t>(d));
  for (int k : indices)
    for (int j = 0; j < d; ++j) bits.push_back(static_cast<std::uint8_t>(c.bit(k, j)));
  return bits;
}

std::vector<std::uint8_t> symbols_to_bits(const Vector& u, const Constellation& c) {
  return indices_to_bits(quantize(u, c).indices, c);
}

Vector llr_to_weights(std::span<const double> llr, const Constellation& c) {
  const int d = c.bits_per_dim();
  if (static_cast<int>(llr.size()) != d)
    throw std::invalid_argument("llr_to_weights: expected " + std::to_string(d) + " LLRs");
  std::vector<double> log_p1(static_cast<std::size_t>(d));
  std::vector<double> log_p0(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    const double l = std::clamp(llr[static_cast<std::size_t>(j)], -kLlrClamp, kLlrClamp);
    log_p1[static_cast<std::size_t>(j)] = -softplus(-l);
    log_p0[static_cast<std::size_t>(j)] = -softplus(l);
  }
  Vector w(c.size());
  for (int k = 0; k < c.size(); ++k) {
    double lw = 0.0;
    for (int j = 0; j < d; ++j)
      lw += c.bit(k, j) ? log_p1[static_cast<std::size_t>(j)] : log_p0[static_cast<std::size_t>(j)];
    w[k] = std::exp(lw);
  }
  return w / w.sum();
}

Matrix llr_to_weight_matrix(std::span<const double> llr, Eigen::Index dims, const Constellation& c) {
  const auto d = static_cast<std::size_t>(c.bits_per_dim());
  if (llr.size() != static_cast<std::size_t>(dims) * d)
    throw std::invalid_argument("llr_to_weight_matrix: LLR length does not match dims·D");
  Matrix w(dims, c.size());
  for (Eigen::Index n = 0; n < dims; ++n)
    w.row(n) = llr_to_weights(llr.subspan(static_cast<std::size_t>(n) * d, d), c).transpose();
  return w;
}

LlrVector soft_symbol_to_bit_llr(const Vector& u_soft, const Vector& residual_var, const Constellation& c,
                                 DemapMethod method) {
  if (residual_var.size() != u_soft.size()) throw std::invalid_argument("soft demapper: variance length mismatch");
  const int d = c.bits_per_dim();
  const double inf = std::numeric_limits<double>::infinity();
  LlrVector out(static_cast<std::size_t>(u_soft.size() * d));
  for (Eigen::Index n = 0; n < u_soft.size(); ++n) {
    const double v = residual_var[n];
    if (!(v > 0.0)) throw std::invalid_argument("soft demapper: residual variance must be > 0");
    for (int j = 0; j < d; ++j) {
      double acc0 = method == DemapMethod::MaxLog ? inf : -inf;
      double acc1 = acc0;
      for (int k = 0; k < c.size(); ++k) {
        const double diff = u_soft[n] - c.level(k);
        const double metric = diff * diff / v;
        double& acc = c.bit(k, j) ? acc1 : acc0;
        acc = method == DemapMethod::MaxLog ? std::min(acc, metric) : log_sum_exp(acc, -metric);
      }
      const double llr = method == DemapMethod::MaxLog ? acc0 - acc1 : acc1 - acc0;
      out[static_cast<std::size_t>(n * d + j)] = std::clamp(llr, -kLlrClamp, kLlrClamp);
    }
  }
  return out;
}

LlrVector soft_symbol_to_bit_llr(const Vector& u_soft, double residual_var, const Constellation& c,
                                 DemapMethod method) {
  return soft_symbol_to_bit_llr(u_soft, Vector::Constant(u_soft.size(), residual_var), c, method);
}

}  // namespace mimohmc
