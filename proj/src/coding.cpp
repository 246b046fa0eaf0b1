#include "mimohmc/coding.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace mimohmc {

namespace {

constexpr double kMessageClamp = 19.0;

using Row = std::vector<std::uint64_t>;

bool get_bit(const Row& r, int j) { return (r[static_cast<std::size_t>(j) >> 6] >> (j & 63)) & 1u; }
void set_bit(Row& r, int j) { r[static_cast<std::size_t>(j) >> 6] |= std::uint64_t{1} << (j & 63); }

}  // namespace

LdpcCode::LdpcCode(int length, std::vector<std::vector<int>> rows) : length_(length), rows_(std::move(rows)) {
  if (length_ < 1) throw std::invalid_argument("LdpcCode: length must be >= 1");
  if (rows_.empty()) throw std::invalid_argument("LdpcCode: at least one check is required");
  cols_.assign(static_cast<std::size_t>(length_), {});
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    auto& row = rows_[i];
    std::sort(row.begin(), row.end());
    if (std::adjacent_find(row.begin(), row.end()) != row.end())
      throw std::invalid_argument("LdpcCode: check " + std::to_string(i) + " repeats a bit");
    for (int b : row) {
      if (b < 0 || b >= length_)
        throw std::invalid_argument("LdpcCode: check " + std::to_string(i) + " references bit " + std::to_string(b));
      cols_[static_cast<std::size_t>(b)].push_back(static_cast<int>(i));
    }
  }

  // Reduced row echelon form over GF(2).
  const std::size_t words = (static_cast<std::size_t>(length_) + 63) / 64;
  std::vector<Row> m(rows_.size(), Row(words, 0));
  for (std::size_t i = 0; i < rows_.size(); ++i)
    for (int b : rows_[i]) set_bit(m[i], b);
  std::size_t r = 0;
  for (int col = 0; col < length_ && r < m.size(); ++col) {
    std::size_t p = r;
    while (p < m.size() && !get_bit(m[p], col)) ++p;
    if (p == m.size()) continue;
    std::swap(m[p], m[r]);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (i != r && get_bit(m[i], col))
        for (std::size_t w = 0; w < words; ++w) m[i][w] ^= m[r][w];
    pivots_.push_back(col);
    ++r;
  }
  std::vector<int> info_index(static_cast<std::size_t>(length_), -1);
  for (int col = 0, p = 0; col < length_; ++col) {
    if (p < static_cast<int>(pivots_.size()) && pivots_[static_cast<std::size_t>(p)] == col) {
      ++p;
      continue;
    }
    info_index[static_cast<std::size_t>(col)] = static_cast<int>(info_.size());
    info_.push_back(col);
  }
  pivot_deps_.resize(pivots_.size());
  for (std::size_t i = 0; i < pivots_.size(); ++i)
    for (int col : info_)
      if (get_bit(m[i], col)) pivot_deps_[i].push_back(info_index[static_cast<std::size_t>(col)]);
}

LdpcCode LdpcCode::toy() { return LdpcCode(6, {{0, 1, 3}, {1, 2, 4}, {0, 2, 5}}); }

LdpcCode LdpcCode::progressive_edge_growth(int length, int col_weight, int row_weight, std::uint64_t seed) {
  if (length < 2 || col_weight < 1 || row_weight < 2)
    throw std::invalid_argument("progressive_edge_growth: invalid degrees");
  if ((static_cast<long long>(length) * col_weight) % row_weight != 0)
    throw std::invalid_argument("progressive_edge_growth: length·col_weight must be divisible by row_weight");
  const int m = length * col_weight / row_weight;
  if (col_weight > m) throw std::invalid_argument("progressive_edge_growth: col_weight exceeds the number of checks");

  Rng rng = make_rng(seed, 0x504547);
  std::vector<std::vector<int>> check_vars(static_cast<std::size_t>(m));
  std::vector<std::vector<int>> var_checks(static_cast<std::size_t>(length));
  std::vector<int> depth_of(static_cast<std::size_t>(m));
  std::vector<int> var_seen(static_cast<std::size_t>(length), -1);

  for (int v = 0; v < length; ++v) {
    for (int e = 0; e < col_weight; ++e) {
      std::vector<int> candidates;
      if (e == 0) {
        candidates.resize(static_cast<std::size_t>(m));
        std::iota(candidates.begin(), candidates.end(), 0);
      } else {
        // Breadth-first expansion from v until the reached check set stops
        // growing or covers every check.
        std::fill(depth_of.begin(), depth_of.end(), -1);
        std::deque<int> frontier;
        const int stamp = v * col_weight + e;
        var_seen[static_cast<std::size_t>(v)] = stamp;
        for (int c : var_checks[static_cast<std::size_t>(v)]) {
          depth_of[static_cast<std::size_t>(c)] = 0;
          frontier.push_back(c);
        }
        int reached = static_cast<int>(frontier.size());
        std::vector<int> last_level(frontier.begin(), frontier.end());
        int level = 0;
        while (!frontier.empty()) {
          std::vector<int> next;
          for (int c : frontier)
            for (int u : check_vars[static_cast<std::size_t>(c)]) {
              if (var_seen[static_cast<std::size_t>(u)] == stamp) continue;
              var_seen[static_cast<std::size_t>(u)] = stamp;
              for (int c2 : var_checks[static_cast<std::size_t>(u)])
                if (depth_of[static_cast<std::size_t>(c2)] < 0) {
                  depth_of[static_cast<std::size_t>(c2)] = level + 1;
                  next.push_back(c2);
                }
            }
          if (next.empty()) break;
          reached += static_cast<int>(next.size());
          ++level;
          if (reached == m) {
            last_level = std::move(next);
            break;
          }
          last_level = next;
          frontier.assign(next.begin(), next.end());
        }
        if (reached < m) {
          for (int c = 0; c < m; ++c)
            if (depth_of[static_cast<std::size_t>(c)] < 0) candidates.push_back(c);
        } else {
          candidates = std::move(last_level);
        }
      }
      // Full checks are never chosen, so every check ends at row_weight.
      const auto full = [&](int c) { return check_vars[static_cast<std::size_t>(c)].size() >= static_cast<std::size_t>(row_weight); };
      std::erase_if(candidates, full);
      if (candidates.empty())
        for (int c = 0; c < m; ++c)
          if (!full(c) && std::find(var_checks[static_cast<std::size_t>(v)].begin(),
                                    var_checks[static_cast<std::size_t>(v)].end(), c) ==
                              var_checks[static_cast<std::size_t>(v)].end())
            candidates.push_back(c);
      // Lowest current degree among the farthest checks; random tie-break.
      std::size_t min_deg = std::numeric_limits<std::size_t>::max();
      for (int c : candidates) min_deg = std::min(min_deg, check_vars[static_cast<std::size_t>(c)].size());
      std::vector<int> best;
      for (int c : candidates)
        if (check_vars[static_cast<std::size_t>(c)].size() == min_deg) best.push_back(c);
      if (best.empty()) throw std::logic_error("progressive_edge_growth: no candidate check");
      std::uniform_int_distribution<std::size_t> pick(0, best.size() - 1);
      const int chosen = best[pick(rng)];
      check_vars[static_cast<std::size_t>(chosen)].push_back(v);
      var_checks[static_cast<std::size_t>(v)].push_back(chosen);
    }
  }
  return LdpcCode(length, std::move(check_vars));
}

LdpcCode LdpcCode::default_regular() { return progressive_edge_growth(1024, 3, 6, 1); }

LdpcCode LdpcCode::parse(std::istream& in) {
  std::string line;
  int length = -1;
  int checks = -1;
  std::vector<std::vector<int>> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    if (length < 0) {
      if (!(ls >> length >> checks) || length < 1 || checks < 1)
        throw std::invalid_argument("parity-check file line " + std::to_string(line_no) +
                                    ": expected '<length> <checks>' header");
      rows.assign(static_cast<std::size_t>(checks), {});
      continue;
    }
    int idx;
    char colon;
    if (!(ls >> idx >> colon) || colon != ':' || idx < 0 || idx >= checks)
      throw std::invalid_argument("parity-check file line " + std::to_string(line_no) + ": expected '<check>: bits'");
    int b;
    while (ls >> b) rows[static_cast<std::size_t>(idx)].push_back(b);
    if (!ls.eof()) throw std::invalid_argument("parity-check file line " + std::to_string(line_no) + ": bad bit index");
  }
  if (length < 0) throw std::invalid_argument("parity-check file: missing header");
  return LdpcCode(length, std::move(rows));
}

LdpcCode LdpcCode::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open parity-check file '" + path + "'");
  return parse(in);
}

void LdpcCode::write(std::ostream& out) const {
  out << length_ << ' ' << rows_.size() << '\n';
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    out << i << ':';
    for (int b : rows_[i]) out << ' ' << b;
    out << '\n';
  }
}

void LdpcCode::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write parity-check file '" + path + "'");
  write(out);
}

Bits LdpcCode::encode(std::span<const std::uint8_t> info) const {
  if (static_cast<int>(info.size()) != dimension())
    throw std::invalid_argument("ldpc_encode: expected " + std::to_string(dimension()) + " information bits, got " +
                                std::to_string(info.size()));
  Bits cw(static_cast<std::size_t>(length_), 0);
  for (std::size_t i = 0; i < info_.size(); ++i) cw[static_cast<std::size_t>(info_[i])] = info[i] & 1u;
  for (std::size_t i = 0; i < pivots_.size(); ++i) {
    std::uint8_t acc = 0;
    for (int j : pivot_deps_[i]) acc ^= info[static_cast<std::size_t>(j)] & 1u;
    cw[static_cast<std::size_t>(pivots_[i])] = acc;
  }
  return cw;
}

Bits LdpcCode::extract_info(std::span<const std::uint8_t> codeword) const {
  if (static_cast<int>(codeword.size()) != length_) throw std::invalid_argument("extract_info: wrong length");
  Bits out(info_.size());
  for (std::size_t i = 0; i < info_.size(); ++i) out[i] = codeword[static_cast<std::size_t>(info_[i])];
  return out;
}

int LdpcCode::syndrome_weight(std::span<const std::uint8_t> word) const {
  if (static_cast<int>(word.size()) != length_) throw std::invalid_argument("syndrome: wrong length");
  int w = 0;
  for (const auto& row : rows_) {
    std::uint8_t acc = 0;
    for (int b : row) acc ^= word[static_cast<std::size_t>(b)] & 1u;
    w += acc;
  }
  return w;
}

std::vector<Bits> LdpcCode::generator() const {
  std::vector<Bits> g;
  g.reserve(info_.size());
  Bits unit(info_.size(), 0);
  for (std::size_t i = 0; i < info_.size(); ++i) {
    unit[i] = 1;
    g.push_back(encode(unit));
    unit[i] = 0;
  }
  return g;
}

DecodeResult ldpc_decode(std::span<const double> llr_in, const LdpcCode& code, int max_iter) {
  if (static_cast<int>(llr_in.size()) != code.length())
    throw std::invalid_argument("ldpc_decode: expected " + std::to_string(code.length()) + " LLRs");
  if (max_iter < 0) throw std::invalid_argument("ldpc_decode: max_iter must be >= 0");
  const auto n = static_cast<std::size_t>(code.length());
  const auto& rows = code.check_rows();

  DecodeResult out;
  out.llr.assign(llr_in.begin(), llr_in.end());
  out.bits.resize(n);
  auto harden = [&] {
    bool zero = false;
    for (std::size_t v = 0; v < n; ++v) {
      out.bits[v] = out.llr[v] > 0.0;
      zero |= out.llr[v] == 0.0;
    }
    return !zero && code.is_codeword(out.bits);
  };
  bool done = harden();
  if (done || max_iter == 0) {
    out.converged = done;
    return out;
  }

  // Edge e of check i is (i, rows[i][k]); messages stored per edge.
  std::vector<std::size_t> offset(rows.size() + 1, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) offset[i + 1] = offset[i] + rows[i].size();
  const std::size_t edges = offset.back();
  std::vector<double> v2c(edges);
  std::vector<double> c2v(edges, 0.0);
  std::vector<double> prior(llr_in.begin(), llr_in.end());
  std::vector<double> post(n);
  std::vector<double> t;

  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) v2c[offset[i] + k] = prior[static_cast<std::size_t>(rows[i][k])];

  for (int it = 1; it <= max_iter; ++it) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t deg = rows[i].size();
      t.resize(deg);
      // tanh(L/2) with L = ln p(1)/p(0) is p(1) - p(0); the product of
      // p(0) - p(1) terms is P(even) - P(odd) of the other bits.
      for (std::size_t k = 0; k < deg; ++k)
        t[k] = -std::tanh(0.5 * std::clamp(v2c[offset[i] + k], -kMessageClamp, kMessageClamp));
      for (std::size_t k = 0; k < deg; ++k) {
        double prod = 1.0;
        for (std::size_t q = 0; q < deg; ++q)
          if (q != k) prod *= t[q];
        c2v[offset[i] + k] = std::clamp(-2.0 * std::atanh(prod), -kMessageClamp, kMessageClamp);
      }
    }
    post = prior;
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k) post[static_cast<std::size_t>(rows[i][k])] += c2v[offset[i] + k];
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        v2c[offset[i] + k] = post[static_cast<std::size_t>(rows[i][k])] - c2v[offset[i] + k];

    out.llr = post;
    out.iterations = it;
    if (harden()) {
      out.converged = true;
      break;
    }
  }
  return out;
}

int channel_uses_for(int codeword_bits, int n_tx, const Constellation& c) {
  const int per_use = 2 * n_tx * c.bits_per_dim();
  return (codeword_bits + per_use - 1) / per_use;
}

IddState run_idd(const std::vector<RealLinearSystem>& uses, const Constellation& c, const LdpcCode& code,
                 const Bits& info_bits, const UseDetector& detector, const IddConfig& cfg) {
  if (uses.empty()) throw std::invalid_argument("run_idd: no channel uses");
  if (cfg.max_outer < 0) throw std::invalid_argument("run_idd: max_outer must be >= 0");
  if (static_cast<int>(info_bits.size()) != code.dimension())
    throw std::invalid_argument("run_idd: information length does not match the code dimension");
  const auto dims = uses.front().h.cols();
  const std::size_t per_use = static_cast<std::size_t>(dims) * c.bits_per_dim();
  const auto n = static_cast<std::size_t>(code.length());
  if (per_use * uses.size() < n)
    throw std::invalid_argument("run_idd: channel uses carry fewer bits than the codeword length");
  for (const auto& u : uses)
    if (u.h.cols() != dims) throw std::invalid_argument("run_idd: channel uses differ in size");

  IddState st;
  st.info_bits = info_bits.size();
  LlrVector feedback;
  for (int it = 0; it <= cfg.max_outer; ++it) {
    LlrVector channel(per_use * uses.size(), 0.0);
    for (std::size_t t = 0; t < uses.size(); ++t) {
      std::optional<LlrVector> prior;
      if (it > 0) {
        LlrVector slice(per_use, 0.0);
        for (std::size_t b = 0; b < per_use; ++b) {
          const std::size_t pos = t * per_use + b;
          if (pos < n) slice[b] = feedback[pos];
        }
        prior = std::move(slice);
      }
      const DetectionResult det = detector(static_cast<int>(t), it, prior);
      st.degraded |= det.degraded;
      const double half_noise = uses[t].real_noise_var();
      LlrVector llr;
      if (cfg.demap_variance == DemapVariance::Posterior && det.u_var.size() == dims) {
        const Vector v = det.u_var.cwiseMax(cfg.posterior_var_floor * half_noise);
        llr = soft_symbol_to_bit_llr(det.u_soft, v, c, cfg.demap);
      } else {
        llr = soft_symbol_to_bit_llr(det.u_soft, half_noise, c, cfg.demap);
      }
      std::copy(llr.begin(), llr.end(), channel.begin() + static_cast<std::ptrdiff_t>(t * per_use));
    }
    channel.resize(n);
    const DecodeResult dec = ldpc_decode(channel, code, cfg.decoder_iterations);
    feedback = dec.llr;
    st.iteration = it;
    st.current_llr = dec.llr;
    st.decoded_bits = code.extract_info(dec.bits);
    std::size_t errors = 0;
    for (std::size_t i = 0; i < info_bits.size(); ++i) errors += st.decoded_bits[i] != info_bits[i];
    st.bit_errors.push_back(errors);
    st.converged.push_back(dec.converged);
    if (cfg.early_exit && dec.converged && it < cfg.max_outer) {
      st.exited_early = true;
      break;
    }
  }
  while (static_cast<int>(st.bit_errors.size()) < cfg.max_outer + 1) {
    st.bit_errors.push_back(st.bit_errors.back());
    st.converged.push_back(st.converged.back());
  }
  for (std::size_t e : st.bit_errors)
    st.ber_trace.push_back(static_cast<double>(e) / static_cast<double>(info_bits.size()));
  return st;
}

IddState run_idd(const std::vector<RealLinearSystem>& uses, const Constellation& c, const LdpcCode& code,
                 const Bits& info_bits, const DetectorConfig& det, std::uint64_t seed, const IddConfig& cfg) {
  DetectorConfig initial = det;
  initial.kind = DetectorKind::HmcCodedInitial;
  DetectorConfig subsequent = det;
  subsequent.kind = DetectorKind::HmcCodedSubsequent;
  const UseDetector run = [&](int use, int iteration, const std::optional<LlrVector>& prior) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(use), static_cast<std::uint64_t>(iteration));
    return iteration == 0 ? detect_hmc(uses[static_cast<std::size_t>(use)], c, initial, s)
                          : detect_hmc(uses[static_cast<std::size_t>(use)], c, subsequent, s, prior);
  };
  return run_idd(uses, c, code, info_bits, run, cfg);
}

}  // namespace mimohmc
