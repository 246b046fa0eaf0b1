#include "mimohmc/diagnostics.hpp"

#include "mimohmc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mimohmc {

namespace {

void require_shape(const ChainSamples& s, int dim, int min_steps, int min_chains, const char* who) {
  if (dim < 0 || dim >= s.dims) throw std::invalid_argument(std::string(who) + ": dimension out of range");
  if (s.steps < min_steps) throw std::invalid_argument(std::string(who) + ": too few steps");
  if (s.chains < min_chains) throw std::invalid_argument(std::string(who) + ": too few chains");
  if (s.draws.size() != static_cast<std::size_t>(s.chains) * s.steps * s.dims)
    throw std::invalid_argument(std::string(who) + ": draws do not match the declared shape");
}

std::vector<double> series(const ChainSamples& s, int chain, int dim) {
  std::vector<double> out(static_cast<std::size_t>(s.steps));
  for (int i = 0; i < s.steps; ++i) out[static_cast<std::size_t>(i)] = s.draw(chain, i, dim);
  return out;
}

bool is_constant(const ChainSamples& s, int dim) {
  const double first = s.draw(0, 0, dim);
  for (int j = 0; j < s.chains; ++j)
    for (int i = 0; i < s.steps; ++i)
      if (s.draw(j, i, dim) != first) return false;
  return true;
}

}  // namespace

std::vector<double> autocorrelation(const ChainSamples& s, int dim, int max_lag) {
  require_shape(s, dim, 1, 1, "autocorrelation");
  const int lags = max_lag < 0 ? s.steps - 1 : std::min(max_lag, s.steps - 1);
  std::vector<double> acf(static_cast<std::size_t>(lags + 1), 0.0);
  for (int j = 0; j < s.chains; ++j) {
    std::vector<double> x = series(s, j, dim);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double c0 = 0.0;
    for (double& v : x) {
      v -= mean;
      c0 += v * v;
    }
    if (c0 == 0.0) {
      acf[0] += 1.0;
      continue;
    }
    for (int lag = 0; lag <= lags; ++lag) {
      double c = 0.0;
      for (std::size_t i = 0; i + static_cast<std::size_t>(lag) < x.size(); ++i) c += x[i] * x[i + lag];
      acf[static_cast<std::size_t>(lag)] += c / c0;
    }
  }
  for (double& a : acf) a /= s.chains;
  return acf;
}

double ess(const ChainSamples& s, int dim) {
  require_shape(s, dim, 2, 1, "ess");
  const double total = static_cast<double>(s.chains) * s.steps;
  if (is_constant(s, dim)) return total;
  const std::vector<double> acf = autocorrelation(s, dim);
  const int last = static_cast<int>(acf.size()) - 1;
  // Sum lags 1..T, T odd, stopping before the first negative adjacent pair.
  double sum = 0.0;
  int t = 1;
  for (; t <= last; t += 2) {
    sum += acf[static_cast<std::size_t>(t)];
    if (t + 2 > last) break;
    if (acf[static_cast<std::size_t>(t + 1)] + acf[static_cast<std::size_t>(t + 2)] < 0.0) break;
    sum += acf[static_cast<std::size_t>(t + 1)];
  }
  const double denom = 1.0 + 2.0 * sum;
  return denom > 0.0 ? total / denom : total;
}

double r_hat(const ChainSamples& s, int dim) {
  require_shape(s, dim, 2, 2, "r_hat");
  const double i_count = s.steps;
  const double j_count = s.chains;
  std::vector<double> means(static_cast<std::size_t>(s.chains));
  double w = 0.0;
  for (int j = 0; j < s.chains; ++j) {
    double m = 0.0;
    for (int i = 0; i < s.steps; ++i) m += s.draw(j, i, dim);
    m /= i_count;
    double v = 0.0;
    for (int i = 0; i < s.steps; ++i) {
      const double d = s.draw(j, i, dim) - m;
      v += d * d;
    }
    w += v / (i_count - 1.0);
    means[static_cast<std::size_t>(j)] = m;
  }
  w /= j_count;
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= j_count;
  double b = 0.0;
  for (double m : means) b += (m - grand) * (m - grand);
  b *= i_count / (j_count - 1.0);
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (i_count - 1.0) / i_count * w + b / i_count;
  return std::sqrt(var_plus / w);
}

std::vector<double> responsibilities(const ChainSamples& s, const Constellation& c, const PriorConfig& prior) {
  prior.validate(s.dims, c.size());
  const int k_count = c.size();
  std::vector<double> out(s.draws.size() * static_cast<std::size_t>(k_count));
  std::vector<double> lw(static_cast<std::size_t>(k_count));
  std::vector<double> term(static_cast<std::size_t>(k_count));
  for (std::size_t t = 0; t < s.draws.size(); ++t) {
    const auto n = static_cast<Eigen::Index>(t % static_cast<std::size_t>(s.dims));
    double peak = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < k_count; ++k) {
      const double w = prior.weights.size() == 0 ? 1.0 / k_count : prior.weights(n, k);
      term[static_cast<std::size_t>(k)] = w > 0.0 ? std::log(w) + log_student_t(s.draws[t], c.level(k), prior.t_scale,
                                                                                 prior.t_dof)
                                                  : -std::numeric_limits<double>::infinity();
      peak = std::max(peak, term[static_cast<std::size_t>(k)]);
    }
    double total = 0.0;
    for (double& v : term) total += (v = std::exp(v - peak));
    for (int k = 0; k < k_count; ++k) out[t * k_count + k] = term[static_cast<std::size_t>(k)] / total;
  }
  return out;
}

TransitionMatrix transition_matrix(const ChainSamples& s, const Constellation& c, const PriorConfig& prior) {
  if (s.steps < 2) throw std::invalid_argument("transition_matrix: at least 2 steps required");
  const int k_count = c.size();
  const std::vector<double> g = responsibilities(s, c, prior);
  Matrix counts = Matrix::Zero(k_count, k_count);
  auto at = [&](int j, int i, int n, int k) {
    return g[((static_cast<std::size_t>(j) * s.steps + i) * s.dims + n) * k_count + k];
  };
  for (int j = 0; j < s.chains; ++j)
    for (int n = 0; n < s.dims; ++n)
      for (int i = 0; i + 1 < s.steps; ++i)
        for (int a = 0; a < k_count; ++a) {
          const double ga = at(j, i, n, a);
          if (ga == 0.0) continue;
          for (int b = 0; b < k_count; ++b) counts(a, b) += ga * at(j, i + 1, n, b);
        }
  counts /= static_cast<double>(s.chains) * s.dims;

  TransitionMatrix out;
  out.p = Matrix::Zero(k_count, k_count);
  out.empty_rows.assign(static_cast<std::size_t>(k_count), false);
  // A row counts as empty when its mass is negligible next to one observed transition.
  const double negligible = 1e-12 * (s.steps - 1);
  for (int a = 0; a < k_count; ++a) {
    const double row = counts.row(a).sum();
    if (row > negligible) {
      out.p.row(a) = counts.row(a) / row;
    } else {
      out.p.row(a).setConstant(1.0 / k_count);
      out.empty_rows[static_cast<std::size_t>(a)] = true;
    }
  }
  return out;
}

double second_largest_modulus(const Matrix& p) {
  const std::vector<double> m = linalg::eigen_moduli(p);
  return m.size() < 2 ? 0.0 : std::clamp(m[1], 0.0, 1.0);
}

double convergence_rate(const ChainSamples& s, const Constellation& c, const PriorConfig& prior) {
  return second_largest_modulus(transition_matrix(s, c, prior).p);
}

double soft_ser(const ChainSamples& s, const Vector& u_true, const Constellation& c, const PriorConfig& prior) {
  if (u_true.size() != s.dims) throw std::invalid_argument("soft_ser: ground truth has wrong length");
  if (s.draws.empty()) throw std::invalid_argument("soft_ser: no samples");
  const int k_count = c.size();
  std::vector<int> truth(static_cast<std::size_t>(s.dims));
  for (int n = 0; n < s.dims; ++n) truth[static_cast<std::size_t>(n)] = c.nearest_index(u_true[n]);
  const std::vector<double> g = responsibilities(s, c, prior);
  double off = 0.0;
  for (std::size_t t = 0; t < s.draws.size(); ++t) {
    const int k_true = truth[t % static_cast<std::size_t>(s.dims)];
    off += 1.0 - g[t * k_count + k_true];
  }
  return std::clamp(off / static_cast<double>(s.draws.size()), 0.0, 1.0);
}

double hard_ser_of_draws(const ChainSamples& s, const Vector& u_true, const Constellation& c) {
  if (u_true.size() != s.dims) throw std::invalid_argument("hard_ser_of_draws: ground truth has wrong length");
  if (s.draws.empty()) throw std::invalid_argument("hard_ser_of_draws: no samples");
  std::size_t errors = 0;
  for (std::size_t t = 0; t < s.draws.size(); ++t) {
    const auto n = static_cast<Eigen::Index>(t % static_cast<std::size_t>(s.dims));
    errors += c.nearest_index(s.draws[t]) != c.nearest_index(u_true[n]);
  }
  return static_cast<double>(errors) / static_cast<double>(s.draws.size());
}

DiagnosticsReport diagnose(const ChainSamples& s, const Constellation& c, const PriorConfig& prior,
                           const Vector* u_true, int acf_lags) {
  DiagnosticsReport r;
  if (s.dims < 1 || s.steps < 2) throw std::invalid_argument("diagnose: need at least one dimension and 2 steps");
  double ess_sum = 0.0;
  double rh_sum = 0.0;
  r.r_hat_max = 0.0;
  for (int n = 0; n < s.dims; ++n) {
    if (is_constant(s, n)) r.degenerate = true;
    ess_sum += ess(s, n) / s.chains;
    if (s.chains >= 2) {
      const double rh = r_hat(s, n);
      rh_sum += rh;
      r.r_hat_max = std::max(r.r_hat_max, rh);
    }
  }
  r.ess_per_chain = ess_sum / s.dims;
  if (s.chains >= 2) {
    r.r_hat = rh_sum / s.dims;
  } else {
    r.r_hat = std::numeric_limits<double>::quiet_NaN();
    r.r_hat_max = r.r_hat;
  }
  const TransitionMatrix tm = transition_matrix(s, c, prior);
  r.conv_rate = second_largest_modulus(tm.p);
  r.empty_rows = std::find(tm.empty_rows.begin(), tm.empty_rows.end(), true) != tm.empty_rows.end();
  if (u_true) r.soft_ser = soft_ser(s, *u_true, c, prior);
  r.acf = autocorrelation(s, 0, acf_lags);
  return r;
}

}  // namespace mimohmc
