#include "mimohmc/model.hpp"

#include "mimohmc/linalg.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace mimohmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double t_log_const(double scale, double dof) {
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) - 0.5 * std::log(dof * std::numbers::pi) -
         std::log(scale);
}

Matrix log_weight_matrix(const PriorConfig& cfg, Eigen::Index dims, int levels) {
  if (cfg.weights.size() == 0) return Matrix::Constant(dims, levels, -std::log(static_cast<double>(levels)));
  Matrix lw(dims, levels);
  for (Eigen::Index n = 0; n < dims; ++n)
    for (int k = 0; k < levels; ++k) {
      const double w = cfg.weights(n, k);
      lw(n, k) = w > 0.0 ? std::log(w) : kNegInf;
    }
  return lw;
}

// log Σ_k exp(lw_k + log T_k) and its derivative in u.
double mixture_dim(double u, const Constellation& c, Eigen::Ref<const Eigen::RowVectorXd> lw, double scale,
                   double dof, double log_const, double* grad) {
  const int k_count = c.size();
  double terms[8];
  double slopes[8];
  double peak = kNegInf;
  const double nu_s2 = dof * scale * scale;
  for (int k = 0; k < k_count; ++k) {
    if (lw[k] == kNegInf) {
      terms[k] = kNegInf;
      slopes[k] = 0.0;
      continue;
    }
    const double d = u - c.level(k);
    terms[k] = lw[k] + log_const - 0.5 * (dof + 1.0) * std::log1p(d * d / nu_s2);
    slopes[k] = -(dof + 1.0) * d / (nu_s2 + d * d);
    peak = std::max(peak, terms[k]);
  }
  if (peak == kNegInf) {
    if (grad) *grad = 0.0;
    return kNegInf;
  }
  double sum = 0.0;
  double weighted = 0.0;
  for (int k = 0; k < k_count; ++k) {
    if (terms[k] == kNegInf) continue;
    const double e = std::exp(terms[k] - peak);
    sum += e;
    weighted += e * slopes[k];
  }
  if (grad) *grad = weighted / sum;
  return peak + std::log(sum);
}

}  // namespace

void PriorConfig::validate(Eigen::Index dims, int levels) const {
  if (mixture_enabled) {
    if (!(t_scale > 0.0)) throw std::invalid_argument("prior: t_scale must be > 0");
    if (!(t_dof > 0.0)) throw std::invalid_argument("prior: t_dof must be > 0");
    if (weights.size() != 0) {
      if (weights.rows() != dims || weights.cols() != levels)
        throw std::invalid_argument("prior: weight matrix must be dims × K");
      for (Eigen::Index n = 0; n < dims; ++n) {
        if ((weights.row(n).array() < 0.0).any()) throw std::invalid_argument("prior: negative weight");
        if (std::abs(weights.row(n).sum() - 1.0) > 1e-9)
          throw std::invalid_argument("prior: weights of dimension " + std::to_string(n) + " do not sum to 1");
      }
    }
  }
  if (levels > 8) throw std::invalid_argument("prior: at most 8 levels per dimension");
  if (ridge_enabled && !(ridge_var > 0.0)) throw std::invalid_argument("prior: ridge_var must be > 0");
  if (temperature_enabled && !(cauchy_scale > 0.0)) throw std::invalid_argument("prior: cauchy_scale must be > 0");
}

TunedParameters tuned_parameters(int order) {
  switch (order) {
    case 4: return {0.1242, 1.8, 3.5, 15.0};
    case 16: return {0.0621, 1.8, 5.0, 62.0};
    case 64: return {0.0531, 2.5, 3.0, 230.0};
    default: throw std::invalid_argument("no tuned parameters for order " + std::to_string(order));
  }
}

double log_student_t(double x, double loc, double scale, double dof) {
  const double z = (x - loc) / scale;
  return t_log_const(scale, dof) - 0.5 * (dof + 1.0) * std::log1p(z * z / dof);
}

double log_likelihood(const AugmentedState& state, const RealLinearSystem& sys, TemperatureMode mode) {
  if (state.u.size() != sys.h.cols()) throw std::invalid_argument("log_likelihood: u has wrong length");
  const Vector r = sys.y - sys.h * state.u;
  const double var = sys.real_noise_var();
  const auto m = static_cast<double>(r.size());
  if (state.log_lambda.size() == 0)
    return -0.5 * m * std::log(2.0 * std::numbers::pi * var) - r.squaredNorm() / (2.0 * var);

  double out = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double ll = mode == TemperatureMode::Global ? state.log_lambda[0] : state.log_lambda[i];
    const double scaled = var * std::exp(2.0 * ll);
    out += -0.5 * std::log(2.0 * std::numbers::pi * scaled) - r[i] * r[i] / (2.0 * scaled);
  }
  return out;
}

double log_prior_mixture_t(const Vector& u, const Constellation& c, const PriorConfig& cfg) {
  cfg.validate(u.size(), c.size());
  double out = 0.0;
  for (Eigen::Index n = 0; n < u.size(); ++n) {
    double acc = kNegInf;
    for (int k = 0; k < c.size(); ++k) {
      const double w = cfg.weights.size() == 0 ? 1.0 / c.size() : cfg.weights(n, k);
      if (w <= 0.0) continue;
      const double term = std::log(w) + log_student_t(u[n], c.level(k), cfg.t_scale, cfg.t_dof);
      if (acc == kNegInf) {
        acc = term;
      } else {
        const double hi = std::max(acc, term);
        acc = hi + std::log(std::exp(acc - hi) + std::exp(term - hi));
      }
    }
    out += acc;
  }
  return out;
}

double log_prior_ridge(const Vector& u, double ridge_var) {
  if (!(ridge_var > 0.0)) throw std::invalid_argument("log_prior_ridge: ridge_var must be > 0");
  return -0.5 * static_cast<double>(u.size()) * std::log(2.0 * std::numbers::pi * ridge_var) -
         u.squaredNorm() / (2.0 * ridge_var);
}

double ridge_variance_from_svd(double noise_var, const Matrix& h, double lambda_ridge) {
  if (!(lambda_ridge > 1.0)) throw std::invalid_argument("ridge_variance_from_svd: lambda_ridge must be > 1");
  if (h.size() == 0 || h.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("ridge_variance_from_svd: channel matrix has rank 0");
  const double smax = linalg::max_singular_value(h);
  return noise_var / (smax * smax / lambda_ridge);
}

double log_prior_half_cauchy(const Vector& log_lambda, double cauchy_scale) {
  if (!(cauchy_scale > 0.0)) throw std::invalid_argument("log_prior_half_cauchy: scale must be > 0");
  const double log_scale = std::log(cauchy_scale);
  const double c0 = std::log(2.0 / (std::numbers::pi * cauchy_scale));
  double out = 0.0;
  for (Eigen::Index i = 0; i < log_lambda.size(); ++i) {
    const double l = log_lambda[i];
    // log1p(λ²/s²) written as softplus(2(ℓ − log s)) to survive large ℓ.
    out += c0 - softplus(2.0 * (l - log_scale)) + l;
  }
  return out;
}

Eigen::Index temperature_dims(const RealLinearSystem& sys, const PriorConfig& cfg) {
  if (!cfg.temperature_enabled) return 0;
  return cfg.temperature_mode == TemperatureMode::Global ? 1 : sys.h.rows();
}

PosteriorModel::PosteriorModel(const RealLinearSystem& sys, const Constellation& c, PriorConfig cfg)
    : sys_(sys), c_(c), cfg_(std::move(cfg)) {
  if (sys_.y.size() != sys_.h.rows()) throw std::invalid_argument("PosteriorModel: y and H disagree");
  if (!(sys_.noise_var > 0.0)) throw std::invalid_argument("PosteriorModel: noise_var must be > 0");
  u_dims_ = sys_.h.cols();
  cfg_.validate(u_dims_, c_.size());
  lambda_dims_ = temperature_dims(sys_, cfg_);
  gram_ = sys_.h.transpose() * sys_.h;
  hty_ = sys_.h.transpose() * sys_.y;
  yty_ = sys_.y.squaredNorm();
  real_var_ = sys_.real_noise_var();
  log_norm_ = -0.5 * static_cast<double>(sys_.h.rows()) * std::log(2.0 * std::numbers::pi * real_var_);
  t_log_const_ = cfg_.mixture_enabled ? t_log_const(cfg_.t_scale, cfg_.t_dof) : 0.0;
  log_weights_ = log_weight_matrix(cfg_, u_dims_, c_.size());
}

double PosteriorModel::mixture_term(Eigen::Ref<const Vector> u, Eigen::Ref<Vector> grad_u) const {
  double out = 0.0;
  for (Eigen::Index n = 0; n < u_dims_; ++n) {
    double g = 0.0;
    out += mixture_dim(u[n], c_, log_weights_.row(n), cfg_.t_scale, cfg_.t_dof, t_log_const_, &g);
    grad_u[n] += g;
  }
  return out;
}

double PosteriorModel::log_density(const Vector& x, Vector& grad) const {
  const auto u = x.head(u_dims_);
  grad.setZero(dim());
  auto grad_u = grad.head(u_dims_);
  double value = 0.0;

  if (cfg_.likelihood_enabled) {
    if (lambda_dims_ == 0) {
      const Vector gu = gram_ * u;
      const double sq = yty_ - 2.0 * u.dot(hty_) + u.dot(gu);
      value += log_norm_ - sq / (2.0 * real_var_);
      grad_u += (hty_ - gu) / real_var_;
    } else {
      const Vector r = sys_.y - sys_.h * u;
      const auto ll = x.tail(lambda_dims_);
      auto grad_l = grad.tail(lambda_dims_);
      Vector weighted(r.size());
      double log_lambda_sum = 0.0;
      double quad = 0.0;
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        const Eigen::Index j = lambda_dims_ == 1 ? 0 : i;
        const double inv = std::exp(-2.0 * ll[j]);
        weighted[i] = r[i] * inv;
        const double q = r[i] * weighted[i];
        quad += q;
        log_lambda_sum += ll[j];
        grad_l[j] += -1.0 + q / real_var_;
      }
      value += log_norm_ - log_lambda_sum - quad / (2.0 * real_var_);
      grad_u += sys_.h.transpose() * weighted / real_var_;
    }
  }

  if (cfg_.mixture_enabled) value += mixture_term(u, grad_u);

  if (cfg_.ridge_enabled) {
    value += -0.5 * static_cast<double>(u_dims_) * std::log(2.0 * std::numbers::pi * cfg_.ridge_var) -
             u.squaredNorm() / (2.0 * cfg_.ridge_var);
    grad_u -= u / cfg_.ridge_var;
  }

  if (lambda_dims_ > 0) {
    const double log_scale = std::log(cfg_.cauchy_scale);
    const double c0 = std::log(2.0 / (std::numbers::pi * cfg_.cauchy_scale));
    const auto ll = x.tail(lambda_dims_);
    auto grad_l = grad.tail(lambda_dims_);
    for (Eigen::Index j = 0; j < lambda_dims_; ++j) {
      const double a = 2.0 * (ll[j] - log_scale);
      value += c0 - softplus(a) + ll[j];
      grad_l[j] += 1.0 - 2.0 * sigmoid(a);
    }
  }
  return value;
}

Vector PosteriorModel::initial_state(Rng& rng) const {
  Vector x(dim());
  std::uniform_real_distribution<double> level_range(c_.min_level(), c_.max_level());
  for (Eigen::Index n = 0; n < u_dims_; ++n) x[n] = level_range(rng);
  std::uniform_real_distribution<double> log_range(-2.0, 2.0);
  for (Eigen::Index j = 0; j < lambda_dims_; ++j) x[u_dims_ + j] = log_range(rng);
  return x;
}

AugmentedState PosteriorModel::split(const Vector& x) const {
  if (x.size() != dim()) throw std::invalid_argument("PosteriorModel::split: wrong state length");
  return {x.head(u_dims_), x.tail(lambda_dims_)};
}

Vector PosteriorModel::join(const AugmentedState& s) const {
  if (s.u.size() != u_dims_ || s.log_lambda.size() != lambda_dims_)
    throw std::invalid_argument("PosteriorModel::join: wrong state shape");
  Vector x(dim());
  x << s.u, s.log_lambda;
  return x;
}

PosteriorTerms PosteriorModel::terms(const Vector& x) const {
  const AugmentedState s = split(x);
  PosteriorTerms t;
  if (cfg_.likelihood_enabled) t.likelihood = log_likelihood(s, sys_, cfg_.temperature_mode);
  if (cfg_.mixture_enabled) t.mixture = log_prior_mixture_t(s.u, c_, cfg_);
  if (cfg_.ridge_enabled) t.ridge = log_prior_ridge(s.u, cfg_.ridge_var);
  if (lambda_dims_ > 0) t.half_cauchy = log_prior_half_cauchy(s.log_lambda, cfg_.cauchy_scale);
  return t;
}

std::pair<double, Vector> log_posterior_and_grad(const AugmentedState& state, const RealLinearSystem& sys,
                                                 const Constellation& c, const PriorConfig& cfg) {
  const PosteriorModel model(sys, c, cfg);
  const Vector x = model.join(state);
  Vector grad(model.dim());
  const double value = model.log_density(x, grad);
  if (std::isfinite(value) && grad.allFinite()) return {value, grad};

  const PosteriorTerms t = model.terms(x);
  const std::pair<const char*, double> named[] = {
      {"likelihood", t.likelihood}, {"mixture_t", t.mixture}, {"ridge", t.ridge}, {"half_cauchy", t.half_cauchy}};
  for (const auto& [name, v] : named)
    if (!std::isfinite(v)) throw NonFiniteError(name, std::string("log-posterior term '") + name + "' is not finite");
  throw NonFiniteError("gradient", "log-posterior gradient is not finite");
}

}  // namespace mimohmc
