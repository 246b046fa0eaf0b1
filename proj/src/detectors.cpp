#include "mimohmc/detectors.hpp"

#include "mimohmc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mimohmc {

std::string detector_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Mmse: return "mmse";
    case DetectorKind::Mgs: return "mgs";
    case DetectorKind::Ep: return "ep";
    case DetectorKind::HmcUncoded: return "hmc";
    case DetectorKind::HmcCodedInitial: return "hmc_coded_initial";
    case DetectorKind::HmcCodedSubsequent: return "hmc_coded_subsequent";
  }
  return "unknown";
}

DetectorKind parse_detector(const std::string& name) {
  if (name == "mmse") return DetectorKind::Mmse;
  if (name == "mgs") return DetectorKind::Mgs;
  if (name == "ep") return DetectorKind::Ep;
  if (name == "hmc" || name == "hmc_uncoded") return DetectorKind::HmcUncoded;
  if (name == "hmc_coded_initial") return DetectorKind::HmcCodedInitial;
  if (name == "hmc_coded_subsequent") return DetectorKind::HmcCodedSubsequent;
  throw std::invalid_argument("unknown detector '" + name + "'");
}

bool is_hmc(DetectorKind kind) {
  return kind == DetectorKind::HmcUncoded || kind == DetectorKind::HmcCodedInitial ||
         kind == DetectorKind::HmcCodedSubsequent;
}

void DetectorConfig::validate() const {
  if (mgs_steps < 0 || mgs_restarts < 0) throw std::invalid_argument("detector: MGS counts must be >= 0");
  if (mgs_restart_prob > 1.0) throw std::invalid_argument("detector: mgs_restart_prob must be <= 1");
  if (ep_iterations < 1) throw std::invalid_argument("detector: ep_iterations must be >= 1");
  if (!(ep_damping > 0.0 && ep_damping <= 1.0)) throw std::invalid_argument("detector: ep_damping in (0, 1]");
  if (!(ep_min_var > 0.0)) throw std::invalid_argument("detector: ep_min_var must be > 0");
  if (is_hmc(kind)) hmc.validate();
  if (kind == DetectorKind::HmcCodedInitial || kind == DetectorKind::HmcCodedSubsequent)
    if (!(lambda_ridge > 1.0)) throw std::invalid_argument("detector: lambda_ridge must be > 1");
}

DetectorConfig DetectorConfig::defaults(DetectorKind kind, int n_tx, const Constellation& c) {
  DetectorConfig cfg;
  cfg.kind = kind;
  const TunedParameters tp = tuned_parameters(c.order());
  cfg.prior.t_scale = tp.t_scale;
  cfg.prior.t_dof = tp.t_dof;
  cfg.prior.cauchy_scale = tp.cauchy_scale;
  cfg.lambda_ridge = tp.lambda_ridge;
  const bool coded = kind == DetectorKind::HmcCodedInitial || kind == DetectorKind::HmcCodedSubsequent;
  cfg.hmc = HmcConfig::detection_default(n_tx, coded);
  return cfg;
}

ResidualCache::ResidualCache(const RealLinearSystem& sys)
    : gram_(sys.h.transpose() * sys.h), hty_(sys.h.transpose() * sys.y), yty_(sys.y.squaredNorm()) {}

double ResidualCache::squared_residual(const Vector& u) const {
  return yty_ - 2.0 * u.dot(hty_) + u.dot(gram_ * u);
}

namespace {

DetectionResult finish(Vector u_soft, const Constellation& c) {
  DetectionResult r;
  Quantized q = quantize(u_soft, c);
  r.u_soft = std::move(u_soft);
  r.u_hard = std::move(q.values);
  r.hard_indices = std::move(q.indices);
  return r;
}

void require_noise(const RealLinearSystem& sys, const char* who) {
  if (!(sys.noise_var > 0.0)) throw std::invalid_argument(std::string(who) + ": noise_var must be > 0");
  if (sys.y.size() != sys.h.rows()) throw std::invalid_argument(std::string(who) + ": y and H disagree");
}

}  // namespace

DetectionResult detect_mmse(const RealLinearSystem& sys, double avg_power) {
  if (!(avg_power > 0.0)) throw std::invalid_argument("detect_mmse: avg_power must be > 0");
  if (sys.y.size() != sys.h.rows()) throw std::invalid_argument("detect_mmse: y and H disagree");
  Matrix a = sys.h.transpose() * sys.h;
  a.diagonal().array() += sys.noise_var / avg_power;
  const Vector u = linalg::solve_spd(a, sys.h.transpose() * sys.y);
  // Σ = (σ_w²/2)·a⁻¹ is the posterior covariance under the Gaussian prior.
  const Matrix inv = a.llt().solve(Matrix::Identity(a.rows(), a.cols()));
  DetectionResult out;
  out.u_soft = u;
  out.u_var = sys.real_noise_var() * inv.diagonal();
  return out;
}

DetectionResult detect_mgs(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg,
                           std::uint64_t seed) {
  require_noise(sys, "detect_mgs");
  cfg.validate();
  const auto dims = static_cast<int>(sys.h.cols());
  const int k_count = c.size();
  const int n_complex = std::max(1, dims / 2);
  const int sweeps = cfg.mgs_steps > 0 ? cfg.mgs_steps : 8 * n_complex * k_count;
  const int restarts = cfg.mgs_restarts > 0 ? cfg.mgs_restarts : std::max(1, (10000 + sweeps - 1) / sweeps);
  const double q = cfg.mgs_restart_prob >= 0.0 ? cfg.mgs_restart_prob : 1.0 / dims;
  const double var = sys.real_noise_var();

  Rng rng = make_rng(seed, 0x4d4753);
  std::uniform_real_distribution<double> unif;
  std::uniform_int_distribution<int> pick(0, k_count - 1);
  const Vector col_sq = sys.h.colwise().squaredNorm().transpose();

  std::vector<int> idx(static_cast<std::size_t>(dims));
  std::vector<int> best_idx;
  double best_sq = std::numeric_limits<double>::infinity();
  Vector u(dims);
  std::vector<double> logp(static_cast<std::size_t>(k_count));

  for (int m = 0; m < restarts; ++m) {
    for (int n = 0; n < dims; ++n) {
      idx[static_cast<std::size_t>(n)] = pick(rng);
      u[n] = c.level(idx[static_cast<std::size_t>(n)]);
    }
    Vector r = sys.y - sys.h * u;
    for (int s = 0; s < sweeps; ++s) {
      for (int n = 0; n < dims; ++n) {
        int k_new;
        if (q > 0.0 && unif(rng) < q) {
          k_new = pick(rng);
        } else {
          const double proj = sys.h.col(n).dot(r);
          double peak = -std::numeric_limits<double>::infinity();
          for (int k = 0; k < k_count; ++k) {
            const double delta = u[n] - c.level(k);
            // ‖r + h_n·δ‖² − ‖r‖²
            const double change = 2.0 * delta * proj + delta * delta * col_sq[n];
            logp[static_cast<std::size_t>(k)] = -change / (2.0 * var);
            peak = std::max(peak, logp[static_cast<std::size_t>(k)]);
          }
          double total = 0.0;
          for (double& l : logp) total += (l = std::exp(l - peak));
          double target = unif(rng) * total;
          k_new = k_count - 1;
          for (int k = 0; k < k_count; ++k) {
            target -= logp[static_cast<std::size_t>(k)];
            if (target < 0.0) {
              k_new = k;
              break;
            }
          }
        }
        const double delta = u[n] - c.level(k_new);
        if (delta != 0.0) {
          r.noalias() += delta * sys.h.col(n);
          u[n] = c.level(k_new);
          idx[static_cast<std::size_t>(n)] = k_new;
        }
      }
      r = sys.y - sys.h * u;
      const double sq = r.squaredNorm();
      if (sq < best_sq) {
        best_sq = sq;
        best_idx = idx;
      }
    }
  }

  Vector best(dims);
  for (int n = 0; n < dims; ++n) best[n] = c.level(best_idx[static_cast<std::size_t>(n)]);
  DetectionResult out = finish(best, c);
  out.iterations = restarts * sweeps;
  return out;
}

DetectionResult detect_ep(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg) {
  require_noise(sys, "detect_ep");
  cfg.validate();
  const Eigen::Index dims = sys.h.cols();
  const double var = sys.real_noise_var();
  const Matrix g = sys.h.transpose() * sys.h / var;
  const Vector b = sys.h.transpose() * sys.y / var;

  double es = 0.0;
  for (double s : c.levels()) es += s * s;
  es /= c.size();

  Vector lambda = Vector::Constant(dims, 1.0 / es);
  Vector gamma = Vector::Zero(dims);
  Matrix sigma;
  Vector mu;
  auto refresh = [&] {
    Matrix a = g;
    a.diagonal() += lambda;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw std::domain_error("detect_ep: precision matrix is not positive definite");
    sigma = llt.solve(Matrix::Identity(dims, dims));
    mu = sigma * (b + gamma);
  };

  std::vector<double> w(static_cast<std::size_t>(c.size()));
  for (int it = 0; it < cfg.ep_iterations; ++it) {
    refresh();
    for (Eigen::Index i = 0; i < dims; ++i) {
      const double s = sigma(i, i);
      const double cav_var = s / (1.0 - s * lambda[i]);
      if (!(cav_var > 0.0) || !std::isfinite(cav_var)) continue;
      const double cav_mean = cav_var * (mu[i] / s - gamma[i]);

      double peak = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < c.size(); ++k) {
        const double d = c.level(k) - cav_mean;
        w[static_cast<std::size_t>(k)] = -d * d / (2.0 * cav_var);
        peak = std::max(peak, w[static_cast<std::size_t>(k)]);
      }
      double total = 0.0;
      double m1 = 0.0;
      for (int k = 0; k < c.size(); ++k) {
        const double e = std::exp(w[static_cast<std::size_t>(k)] - peak);
        w[static_cast<std::size_t>(k)] = e;
        total += e;
        m1 += e * c.level(k);
      }
      m1 /= total;
      double v = 0.0;
      for (int k = 0; k < c.size(); ++k) {
        const double d = c.level(k) - m1;
        v += w[static_cast<std::size_t>(k)] * d * d;
      }
      v = std::max(v / total, cfg.ep_min_var);

      const double lambda_new = 1.0 / v - 1.0 / cav_var;
      const double gamma_new = m1 / v - cav_mean / cav_var;
      if (!(lambda_new > 0.0) || !std::isfinite(gamma_new)) continue;
      lambda[i] = cfg.ep_damping * lambda_new + (1.0 - cfg.ep_damping) * lambda[i];
      gamma[i] = cfg.ep_damping * gamma_new + (1.0 - cfg.ep_damping) * gamma[i];
    }
  }
  refresh();
  DetectionResult out = finish(mu, c);
  out.u_var = sigma.diagonal();
  out.iterations = cfg.ep_iterations;
  return out;
}

std::size_t joint_posterior_index(const ChainSamples& samples, const RealLinearSystem& sys, const Constellation& c) {
  if (samples.total_draws() == 0) throw std::invalid_argument("joint_posterior_select: no samples");
  if (samples.dims != sys.h.cols()) throw std::invalid_argument("joint_posterior_select: dimension mismatch");
  const ResidualCache cache(sys);
  std::size_t best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  Vector q(samples.dims);
  for (std::size_t t = 0; t < samples.total_draws(); ++t) {
    const double* d = samples.draws.data() + t * static_cast<std::size_t>(samples.dims);
    for (int n = 0; n < samples.dims; ++n) q[n] = c.level(c.nearest_index(d[n]));
    const double sq = cache.squared_residual(q);
    if (sq < best_sq) {
      best_sq = sq;
      best = t;
    }
  }
  return best;
}

Vector joint_posterior_select(const ChainSamples& samples, const RealLinearSystem& sys, const Constellation& c) {
  const std::size_t t = joint_posterior_index(samples, sys, c);
  return Eigen::Map<const Vector>(samples.draws.data() + t * static_cast<std::size_t>(samples.dims), samples.dims);
}

Vector marginal_posterior_mean(const ChainSamples& samples) {
  if (samples.total_draws() == 0) throw std::invalid_argument("marginal_posterior_mean: no samples");
  const Eigen::Map<const Matrix> all(samples.draws.data(), samples.dims,
                                     static_cast<Eigen::Index>(samples.total_draws()));
  return all.rowwise().mean();
}

Vector marginal_posterior_var(const ChainSamples& samples) {
  const Vector mean = marginal_posterior_mean(samples);
  const auto n = static_cast<Eigen::Index>(samples.total_draws());
  if (n < 2) return Vector::Zero(samples.dims);
  const Eigen::Map<const Matrix> all(samples.draws.data(), samples.dims, n);
  return (all.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(n - 1);
}

PriorConfig hmc_prior_for(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg,
                          const std::optional<LlrVector>& llr_feedback) {
  const bool subsequent = cfg.kind == DetectorKind::HmcCodedSubsequent;
  if (subsequent != llr_feedback.has_value())
    throw std::invalid_argument(subsequent ? "detect_hmc: subsequent mode requires LLR feedback"
                                           : "detect_hmc: LLR feedback is only used in the subsequent mode");
  PriorConfig p = cfg.prior;
  p.likelihood_enabled = true;
  p.mixture_enabled = true;
  p.weights.resize(0, 0);
  p.ridge_enabled = false;
  p.temperature_enabled = false;
  switch (cfg.kind) {
    case DetectorKind::HmcUncoded:
      break;
    case DetectorKind::HmcCodedSubsequent:
      p.weights = llr_to_weight_matrix(*llr_feedback, sys.h.cols(), c);
      p.temperature_enabled = true;
      [[fallthrough]];
    case DetectorKind::HmcCodedInitial:
      p.ridge_enabled = true;
      p.ridge_var = ridge_variance_from_svd(sys.real_noise_var(), sys.h, cfg.lambda_ridge);
      break;
    default:
      throw std::invalid_argument("detect_hmc: detector kind is not an HMC mode");
  }
  return p;
}

DetectionResult detect_hmc(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg,
                           std::uint64_t seed, const std::optional<LlrVector>& llr_feedback) {
  require_noise(sys, "detect_hmc");
  cfg.validate();
  const PosteriorModel model(sys, c, hmc_prior_for(sys, c, cfg, llr_feedback));
  HmcConfig hcfg = cfg.hmc;
  hcfg.seed = seed;
  const ChainSamples all = run_chains(model, hcfg);
  ChainSamples u = all.head_dims(static_cast<int>(model.u_dims()));

  Vector soft = cfg.kind == DetectorKind::HmcCodedInitial ? marginal_posterior_mean(u)
                                                           : joint_posterior_select(u, sys, c);
  DetectionResult out = finish(std::move(soft), c);
  out.u_var = marginal_posterior_var(u);
  out.degraded = all.divergences * 2 > static_cast<int>(all.total_draws());
  out.iterations = hcfg.steps_per_chain;
  out.samples = std::move(u);
  return out;
}

DetectionResult detect(const RealLinearSystem& sys, const Constellation& c, const DetectorConfig& cfg,
                       std::uint64_t seed, const std::optional<LlrVector>& llr_feedback) {
  switch (cfg.kind) {
    case DetectorKind::Mmse: {
      DetectionResult r = detect_mmse(sys, c.avg_power());
      Quantized q = quantize(r.u_soft, c);
      r.u_hard = std::move(q.values);
      r.hard_indices = std::move(q.indices);
      return r;
    }
    case DetectorKind::Mgs: return detect_mgs(sys, c, cfg, seed);
    case DetectorKind::Ep: return detect_ep(sys, c, cfg);
    default: return detect_hmc(sys, c, cfg, seed, llr_feedback);
  }
}

Vector exhaustive_ml(const RealLinearSystem& sys, const Constellation& c) {
  const auto dims = static_cast<int>(sys.h.cols());
  const double candidates = std::pow(static_cast<double>(c.size()), dims);
  if (candidates > static_cast<double>(1 << 22)) throw std::invalid_argument("exhaustive_ml: problem too large");
  const ResidualCache cache(sys);
  std::vector<int> idx(static_cast<std::size_t>(dims), 0);
  Vector u(dims);
  Vector best;
  double best_sq = std::numeric_limits<double>::infinity();
  while (true) {
    for (int n = 0; n < dims; ++n) u[n] = c.level(idx[static_cast<std::size_t>(n)]);
    const double sq = cache.squared_residual(u);
    if (sq < best_sq) {
      best_sq = sq;
      best = u;
    }
    int n = 0;
    while (n < dims && ++idx[static_cast<std::size_t>(n)] == c.size()) idx[static_cast<std::size_t>(n++)] = 0;
    if (n == dims) break;
  }
  return best;
}

}  // namespace mimohmc
