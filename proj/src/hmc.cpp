#include "mimohmc/hmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace mimohmc {

Vector LogDensity::initial_state(Rng& rng) const {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Vector x(dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = u(rng);
  return x;
}

void HmcConfig::validate() const {
  if (n_chains < 1) throw std::invalid_argument("hmc: n_chains must be >= 1");
  if (steps_per_chain < 1) throw std::invalid_argument("hmc: steps_per_chain must be >= 1");
  if (warmup < 0 || warmup >= steps_per_chain) throw std::invalid_argument("hmc: warmup must be < steps_per_chain");
  if (max_tree_depth < 1) throw std::invalid_argument("hmc: max_tree_depth must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("hmc: target_accept in (0,1)");
  if (leapfrog_steps < 1) throw std::invalid_argument("hmc: leapfrog_steps must be >= 1");
  if (threads < 1) throw std::invalid_argument("hmc: threads must be >= 1");
}

HmcConfig HmcConfig::detection_default(int n_tx, bool coded) {
  HmcConfig cfg;
  cfg.warmup = coded ? 24 : 12;
  cfg.max_tree_depth = 6;
  cfg.steps_per_chain = std::max(2 * n_tx, cfg.warmup + 8);
  cfg.n_chains = std::max(1, 1000 / cfg.steps_per_chain);
  return cfg;
}

double ChainSamples::mean_accept() const {
  if (accept_stat.empty()) return 0.0;
  double s = 0.0;
  for (double a : accept_stat) s += a;
  return s / static_cast<double>(accept_stat.size());
}

double ChainSamples::divergent_fraction() const {
  const std::size_t n = total_draws();
  return n == 0 ? 0.0 : static_cast<double>(divergences) / static_cast<double>(n);
}

ChainSamples ChainSamples::head_dims(int keep) const {
  if (keep < 0 || keep > dims) throw std::invalid_argument("head_dims: keep out of range");
  ChainSamples out = *this;
  out.dims = keep;
  auto slice = [&](const std::vector<double>& src, std::size_t rows) {
    std::vector<double> dst(rows * static_cast<std::size_t>(keep));
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(i * dims), keep,
                  dst.begin() + static_cast<std::ptrdiff_t>(i * keep));
    return dst;
  };
  out.draws = slice(draws, total_draws());
  if (!warmup_draws.empty()) out.warmup_draws = slice(warmup_draws, static_cast<std::size_t>(chains) * warmup);
  return out;
}

ChainSamples ChainSamples::from_array(int chains, int steps, int dims, std::vector<double> data) {
  if (chains < 1 || steps < 1 || dims < 1) throw std::invalid_argument("ChainSamples: empty shape");
  if (data.size() != static_cast<std::size_t>(chains) * steps * dims)
    throw std::invalid_argument("ChainSamples: data size does not match shape");
  ChainSamples s;
  s.chains = chains;
  s.steps = steps;
  s.dims = dims;
  s.draws = std::move(data);
  return s;
}

PhasePoint make_point(const LogDensity& target, const Vector& x) {
  PhasePoint z;
  z.x = x;
  z.grad.resize(x.size());
  z.logp = target.log_density(z.x, z.grad);
  return z;
}

bool leapfrog(const LogDensity& target, PhasePoint& z, Vector& momentum, double eps, int n_steps) {
  for (int s = 0; s < n_steps; ++s) {
    momentum.noalias() += 0.5 * eps * z.grad;
    z.x.noalias() += eps * momentum;
    z.logp = target.log_density(z.x, z.grad);
    if (!std::isfinite(z.logp) || !z.grad.allFinite()) return false;
    momentum.noalias() += 0.5 * eps * z.grad;
  }
  return true;
}

namespace {

Vector draw_momentum(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector r(n);
  for (Eigen::Index i = 0; i < n; ++i) r[i] = normal(rng);
  return r;
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double hamiltonian(const PhasePoint& z, const Vector& r) {
  const double h = -z.logp + 0.5 * r.squaredNorm();
  return std::isfinite(h) ? h : std::numeric_limits<double>::infinity();
}

struct Subtree {
  PhasePoint sample;
  Vector x_begin, r_begin, x_end, r_end;
  double log_weight = -std::numeric_limits<double>::infinity();
};

struct TreeContext {
  const LogDensity& target;
  Rng& rng;
  double eps;
  double h0;
  double threshold;
  int n_leapfrog = 0;
  double metro_sum = 0.0;
  bool diverged = false;
};

bool turned(const Vector& dx, const Vector& r_a, const Vector& r_b) { return dx.dot(r_a) < 0.0 || dx.dot(r_b) < 0.0; }

// Extends the trajectory from (z, r) by 2^depth leapfrog steps in direction
// dir. Returns false on divergence or an internal U-turn.
bool build_tree(TreeContext& ctx, int depth, PhasePoint& z, Vector& r, int dir, Subtree& out) {
  if (depth == 0) {
    const bool finite = leapfrog(ctx.target, z, r, dir * ctx.eps, 1);
    ++ctx.n_leapfrog;
    const double h = finite ? hamiltonian(z, r) : std::numeric_limits<double>::infinity();
    if (h - ctx.h0 > ctx.threshold) {
      ctx.diverged = true;
      return false;
    }
    const double delta = ctx.h0 - h;
    ctx.metro_sum += delta > 0.0 ? 1.0 : std::exp(delta);
    out.sample = z;
    out.log_weight = delta;
    out.x_begin = z.x;
    out.r_begin = r;
    out.x_end = z.x;
    out.r_end = r;
    return true;
  }
  Subtree left;
  if (!build_tree(ctx, depth - 1, z, r, dir, left)) return false;
  Subtree right;
  if (!build_tree(ctx, depth - 1, z, r, dir, right)) return false;

  out.log_weight = log_add_exp(left.log_weight, right.log_weight);
  std::uniform_real_distribution<double> unif;
  if (std::log(unif(ctx.rng)) < right.log_weight - out.log_weight)
    out.sample = std::move(right.sample);
  else
    out.sample = std::move(left.sample);
  out.x_begin = std::move(left.x_begin);
  out.r_begin = std::move(left.r_begin);
  out.x_end = std::move(right.x_end);
  out.r_end = std::move(right.r_end);
  const Vector dx = static_cast<double>(dir) * (out.x_end - out.x_begin);
  return !turned(dx, out.r_begin, out.r_end);
}

}  // namespace

TransitionInfo hmc_step(const LogDensity& target, PhasePoint& z, double eps, int n_leapfrog, Rng& rng,
                        double divergence_threshold) {
  if (!(eps > 0.0) || n_leapfrog < 1) throw std::invalid_argument("hmc_step: eps > 0 and L >= 1 required");
  TransitionInfo info;
  Vector r = draw_momentum(z.x.size(), rng);
  const double h0 = hamiltonian(z, r);
  PhasePoint proposal = z;
  const bool finite = leapfrog(target, proposal, r, eps, n_leapfrog);
  info.n_leapfrog = n_leapfrog;
  const double h1 = finite ? hamiltonian(proposal, r) : std::numeric_limits<double>::infinity();
  if (h1 - h0 > divergence_threshold) {
    info.diverged = true;
    return info;
  }
  info.accept_stat = std::min(1.0, std::exp(h0 - h1));
  std::uniform_real_distribution<double> unif;
  if (unif(rng) < info.accept_stat) {
    z = std::move(proposal);
    info.accepted = true;
  }
  return info;
}

TransitionInfo nuts_step(const LogDensity& target, PhasePoint& z, double eps, int max_depth, Rng& rng,
                         double divergence_threshold) {
  if (!(eps > 0.0)) throw std::invalid_argument("nuts_step: eps must be > 0");
  TransitionInfo info;
  Vector r0 = draw_momentum(z.x.size(), rng);
  TreeContext ctx{target, rng, eps, hamiltonian(z, r0), divergence_threshold};

  PhasePoint minus = z;
  PhasePoint plus = z;
  Vector r_minus = r0;
  Vector r_plus = r0;
  PhasePoint sample = z;
  double log_weight = 0.0;
  std::uniform_real_distribution<double> unif;

  int depth = 0;
  for (; depth < max_depth; ++depth) {
    const int dir = unif(rng) < 0.5 ? -1 : 1;
    Subtree sub;
    const bool ok = dir > 0 ? build_tree(ctx, depth, plus, r_plus, dir, sub)
                            : build_tree(ctx, depth, minus, r_minus, dir, sub);
    if (!ok) {
      ++depth;
      break;
    }
    // Progressive sampling biased toward the new subtree.
    if (std::log(unif(rng)) < sub.log_weight - log_weight) {
      sample = std::move(sub.sample);
      info.accepted = true;
    }
    log_weight = log_add_exp(log_weight, sub.log_weight);
    const Vector dx = plus.x - minus.x;
    if (turned(dx, r_minus, r_plus)) {
      ++depth;
      break;
    }
  }
  info.depth = depth;
  info.max_depth_hit = depth >= max_depth && !ctx.diverged;
  info.diverged = ctx.diverged;
  info.n_leapfrog = ctx.n_leapfrog;
  info.accept_stat = ctx.n_leapfrog > 0 ? ctx.metro_sum / ctx.n_leapfrog : 0.0;
  z = std::move(sample);
  return info;
}

double find_reasonable_step_size(const LogDensity& target, const PhasePoint& z, double eps0, Rng& rng) {
  double eps = eps0 > 0.0 ? eps0 : 1.0;
  auto log_accept = [&](double e) {
    PhasePoint trial = z;
    Vector r = draw_momentum(z.x.size(), rng);
    const double h0 = hamiltonian(z, r);
    const bool finite = leapfrog(target, trial, r, e, 1);
    if (!finite) return -std::numeric_limits<double>::infinity();
    return h0 - hamiltonian(trial, r);
  };
  const double log_half = std::log(0.5);
  double la = log_accept(eps);
  const int direction = la > log_half ? 1 : -1;
  for (int i = 0; i < 100; ++i) {
    if (direction == 1 && !(la > log_half)) break;
    if (direction == -1 && !(la < log_half)) break;
    const double next = direction == 1 ? 2.0 * eps : 0.5 * eps;
    if (next > 1e7 || next < 1e-12) break;
    eps = next;
    la = log_accept(eps);
  }
  return eps;
}

DualAveraging::DualAveraging(double initial_step, double target_accept, double gamma, double t0, double kappa)
    : mu_(std::log(10.0 * initial_step)), target_(target_accept), gamma_(gamma), t0_(t0), kappa_(kappa) {
  if (!(initial_step > 0.0)) throw std::invalid_argument("DualAveraging: initial step must be > 0");
  x_ = std::log(initial_step);
  x_bar_ = 0.0;
}

double DualAveraging::update(double accept_stat) {
  if (!std::isfinite(accept_stat)) accept_stat = 0.0;
  accept_stat = std::clamp(accept_stat, 0.0, 1.0);
  counter_ += 1.0;
  const double eta = 1.0 / (counter_ + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
  x_ = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
  const double x_eta = std::pow(counter_, -kappa_);
  x_bar_ = x_eta * x_ + (1.0 - x_eta) * x_bar_;
  return std::exp(x_);
}

double DualAveraging::current() const { return std::exp(x_); }

double DualAveraging::final_step() const { return counter_ > 0.0 ? std::exp(x_bar_) : std::exp(x_); }

namespace {

struct ChainResult {
  std::vector<double> draws;
  std::vector<double> warmup_draws;
  std::vector<double> accept;
  std::vector<double> eps_trace;
  double eps = 0.0;
  int divergences = 0;
  int warmup_divergences = 0;
  int max_depth_hits = 0;
  long long grads = 0;
};

ChainResult run_one_chain(const LogDensity& target, const HmcConfig& cfg, int chain) {
  Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(chain));
  ChainResult res;
  const Eigen::Index d = target.dim();
  const int post = cfg.steps_per_chain - cfg.warmup;
  res.draws.reserve(static_cast<std::size_t>(post) * d);
  res.accept.reserve(static_cast<std::size_t>(post));
  res.eps_trace.reserve(static_cast<std::size_t>(cfg.steps_per_chain));

  PhasePoint z = make_point(target, target.initial_state(rng));
  ++res.grads;
  // A non-finite start would stall every transition; redraw a few times.
  for (int tries = 0; tries < 100 && !(std::isfinite(z.logp) && z.grad.allFinite()); ++tries) {
    z = make_point(target, target.initial_state(rng));
    ++res.grads;
  }

  double eps = cfg.initial_step_size > 0.0 ? cfg.initial_step_size : find_reasonable_step_size(target, z, 1.0, rng);
  DualAveraging adapt(eps, cfg.target_accept);

  for (int it = 0; it < cfg.steps_per_chain; ++it) {
    const bool warming = it < cfg.warmup;
    res.eps_trace.push_back(eps);
    const TransitionInfo info = cfg.engine == Engine::Nuts
                                    ? nuts_step(target, z, eps, cfg.max_tree_depth, rng, cfg.divergence_threshold)
                                    : hmc_step(target, z, eps, cfg.leapfrog_steps, rng, cfg.divergence_threshold);
    res.grads += info.n_leapfrog;
    if (warming) {
      if (info.diverged) ++res.warmup_divergences;
      if (cfg.adapt_step_size) {
        eps = adapt.update(info.accept_stat);
        if (it + 1 == cfg.warmup) eps = adapt.final_step();
      }
      if (cfg.keep_warmup) res.warmup_draws.insert(res.warmup_draws.end(), z.x.data(), z.x.data() + d);
    } else {
      if (info.diverged) ++res.divergences;
      if (info.max_depth_hit) ++res.max_depth_hits;
      res.accept.push_back(info.accept_stat);
      res.draws.insert(res.draws.end(), z.x.data(), z.x.data() + d);
    }
  }
  res.eps = eps;
  return res;
}

}  // namespace

ChainSamples run_chains(const LogDensity& target, const HmcConfig& cfg) {
  cfg.validate();
  std::vector<ChainResult> results(static_cast<std::size_t>(cfg.n_chains));
  const int workers = std::min(cfg.threads, cfg.n_chains);
  if (workers <= 1) {
    for (int j = 0; j < cfg.n_chains; ++j) results[static_cast<std::size_t>(j)] = run_one_chain(target, cfg, j);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int j = next++; j < cfg.n_chains; j = next++)
          results[static_cast<std::size_t>(j)] = run_one_chain(target, cfg, j);
      });
    for (auto& t : pool) t.join();
  }

  ChainSamples out;
  out.chains = cfg.n_chains;
  out.steps = cfg.steps_per_chain - cfg.warmup;
  out.dims = static_cast<int>(target.dim());
  out.warmup = cfg.warmup;
  for (auto& r : results) {
    out.draws.insert(out.draws.end(), r.draws.begin(), r.draws.end());
    out.warmup_draws.insert(out.warmup_draws.end(), r.warmup_draws.begin(), r.warmup_draws.end());
    out.accept_stat.insert(out.accept_stat.end(), r.accept.begin(), r.accept.end());
    out.step_size_trace.push_back(std::move(r.eps_trace));
    out.step_size.push_back(r.eps);
    out.divergences += r.divergences;
    out.warmup_divergences += r.warmup_divergences;
    out.max_depth_hits += r.max_depth_hits;
    out.gradient_evaluations += r.grads;
  }
  return out;
}

}  // namespace mimohmc
