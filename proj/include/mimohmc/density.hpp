#pragma once

#include "mimohmc/common.hpp"

#include <functional>
#include <utility>

namespace mimohmc {

/// Differentiable log-density over an unconstrained real vector.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual Eigen::Index dim() const = 0;
  /// Returns log p(x) (up to a constant) and writes ∇ log p(x) into `grad`,
  /// which is already sized to dim(). Non-finite values are returned as-is;
  /// samplers treat them as divergences.
  virtual double log_density(const Vector& x, Vector& grad) const = 0;
  /// Draws a starting point for a chain.
  virtual Vector initial_state(Rng& rng) const;
};

/// Adapts a callable `double(const Vector&, Vector&)` to LogDensity.
class FunctionDensity final : public LogDensity {
 public:
  using Fn = std::function<double(const Vector&, Vector&)>;
  using Init = std::function<Vector(Rng&)>;

  FunctionDensity(Eigen::Index dim, Fn fn, Init init = {})
      : dim_(dim), fn_(std::move(fn)), init_(std::move(init)) {}

  Eigen::Index dim() const override { return dim_; }
  double log_density(const Vector& x, Vector& grad) const override { return fn_(x, grad); }
  Vector initial_state(Rng& rng) const override {
    return init_ ? init_(rng) : LogDensity::initial_state(rng);
  }

 private:
  Eigen::Index dim_;
  Fn fn_;
  Init init_;
};

}  // namespace mimohmc
