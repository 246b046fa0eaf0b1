#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mimohmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream (a, b) under a master seed. Streams never depend on
/// scheduling order, only on their indices.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(master) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(master, a, b));
}

/// Raised when a log-density or its gradient evaluates to a non-finite value.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& term, const std::string& what)
      : std::runtime_error(what), term_(term) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace mimohmc
