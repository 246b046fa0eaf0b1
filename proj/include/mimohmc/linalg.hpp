#pragma once

#include "mimohmc/common.hpp"

#include <vector>

namespace mimohmc::linalg {

/// Largest singular value by power iteration on AᵀA.
/// Throws std::invalid_argument for an empty or all-zero matrix.
double max_singular_value(const Matrix& a, double rel_tol = 1e-13, int max_iter = 10000);

/// Cholesky solve of a·x = b. Throws std::domain_error if `a` is not
/// positive definite.
Vector solve_spd(const Matrix& a, const Vector& b);

/// Moduli of all eigenvalues of a small square matrix, sorted descending.
std::vector<double> eigen_moduli(const Matrix& a);

}  // namespace mimohmc::linalg
