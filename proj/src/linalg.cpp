#include "mimohmc/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace mimohmc::linalg {

double max_singular_value(const Matrix& a, double rel_tol, int max_iter) {
  if (a.size() == 0) throw std::invalid_argument("max_singular_value: empty matrix");
  if (a.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("max_singular_value: zero matrix has no dominant singular value");

  const Matrix gram = a.transpose() * a;
  // Deterministic start with every component nonzero so no eigenvector is
  // orthogonal to it unless by exact cancellation.
  Vector v(gram.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i % 7);
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) {
      // Start vector landed in the null space; perturb and continue.
      v = Vector::Ones(v.size()).normalized();
      continue;
    }
    const double next = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Rayleigh quotient is accurate to O(err²); finish with one refinement.
  lambda = v.dot(gram * v);
  return std::sqrt(std::max(lambda, 0.0));
}

Vector solve_spd(const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("solve_spd: dimension mismatch");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw std::domain_error("solve_spd: matrix is not positive definite");
  return llt.solve(b);
}

std::vector<double> eigen_moduli(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("eigen_moduli: matrix must be square");
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out.push_back(std::abs(solver.eigenvalues()[i]));
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

}  // namespace mimohmc::linalg
