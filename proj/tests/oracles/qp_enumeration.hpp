#pragma once

// Brute-force QP oracle: enumerate active sets by increasing size and solve
// the equality-constrained KKT system for each. The first primal and dual
// feasible KKT point is the unique minimizer of a strictly convex QP.

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace oracle {

struct EnumerationResult
{
  Eigen::VectorXd z;
  double objective;
};

inline std::optional<EnumerationResult> solve_by_enumeration(const Eigen::MatrixXd & Q, const Eigen::VectorXd & q,
                                                             const Eigen::MatrixXd & A, const Eigen::VectorXd & b,
                                                             const Eigen::MatrixXd & E, const Eigen::VectorXd & f)
{
  const int n = static_cast<int>(Q.rows());
  const int m = static_cast<int>(A.rows());
  const int p = static_cast<int>(E.rows());
  constexpr double tol = 1e-9;

  std::vector<int> subset;
  std::optional<EnumerationResult> found;

  auto try_subset = [&]() -> bool {
    const int k   = static_cast<int>(subset.size());
    const int dim = n + k + p;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs(dim);
    K.topLeftCorner(n, n) = Q;
    rhs.head(n)           = -q;
    for (int i = 0; i < k; ++i) {
      K.block(n + i, 0, 1, n) = A.row(subset[static_cast<std::size_t>(i)]);
      K.block(0, n + i, n, 1) = A.row(subset[static_cast<std::size_t>(i)]).transpose();
      rhs(n + i)              = b(subset[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i < p; ++i) {
      K.block(n + k + i, 0, 1, n) = E.row(i);
      K.block(0, n + k + i, n, 1) = E.row(i).transpose();
      rhs(n + k + i)              = f(i);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (lu.rank() < dim) { return false; }
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd z   = sol.head(n);
    for (int i = 0; i < k; ++i) {
      if (sol(n + i) < -tol) { return false; }
    }
    if (m > 0 && ((A * z - b).array() > 1e-7).any()) { return false; }
    found = EnumerationResult{z, 0.5 * z.dot(Q * z) + q.dot(z)};
    return true;
  };

  // combinations of size k, lexicographic
  for (int k = 0; k <= std::min(m, n - p); ++k) {
    subset.assign(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < k; ++i) { subset[static_cast<std::size_t>(i)] = i; }
    while (true) {
      if (try_subset()) { return found; }
      int i = k - 1;
      while (i >= 0 && subset[static_cast<std::size_t>(i)] == m - k + i) { --i; }
      if (i < 0) { break; }
      ++subset[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) { subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1; }
    }
  }
  return std::nullopt;
}

}  // namespace oracle
