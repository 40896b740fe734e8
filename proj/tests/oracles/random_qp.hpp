#pragma once

#include <Eigen/Dense>

#include <random>

#include "cfsdmpc/qp.hpp"

namespace oracle {

// Feasible, strictly convex random QP: b is built from a known interior-ish
// point so the feasible set is never empty.
inline cfsdmpc::QuadraticProgram random_qp(std::mt19937_64 & rng, int max_n = 10, int max_m = 20)
{
  std::uniform_int_distribution<int> dn(1, max_n), dm(0, max_m);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int n = dn(rng);
  const int m = dm(rng);
  const int p = std::uniform_int_distribution<int>(0, std::min(2, n - 1))(rng);

  auto randn = [&](int r, int c) {
    Eigen::MatrixXd M(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) { M(i, j) = g(rng); }
    }
    return M;
  };

  cfsdmpc::QuadraticProgram qp;
  const Eigen::MatrixXd M = randn(n, n);
  qp.Q                    = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  qp.Q                    = 0.5 * (qp.Q + qp.Q.transpose()).eval();
  qp.q                    = 5.0 * randn(n, 1);
  const Eigen::VectorXd z0 = randn(n, 1);
  qp.A                    = randn(m, n);
  qp.b.resize(m);
  for (int i = 0; i < m; ++i) { qp.b(i) = qp.A.row(i).dot(z0) + (u01(rng) < 0.2 ? 0.0 : u01(rng)); }
  qp.E = randn(p, n);
  qp.f = qp.E * z0;
  return qp;
}

}  // namespace oracle
