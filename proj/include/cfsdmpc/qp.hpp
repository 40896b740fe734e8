#pragma once

/**
 * @file
 * @brief Dense strictly convex QP solver.
 *
 * Solves
 * \f[
 *   \min_z \tfrac12 z^\top Q z + q^\top z
 *   \quad \text{s.t.} \quad A z \le b,\; E z = f
 * \f]
 * with the Goldfarb-Idnani dual active-set method. The method starts from
 * the unconstrained minimizer and adds violated constraints one at a time,
 * so it needs no feasible starting point and reports infeasibility when a
 * violated constraint cannot be made active.
 */

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfsdmpc {

struct QuadraticProgram
{
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  /// Inequalities A z <= b.
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  /// Equalities E z = f.
  Eigen::MatrixXd E;
  Eigen::VectorXd f;

  Eigen::Index num_vars() const { return Q.rows(); }

  /// Empty string when dimensions and symmetry are consistent.
  std::string check() const
  {
    const auto n = Q.rows();
    if (Q.cols() != n) { return "cost matrix not square"; }
    if (q.size() != n) { return "cost vector size mismatch"; }
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n)) { return "inequality dimensions mismatch"; }
    if (E.rows() != f.size() || (E.rows() > 0 && E.cols() != n)) { return "equality dimensions mismatch"; }
    if (n > 0 && (Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9) { return "cost matrix not symmetric"; }
    return {};
  }

  double objective(const Eigen::VectorXd & z) const { return 0.5 * z.dot(Q * z) + q.dot(z); }
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

inline const char * to_string(QpStatus s)
{
  switch (s) {
  case QpStatus::Optimal: return "optimal";
  case QpStatus::Infeasible: return "infeasible";
  case QpStatus::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

struct QpSolution
{
  Eigen::VectorXd z;
  double objective_value{std::numeric_limits<double>::quiet_NaN()};
  QpStatus status{QpStatus::Infeasible};
  int iterations{0};
  /// Multipliers with Q z + q + A' ineq + E' eq = 0 and ineq >= 0.
  Eigen::VectorXd ineq_multipliers;
  Eigen::VectorXd eq_multipliers;
};

struct QpSolverOptions
{
  int max_iterations{200};
  /// Added to the diagonal of Q before factorization.
  double regularization{1e-9};
  /// Total constraint violation accepted at termination.
  double feasibility_tol{1e-9};
};

/**
 * @brief Reusable solver holding its own workspace.
 *
 * One instance per planner; not safe to share across threads concurrently.
 */
class ActiveSetQpSolver
{
public:
  explicit ActiveSetQpSolver(QpSolverOptions opts = {}) : opts_(opts) {}

  const QpSolverOptions & options() const { return opts_; }

  /**
   * @brief Solve `problem`.
   *
   * When `warm_start` is given, constraints active or violated there are
   * added to the working set first. This only changes the order of
   * iterations; the minimizer is unique.
   */
  QpSolution solve(const QuadraticProgram & problem, const std::optional<Eigen::VectorXd> & warm_start = std::nullopt)
  {
    if (auto err = problem.check(); !err.empty()) { throw std::invalid_argument("QuadraticProgram: " + err); }
    const Eigen::Index n = problem.num_vars();
    const Eigen::Index p = problem.E.rows();
    const Eigen::Index m = problem.A.rows();

    QpSolution sol;
    sol.ineq_multipliers = Eigen::VectorXd::Zero(m);
    sol.eq_multipliers   = Eigen::VectorXd::Zero(p);

    // Internal form: CE' x + ce0 = 0, CI' x + ci0 >= 0.
    const auto CE = problem.E.transpose();
    const auto CI = (-problem.A).transpose().eval();

    Eigen::MatrixXd G = problem.Q;
    G.diagonal().array() += opts_.regularization;
    llt_.compute(G);
    if (llt_.info() != Eigen::Success) { throw std::invalid_argument("QuadraticProgram: cost matrix not positive definite"); }

    // J = L^{-T}
    J_ = Eigen::MatrixXd::Identity(n, n);
    llt_.matrixU().solveInPlace(J_);
    R_.setZero(n, n);
    d_.setZero(n);
    z_.setZero(n);
    r_.setZero(n);

    double r_norm   = 1.0;
    constexpr double inf = std::numeric_limits<double>::infinity();
    constexpr double eps = std::numeric_limits<double>::epsilon();

    Eigen::VectorXd x = -llt_.solve(problem.q);

    const Eigen::Index cap = m + p + 1;
    Eigen::VectorXd u      = Eigen::VectorXd::Zero(cap);
    Eigen::VectorXd u_old  = Eigen::VectorXd::Zero(cap);
    std::vector<Eigen::Index> active(static_cast<std::size_t>(cap), 0), active_old(static_cast<std::size_t>(cap), 0);
    Eigen::Index iq = 0;

    auto compute_d = [&](const Eigen::VectorXd & np) { d_.noalias() = J_.transpose() * np; };
    auto update_z  = [&]() { z_.noalias() = J_.rightCols(n - iq) * d_.tail(n - iq); };
    auto update_r  = [&]() {
      for (Eigen::Index i = iq - 1; i >= 0; --i) {
        double sum = 0.0;
        for (Eigen::Index j = i + 1; j < iq; ++j) { sum += R_(i, j) * r_(j); }
        r_(i) = (d_(i) - sum) / R_(i, i);
      }
    };

    // equality constraints are added first and never dropped
    for (Eigen::Index i = 0; i < p; ++i) {
      const Eigen::VectorXd np = CE.col(i);
      compute_d(np);
      update_z();
      update_r();
      double t2 = 0.0;
      if (std::abs(z_.dot(z_)) > eps) { t2 = (problem.f(i) - np.dot(x)) / z_.dot(np); }
      x += t2 * z_;
      u(iq) = t2;
      for (Eigen::Index k = 0; k < iq; ++k) { u(k) -= t2 * r_(k); }
      active[static_cast<std::size_t>(iq)] = -i - 1;
      if (!add_constraint(iq, r_norm)) {
        sol.status = QpStatus::Infeasible;
        sol.z      = x;
        return sol;
      }
    }

    // inequality index bookkeeping: inactive[i] == -1 marks i as active
    std::vector<Eigen::Index> inactive(static_cast<std::size_t>(m));
    std::vector<char> allowed(static_cast<std::size_t>(m), 1);
    for (Eigen::Index i = 0; i < m; ++i) { inactive[static_cast<std::size_t>(i)] = i; }

    std::vector<char> preferred(static_cast<std::size_t>(m), 0);
    if (warm_start && warm_start->size() == n) {
      const Eigen::VectorXd s0 = CI.transpose() * *warm_start + problem.b;
      for (Eigen::Index i = 0; i < m; ++i) { preferred[static_cast<std::size_t>(i)] = s0(i) <= 1e-6 ? 1 : 0; }
    }

    Eigen::VectorXd s(m);
    Eigen::VectorXd x_old = x;
    int iterations        = 0;

    auto finish = [&](QpStatus st) {
      sol.status     = st;
      sol.z          = x;
      sol.iterations = iterations;
      sol.objective_value = problem.objective(x);
      for (Eigen::Index k = 0; k < iq; ++k) {
        const Eigen::Index a = active[static_cast<std::size_t>(k)];
        if (a >= 0) {
          sol.ineq_multipliers(a) = u(k);
        } else {
          sol.eq_multipliers(-a - 1) = -u(k);
        }
      }
      return sol;
    };

    while (true) {  // step 1
      if (++iterations > opts_.max_iterations) { return finish(QpStatus::MaxIterations); }
      for (Eigen::Index i = p; i < iq; ++i) { inactive[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])] = -1; }

      s.noalias() = CI.transpose() * x + problem.b;
      double psi  = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        allowed[static_cast<std::size_t>(i)] = 1;
        psi += std::min(0.0, s(i));
      }
      if (-psi <= opts_.feasibility_tol) { return finish(QpStatus::Optimal); }

      for (Eigen::Index i = 0; i < iq; ++i) {
        u_old(i)                                  = u(i);
        active_old[static_cast<std::size_t>(i)]   = active[static_cast<std::size_t>(i)];
      }
      x_old = x;

    choose:  // step 2: pick a violated constraint
      Eigen::Index ip = -1;
      {
        double worst          = 0.0;
        double worst_preferred = 0.0;
        Eigen::Index ip_preferred = -1;
        for (Eigen::Index i = 0; i < m; ++i) {
          const auto ui = static_cast<std::size_t>(i);
          if (inactive[ui] == -1 || !allowed[ui]) { continue; }
          if (s(i) < worst) {
            worst = s(i);
            ip    = i;
          }
          if (preferred[ui] && s(i) < worst_preferred) {
            worst_preferred = s(i);
            ip_preferred    = i;
          }
        }
        if (ip_preferred >= 0 && worst_preferred < -1e-9) { ip = ip_preferred; }
      }
      if (ip < 0) { return finish(QpStatus::Optimal); }
      {
        const Eigen::VectorXd np = CI.col(ip);
        u(iq)                                = 0.0;
        active[static_cast<std::size_t>(iq)] = ip;

        while (true) {  // step 2a
          if (iterations > opts_.max_iterations) { return finish(QpStatus::MaxIterations); }
          compute_d(np);
          update_z();
          update_r();

          // step 2b: partial (dual) and full (primal) step lengths
          Eigen::Index l = 0;
          double t1      = inf;
          for (Eigen::Index k = p; k < iq; ++k) {
            if (r_(k) > 0.0 && u(k) / r_(k) < t1) {
              t1 = u(k) / r_(k);
              l  = active[static_cast<std::size_t>(k)];
            }
          }
          double t2 = inf;
          if (std::abs(z_.dot(z_)) > eps) {
            t2 = -s(ip) / z_.dot(np);
            if (t2 < 0.0) { t2 = inf; }
          }
          const double t = std::min(t1, t2);

          if (t >= inf) {
            sol.status     = QpStatus::Infeasible;
            sol.z          = x;
            sol.iterations = iterations;
            return sol;
          }
          if (t2 >= inf) {  // dual step only
            for (Eigen::Index k = 0; k < iq; ++k) { u(k) -= t * r_(k); }
            u(iq) += t;
            inactive[static_cast<std::size_t>(l)] = l;
            delete_constraint(active, u, p, iq, l);
            ++iterations;
            continue;
          }

          x += t * z_;
          for (Eigen::Index k = 0; k < iq; ++k) { u(k) -= t * r_(k); }
          u(iq) += t;

          if (std::abs(t - t2) < eps) {  // full step
            if (!add_constraint(iq, r_norm)) {
              allowed[static_cast<std::size_t>(ip)] = 0;
              delete_constraint(active, u, p, iq, ip);
              for (Eigen::Index i = 0; i < m; ++i) { inactive[static_cast<std::size_t>(i)] = i; }
              for (Eigen::Index i = p; i < iq; ++i) {
                active[static_cast<std::size_t>(i)] = active_old[static_cast<std::size_t>(i)];
                u(i)                                = u_old(i);
                inactive[static_cast<std::size_t>(active[static_cast<std::size_t>(i)])] = -1;
              }
              x = x_old;
              goto choose;
            }
            inactive[static_cast<std::size_t>(ip)] = -1;
            break;
          }

          // partial step: drop the blocking constraint and retry
          inactive[static_cast<std::size_t>(l)] = l;
          delete_constraint(active, u, p, iq, l);
          s(ip) = CI.col(ip).dot(x) + problem.b(ip);
          ++iterations;
        }
      }
    }
  }

private:
  bool add_constraint(Eigen::Index & iq, double & r_norm)
  {
    const Eigen::Index n = J_.rows();
    for (Eigen::Index j = n - 1; j >= iq + 1; --j) {
      double cc      = d_(j - 1);
      double ss      = d_(j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) { continue; }
      d_(j) = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc        = -cc;
        ss        = -ss;
        d_(j - 1) = -h;
      } else {
        d_(j - 1) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = J_(k, j - 1);
        const double t2 = J_(k, j);
        J_(k, j - 1)    = t1 * cc + t2 * ss;
        J_(k, j)        = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq;
    R_.col(iq - 1).head(iq) = d_.head(iq);
    if (std::abs(d_(iq - 1)) <= std::numeric_limits<double>::epsilon() * r_norm) { return false; }
    r_norm = std::max(r_norm, std::abs(d_(iq - 1)));
    return true;
  }

  void delete_constraint(std::vector<Eigen::Index> & active, Eigen::VectorXd & u, Eigen::Index p, Eigen::Index & iq,
                         Eigen::Index l)
  {
    const Eigen::Index n = J_.rows();
    Eigen::Index qq      = -1;
    for (Eigen::Index i = p; i < iq; ++i) {
      if (active[static_cast<std::size_t>(i)] == l) {
        qq = i;
        break;
      }
    }
    if (qq < 0) { return; }
    for (Eigen::Index i = qq; i < iq - 1; ++i) {
      active[static_cast<std::size_t>(i)] = active[static_cast<std::size_t>(i + 1)];
      u(i)                                = u(i + 1);
      R_.col(i)                           = R_.col(i + 1);
    }
    active[static_cast<std::size_t>(iq - 1)] = active[static_cast<std::size_t>(iq)];
    u(iq - 1)                                = u(iq);
    active[static_cast<std::size_t>(iq)]     = 0;
    u(iq)                                    = 0.0;
    R_.col(iq - 1).head(iq).setZero();
    --iq;
    if (iq == 0) { return; }
    for (Eigen::Index j = qq; j < iq; ++j) {
      double cc      = R_(j, j);
      double ss      = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) { continue; }
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc       = -cc;
        ss       = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (Eigen::Index k = j + 1; k < iq; ++k) {
        const double t1 = R_(j, k);
        const double t2 = R_(j + 1, k);
        R_(j, k)        = t1 * cc + t2 * ss;
        R_(j + 1, k)    = xny * (t1 + R_(j, k)) - t2;
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const double t1 = J_(k, j);
        const double t2 = J_(k, j + 1);
        J_(k, j)        = t1 * cc + t2 * ss;
        J_(k, j + 1)    = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  QpSolverOptions opts_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd J_, R_;
  Eigen::VectorXd d_, z_, r_;
};

/// Convenience wrapper with a throwaway workspace.
inline QpSolution solve(const QuadraticProgram & problem, const std::optional<Eigen::VectorXd> & warm_start = std::nullopt,
                        QpSolverOptions opts = {})
{
  ActiveSetQpSolver solver(opts);
  return solver.solve(problem, warm_start);
}

/// Plain-text dump: one labelled matrix per block, rows on separate lines.
inline void write_qp_text(std::ostream & os, const QuadraticProgram & qp)
{
  const Eigen::IOFormat fmt(17, Eigen::DontAlignCols, " ", "\n");
  auto block = [&](const char * name, const auto & mat) {
    os << name << ' ' << mat.rows() << ' ' << mat.cols() << '\n';
    if (mat.size() > 0) { os << mat.format(fmt) << '\n'; }
  };
  block("Q", qp.Q);
  block("q", qp.q.transpose());
  block("A", qp.A);
  block("b", qp.b.transpose());
  block("E", qp.E);
  block("f", qp.f.transpose());
}

}  // namespace cfsdmpc
