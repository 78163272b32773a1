#include "prfmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace prfmpc::qp {

namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0;
}

bool is_equality(double lo, double hi) {
  return std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 1e-12;
}

struct Workspace {
  Eigen::VectorXd rho;
  Eigen::VectorXd rho_inv;
  Eigen::LLT<Eigen::MatrixXd> llt;
};

void build_rho(const Problem& p, double rho_bar, double eq_scale,
               Workspace& ws) {
  const Eigen::Index m = p.num_rows();
  ws.rho.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    ws.rho[i] = is_equality(p.lower[i], p.upper[i]) ? rho_bar * eq_scale
                                                    : rho_bar;
  }
  ws.rho_inv = ws.rho.cwiseInverse();
}

void factorize(const Problem& p, double sigma, Workspace& ws) {
  Eigen::MatrixXd reduced =
      p.P + sigma * Eigen::MatrixXd::Identity(p.num_vars(), p.num_vars());
  if (p.num_rows() > 0) {
    reduced.noalias() += p.A.transpose() * ws.rho.asDiagonal() * p.A;
  }
  ws.llt.compute(reduced);
  if (ws.llt.info() != Eigen::Success) {
    throw std::runtime_error("qp: KKT factorization failed");
  }
}

/// Support function of the constraint box evaluated at a normalized dual
/// direction; returns +infinity when an infinite bound meets a nonzero
/// component, which disables the certificate.
double box_support(const Problem& p, const Eigen::VectorXd& dir, double tol) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < dir.size(); ++i) {
    const double pos = std::max(dir[i], 0.0);
    const double neg = std::min(dir[i], 0.0);
    if (pos > tol) {
      if (!std::isfinite(p.upper[i])) return std::numeric_limits<double>::infinity();
      s += p.upper[i] * pos;
    }
    if (neg < -tol) {
      if (!std::isfinite(p.lower[i])) return std::numeric_limits<double>::infinity();
      s += p.lower[i] * neg;
    }
  }
  return s;
}

bool primal_infeasibility_certificate(const Problem& p,
                                      const Eigen::VectorXd& delta_y,
                                      double eps) {
  const double norm = inf_norm(delta_y);
  if (norm <= 1e-14) return false;
  const Eigen::VectorXd dir = delta_y / norm;
  if (inf_norm(p.A.transpose() * dir) > eps) return false;
  return box_support(p, dir, eps) <= -eps;
}

bool dual_infeasibility_certificate(const Problem& p,
                                    const Eigen::VectorXd& delta_x,
                                    double eps) {
  const double norm = inf_norm(delta_x);
  if (norm <= 1e-14) return false;
  const Eigen::VectorXd dir = delta_x / norm;
  if (inf_norm(p.P * dir) > eps) return false;
  if (p.q.dot(dir) > -eps) return false;
  const Eigen::VectorXd adir = p.A * dir;
  for (Eigen::Index i = 0; i < adir.size(); ++i) {
    if (std::isfinite(p.upper[i]) && adir[i] > eps) return false;
    if (std::isfinite(p.lower[i]) && adir[i] < -eps) return false;
  }
  return true;
}

struct PolishResult {
  bool ok = false;
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  Eigen::VectorXd y;
};

/// Re-solves the equality-constrained QP on the detected active set with a
/// lightly regularized KKT system plus iterative refinement, then verifies
/// the candidate satisfies the original optimality conditions tightly.
PolishResult try_polish(const Problem& p, const Eigen::VectorXd& z,
                        const Eigen::VectorXd& y) {
  const Eigen::Index n = p.num_vars();
  const Eigen::Index m = p.num_rows();
  const double y_scale = std::max(1.0, inf_norm(y));

  std::vector<Eigen::Index> active;
  std::vector<int> side;  // -1 lower, +1 upper, 0 equality
  for (Eigen::Index i = 0; i < m; ++i) {
    if (is_equality(p.lower[i], p.upper[i])) {
      active.push_back(i);
      side.push_back(0);
    } else if (std::isfinite(p.upper[i]) &&
               (y[i] > 1e-9 * y_scale ||
                p.upper[i] - z[i] < 1e-7 * (1.0 + std::abs(p.upper[i])))) {
      active.push_back(i);
      side.push_back(1);
    } else if (std::isfinite(p.lower[i]) &&
               (y[i] < -1e-9 * y_scale ||
                z[i] - p.lower[i] < 1e-7 * (1.0 + std::abs(p.lower[i])))) {
      active.push_back(i);
      side.push_back(-1);
    }
  }

  const Eigen::Index na = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd a_act(na, n);
  Eigen::VectorXd b_act(na);
  for (Eigen::Index k = 0; k < na; ++k) {
    a_act.row(k) = p.A.row(active[k]);
    b_act[k] = side[k] >= 0 ? p.upper[active[k]] : p.lower[active[k]];
  }

  const double delta = 1e-9;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
  kkt.topLeftCorner(n, n) =
      p.P + delta * Eigen::MatrixXd::Identity(n, n);
  kkt.topRightCorner(n, na) = a_act.transpose();
  kkt.bottomLeftCorner(na, n) = a_act;
  kkt.bottomRightCorner(na, na) = -delta * Eigen::MatrixXd::Identity(na, na);

  Eigen::VectorXd rhs(n + na);
  rhs.head(n) = -p.q;
  rhs.tail(na) = b_act;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt);
  Eigen::VectorXd w = lu.solve(rhs);
  for (int refine = 0; refine < 3; ++refine) {
    Eigen::VectorXd residual = rhs;
    residual.head(n) -= p.P * w.head(n) + a_act.transpose() * w.tail(na);
    residual.tail(na) -= a_act * w.head(n);
    w += lu.solve(residual);
  }

  PolishResult result;
  result.x = w.head(n);
  result.y = Eigen::VectorXd::Zero(m);
  for (Eigen::Index k = 0; k < na; ++k) result.y[active[k]] = w[n + k];
  result.z = p.A * result.x;

  // Verify: primal feasibility, dual signs, stationarity.
  const double feas_tol = 1e-9 * (1.0 + inf_norm(result.z));
  for (Eigen::Index i = 0; i < m; ++i) {
    if (result.z[i] > p.upper[i] + feas_tol) return {};
    if (result.z[i] < p.lower[i] - feas_tol) return {};
  }
  for (Eigen::Index k = 0; k < na; ++k) {
    if (side[k] > 0 && result.y[active[k]] < -1e-8 * y_scale) return {};
    if (side[k] < 0 && result.y[active[k]] > 1e-8 * y_scale) return {};
  }
  const double stat_tol =
      1e-9 * std::max({1.0, inf_norm(p.q), inf_norm(result.y)});
  const double stationarity =
      inf_norm(p.P * result.x + p.q + p.A.transpose() * result.y);
  if (stationarity > stat_tol) return {};

  result.ok = true;
  return result;
}

}  // namespace

double constraint_violation(const Problem& problem, const Eigen::VectorXd& x) {
  if (problem.num_rows() == 0) return 0.0;
  const Eigen::VectorXd ax = problem.A * x;
  double violation = 0.0;
  for (Eigen::Index i = 0; i < ax.size(); ++i) {
    violation = std::max(violation, problem.lower[i] - ax[i]);
    violation = std::max(violation, ax[i] - problem.upper[i]);
  }
  return std::max(violation, 0.0);
}

Solution solve(const Problem& problem, const Settings& settings,
               const Eigen::VectorXd* x_warm, const Eigen::VectorXd* y_warm) {
  const Eigen::Index n = problem.num_vars();
  const Eigen::Index m = problem.num_rows();

  double rho_bar = settings.rho;
  Workspace ws;
  build_rho(problem, rho_bar, settings.equality_rho_scale, ws);
  factorize(problem, settings.sigma, ws);

  Eigen::VectorXd x =
      x_warm != nullptr ? *x_warm : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y =
      y_warm != nullptr ? *y_warm : Eigen::VectorXd::Zero(m);
  Eigen::VectorXd z = problem.A * x;
  z = z.cwiseMax(problem.lower).cwiseMin(problem.upper);

  Eigen::VectorXd x_check = x;
  Eigen::VectorXd y_check = y;

  Solution solution;
  solution.x = x;
  solution.z = z;
  solution.y = y;

  const double q_norm = inf_norm(problem.q);

  for (int iter = 1; iter <= settings.max_iterations; ++iter) {
    // x-update through the reduced (SPD) system, then over-relaxed z/y steps.
    Eigen::VectorXd rhs = settings.sigma * x - problem.q;
    if (m > 0) {
      rhs.noalias() +=
          problem.A.transpose() * (ws.rho.cwiseProduct(z) - y);
    }
    const Eigen::VectorXd x_tilde = ws.llt.solve(rhs);
    const Eigen::VectorXd z_tilde = problem.A * x_tilde;

    x = settings.alpha * x_tilde + (1.0 - settings.alpha) * x;
    const Eigen::VectorXd z_pre =
        settings.alpha * z_tilde + (1.0 - settings.alpha) * z;
    z = (z_pre + ws.rho_inv.cwiseProduct(y))
            .cwiseMax(problem.lower)
            .cwiseMin(problem.upper);
    y += ws.rho.cwiseProduct(z_pre - z);

    if (iter % settings.check_interval != 0 &&
        iter != settings.max_iterations) {
      continue;
    }

    const Eigen::VectorXd ax = problem.A * x;
    const Eigen::VectorXd px = problem.P * x;
    const Eigen::VectorXd aty = problem.A.transpose() * y;
    const double r_prim = inf_norm(ax - z);
    const double r_dual = inf_norm(px + problem.q + aty);
    const double eps_prim =
        settings.eps_abs +
        settings.eps_rel * std::max(inf_norm(ax), inf_norm(z));
    const double eps_dual =
        settings.eps_abs +
        settings.eps_rel * std::max({inf_norm(px), inf_norm(aty), q_norm});

    solution.iterations = iter;
    solution.primal_residual = r_prim;
    solution.dual_residual = r_dual;

    if (r_prim <= eps_prim && r_dual <= eps_dual) {
      solution.status = Status::solved;
      solution.x = x;
      solution.z = z;
      solution.y = y;
      break;
    }

    if (primal_infeasibility_certificate(problem, y - y_check,
                                         settings.eps_primal_inf)) {
      solution.status = Status::primal_infeasible;
      solution.x = x;
      solution.z = z;
      solution.y = y;
      return solution;
    }
    if (dual_infeasibility_certificate(problem, x - x_check,
                                       settings.eps_dual_inf)) {
      solution.status = Status::dual_infeasible;
      solution.x = x;
      solution.z = z;
      solution.y = y;
      return solution;
    }
    x_check = x;
    y_check = y;

    // Mid-run polish: once the iterates are roughly converged the active set
    // is usually correct, and a verified polish is exact.
    if (settings.polish && iter >= 100 && iter % 100 == 0 &&
        r_prim <= 1e-3 * (1.0 + inf_norm(z)) &&
        r_dual <= 1e-3 * std::max(1.0, q_norm)) {
      PolishResult polish = try_polish(problem, z, y);
      if (polish.ok) {
        solution.status = Status::solved;
        solution.x = polish.x;
        solution.z = polish.z;
        solution.y = polish.y;
        solution.polished = true;
        solution.primal_residual = constraint_violation(problem, polish.x);
        solution.dual_residual = inf_norm(problem.P * polish.x + problem.q +
                                          problem.A.transpose() * polish.y);
        solution.objective =
            0.5 * polish.x.dot(problem.P * polish.x) + problem.q.dot(polish.x);
        return solution;
      }
    }

    // Residual-balancing rho adaptation.
    if (iter % (4 * settings.check_interval) == 0) {
      const double prim_scaled =
          r_prim / std::max({inf_norm(ax), inf_norm(z), 1e-30});
      const double dual_scaled =
          r_dual / std::max({inf_norm(px), inf_norm(aty), q_norm, 1e-30});
      const double ratio =
          std::sqrt(prim_scaled / std::max(dual_scaled, 1e-30));
      const double rho_new =
          std::clamp(rho_bar * ratio, 1e-6, 1e6);
      if (rho_new > 5.0 * rho_bar || rho_new < 0.2 * rho_bar) {
        rho_bar = rho_new;
        build_rho(problem, rho_bar, settings.equality_rho_scale, ws);
        factorize(problem, settings.sigma, ws);
      }
    }

    if (iter == settings.max_iterations) {
      solution.status = Status::max_iterations;
      solution.x = x;
      solution.z = z;
      solution.y = y;
    }
  }

  if (solution.status == Status::solved && settings.polish &&
      !solution.polished) {
    PolishResult polish = try_polish(problem, solution.z, solution.y);
    if (polish.ok) {
      solution.x = polish.x;
      solution.z = polish.z;
      solution.y = polish.y;
      solution.polished = true;
      solution.primal_residual = constraint_violation(problem, polish.x);
      solution.dual_residual =
          inf_norm(problem.P * polish.x + problem.q +
                   problem.A.transpose() * polish.y);
    }
  }
  solution.objective =
      0.5 * solution.x.dot(problem.P * solution.x) + problem.q.dot(solution.x);
  return solution;
}

Phase1Result minimize_violation(const Problem& problem,
                                const Settings& settings) {
  const Eigen::Index n = problem.num_vars();
  const Eigen::Index m = problem.num_rows();
  const double inf = std::numeric_limits<double>::infinity();

  Problem slack;
  slack.P = Eigen::MatrixXd::Zero(n + m, n + m);
  slack.P.bottomRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  slack.q = Eigen::VectorXd::Zero(n + m);
  slack.A = Eigen::MatrixXd::Zero(3 * m, n + m);
  slack.lower = Eigen::VectorXd::Constant(3 * m, -inf);
  slack.upper = Eigen::VectorXd::Constant(3 * m, inf);
  for (Eigen::Index i = 0; i < m; ++i) {
    slack.A.block(i, 0, 1, n) = problem.A.row(i);
    slack.A(i, n + i) = -1.0;
    slack.upper[i] = problem.upper[i];

    slack.A.block(m + i, 0, 1, n) = problem.A.row(i);
    slack.A(m + i, n + i) = 1.0;
    slack.lower[m + i] = problem.lower[i];

    slack.A(2 * m + i, n + i) = 1.0;
    slack.lower[2 * m + i] = 0.0;
  }

  Settings slack_settings = settings;
  slack_settings.polish = false;
  const Solution sol = solve(slack, slack_settings);

  Phase1Result result;
  result.x = sol.x.head(n);
  result.iterations = sol.iterations;
  result.max_violation = constraint_violation(problem, result.x);
  return result;
}

}  // namespace prfmpc::qp
