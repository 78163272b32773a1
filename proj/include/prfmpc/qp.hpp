#pragma once

#include <limits>

#include <Eigen/Core>

namespace prfmpc::qp {

/// Convex QP in the two-sided form
///   minimize 0.5 x'Px + q'x   subject to  lower <= A x <= upper,
/// with +-infinity allowed in the bounds and equalities encoded as
/// lower == upper.
struct Problem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_rows() const { return lower.size(); }
};

struct Settings {
  double eps_abs = 1e-7;
  double eps_rel = 1e-7;
  int max_iterations = 20000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_primal_inf = 1e-5;
  double eps_dual_inf = 1e-5;
  int check_interval = 25;
  bool polish = true;
  double equality_rho_scale = 1e3;
};

enum class Status { solved, primal_infeasible, dual_infeasible, max_iterations };

struct Solution {
  Status status = Status::max_iterations;
  Eigen::VectorXd x;
  Eigen::VectorXd z;
  Eigen::VectorXd y;
  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  bool polished = false;
  double objective = 0.0;
};

/// Operator-splitting (ADMM) solve with optional warm start. Detects primal
/// and dual infeasibility from the iterate differences; on convergence the
/// solution is polished by re-solving the KKT system of the detected active
/// set, which typically drives KKT residuals to machine precision.
Solution solve(const Problem& problem, const Settings& settings = {},
               const Eigen::VectorXd* x_warm = nullptr,
               const Eigen::VectorXd* y_warm = nullptr);

/// Maximum violation of [lower, upper] by A x (0 when x is feasible).
double constraint_violation(const Problem& problem, const Eigen::VectorXd& x);

struct Phase1Result {
  double max_violation = 0.0;
  Eigen::VectorXd x;
  int iterations = 0;
};

/// Minimizes the squared row-wise slack needed to satisfy the constraints,
/// ignoring the objective. The slack problem is always feasible, so this
/// serves as an independent feasibility certificate: a strictly positive
/// minimal violation certifies the original constraint system is infeasible.
Phase1Result minimize_violation(const Problem& problem,
                                const Settings& settings = {});

}  // namespace prfmpc::qp
