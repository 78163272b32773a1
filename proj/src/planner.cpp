#include "prfmpc/planner.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "prfmpc/errors.hpp"

namespace prfmpc::planner {

std::pair<Eigen::Matrix4d, Eigen::Matrix<double, 4, 2>> discretize(double dt) {
  if (dt <= 0.0) {
    throw std::invalid_argument("discretize: dt must be positive");
  }
  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  a(0, 2) = dt;
  a(1, 3) = dt;
  Eigen::Matrix<double, 4, 2> b = Eigen::Matrix<double, 4, 2>::Zero();
  b(2, 0) = dt;
  b(3, 1) = dt;
  return {a, b};
}

EgoModel EgoModel::from_dt(double dt) {
  EgoModel model;
  std::tie(model.A, model.B) = discretize(dt);
  model.dt = dt;
  return model;
}

MPCProblem build_problem(const EgoModel& model, int tau,
                         const Eigen::Vector4d& x0,
                         const gauss::JointGaussianTrajectory& prediction,
                         const safety::MarginTable& table,
                         const safety::RiskAllocation& alloc,
                         std::span<const Eigen::Vector4d> reference,
                         std::span<const Eigen::Vector2d> directions,
                         double safe_radius, Variant variant) {
  const int T = alloc.horizon;
  if (tau < 0 || tau >= T) {
    throw std::invalid_argument("build_problem: tau must lie in [0, T)");
  }
  if (prediction.origin_step() != tau || prediction.horizon() != T) {
    throw std::invalid_argument(
        "build_problem: prediction must be anchored at tau and span tau+1..T");
  }
  if (table.horizon() != T) {
    throw std::invalid_argument("build_problem: margin table horizon mismatch");
  }
  if (static_cast<int>(reference.size()) < T + 1 ||
      static_cast<int>(directions.size()) < T + 1) {
    throw std::invalid_argument(
        "build_problem: reference and directions must cover timesteps 0..T");
  }

  MPCProblem problem;
  problem.model = model;
  problem.tau = tau;
  problem.horizon = T;
  problem.x0 = x0;
  problem.reference.assign(reference.begin(), reference.end());
  problem.variant = variant;

  const double gamma_t = alloc.gamma_t();
  for (int t = tau + 1; t <= T; ++t) {
    safety::HalfspaceConstraint h;
    h.t = t;
    h.m = directions[t];
    h.r = safe_radius;
    h.gamma_t = gamma_t;
    h.mu = prediction.mean(t);
    h.sigma = prediction.cov(t);
    h.margin = variant == Variant::prf ? table.cum(t, tau) : 0.0;
    problem.halfspaces.push_back(h);
  }
  return problem;
}

qp::Problem assemble_qp(const MPCProblem& problem) {
  const int N = problem.horizon - problem.tau;
  if (N <= 0) {
    throw std::invalid_argument("assemble_qp: empty horizon");
  }
  if (static_cast<int>(problem.halfspaces.size()) != N) {
    throw std::invalid_argument(
        "assemble_qp: expected one halfspace per future timestep");
  }
  if (static_cast<int>(problem.reference.size()) < problem.horizon + 1) {
    throw std::invalid_argument("assemble_qp: reference too short");
  }

  const int n = 6 * N;          // states then inputs
  const int m = 9 * N;          // dynamics, velocity, input, halfspace rows
  const double inf = std::numeric_limits<double>::infinity();

  qp::Problem p;
  p.P = Eigen::MatrixXd::Zero(n, n);
  p.q = Eigen::VectorXd::Zero(n);
  p.A = Eigen::MatrixXd::Zero(m, n);
  p.lower = Eigen::VectorXd::Constant(m, -inf);
  p.upper = Eigen::VectorXd::Constant(m, inf);

  const auto x_off = [](int k) { return 4 * k; };
  const auto u_off = [N](int k) { return 4 * N + 2 * k; };

  for (int k = 0; k < N; ++k) {
    const int t = problem.tau + 1 + k;
    p.P(x_off(k), x_off(k)) = 2.0;
    p.P(x_off(k) + 1, x_off(k) + 1) = 2.0;
    p.q[x_off(k)] = -2.0 * problem.reference[t][0];
    p.q[x_off(k) + 1] = -2.0 * problem.reference[t][1];
    p.P(u_off(k), u_off(k)) = 2.0 * problem.input_weight;
    p.P(u_off(k) + 1, u_off(k) + 1) = 2.0 * problem.input_weight;
  }

  int row = 0;
  // Dynamics equalities.
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < 4; ++j) p.A(row + j, x_off(k) + j) = 1.0;
    if (k > 0) {
      p.A.block<4, 4>(row, x_off(k - 1)) = -problem.model.A;
    }
    p.A.block<4, 2>(row, u_off(k)) = -problem.model.B;
    const Eigen::Vector4d rhs =
        k == 0 ? Eigen::Vector4d(problem.model.A * problem.x0)
               : Eigen::Vector4d::Zero();
    p.lower.segment<4>(row) = rhs;
    p.upper.segment<4>(row) = rhs;
    row += 4;
  }
  // Velocity bounds.
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < 2; ++j) {
      p.A(row, x_off(k) + 2 + j) = 1.0;
      p.lower[row] = problem.model.velocity_min[j];
      p.upper[row] = problem.model.velocity_max[j];
      ++row;
    }
  }
  // Input bounds.
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < 2; ++j) {
      p.A(row, u_off(k) + j) = 1.0;
      p.lower[row] = problem.model.input_min[j];
      p.upper[row] = problem.model.input_max[j];
      ++row;
    }
  }
  // Tangent halfspaces, normalized per row.
  for (int k = 0; k < N; ++k) {
    const safety::HalfspaceConstraint& h = problem.halfspaces[k];
    const double norm = h.m.norm();
    if (norm == 0.0) {
      throw std::invalid_argument("assemble_qp: degenerate tangent direction");
    }
    p.A(row, x_off(k)) = h.m[0] / norm;
    p.A(row, x_off(k) + 1) = h.m[1] / norm;
    const double offset = h.m.dot(h.mu) - h.r * norm -
                          h.gamma_t * std::sqrt(h.m.dot(h.sigma * h.m)) -
                          h.margin;
    p.upper[row] = offset / norm;
    ++row;
  }
  return p;
}

namespace {

double tracking_objective(const MPCProblem& problem,
                          const std::vector<Eigen::Vector4d>& states,
                          const std::vector<Eigen::Vector2d>& inputs) {
  double cost = 0.0;
  for (int k = 0; k < static_cast<int>(states.size()); ++k) {
    const int t = problem.tau + 1 + k;
    cost += (states[k].head<2>() - problem.reference[t].head<2>())
                .squaredNorm();
  }
  for (const Eigen::Vector2d& u : inputs) {
    cost += problem.input_weight * u.squaredNorm();
  }
  return cost;
}

void extract(const MPCProblem& problem, const Eigen::VectorXd& x,
             PlanResult& result) {
  const int N = problem.horizon - problem.tau;
  result.states.resize(N);
  result.inputs.resize(N);
  for (int k = 0; k < N; ++k) {
    result.states[k] = x.segment<4>(4 * k);
    result.inputs[k] = x.segment<2>(4 * N + 2 * k);
  }
  result.objective = tracking_objective(problem, result.states, result.inputs);
}

/// Warm-start vector from the previous planning step's solution: drop the
/// executed state/input and repeat the terminal entries.
bool shift_warm_start(const MPCProblem& problem, const PlanResult& previous,
                      Eigen::VectorXd& warm) {
  const int N = problem.horizon - problem.tau;
  if (previous.status != PlanStatus::feasible) return false;
  if (static_cast<int>(previous.states.size()) != N + 1) return false;
  warm.resize(6 * N);
  for (int k = 0; k < N; ++k) {
    warm.segment<4>(4 * k) = previous.states[k + 1];
    const int src = std::min(k + 1, N);
    warm.segment<2>(4 * N + 2 * k) = previous.inputs[src];
  }
  return true;
}

constexpr double kFeasibilityTol = 1e-6;

}  // namespace

PlanResult solve(const MPCProblem& problem, const qp::Settings& settings,
                 const PlanResult* previous) {
  const auto start = std::chrono::steady_clock::now();
  const qp::Problem qp_problem = assemble_qp(problem);

  Eigen::VectorXd warm;
  const Eigen::VectorXd* warm_ptr = nullptr;
  if (previous != nullptr && shift_warm_start(problem, *previous, warm)) {
    warm_ptr = &warm;
  }

  PlanResult result;
  qp::Solution sol = qp::solve(qp_problem, settings, warm_ptr);
  result.iterations = sol.iterations;

  if (sol.status != qp::Status::solved) {
    // Certify with the always-feasible slack problem before reporting
    // infeasibility.
    const qp::Phase1Result phase1 =
        qp::minimize_violation(qp_problem, settings);
    result.iterations += phase1.iterations;
    if (phase1.max_violation > kFeasibilityTol) {
      result.status = PlanStatus::infeasible;
      result.solve_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        start)
              .count();
      return result;
    }
    qp::Settings retry = settings;
    retry.max_iterations = 2 * settings.max_iterations;
    sol = qp::solve(qp_problem, retry, &phase1.x);
    result.iterations += sol.iterations;
    if (sol.status != qp::Status::solved) {
      throw SolverFailureError(
          "planner: QP did not converge at planning step " +
          std::to_string(problem.tau) +
          " although phase-1 found a feasible point");
    }
  }

  result.status = PlanStatus::feasible;
  extract(problem, sol.x, result);
  result.solve_time = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  return result;
}

bool check_feasible(const MPCProblem& problem, const qp::Settings& settings) {
  return solve(problem, settings).status == PlanStatus::feasible;
}

}  // namespace prfmpc::planner
