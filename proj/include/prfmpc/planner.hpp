#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "prfmpc/gauss.hpp"
#include "prfmpc/qp.hpp"
#include "prfmpc/safety.hpp"

namespace prfmpc::planner {

/// Forward-Euler discretization of the planar double integrator: positions
/// integrate velocities, velocities integrate the commanded accelerations.
std::pair<Eigen::Matrix4d, Eigen::Matrix<double, 4, 2>> discretize(double dt);

/// Ego vehicle model and actuation limits. State is (p1, p2, v1, v2);
/// input is the planar acceleration (u1, u2).
struct EgoModel {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
  double dt = 0.5;
  Eigen::Vector2d velocity_min{0.0, -5.0};
  Eigen::Vector2d velocity_max{30.0, 5.0};
  Eigen::Vector2d input_min{-10.0, -5.0};
  Eigen::Vector2d input_max{10.0, 5.0};

  static EgoModel from_dt(double dt);

  Eigen::Vector4d step(const Eigen::Vector4d& x,
                       const Eigen::Vector2d& u) const {
    return A * x + B * u;
  }
};

enum class Variant { nominal, prf };

/// Shrinking-horizon tracking problem at planning step tau with one tangent
/// halfspace per future timestep. For the nominal variant every halfspace
/// margin is zero.
struct MPCProblem {
  EgoModel model;
  int tau = 0;
  int horizon = 0;
  Eigen::Vector4d x0 = Eigen::Vector4d::Zero();
  std::vector<Eigen::Vector4d> reference;                // indexed by t: 0..T
  std::vector<safety::HalfspaceConstraint> halfspaces;   // t = tau+1..T
  Variant variant = Variant::nominal;
  double input_weight = 1e-4;
};

enum class PlanStatus { feasible, infeasible };

struct PlanResult {
  PlanStatus status = PlanStatus::infeasible;
  std::vector<Eigen::Vector2d> inputs;  // u_tau .. u_{T-1}
  std::vector<Eigen::Vector4d> states;  // x_{tau+1} .. x_T
  double objective = 0.0;               // tracking cost + input_weight * effort
  double solve_time = 0.0;              // wall-clock seconds, measured
  long iterations = 0;                  // deterministic solver work
};

MPCProblem build_problem(const EgoModel& model, int tau,
                         const Eigen::Vector4d& x0,
                         const gauss::JointGaussianTrajectory& prediction,
                         const safety::MarginTable& table,
                         const safety::RiskAllocation& alloc,
                         std::span<const Eigen::Vector4d> reference,
                         std::span<const Eigen::Vector2d> directions,
                         double safe_radius, Variant variant);

/// Dense multiple-shooting QP: states are decision variables and the
/// dynamics enter as equality constraints, so infeasibility is always a
/// statement about the halfspace/bound system rather than elimination
/// artifacts. Halfspace rows are normalized by the tangent norm.
qp::Problem assemble_qp(const MPCProblem& problem);

/// Solves the QP. A converged ADMM run (with verified polish) reports
/// feasible; otherwise a phase-1 slack minimization decides between a clean
/// infeasible status and a retry, and SolverFailureError is thrown only when
/// neither settles the instance. `previous` optionally warm-starts from the
/// plan of the preceding step.
PlanResult solve(const MPCProblem& problem, const qp::Settings& settings = {},
                 const PlanResult* previous = nullptr);

/// Feasibility probe with the same semantics as solve().status.
bool check_feasible(const MPCProblem& problem,
                    const qp::Settings& settings = {});

}  // namespace prfmpc::planner
