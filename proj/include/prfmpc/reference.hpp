#pragma once

#include <vector>

#include <Eigen/Core>

namespace prfmpc::sim {

/// Lane-change reference: constant longitudinal speed, lateral position
/// transitioning piecewise-linearly from lateral_start to lateral_target
/// between two longitudinal stations. Velocity entries are forward finite
/// differences of the positions, so the reference is consistent under the
/// forward-Euler ego dynamics.
struct ReferenceParams {
  double lateral_start = 0.0;
  double lateral_target = 3.5;
  double station_start = 5.0;
  double station_end = 27.5;
  double speed = 15.0;
  double start_x = 0.0;
};

/// Reference states (p1, p2, v1, v2) for timesteps t = 0..horizon.
std::vector<Eigen::Vector4d> build_reference(const ReferenceParams& params,
                                             double dt, int horizon);

}  // namespace prfmpc::sim
