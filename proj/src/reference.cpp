#include "prfmpc/reference.hpp"

#include <algorithm>
#include <stdexcept>

namespace prfmpc::sim {

std::vector<Eigen::Vector4d> build_reference(const ReferenceParams& params,
                                             double dt, int horizon) {
  if (params.speed <= 0.0) {
    throw std::invalid_argument("build_reference: speed must be positive");
  }
  if (params.station_end <= params.station_start) {
    throw std::invalid_argument(
        "build_reference: station_end must exceed station_start");
  }
  const auto lateral = [&params](double x) {
    if (x <= params.station_start) return params.lateral_start;
    if (x >= params.station_end) return params.lateral_target;
    const double s = (x - params.station_start) /
                     (params.station_end - params.station_start);
    return params.lateral_start +
           s * (params.lateral_target - params.lateral_start);
  };

  std::vector<Eigen::Vector2d> positions(horizon + 2);
  for (int t = 0; t <= horizon + 1; ++t) {
    const double x = params.start_x + params.speed * dt * t;
    positions[t] = {x, lateral(x)};
  }

  std::vector<Eigen::Vector4d> reference(horizon + 1);
  for (int t = 0; t <= horizon; ++t) {
    const Eigen::Vector2d velocity = (positions[t + 1] - positions[t]) / dt;
    reference[t] << positions[t], velocity;
  }
  return reference;
}

}  // namespace prfmpc::sim
