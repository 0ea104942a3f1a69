#pragma once

#include "hltp/data.hpp"
#include "hltp/tensor.hpp"

namespace hltp::scene {

/// Per-scene tensor forms consumed by the models. Rows are agents (target in
/// row 0, padded slots masked); columns hold frame-major channel blocks.
struct SceneTensors {
  Tensor S;               // [A x (T*4)]  channels: dx, dy, dspeed, daccel
  Tensor M;               // [A x (T*2)]  channels: adjacent dspeed, dheading
  Tensor agent_mask;      // [A] 1 = real agent
  Tensor target_speed;    // [T] m/s
  Tensor target_heading;  // [T] rad, held forward over stationary frames
  int t_obs = 0;
  double dt = 0;
  std::size_t agents = 0;  // A = n_max + 1
};

/// Central-difference speed estimates (one-sided at the ends) and interval
/// headings used by both tensor builders.
struct AgentKinematics {
  std::vector<double> speed;    // [T]
  std::vector<double> heading;  // [T] interval heading, held when stationary
};
AgentKinematics agent_kinematics(const std::vector<double>& x, const std::vector<double>& y,
                                 int t_obs, double dt);

Tensor build_visual_vectors(const data::TrajectoryScene& scene, int n_max);
Tensor build_context_matrices(const data::TrajectoryScene& scene, int n_max);
SceneTensors build_scene_tensors(const data::TrajectoryScene& scene, int n_max);

/// Keeps the most recent k frames ("recent") or the first k ("initial") of a
/// scene's history; the future is untouched.
enum class TruncateMode { Recent, Initial };
data::TrajectoryScene truncate_history(const data::TrajectoryScene& scene, int k,
                                       TruncateMode mode);

double wrap_angle(double a);

}  // namespace hltp::scene
