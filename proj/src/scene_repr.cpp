#include "hltp/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace hltp::scene {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

AgentKinematics agent_kinematics(const std::vector<double>& x, const std::vector<double>& y,
                                 int t_obs, double dt) {
  AgentKinematics k;
  k.speed.resize(t_obs);
  k.heading.resize(t_obs);
  for (int t = 0; t < t_obs; ++t) {
    const int lo = std::max(0, t - 1), hi = std::min(t_obs - 1, t + 1);
    const double vx = (x[hi] - x[lo]) / (double(hi - lo) * dt);
    const double vy = (y[hi] - y[lo]) / (double(hi - lo) * dt);
    k.speed[t] = std::hypot(vx, vy);
  }
  double held = 0.0;
  bool moved = false;
  for (int t = 1; t < t_obs; ++t) {
    const double dx = x[t] - x[t - 1], dy = y[t] - y[t - 1];
    if (std::hypot(dx, dy) >= 1e-6) {
      held = std::atan2(dy, dx);
      if (!moved) {
        moved = true;
        for (int s = 0; s < t; ++s) k.heading[s] = held;  // backfill leading frames
      }
    }
    k.heading[t] = held;
  }
  if (!moved) std::fill(k.heading.begin(), k.heading.end(), 0.0);
  return k;
}

namespace {

struct AgentView {
  const std::vector<double>* x;
  const std::vector<double>* y;
  bool valid;
};

std::vector<AgentView> agent_views(const data::TrajectoryScene& scene, int n_max) {
  std::vector<AgentView> out;
  out.push_back({&scene.target.x, &scene.target.y, true});
  for (const auto& nbr : scene.neighbors) out.push_back({&nbr.x, &nbr.y, true});
  while (int(out.size()) < n_max + 1) out.push_back({nullptr, nullptr, false});
  if (int(out.size()) != n_max + 1)
    throw std::runtime_error("scene has more neighbors than n_max");
  return out;
}

std::vector<double> accel_from_speed(const std::vector<double>& speed, double dt) {
  const int n = int(speed.size());
  std::vector<double> a(n);
  for (int t = 0; t < n; ++t) {
    const int lo = std::max(0, t - 1), hi = std::min(n - 1, t + 1);
    a[t] = (speed[hi] - speed[lo]) / (double(hi - lo) * dt);
  }
  return a;
}

}  // namespace

Tensor build_visual_vectors(const data::TrajectoryScene& scene, int n_max) {
  const int T = scene.t_obs;
  if (T < 3) throw std::runtime_error("build_visual_vectors: t_obs must be >= 3");
  auto views = agent_views(scene, n_max);
  const std::size_t A = views.size();

  auto tk = agent_kinematics(scene.target.x, scene.target.y, T, scene.dt);
  auto ta = accel_from_speed(tk.speed, scene.dt);

  Tensor S(A, std::size_t(T) * 4);
  for (std::size_t i = 0; i < A; ++i) {
    if (!views[i].valid) continue;
    auto ki = agent_kinematics(*views[i].x, *views[i].y, T, scene.dt);
    auto ai = accel_from_speed(ki.speed, scene.dt);
    for (int t = 0; t < T; ++t) {
      S.at(i, t * 4 + 0) = (*views[i].x)[t] - scene.target.x[t];
      S.at(i, t * 4 + 1) = (*views[i].y)[t] - scene.target.y[t];
      S.at(i, t * 4 + 2) = ki.speed[t] - tk.speed[t];
      S.at(i, t * 4 + 3) = ai[t] - ta[t];
    }
  }
  return S;
}

Tensor build_context_matrices(const data::TrajectoryScene& scene, int n_max) {
  const int T = scene.t_obs;
  if (T < 3) throw std::runtime_error("build_context_matrices: t_obs must be >= 3");
  auto views = agent_views(scene, n_max);
  const std::size_t A = views.size();

  Tensor M(A, std::size_t(T) * 2);
  for (std::size_t i = 0; i < A; ++i) {
    if (!views[i].valid) continue;
    auto ki = agent_kinematics(*views[i].x, *views[i].y, T, scene.dt);
    for (int t = 1; t < T; ++t) {
      M.at(i, t * 2 + 0) = ki.speed[t] - ki.speed[t - 1];
      if (t >= 2) M.at(i, t * 2 + 1) = wrap_angle(ki.heading[t] - ki.heading[t - 1]);
    }
  }
  return M;
}

SceneTensors build_scene_tensors(const data::TrajectoryScene& scene, int n_max) {
  SceneTensors out;
  out.S = build_visual_vectors(scene, n_max);
  out.M = build_context_matrices(scene, n_max);
  out.t_obs = scene.t_obs;
  out.dt = scene.dt;
  out.agents = std::size_t(n_max) + 1;

  out.agent_mask = Tensor::vec(out.agents);
  out.agent_mask[0] = 1.0;
  for (std::size_t i = 0; i < scene.neighbors.size(); ++i) out.agent_mask[i + 1] = 1.0;

  auto tk = agent_kinematics(scene.target.x, scene.target.y, scene.t_obs, scene.dt);
  out.target_speed = Tensor::vec(scene.t_obs);
  out.target_heading = Tensor::vec(scene.t_obs);
  for (int t = 0; t < scene.t_obs; ++t) {
    out.target_speed[t] = tk.speed[t];
    out.target_heading[t] = tk.heading[t];
  }
  return out;
}

data::TrajectoryScene truncate_history(const data::TrajectoryScene& scene, int k,
                                       TruncateMode mode) {
  if (k < 2) throw std::runtime_error("truncate_history: k must be >= 2");
  if (k > scene.t_obs) throw std::runtime_error("truncate_history: k exceeds history");
  if (k == scene.t_obs) return scene;

  const int drop = scene.t_obs - k;
  const int begin = mode == TruncateMode::Recent ? drop : 0;

  auto cut = [&](const data::AgentTrack& a, bool has_future) {
    data::AgentTrack out;
    out.vehicle_id = a.vehicle_id;
    const int total = k + (has_future ? scene.t_f : 0);
    for (int t = 0; t < total; ++t) {
      int src;
      if (t < k)
        src = begin + t;
      else
        src = scene.t_obs + (t - k);  // future frames keep their positions
      out.x.push_back(a.x[src]);
      out.y.push_back(a.y[src]);
      out.valid.push_back(a.valid[src]);
    }
    return out;
  };

  data::TrajectoryScene out;
  out.t_obs = k;
  out.t_f = scene.t_f;
  out.dt = scene.dt;
  out.label = scene.label;
  out.target = cut(scene.target, true);
  for (const auto& nbr : scene.neighbors) out.neighbors.push_back(cut(nbr, false));
  return out;
}

}  // namespace hltp::scene
