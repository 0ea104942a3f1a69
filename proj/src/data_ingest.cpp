#include "hltp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hltp::data {

namespace {

constexpr double kFeetToMeters = 0.3048;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string maneuver_name(int index) {
  static const char* pos[] = {"left", "keep", "right"};
  static const char* vel[] = {"accel", "maintain", "brake"};
  return std::string(pos[index / 3]) + "-" + vel[index % 3];
}

CsvSchema parse_schema(const std::string& name) {
  if (name == "generic") return CsvSchema::Generic;
  if (name == "ngsim-like") return CsvSchema::NgsimLike;
  if (name == "highd-like") return CsvSchema::HighdLike;
  throw std::runtime_error("unknown csv schema: " + name +
                           " (expected generic|ngsim-like|highd-like)");
}

std::vector<RawTrack> parse_trajectory_csv(const std::string& path, CsvSchema schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv file: " + path);

  const double unit = schema == CsvSchema::NgsimLike ? kFeetToMeters : 1.0;
  const double rate = schema == CsvSchema::NgsimLike   ? 10.0
                      : schema == CsvSchema::HighdLike ? 25.0
                                                       : 5.0;

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  {
    auto header = split_csv_line(line);
    if (header.size() < 4 || header[0] != "vehicle_id" || header[1] != "frame_id" ||
        header[2] != "x_m" || header[3] != "y_m")
      throw std::runtime_error(path + ": line 1: expected header vehicle_id,frame_id,x_m,y_m");
  }

  std::map<std::int64_t, RawTrack> by_vehicle;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() < 4)
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": expected 4 columns, got " + std::to_string(fields.size()));
    std::int64_t vid, frame;
    double x, y;
    try {
      std::size_t pos = 0;
      vid = std::stoll(fields[0], &pos);
      frame = std::stoll(fields[1], &pos);
      x = std::stod(fields[2], &pos);
      y = std::stod(fields[3], &pos);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": malformed row");
    }
    if (!std::isfinite(x) || !std::isfinite(y))
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": non-finite coordinate");
    auto& track = by_vehicle[vid];
    track.vehicle_id = vid;
    track.source_rate_hz = rate;
    track.samples.push_back({frame, x * unit, y * unit});
  }

  std::vector<RawTrack> out;
  out.reserve(by_vehicle.size());
  for (auto& [vid, track] : by_vehicle) {
    std::sort(track.samples.begin(), track.samples.end(),
              [](const TrackSample& a, const TrackSample& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < track.samples.size(); ++i) {
      if (track.samples[i].frame == track.samples[i - 1].frame)
        throw std::runtime_error(path + ": duplicate frame " +
                                 std::to_string(track.samples[i].frame) + " for vehicle " +
                                 std::to_string(vid));
    }
    out.push_back(std::move(track));
  }
  return out;
}

namespace {

struct ResampledTrack {
  std::int64_t vehicle_id;
  std::vector<TrackSample> samples;  // consecutive in resampled index
};

// Keeps frames whose absolute index is divisible by the factor, so all
// vehicles stay aligned on shared timestamps.
std::vector<ResampledTrack> resample(const std::vector<RawTrack>& tracks, int factor) {
  std::vector<ResampledTrack> out;
  for (const auto& t : tracks) {
    ResampledTrack r{t.vehicle_id, {}};
    for (const auto& s : t.samples)
      if (s.frame % factor == 0) r.samples.push_back({s.frame / factor, s.x, s.y});
    if (!r.samples.empty()) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<TrajectoryScene> segment_scenes(const std::vector<RawTrack>& tracks,
                                            const SegmentationConfig& cfg,
                                            SegmentationStats* stats) {
  if (cfg.history_frames < 2 || cfg.future_frames < 1 || cfg.downsample_factor < 1)
    throw std::runtime_error("segment_scenes: invalid segmentation config");
  const int total = cfg.history_frames + cfg.future_frames;

  auto resampled = resample(tracks, cfg.downsample_factor);
  std::sort(resampled.begin(), resampled.end(),
            [](const ResampledTrack& a, const ResampledTrack& b) {
              return a.vehicle_id < b.vehicle_id;
            });

  double rate = tracks.empty() ? 5.0 : tracks.front().source_rate_hz;
  const double dt = double(cfg.downsample_factor) / rate;

  // index: vehicle -> (frame -> position)
  std::vector<std::map<std::int64_t, std::pair<double, double>>> frame_index(resampled.size());
  for (std::size_t i = 0; i < resampled.size(); ++i)
    for (const auto& s : resampled[i].samples) frame_index[i][s.frame] = {s.x, s.y};

  std::vector<TrajectoryScene> scenes;
  SegmentationStats local;
  for (std::size_t ti = 0; ti < resampled.size(); ++ti) {
    const auto& target = resampled[ti];
    if (int(target.samples.size()) < total) {
      ++local.skipped_short_tracks;
      continue;
    }
    for (std::size_t start = 0; start + total <= target.samples.size(); ++start) {
      // window must be frame-consecutive
      bool consecutive = true;
      for (int k = 1; k < total; ++k)
        if (target.samples[start + k].frame != target.samples[start + k - 1].frame + 1) {
          consecutive = false;
          break;
        }
      if (!consecutive) continue;

      const std::int64_t first_frame = target.samples[start].frame;
      const std::int64_t anchor_frame = first_frame + cfg.history_frames - 1;
      const double cx = target.samples[start + cfg.history_frames - 1].x;
      const double cy = target.samples[start + cfg.history_frames - 1].y;

      TrajectoryScene scene;
      scene.t_obs = cfg.history_frames;
      scene.t_f = cfg.future_frames;
      scene.dt = dt;
      scene.target.vehicle_id = target.vehicle_id;
      for (int k = 0; k < total; ++k) {
        scene.target.x.push_back(target.samples[start + k].x - cx);
        scene.target.y.push_back(target.samples[start + k].y - cy);
        scene.target.valid.push_back(1);
      }

      // candidate neighbors: present at the anchor frame
      struct Cand {
        double dist;
        std::int64_t vid;
        std::size_t idx;
      };
      std::vector<Cand> cands;
      for (std::size_t ni = 0; ni < resampled.size(); ++ni) {
        if (ni == ti) continue;
        auto it = frame_index[ni].find(anchor_frame);
        if (it == frame_index[ni].end()) continue;
        const double dx = it->second.first - cx, dy = it->second.second - cy;
        cands.push_back({std::hypot(dx, dy), resampled[ni].vehicle_id, ni});
      }
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.vid < b.vid;
      });
      if (int(cands.size()) > cfg.n_max) cands.resize(cfg.n_max);

      for (const auto& c : cands) {
        AgentTrack nbr;
        nbr.vehicle_id = c.vid;
        const auto& fmap = frame_index[c.idx];
        // first pass: record valid frames
        std::vector<std::pair<double, double>> pos(cfg.history_frames, {0, 0});
        for (int k = 0; k < cfg.history_frames; ++k) {
          auto it = fmap.find(first_frame + k);
          if (it != fmap.end()) {
            pos[k] = {it->second.first - cx, it->second.second - cy};
            nbr.valid.push_back(1);
          } else {
            nbr.valid.push_back(0);
          }
        }
        // fill gaps by holding the previous valid frame (leading gap backfilled
        // from the first valid one), so finite differences never read
        // uninitialized slots
        int first_valid = 0;
        while (first_valid < cfg.history_frames && !nbr.valid[first_valid]) ++first_valid;
        int prev = first_valid;
        for (int k = 0; k < cfg.history_frames; ++k) {
          if (nbr.valid[k])
            prev = k;
          else
            pos[k] = pos[prev];
        }
        for (int k = 0; k < cfg.history_frames; ++k) {
          nbr.x.push_back(pos[k].first);
          nbr.y.push_back(pos[k].second);
        }
        scene.neighbors.push_back(std::move(nbr));
      }
      scenes.push_back(std::move(scene));
      ++local.scenes;
    }
  }
  if (stats) *stats = local;
  return scenes;
}

namespace {

void interpolate_agent(AgentTrack& a, int first, int last) {
  const int i0 = first - 1, i1 = last - 1;     // 0-indexed inclusive
  const int lo = i0 - 1, hi = i1 + 1;          // anchors
  const double span = double(hi - lo);
  for (int k = i0; k <= i1; ++k) {
    const double w = double(k - lo) / span;
    a.x[k] = a.x[lo] + w * (a.x[hi] - a.x[lo]);
    a.y[k] = a.y[lo] + w * (a.y[hi] - a.y[lo]);
  }
}

}  // namespace

TrajectoryScene make_missing_subset(const TrajectoryScene& scene, int first, int last) {
  const int t_obs = scene.t_obs;
  if (first > last || first < 1 || last > t_obs)
    throw std::runtime_error("make_missing_subset: drop range outside history");
  if (last - first + 1 != t_obs / 2)
    throw std::runtime_error("make_missing_subset: drop range must cover t_obs/2 frames");
  if (first <= 1 || last >= t_obs)
    throw std::runtime_error("make_missing_subset: no surviving anchor frame on one side");

  TrajectoryScene out = scene;
  interpolate_agent(out.target, first, last);
  for (auto& nbr : out.neighbors) interpolate_agent(nbr, first, last);
  return out;
}

std::vector<std::pair<int, int>> standard_missing_ranges(int t_obs) {
  std::vector<std::pair<int, int>> out;
  const int len = t_obs / 2;
  for (int first = 3; first <= 7; ++first) out.emplace_back(first, first + len - 1);
  return out;
}

// ---------------------------------------------------------------------------
// synthetic scenes

namespace {

// Box-Muller, independent from the stdlib's unspecified normal_distribution.
double gauss(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(1e-12, 1.0);
  const double r = std::sqrt(-2.0 * std::log(u(rng)));
  const double a = 2.0 * M_PI * u(rng);
  return r * std::cos(a);
}

double smoothstep01(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// Longitudinal position under the velocity sub-maneuver; speed clamps at a
// small positive floor when braking.
double longitudinal(double v0, double accel, double t, double floor_speed = 0.5) {
  if (accel >= 0) return v0 * t + 0.5 * accel * t * t;
  const double t_floor = (v0 - floor_speed) / -accel;
  if (t <= t_floor) return v0 * t + 0.5 * accel * t * t;
  const double y_at = v0 * t_floor + 0.5 * accel * t_floor * t_floor;
  return y_at + floor_speed * (t - t_floor);
}

}  // namespace

std::vector<TrajectoryScene> generate_synthetic_scenes(const SyntheticConfig& cfg,
                                                       std::uint64_t seed) {
  if (cfg.scenes <= 0) throw std::runtime_error("generate_synthetic_scenes: empty spec");
  if (cfg.t_obs < 3 || cfg.t_f < 1 || cfg.dt <= 0)
    throw std::runtime_error("generate_synthetic_scenes: invalid frame config");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uspeed(cfg.speed_min, cfg.speed_max);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int total = cfg.t_obs + cfg.t_f;
  const double t_anchor = double(cfg.t_obs - 1) * cfg.dt;

  std::vector<TrajectoryScene> scenes;
  scenes.reserve(cfg.scenes);
  for (int si = 0; si < cfg.scenes; ++si) {
    const ManeuverLabel label = ManeuverLabel::from_index(si % kManeuverCount);
    const double v0 = uspeed(rng);

    double accel = 0;
    if (label.velocity == VelocityClass::Accelerate) accel = cfg.accel_mps2;
    if (label.velocity == VelocityClass::Brake) accel = -cfg.brake_mps2;

    // Lateral profile: the change starts shortly before the history boundary
    // (its onset is observable) and completes strictly before the scene ends,
    // so the final offset equals one lane width exactly.
    double lat_dir = 0;
    if (label.position == PositionClass::LeftChange) lat_dir = 1;
    if (label.position == PositionClass::RightChange) lat_dir = -1;
    const double change_duration = 3.0;
    const double t_start = t_anchor - 1.0 + 0.4 * u01(rng);

    TrajectoryScene scene;
    scene.t_obs = cfg.t_obs;
    scene.t_f = cfg.t_f;
    scene.dt = cfg.dt;
    scene.label = label;
    scene.target.vehicle_id = 0;

    auto target_xy = [&](double t) {
      const double y = longitudinal(v0, accel, t);
      const double x =
          lat_dir * cfg.lane_width_m * smoothstep01((t - t_start) / change_duration);
      return std::pair<double, double>{x, y};
    };

    const auto [cx, cy] = target_xy(t_anchor);
    for (int k = 0; k < total; ++k) {
      const auto [x, y] = target_xy(double(k) * cfg.dt);
      double nx = 0, ny = 0;
      if (cfg.noise_std > 0 && k < cfg.t_obs) {
        nx = cfg.noise_std * gauss(rng);
        ny = cfg.noise_std * gauss(rng);
      }
      scene.target.x.push_back(x - cx + nx);
      scene.target.y.push_back(y - cy + ny);
      scene.target.valid.push_back(1);
    }

    // Neighbors: constant-speed lane keepers in adjacent lanes.
    for (int ni = 0; ni < cfg.neighbors; ++ni) {
      AgentTrack nbr;
      nbr.vehicle_id = ni + 1;
      const int lane = int(std::floor(u01(rng) * 3.0)) - 1;  // -1, 0, +1
      const double gap = (u01(rng) * 2.0 - 1.0) * 25.0;
      const double v_n = v0 + (u01(rng) * 2.0 - 1.0) * 1.5;
      const double lane_x = double(lane) * cfg.lane_width_m;
      const double base_y = (lane == 0 && std::abs(gap) < 8.0) ? gap + 16.0 : gap;
      for (int k = 0; k < cfg.t_obs; ++k) {
        const double t = double(k) * cfg.dt;
        double nx = 0, ny = 0;
        if (cfg.noise_std > 0) {
          nx = cfg.noise_std * gauss(rng);
          ny = cfg.noise_std * gauss(rng);
        }
        nbr.x.push_back(lane_x - cx + nx);
        nbr.y.push_back(base_y + v_n * t - cy + ny);
        nbr.valid.push_back(1);
      }
      scene.neighbors.push_back(std::move(nbr));
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

ManeuverLabel label_from_future(const TrajectoryScene& scene, double lane_width_m) {
  const int t_obs = scene.t_obs, t_f = scene.t_f;
  const auto& tx = scene.target.x;
  const auto& ty = scene.target.y;

  const double lateral = tx[t_obs + t_f - 1] - tx[t_obs - 1];
  ManeuverLabel label;
  if (lateral > 0.5 * lane_width_m)
    label.position = PositionClass::LeftChange;
  else if (lateral < -0.5 * lane_width_m)
    label.position = PositionClass::RightChange;
  else
    label.position = PositionClass::Keep;

  auto speed_at = [&](int k) {
    const int lo = std::max(0, k - 1), hi = std::min(t_obs + t_f - 1, k + 1);
    const double dx = tx[hi] - tx[lo], dy = ty[hi] - ty[lo];
    return std::hypot(dx, dy) / (double(hi - lo) * scene.dt);
  };
  const double v_ref = speed_at(t_obs - 1);
  double mean_future = 0;
  for (int k = t_obs; k < t_obs + t_f; ++k) mean_future += speed_at(k);
  mean_future /= double(t_f);
  const double dv = mean_future - v_ref;
  if (dv > 0.5)
    label.velocity = VelocityClass::Accelerate;
  else if (dv < -0.5)
    label.velocity = VelocityClass::Brake;
  else
    label.velocity = VelocityClass::Maintain;
  return label;
}

}  // namespace hltp::data
