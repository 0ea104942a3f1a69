#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hltp/tensor.hpp"

namespace hltp::data {

/// Position/velocity sub-maneuver classes and their 9 combinations.
enum class PositionClass : int { LeftChange = 0, Keep = 1, RightChange = 2 };
enum class VelocityClass : int { Accelerate = 0, Maintain = 1, Brake = 2 };

struct ManeuverLabel {
  PositionClass position = PositionClass::Keep;
  VelocityClass velocity = VelocityClass::Maintain;
  int index() const { return static_cast<int>(position) * 3 + static_cast<int>(velocity); }
  static ManeuverLabel from_index(int idx) {
    return {static_cast<PositionClass>(idx / 3), static_cast<VelocityClass>(idx % 3)};
  }
};

constexpr int kManeuverCount = 9;
std::string maneuver_name(int index);

struct TrackSample {
  std::int64_t frame = 0;
  double x = 0, y = 0;
};

struct RawTrack {
  std::int64_t vehicle_id = 0;
  std::vector<TrackSample> samples;  // strictly increasing frame index
  double source_rate_hz = 0;
};

enum class CsvSchema { Generic, NgsimLike, HighdLike };
CsvSchema parse_schema(const std::string& name);

/// One agent inside a scene: positions per frame plus per-frame validity.
struct AgentTrack {
  std::int64_t vehicle_id = -1;
  std::vector<double> x, y;       // length t_obs + t_f (t_f entries only for target)
  std::vector<std::uint8_t> valid;
};

/// A fixed-length 8-second segment, target-centered at the last history frame.
struct TrajectoryScene {
  AgentTrack target;                   // fully observed, length t_obs + t_f
  std::vector<AgentTrack> neighbors;   // length t_obs each, up to n_max entries
  int t_obs = 0;
  int t_f = 0;
  double dt = 0;
  std::optional<ManeuverLabel> label;
};

struct SegmentationConfig {
  int history_frames = 16;   // teacher default
  int future_frames = 25;
  int downsample_factor = 2;
  int n_max = 12;
  double segment_seconds = 8.0;
};

struct SegmentationStats {
  std::size_t scenes = 0;
  std::size_t skipped_short_tracks = 0;
};

// ---------------------------------------------------------------------------

/// Parses a trajectory CSV (header: vehicle_id,frame_id,x_m,y_m). The
/// ngsim-like schema converts feet to meters and assumes 10 Hz; highd-like is
/// meters at 25 Hz. Throws with the offending line number or vehicle id.
std::vector<RawTrack> parse_trajectory_csv(const std::string& path, CsvSchema schema);

/// Cuts fixed (t_obs + t_f) windows around every vehicle acting as target.
/// Tracks are resampled by cfg.downsample_factor first; segmentation is
/// independent of the input track order.
std::vector<TrajectoryScene> segment_scenes(const std::vector<RawTrack>& tracks,
                                            const SegmentationConfig& cfg,
                                            SegmentationStats* stats = nullptr);

/// Replaces history frames [first, last] (1-indexed, inclusive) of every agent
/// with linear interpolation between the surviving anchor frames.
TrajectoryScene make_missing_subset(const TrajectoryScene& scene, int first, int last);

/// The five standard missing-data ranges for t_obs = 16: 3-10 ... 7-14.
std::vector<std::pair<int, int>> standard_missing_ranges(int t_obs);

struct SyntheticConfig {
  int scenes = 32;                  // cycled over the 9 maneuver classes
  int t_obs = 16;
  int t_f = 25;
  double dt = 0.2;
  double lane_width_m = 3.5;
  double speed_min = 8.0, speed_max = 12.0;
  double accel_mps2 = 1.0;
  double brake_mps2 = 0.75;
  double noise_std = 0.0;           // applied to history coordinates
  int neighbors = 6;
};

/// Kinematically consistent labeled scenes; bit-deterministic per seed.
std::vector<TrajectoryScene> generate_synthetic_scenes(const SyntheticConfig& cfg,
                                                       std::uint64_t seed);

/// Thresholded-future-motion labeling rule (lateral displacement beyond half a
/// lane width; mean speed change beyond 0.5 m/s).
ManeuverLabel label_from_future(const TrajectoryScene& scene, double lane_width_m = 3.5);

}  // namespace hltp::data
