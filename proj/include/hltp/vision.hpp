#pragma once

#include <vector>

#include "hltp/autodiff.hpp"
#include "hltp/scene.hpp"

namespace hltp::vision {

/// Speed-banded field-of-view: left-closed km/h bands, one central full angle
/// per band, narrowing as speed grows.
struct VisionSectorConfig {
  std::vector<double> thresholds_kmh{0.0, 30.0, 60.0, 90.0};
  std::vector<double> band_angles_deg{180.0, 120.0, 90.0, 60.0};
  double w_c_init = 1.0;
  double w_n_init = 0.2;

  void validate() const;
};

/// Index of the left-closed band holding `speed_mps` (converted to km/h).
int sector_band(double speed_mps, const VisionSectorConfig& cfg);

/// True iff the bearing from the target to (rel_x, rel_y) lies within half the
/// band angle of the target heading. The target itself is always central.
bool in_central_sector(double target_heading_rad, double rel_x, double rel_y,
                       double band_angle_deg);

/// [A x T] indicator of central-sector membership, band re-evaluated per frame
/// from the target speed.
Tensor central_sector_mask(const scene::SceneTensors& st, const VisionSectorConfig& cfg);

/// Visual weight matrix H with entries w_c (central) or w_n (peripheral).
Tensor build_vision_weights(const scene::SceneTensors& st, const VisionSectorConfig& cfg,
                            double w_c, double w_n);

/// S~ = H (.) S with H broadcast over the per-frame channel block.
Tensor apply_vision_pool(const Tensor& h, const Tensor& s, std::size_t channels = 4);

/// Tape-aware pooling for training: H = w_n + (w_c - w_n) on central cells,
/// realized elementwise from the two learnable scalars.
ad::Var pooled_vectors(const ad::Var& s_const, const Tensor& central_mask,
                       const ad::Var& w_c, const ad::Var& w_n, std::size_t channels = 4);

}  // namespace hltp::vision
