#include "hltp/vision.hpp"

#include <cmath>
#include <stdexcept>

namespace hltp::vision {

using namespace ad;

void VisionSectorConfig::validate() const {
  if (thresholds_kmh.empty() || thresholds_kmh.size() != band_angles_deg.size())
    throw std::runtime_error("vision config: thresholds/angles size mismatch");
  for (std::size_t i = 1; i < thresholds_kmh.size(); ++i) {
    if (thresholds_kmh[i] <= thresholds_kmh[i - 1])
      throw std::runtime_error("vision config: thresholds must be strictly increasing");
    if (band_angles_deg[i] >= band_angles_deg[i - 1])
      throw std::runtime_error("vision config: band angles must be strictly decreasing");
  }
  for (double a : band_angles_deg)
    if (a <= 0.0 || a > 360.0)
      throw std::runtime_error("vision config: band angles must lie in (0, 360]");
}

int sector_band(double speed_mps, const VisionSectorConfig& cfg) {
  if (speed_mps < 0) throw std::runtime_error("sector_band: negative speed");
  const double kmh = speed_mps * 3.6;
  int band = 0;
  for (std::size_t i = 1; i < cfg.thresholds_kmh.size(); ++i)
    if (kmh >= cfg.thresholds_kmh[i]) band = int(i);
  return band;
}

bool in_central_sector(double target_heading_rad, double rel_x, double rel_y,
                       double band_angle_deg) {
  if (std::hypot(rel_x, rel_y) < 1e-9) return true;  // self
  const double bearing = std::atan2(rel_y, rel_x);
  const double diff = scene::wrap_angle(bearing - target_heading_rad);
  return std::abs(diff) <= 0.5 * band_angle_deg * M_PI / 180.0;
}

Tensor central_sector_mask(const scene::SceneTensors& st, const VisionSectorConfig& cfg) {
  cfg.validate();
  const std::size_t A = st.agents;
  const int T = st.t_obs;
  Tensor mask(A, std::size_t(T));
  for (int t = 0; t < T; ++t) {
    const int band = sector_band(st.target_speed[t], cfg);
    const double angle = cfg.band_angles_deg[band];
    for (std::size_t i = 0; i < A; ++i) {
      const double rel_x = st.S.at(i, std::size_t(t) * 4 + 0);
      const double rel_y = st.S.at(i, std::size_t(t) * 4 + 1);
      const bool central = i == 0 || in_central_sector(st.target_heading[t], rel_x, rel_y, angle);
      mask.at(i, t) = central ? 1.0 : 0.0;
    }
  }
  return mask;
}

Tensor build_vision_weights(const scene::SceneTensors& st, const VisionSectorConfig& cfg,
                            double w_c, double w_n) {
  Tensor mask = central_sector_mask(st, cfg);
  Tensor h(mask.shape());
  for (std::size_t i = 0; i < h.numel(); ++i) h[i] = mask[i] != 0.0 ? w_c : w_n;
  return h;
}

Tensor apply_vision_pool(const Tensor& h, const Tensor& s, std::size_t channels) {
  if (h.rows() != s.rows() || h.cols() * channels != s.cols())
    throw std::runtime_error("apply_vision_pool: shape mismatch, H " + h.shape_str() +
                             " vs S " + s.shape_str());
  Tensor out(s.shape());
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t t = 0; t < h.cols(); ++t) {
      const double w = h.at(i, t);
      for (std::size_t c = 0; c < channels; ++c)
        out.at(i, t * channels + c) = w * s.at(i, t * channels + c);
    }
  return out;
}

Var pooled_vectors(const Var& s_const, const Tensor& central_mask, const Var& w_c,
                   const Var& w_n, std::size_t channels) {
  Var mask = constant(central_mask);
  Tensor inv(central_mask.shape());
  for (std::size_t i = 0; i < inv.numel(); ++i) inv[i] = central_mask[i] != 0.0 ? 0.0 : 1.0;
  Var h = add(mul(w_c, mask), mul(w_n, constant(inv)));
  return mul_block_rows(s_const, h, channels);
}

}  // namespace hltp::vision
