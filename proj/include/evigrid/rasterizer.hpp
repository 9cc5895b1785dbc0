#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "evigrid/grid.hpp"
#include "evigrid/ground.hpp"

namespace evigrid {

/// Parameters of the reflection/transmission sensor model. The numeric
/// defaults are engineering choices, not published values.
struct SensorModelConfig {
  double p_fp = 0.1;
  double p_fn_max = 0.9;
  double max_range = 70.0;       // metres, normalises the distance ratio
  double relevant_height = 3.0;  // metres, normalises the height ratio

  void validate() const;
};

/// Single-frame raster. All layers are width*height, row-major. Heights are
/// relative to the estimated ground surface; cells without transmissions
/// carry zero shadow/observable heights, cells without reflections zero
/// height and energy.
struct FrameRaster {
  GridSpec spec;
  Pose grid_pose;    // grid frame -> world
  Pose sensor_pose;  // sensor -> world

  std::vector<float> reflections;       // n
  std::vector<float> transmissions;     // m
  std::vector<float> observations;      // 1 iff m > 0 or n > 0
  std::vector<float> reflected_energy;  // mean intensity of reflections
  std::vector<float> height;            // max reflection height
  std::vector<float> shadow_height;     // min ray passage height
  std::vector<float> max_observable;    // max ray passage height
  std::vector<float> m_occupied;
  std::vector<float> m_free;
  std::vector<float> m_unknown;

  /// Zero counts, zero heights, evidence (0, 0, 1) everywhere.
  static FrameRaster unknown(const GridSpec& spec, const Pose& grid_pose, const Pose& sensor_pose);

  CellEvidence evidence(std::size_t idx) const {
    return {m_occupied[idx], m_free[idx], m_unknown[idx]};
  }

  /// Input-schema layers plus the evidence triple (8 layers). `with_aux`
  /// appends transmissions and observation_height, which fusion needs.
  MultiLayerGridMap to_map(bool with_aux = false) const;
  /// Inverse of to_map(true). Throws std::out_of_range on missing layers.
  static FrameRaster from_map(const MultiLayerGridMap& map, const Pose& sensor_pose);

  friend bool operator==(const FrameRaster& a, const FrameRaster& b);
};

struct RayCell {
  CellIndex cell;
  double passage_z = 0.0;
};

/// Grid frame of a sensor pose: the pose's gravity-aligned projection.
inline Pose grid_pose_for(const Pose& sensor_pose) { return sensor_pose.planar(); }

/// Sensor-frame cloud expressed in the grid frame of `sensor_pose`.
PointCloud to_grid_frame(const PointCloud& cloud, const Pose& sensor_pose);

/// Amanatides-Woo traversal of the horizontal projection of origin->end.
/// Calls visit(cell, passage_z) for every cell strictly before the endpoint
/// cell, where passage_z interpolates z at the midpoint of the cell's segment.
/// The segment is clipped to the grid rectangle. Exact corner crossings step
/// diagonally, so cells touched only at a corner are skipped.
template <class Visit>
void for_each_transmission(const GridSpec& spec, const Eigen::Vector3d& origin, const Eigen::Vector3d& end,
                           Visit&& visit) {
  const double inv = 1.0 / spec.cell_size;
  const double ox = (origin.x() - spec.origin_x) * inv;
  const double oy = (origin.y() - spec.origin_y) * inv;
  const double ex = (end.x() - spec.origin_x) * inv;
  const double ey = (end.y() - spec.origin_y) * inv;
  const double dx = ex - ox;
  const double dy = ey - oy;
  if (dx == 0.0 && dy == 0.0) return;

  // Liang-Barsky clip against [0, W] x [0, H].
  double t0 = 0.0;
  double t1 = 1.0;
  auto clip = [&](double p, double q) {
    if (p == 0.0) return q >= 0.0;
    const double r = q / p;
    if (p < 0.0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
    return true;
  };
  if (!clip(-dx, ox) || !clip(dx, spec.width - ox) || !clip(-dy, oy) || !clip(dy, spec.height - oy)) return;
  if (!(t0 < t1)) return;

  const int end_i = static_cast<int>(std::floor(ex));
  const int end_j = static_cast<int>(std::floor(ey));

  const double sx = ox + t0 * dx;
  const double sy = oy + t0 * dy;
  int i = std::clamp(static_cast<int>(std::floor(sx)), 0, spec.width - 1);
  int j = std::clamp(static_cast<int>(std::floor(sy)), 0, spec.height - 1);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int step_i = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
  const int step_j = dy > 0.0 ? 1 : (dy < 0.0 ? -1 : 0);
  const double delta_i = step_i != 0 ? 1.0 / std::abs(dx) : kInf;
  const double delta_j = step_j != 0 ? 1.0 / std::abs(dy) : kInf;
  double next_i = step_i > 0 ? (i + 1 - ox) / dx : (step_i < 0 ? (i - ox) / dx : kInf);
  double next_j = step_j > 0 ? (j + 1 - oy) / dy : (step_j < 0 ? (j - oy) / dy : kInf);

  const double oz = origin.z();
  const double dz = end.z() - origin.z();
  double t_enter = t0;
  while (true) {
    if (i == end_i && j == end_j) return;
    const double t_exit = std::min({next_i, next_j, t1});
    visit(CellIndex{i, j}, oz + 0.5 * (t_enter + t_exit) * dz);
    if (t_exit >= t1) return;
    if (next_i < next_j) {
      i += step_i;
      next_i += delta_i;
    } else if (next_j < next_i) {
      j += step_j;
      next_j += delta_j;
    } else {
      i += step_i;
      j += step_j;
      next_i += delta_i;
      next_j += delta_j;
    }
    if (!spec.contains(i, j)) return;
    t_enter = t_exit;
  }
}

/// Transmission cells of a ray with their passage heights (endpoint excluded).
std::vector<RayCell> traverse_ray(const GridSpec& spec, const Eigen::Vector3d& origin, const Eigen::Vector3d& end);

/// p_FN = 1 - (1 - r_x) * r_z * (1 - p_fn_max), ratios clamped to [0, 1].
double false_negative_prob(double distance_ratio, double height_ratio, double p_fn_max);

/// Reflection/transmission BBA:
///   occupied = p_fn^m (1 - p_fp^n), free = p_fp^n (1 - p_fn^m), unknown = rest.
CellEvidence sensor_bba(double transmissions, double reflections, double p_fn, double p_fp);

/// Builds the single-frame raster of `cloud` (sensor frame, taken at `pose`)
/// on `spec`, laid out in the grid frame grid_pose_for(pose). `ground` must be
/// expressed in that grid frame.
FrameRaster rasterize_frame(const PointCloud& cloud, const Pose& pose, const GroundSurface& ground,
                            const GridSpec& spec, const SensorModelConfig& cfg,
                            double ground_threshold = GroundFitConfig{}.classify_threshold);

}  // namespace evigrid
