#include "evigrid/rasterizer.hpp"

#include <cmath>
#include <stdexcept>

namespace evigrid {

void SensorModelConfig::validate() const {
  if (!(p_fp > 0.0 && p_fp < 1.0) || !(p_fn_max > 0.0 && p_fn_max < 1.0)) {
    throw std::invalid_argument("sensor model probabilities must lie in (0,1)");
  }
  if (!(max_range > 0.0) || !(relevant_height > 0.0)) {
    throw std::invalid_argument("sensor model ranges must be positive");
  }
}

FrameRaster FrameRaster::unknown(const GridSpec& spec, const Pose& grid_pose, const Pose& sensor_pose) {
  spec.validate();
  const std::size_t n = spec.cell_count();
  FrameRaster r;
  r.spec = spec;
  r.grid_pose = grid_pose;
  r.sensor_pose = sensor_pose;
  for (auto* layer : {&r.reflections, &r.transmissions, &r.observations, &r.reflected_energy, &r.height,
                      &r.shadow_height, &r.max_observable, &r.m_occupied, &r.m_free}) {
    layer->assign(n, 0.0f);
  }
  r.m_unknown.assign(n, 1.0f);
  return r;
}

MultiLayerGridMap FrameRaster::to_map(bool with_aux) const {
  namespace ln = layer_names;
  MultiLayerGridMap map(spec);
  map.add_layer({std::string(ln::kReflections), reflections});
  map.add_layer({std::string(ln::kObservations), observations});
  map.add_layer({std::string(ln::kReflectedEnergy), reflected_energy});
  map.add_layer({std::string(ln::kHeight), height});
  map.add_layer({std::string(ln::kShadowHeight), shadow_height});
  map.add_layer({std::string(ln::kBelFree), m_free});
  map.add_layer({std::string(ln::kBelOccupied), m_occupied});
  map.add_layer({std::string(ln::kBelUnknown), m_unknown});
  if (with_aux) {
    map.add_layer({std::string(ln::kTransmissions), transmissions});
    map.add_layer({std::string(ln::kObservationHeight), max_observable});
  }
  return map;
}

FrameRaster FrameRaster::from_map(const MultiLayerGridMap& map, const Pose& sensor_pose) {
  namespace ln = layer_names;
  FrameRaster r;
  r.spec = map.spec();
  r.grid_pose = grid_pose_for(sensor_pose);
  r.sensor_pose = sensor_pose;
  r.reflections = map.layer(ln::kReflections).values;
  r.observations = map.layer(ln::kObservations).values;
  r.reflected_energy = map.layer(ln::kReflectedEnergy).values;
  r.height = map.layer(ln::kHeight).values;
  r.shadow_height = map.layer(ln::kShadowHeight).values;
  r.m_free = map.layer(ln::kBelFree).values;
  r.m_occupied = map.layer(ln::kBelOccupied).values;
  r.m_unknown = map.layer(ln::kBelUnknown).values;
  r.transmissions = map.layer(ln::kTransmissions).values;
  r.max_observable = map.layer(ln::kObservationHeight).values;
  return r;
}

bool operator==(const FrameRaster& a, const FrameRaster& b) {
  return a.spec == b.spec && a.grid_pose.translation == b.grid_pose.translation &&
         a.grid_pose.rotation.coeffs() == b.grid_pose.rotation.coeffs() && a.reflections == b.reflections &&
         a.transmissions == b.transmissions && a.observations == b.observations &&
         a.reflected_energy == b.reflected_energy && a.height == b.height && a.shadow_height == b.shadow_height &&
         a.max_observable == b.max_observable && a.m_occupied == b.m_occupied && a.m_free == b.m_free &&
         a.m_unknown == b.m_unknown;
}

PointCloud to_grid_frame(const PointCloud& cloud, const Pose& sensor_pose) {
  return transform_cloud(cloud, compose(grid_pose_for(sensor_pose).inverse(), sensor_pose));
}

std::vector<RayCell> traverse_ray(const GridSpec& spec, const Eigen::Vector3d& origin, const Eigen::Vector3d& end) {
  std::vector<RayCell> cells;
  for_each_transmission(spec, origin, end, [&](CellIndex c, double z) { cells.push_back({c, z}); });
  return cells;
}

double false_negative_prob(double distance_ratio, double height_ratio, double p_fn_max) {
  const double rx = std::clamp(distance_ratio, 0.0, 1.0);
  const double rz = std::clamp(height_ratio, 0.0, 1.0);
  return 1.0 - (1.0 - rx) * rz * (1.0 - p_fn_max);
}

CellEvidence sensor_bba(double transmissions, double reflections, double p_fn, double p_fp) {
  if (transmissions < 0.0 || reflections < 0.0) {
    throw std::invalid_argument("transmission and reflection counts must be non-negative");
  }
  if (!(p_fn >= 0.0 && p_fn <= 1.0) || !(p_fp >= 0.0 && p_fp <= 1.0)) {
    throw std::invalid_argument("sensor model probabilities must lie in [0,1]");
  }
  const double fn_m = std::pow(p_fn, transmissions);
  const double fp_n = std::pow(p_fp, reflections);
  const double occupied = fn_m * (1.0 - fp_n);
  const double free = fp_n * (1.0 - fn_m);
  return {occupied, free, std::max(0.0, 1.0 - occupied - free)};
}

FrameRaster rasterize_frame(const PointCloud& cloud, const Pose& pose, const GroundSurface& ground,
                            const GridSpec& spec, const SensorModelConfig& cfg, double ground_threshold) {
  cfg.validate();
  const Pose grid_pose = grid_pose_for(pose);
  FrameRaster r = FrameRaster::unknown(spec, grid_pose, pose);
  const std::size_t count = spec.cell_count();

  const Pose sensor_to_grid = compose(grid_pose.inverse(), pose);
  const Eigen::Matrix3d rot = sensor_to_grid.rotation.toRotationMatrix();
  const Eigen::Vector3d origin = sensor_to_grid.apply(cloud.sensor_origin);

  std::vector<double> ground_at(count);
  for (int j = 0; j < spec.height; ++j) {
    for (int i = 0; i < spec.width; ++i) {
      const Point2 c = cell_center(spec, i, j);
      ground_at[spec.index(i, j)] = ground.eval(c.x, c.y);
    }
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> shadow(count, kInf);
  std::vector<double> max_obs(count, -kInf);
  std::vector<double> max_det(count, -kInf);
  std::vector<double> energy(count, 0.0);
  std::vector<std::uint32_t> m(count, 0);
  std::vector<std::uint32_t> n(count, 0);

  for (const auto& pt : cloud.points) {
    const Eigen::Vector3d p = rot * Eigen::Vector3d(pt.x, pt.y, pt.z) + sensor_to_grid.translation;
    const double above = p.z() - ground.eval(p.x(), p.y());
    if (std::abs(above) > ground_threshold) {
      if (const auto c = world_to_cell(spec, p.x(), p.y())) {
        const std::size_t idx = spec.index(c->i, c->j);
        ++n[idx];
        energy[idx] += pt.intensity;
        max_det[idx] = std::max(max_det[idx], above);
      }
    }
    for_each_transmission(spec, origin, p, [&](CellIndex c, double z) {
      const std::size_t idx = spec.index(c.i, c.j);
      const double h = z - ground_at[idx];
      ++m[idx];
      if (h < shadow[idx]) shadow[idx] = h;
      if (h > max_obs[idx]) max_obs[idx] = h;
    });
  }

  for (int j = 0; j < spec.height; ++j) {
    for (int i = 0; i < spec.width; ++i) {
      const std::size_t idx = spec.index(i, j);
      double dz = 0.0;
      if (m[idx] > 0) {
        const double lo = std::clamp(shadow[idx], 0.0, cfg.relevant_height);
        const double hi = std::clamp(max_obs[idx], 0.0, cfg.relevant_height);
        r.shadow_height[idx] = static_cast<float>(lo);
        r.max_observable[idx] = static_cast<float>(hi);
        dz = hi - lo;
      }
      if (n[idx] > 0) {
        r.reflected_energy[idx] = static_cast<float>(energy[idx] / n[idx]);
        r.height[idx] = static_cast<float>(max_det[idx]);
      }
      r.transmissions[idx] = static_cast<float>(m[idx]);
      r.reflections[idx] = static_cast<float>(n[idx]);
      r.observations[idx] = (m[idx] > 0 || n[idx] > 0) ? 1.0f : 0.0f;

      const Point2 c = cell_center(spec, i, j);
      const double dist = std::hypot(c.x - origin.x(), c.y - origin.y());
      const double p_fn = false_negative_prob(dist / cfg.max_range, dz / cfg.relevant_height, cfg.p_fn_max);
      const CellEvidence e = sensor_bba(m[idx], n[idx], p_fn, cfg.p_fp);
      r.m_occupied[idx] = static_cast<float>(e.occupied);
      r.m_free[idx] = static_cast<float>(e.free);
      r.m_unknown[idx] = static_cast<float>(e.unknown);
    }
  }
  return r;
}

}  // namespace evigrid
