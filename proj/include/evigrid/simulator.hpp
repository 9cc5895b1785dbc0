#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "evigrid/grid.hpp"

namespace evigrid {

struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(double x, double y) const { return x >= min_x && x <= max_x && y >= min_y && y <= max_y; }
};

/// Axis-aligned box standing on the ground. `extent` holds full side lengths;
/// moving boxes translate with constant planar velocity.
struct Box {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d extent = Eigen::Vector2d::Ones();
  double height = 1.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();

  Eigen::Vector2d center_at(double t) const { return center + velocity * t; }
};

/// z = a x + b y + c
struct GroundPlane {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double z(double x, double y) const { return a * x + b * y + c; }
};

/// Constant-velocity ego path sampled once per frame period.
struct EgoTrajectory {
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double frame_period = 0.5;
  double start_time = 0.0;
};

struct Scene {
  std::string name;
  std::vector<Box> static_boxes;
  std::vector<Box> moving_boxes;
  GroundPlane ground;
  Rect bounds;
  EgoTrajectory ego;

  double frame_time(int frame) const { return ego.start_time + frame * ego.frame_period; }
  /// Sensor pose of frame `frame`, `sensor_height` above the ground, heading
  /// along the ego velocity (yaw 0 when stationary).
  Pose sensor_pose(int frame, double sensor_height) const;
  /// Throws std::invalid_argument on non-positive extents or boxes leaving
  /// the bounds within [t0, t1].
  void validate(double t0, double t1) const;

  friend bool operator==(const Scene&, const Scene&);
};

struct ScanConfig {
  int azimuth_count = 720;
  int elevation_count = 16;
  double min_elevation_deg = -15.0;
  double max_elevation_deg = 10.0;
  double max_range = 70.0;
  double sensor_height = 1.8;
  double range_noise = 0.01;  // sigma, metres along the ray
  double timestamp = 0.0;     // scene time at which boxes are sampled

  void validate() const;
};

/// First hit of every ray against the ground plane and the boxes at
/// cfg.timestamp, perturbed along the ray by seeded Gaussian noise. Points are
/// in the sensor frame; misses and hits beyond max_range produce no point.
/// Intensity is 1.0 for boxes and 0.2 for ground.
PointCloud simulate_scan(const Scene& scene, const Pose& sensor_pose, const ScanConfig& cfg);

enum class CellLabel : std::uint8_t { kUnknown = 0, kFree = 1, kOccupied = 2, kDynamic = 3 };

/// Ground-truth label of every cell of `spec` laid out in `grid_pose`, judged
/// at cell centres over the time window [t0, t1]: occupied when covered by a
/// static box (or by a moving box for the whole window), dynamic when covered
/// by a moving box for part of the window, free otherwise inside the bounds,
/// unknown outside.
std::vector<CellLabel> ground_truth_labels(const Scene& scene, const GridSpec& spec, const Pose& grid_pose,
                                           double t0, double t1);

/// Single-layer map named "label" holding the numeric CellLabel codes.
MultiLayerGridMap labels_to_map(const GridSpec& spec, const std::vector<CellLabel>& labels);

/// One of "static_street", "crossing_pedestrian", "parking_row". Throws
/// std::invalid_argument for unknown names.
Scene preset_scene(std::string_view name);
std::vector<std::string> preset_names();

std::string scene_to_json(const Scene& scene);
/// Throws evigrid::Error on malformed input.
Scene scene_from_json(std::string_view text);

}  // namespace evigrid
