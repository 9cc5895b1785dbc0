#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evigrid/fusion.hpp"
#include "evigrid/grid.hpp"
#include "evigrid/ground.hpp"
#include "evigrid/rasterizer.hpp"
#include "evigrid/render.hpp"
#include "evigrid/simulator.hpp"

namespace evigrid {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct FusionConfig {
  double radius = 40.0;  // metres around the reference sensor position
  int k = 5;             // window half-width in frames: [ref - k, ref + k]
};

struct RenderConfig {
  Palette palette = Palette::kGray;
  std::optional<double> range_min;
  std::optional<double> range_max;
};

struct PipelineConfig {
  GridSpec grid;
  SensorModelConfig sensor;
  GroundFitConfig ground;
  FusionConfig fusion;
  RenderConfig render;
  ScanConfig scan;

  /// Throws std::invalid_argument on any violated constituent invariant.
  void validate() const;

  /// Missing keys keep their defaults; unknown keys and wrong types throw ConfigError.
  static PipelineConfig from_json(std::string_view text);
  std::string to_json() const;
};

PipelineConfig load_config(const std::optional<std::string>& path);

/// Ground surface of a grid-frame cloud over the grid extent. Falls back to a
/// flat surface (at the 5th percentile of z, or 0 for an empty cloud) when
/// the cloud is too sparse to fit.
GroundSurface estimate_ground(const PointCloud& grid_cloud, const GridSpec& spec, const GroundFitConfig& cfg);

/// Ground fit plus rasterization of one sensor-frame scan taken at `pose`.
FrameRaster map_frame(const PointCloud& cloud, const Pose& pose, const PipelineConfig& cfg);

/// map_frame over many scans, one scan per task.
std::vector<FrameRaster> map_frames(const std::vector<PointCloud>& clouds, const std::vector<Pose>& poses,
                                    const PipelineConfig& cfg, std::size_t workers = 0);

/// Indices [ref - k, ref + k] clipped to [0, count).
std::vector<std::size_t> window_indices(std::size_t count, std::size_t reference, int k);

/// Index of the pose whose timestamp is closest to `timestamp` (first on ties).
std::size_t nearest_pose(const std::vector<Pose>& poses, double timestamp);

/// Target map anchored at `reference_pose`. The window holds the frames within
/// k of the frame nearest in time to the reference, restricted to the fusion
/// radius. Throws EmptyWindowError when nothing qualifies.
MultiLayerGridMap fuse_frames(const std::vector<FrameRaster>& frames, const Pose& reference_pose,
                              const PipelineConfig& cfg, std::size_t workers = 0);

}  // namespace evigrid
