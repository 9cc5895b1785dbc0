#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "evigrid/grid.hpp"
#include "evigrid/rasterizer.hpp"

namespace evigrid {

class EmptyWindowError : public Error {
 public:
  using Error::Error;
};

/// Fused belief triple of one cell. `unknown` carries both the vacuous mass
/// and the conflicting (dynamic) observation sequences.
struct BeliefTriple {
  double occupied = 0.0;
  double free = 0.0;
  double unknown = 1.0;
};

/// Per-cell fused beliefs of a whole grid.
struct FusedBeliefs {
  GridSpec spec;
  std::vector<float> occupied;
  std::vector<float> free;
  std::vector<float> unknown;

  /// Reads bel_occupied / bel_free / bel_unknown from a map.
  static FusedBeliefs from_map(const MultiLayerGridMap& map);
};

inline constexpr double kSigmaMin = 1e-4;

/// Height of an obstacle above ground as a normal distribution.
struct HeightEstimate {
  double mu = 0.0;
  double sigma_sq = kSigmaMin;
};

/// mu = (max_observable + max_detected) / 2, sigma_sq = max_observable - max_detected.
/// sigma_sq is left unclamped here; fuse_height clamps it.
inline HeightEstimate height_estimate(double max_observable, double max_detected) {
  return {0.5 * (max_observable + max_detected), max_observable - max_detected};
}

struct FusionWindow {
  std::vector<FrameRaster> frames;  // each carries its sensor and grid poses
  Pose reference_pose;              // sensor pose anchoring the target grid
  double radius = 40.0;
};

/// Maps reference-grid cells to the nearest cell of a source grid.
class CellMapping {
 public:
  CellMapping(const GridSpec& ref_spec, const Pose& ref_grid_pose, const GridSpec& src_spec,
              const Pose& src_grid_pose);

  /// Linear index into the source grid, or empty if the reference cell centre
  /// falls outside it.
  std::optional<std::size_t> source_index(int i, int j) const;

 private:
  GridSpec ref_;
  GridSpec src_;
  Eigen::Matrix2d rot_;
  Eigen::Vector2d offset_;
};

/// Nearest-neighbour resampling of `raster` onto `ref_spec` laid out in the
/// grid frame of `ref_pose` (a sensor pose). Cells falling outside the source
/// grid become all-unknown with zero counts.
FrameRaster resample_to_reference(const FrameRaster& raster, const GridSpec& ref_spec, const Pose& ref_pose);

/// Temporal combination of independent per-frame masses:
///   occupied = prod(m_o + m_u) - prod(m_u)
///   free     = prod(m_f + m_u) - prod(m_u)
///   unknown  = 1 - occupied - free
/// Throws std::invalid_argument on an empty sequence.
BeliefTriple fuse_cell_evidence(std::span<const CellEvidence> masses);

/// Same quantity by enumerating all 3^N per-frame hypothesis tuples and
/// summing their product masses into the free / occupied / dynamic classes.
/// Throws std::invalid_argument for N == 0 or N > 12.
BeliefTriple fuse_cell_evidence_bruteforce(std::span<const CellEvidence> masses);

/// Product of normal densities: precision = sum 1/sigma_i^2,
/// mu = sigma^2 * sum mu_i / sigma_i^2, each sigma_i^2 clamped to sigma_min first.
HeightEstimate fuse_height(std::span<const HeightEstimate> estimates, double sigma_min = kSigmaMin);

/// Indices of frames whose sensor lies within the window radius (horizontal
/// distance) of the reference pose.
std::vector<std::size_t> qualifying_frames(const FusionWindow& window);

/// Target-schema map of the window on `ref_spec` in the reference grid frame.
/// Throws EmptyWindowError when no frame qualifies. `workers` = 0 resolves the
/// count from EVIGRID_THREADS.
MultiLayerGridMap build_target_map(const FusionWindow& window, const GridSpec& ref_spec, std::size_t workers = 0);

}  // namespace evigrid
