#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evigrid {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CellIndex {
  int i = 0;  // x-column
  int j = 0;  // y-row
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Geometry of an axis-aligned top-view grid. Cell (0,0) has its lower-left
/// corner at (origin_x, origin_y); storage is row-major with row 0 at minimum y.
struct GridSpec {
  double cell_size = 0.15;
  int width = 536;
  int height = 536;
  double origin_x = -40.2;
  double origin_y = -40.2;

  /// 536x536 cells of 0.15 m centred on the grid frame origin (covers a 40 m disc).
  static GridSpec reference_default() { return GridSpec{}; }

  void validate() const;
  std::size_t cell_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool contains(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(width) + static_cast<std::size_t>(i);
  }
  double max_x() const { return origin_x + cell_size * width; }
  double max_y() const { return origin_y + cell_size * height; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Cell containing world point (x, y); empty outside [origin, max). Points on
/// the max boundary are outside.
std::optional<CellIndex> world_to_cell(const GridSpec& spec, double x, double y);

/// Centre of cell (i, j). Throws std::out_of_range for indices outside the grid.
Point2 cell_center(const GridSpec& spec, int i, int j);

// ---------------------------------------------------------------------------
// Layers

namespace layer_names {
inline constexpr std::string_view kReflections = "reflections";
inline constexpr std::string_view kObservations = "observations";
inline constexpr std::string_view kReflectedEnergy = "reflected_energy";
inline constexpr std::string_view kHeight = "height";
inline constexpr std::string_view kShadowHeight = "shadow_height";
inline constexpr std::string_view kObservationHeight = "observation_height";
inline constexpr std::string_view kTransmissions = "transmissions";
inline constexpr std::string_view kBelFree = "bel_free";
inline constexpr std::string_view kBelOccupied = "bel_occupied";
inline constexpr std::string_view kBelUnknown = "bel_unknown";
}  // namespace layer_names

enum class Schema { kInput, kTarget, kCustom };

/// Layer inventories of single-frame inputs and fused targets. Height layers
/// are relative to the estimated ground surface.
struct LayerSchema {
  static constexpr std::array<std::string_view, 5> kInput = {
      layer_names::kReflections, layer_names::kObservations, layer_names::kReflectedEnergy,
      layer_names::kHeight, layer_names::kShadowHeight};
  static constexpr std::array<std::string_view, 7> kTarget = {
      layer_names::kReflections, layer_names::kObservationHeight, layer_names::kReflectedEnergy,
      layer_names::kHeight, layer_names::kBelFree, layer_names::kBelOccupied, layer_names::kBelUnknown};
  static constexpr std::array<std::string_view, 3> kEvidence = {
      layer_names::kBelFree, layer_names::kBelOccupied, layer_names::kBelUnknown};
};

std::string_view schema_name(Schema schema);

struct Layer {
  std::string name;
  std::vector<float> values;

  friend bool operator==(const Layer&, const Layer&) = default;
};

class MultiLayerGridMap {
 public:
  MultiLayerGridMap() = default;
  explicit MultiLayerGridMap(GridSpec spec);

  const GridSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Appends a layer filled with `fill`. Throws on duplicate names.
  Layer& add_layer(std::string_view name, float fill = 0.0f);
  /// Appends a layer; throws on duplicate names or a value count mismatch.
  Layer& add_layer(Layer layer);

  bool has_layer(std::string_view name) const;
  const Layer& layer(std::string_view name) const;
  Layer& layer(std::string_view name);

  /// Most specific schema whose layer inventory this map contains.
  Schema schema() const;
  bool satisfies(Schema schema) const;

  friend bool operator==(const MultiLayerGridMap&, const MultiLayerGridMap&) = default;

 private:
  GridSpec spec_;
  std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------
// Poses and point clouds

/// Rigid sensor-to-world transform at a timestamp.
struct Pose {
  double timestamp = 0.0;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  static Pose from_xyz_yaw(double x, double y, double z, double yaw, double timestamp = 0.0);

  /// Throws std::invalid_argument unless the quaternion norm is within 1e-9 of 1.
  void validate() const;
  Pose inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  double yaw() const;
  /// Gravity-aligned projection: keeps x, y and yaw; z = 0, no roll or pitch.
  Pose planar() const;
};

Eigen::Vector3d transform_point(const Pose& pose, const Eigen::Vector3d& p);
/// a * b maps b's frame into a's parent frame.
Pose compose(const Pose& a, const Pose& b);

struct LidarPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
};

struct PointCloud {
  std::vector<LidarPoint> points;
  Eigen::Vector3d sensor_origin = Eigen::Vector3d::Zero();
};

/// Applies `pose` to every point and to the sensor origin.
PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose);

// ---------------------------------------------------------------------------
// Evidence

/// Mass triple over {occupied}, {free} and the whole frame (unknown).
struct CellEvidence {
  double occupied = 0.0;
  double free = 0.0;
  double unknown = 1.0;

  CellEvidence() = default;
  CellEvidence(double occupied_mass, double free_mass, double unknown_mass);

  bool valid(double tol = 1e-9) const;
};

using EvidenceCheckHook = void (*)(const CellEvidence&);

/// Installs the hook run on every constructed CellEvidence and returns the
/// previous one. The default hook asserts validity in debug builds.
EvidenceCheckHook set_evidence_check_hook(EvidenceCheckHook hook);

}  // namespace evigrid
