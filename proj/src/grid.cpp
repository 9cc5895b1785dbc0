#include "evigrid/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <utility>

namespace evigrid {

void GridSpec::validate() const {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw std::invalid_argument("grid cell size must be positive");
  }
  if (width < 1 || height < 1) {
    throw std::invalid_argument("grid dimensions must be at least 1x1");
  }
  if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
    throw std::invalid_argument("grid origin must be finite");
  }
}

std::optional<CellIndex> world_to_cell(const GridSpec& spec, double x, double y) {
  const double fx = std::floor((x - spec.origin_x) / spec.cell_size);
  const double fy = std::floor((y - spec.origin_y) / spec.cell_size);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < spec.width && fy < spec.height)) {
    return std::nullopt;
  }
  return CellIndex{static_cast<int>(fx), static_cast<int>(fy)};
}

Point2 cell_center(const GridSpec& spec, int i, int j) {
  if (!spec.contains(i, j)) {
    throw std::out_of_range("cell index outside grid");
  }
  return {spec.origin_x + (i + 0.5) * spec.cell_size, spec.origin_y + (j + 0.5) * spec.cell_size};
}

std::string_view schema_name(Schema schema) {
  switch (schema) {
    case Schema::kInput:
      return "input";
    case Schema::kTarget:
      return "target";
    case Schema::kCustom:
      break;
  }
  return "custom";
}

MultiLayerGridMap::MultiLayerGridMap(GridSpec spec) : spec_(spec) { spec_.validate(); }

Layer& MultiLayerGridMap::add_layer(std::string_view name, float fill) {
  return add_layer(Layer{std::string(name), std::vector<float>(spec_.cell_count(), fill)});
}

Layer& MultiLayerGridMap::add_layer(Layer layer) {
  if (layer.name.empty()) {
    throw std::invalid_argument("layer name must not be empty");
  }
  if (has_layer(layer.name)) {
    throw std::invalid_argument("duplicate layer name: " + layer.name);
  }
  if (layer.values.size() != spec_.cell_count()) {
    throw std::invalid_argument("layer '" + layer.name + "' has " + std::to_string(layer.values.size()) +
                                " values, grid has " + std::to_string(spec_.cell_count()) + " cells");
  }
  layers_.push_back(std::move(layer));
  return layers_.back();
}

bool MultiLayerGridMap::has_layer(std::string_view name) const {
  return std::any_of(layers_.begin(), layers_.end(), [&](const Layer& l) { return l.name == name; });
}

const Layer& MultiLayerGridMap::layer(std::string_view name) const {
  for (const auto& l : layers_) {
    if (l.name == name) return l;
  }
  throw std::out_of_range("no layer named '" + std::string(name) + "'");
}

Layer& MultiLayerGridMap::layer(std::string_view name) {
  return const_cast<Layer&>(std::as_const(*this).layer(name));
}

bool MultiLayerGridMap::satisfies(Schema schema) const {
  auto has_all = [this](const auto& names) {
    return std::all_of(names.begin(), names.end(), [this](std::string_view n) { return has_layer(n); });
  };
  switch (schema) {
    case Schema::kInput:
      return has_all(LayerSchema::kInput);
    case Schema::kTarget:
      return has_all(LayerSchema::kTarget);
    case Schema::kCustom:
      return true;
  }
  return false;
}

Schema MultiLayerGridMap::schema() const {
  if (satisfies(Schema::kTarget)) return Schema::kTarget;
  if (satisfies(Schema::kInput)) return Schema::kInput;
  return Schema::kCustom;
}

// ---------------------------------------------------------------------------

Pose Pose::from_xyz_yaw(double x, double y, double z, double yaw, double timestamp) {
  Pose p;
  p.timestamp = timestamp;
  p.translation = Eigen::Vector3d(x, y, z);
  p.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()));
  return p;
}

void Pose::validate() const {
  if (std::abs(rotation.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("pose quaternion is not unit length");
  }
  if (!translation.allFinite() || !std::isfinite(timestamp)) {
    throw std::invalid_argument("pose contains non-finite values");
  }
}

Pose Pose::inverse() const {
  Pose inv;
  inv.timestamp = timestamp;
  inv.rotation = rotation.conjugate();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

double Pose::yaw() const {
  const Eigen::Vector3d fwd = rotation * Eigen::Vector3d::UnitX();
  return std::atan2(fwd.y(), fwd.x());
}

Pose Pose::planar() const {
  return from_xyz_yaw(translation.x(), translation.y(), 0.0, yaw(), timestamp);
}

Eigen::Vector3d transform_point(const Pose& pose, const Eigen::Vector3d& p) { return pose.apply(p); }

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.timestamp = b.timestamp;
  out.rotation = (a.rotation * b.rotation).normalized();
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
  PointCloud out;
  out.sensor_origin = pose.apply(cloud.sensor_origin);
  out.points.reserve(cloud.points.size());
  const Eigen::Matrix3d r = pose.rotation.toRotationMatrix();
  for (const auto& p : cloud.points) {
    const Eigen::Vector3d w = r * Eigen::Vector3d(p.x, p.y, p.z) + pose.translation;
    out.points.push_back({w.x(), w.y(), w.z(), p.intensity});
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void default_evidence_check([[maybe_unused]] const CellEvidence& e) {
  assert(e.valid() && "CellEvidence masses must lie in [0,1] and sum to 1");
}

std::atomic<EvidenceCheckHook> g_evidence_hook{&default_evidence_check};

}  // namespace

CellEvidence::CellEvidence(double occupied_mass, double free_mass, double unknown_mass)
    : occupied(occupied_mass), free(free_mass), unknown(unknown_mass) {
  if (auto hook = g_evidence_hook.load(std::memory_order_relaxed)) hook(*this);
}

bool CellEvidence::valid(double tol) const {
  auto in_unit = [tol](double m) { return m >= -tol && m <= 1.0 + tol; };
  return in_unit(occupied) && in_unit(free) && in_unit(unknown) &&
         std::abs(occupied + free + unknown - 1.0) <= tol;
}

EvidenceCheckHook set_evidence_check_hook(EvidenceCheckHook hook) { return g_evidence_hook.exchange(hook); }

}  // namespace evigrid
