#include "evigrid/simulator.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <random>

#include <json.hpp>

namespace evigrid {

Pose Scene::sensor_pose(int frame, double sensor_height) const {
  const double dt = frame * ego.frame_period;
  const Eigen::Vector2d xy = ego.start + ego.velocity * dt;
  const double yaw = ego.velocity.squaredNorm() > 0.0 ? std::atan2(ego.velocity.y(), ego.velocity.x()) : 0.0;
  return Pose::from_xyz_yaw(xy.x(), xy.y(), ground.z(xy.x(), xy.y()) + sensor_height, yaw, frame_time(frame));
}

void Scene::validate(double t0, double t1) const {
  auto check = [&](const Box& b, bool moving) {
    if (!(b.extent.x() > 0.0 && b.extent.y() > 0.0 && b.height > 0.0)) {
      throw std::invalid_argument("scene '" + name + "': box extents must be positive");
    }
    for (const double t : {t0, t1}) {
      const Eigen::Vector2d c = moving ? b.center_at(t) : b.center;
      if (!bounds.contains(c.x() - 0.5 * b.extent.x(), c.y() - 0.5 * b.extent.y()) ||
          !bounds.contains(c.x() + 0.5 * b.extent.x(), c.y() + 0.5 * b.extent.y())) {
        throw std::invalid_argument("scene '" + name + "': box leaves the scene bounds");
      }
    }
  };
  if (!(bounds.max_x > bounds.min_x && bounds.max_y > bounds.min_y)) {
    throw std::invalid_argument("scene '" + name + "': empty bounds");
  }
  if (!(ego.frame_period > 0.0)) {
    throw std::invalid_argument("scene '" + name + "': frame period must be positive");
  }
  for (const auto& b : static_boxes) check(b, false);
  for (const auto& b : moving_boxes) check(b, true);
}

namespace {

bool same_box(const Box& a, const Box& b) {
  return a.center == b.center && a.extent == b.extent && a.height == b.height && a.velocity == b.velocity;
}

bool same_boxes(const std::vector<Box>& a, const std::vector<Box>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), same_box);
}

}  // namespace

bool operator==(const Scene& a, const Scene& b) {
  return a.name == b.name && same_boxes(a.static_boxes, b.static_boxes) &&
         same_boxes(a.moving_boxes, b.moving_boxes) && a.ground.a == b.ground.a && a.ground.b == b.ground.b &&
         a.ground.c == b.ground.c && a.bounds.min_x == b.bounds.min_x && a.bounds.min_y == b.bounds.min_y &&
         a.bounds.max_x == b.bounds.max_x && a.bounds.max_y == b.bounds.max_y && a.ego.start == b.ego.start &&
         a.ego.velocity == b.ego.velocity && a.ego.frame_period == b.ego.frame_period &&
         a.ego.start_time == b.ego.start_time;
}

void ScanConfig::validate() const {
  if (azimuth_count < 1 || elevation_count < 1) {
    throw std::invalid_argument("scan needs at least one azimuth and one elevation");
  }
  if (!(max_range > 0.0) || !(range_noise >= 0.0)) {
    throw std::invalid_argument("scan range must be positive and noise non-negative");
  }
}

namespace {

// Entry distance of the ray into the box, if any, for a ray starting outside.
bool intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                   const Eigen::Vector3d& hi, double& t_hit) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_far < t_near || !(t_near > 0.0)) return false;
  t_hit = t_near;
  return true;
}

std::uint64_t noise_seed(const Scene& scene, double timestamp) {
  // FNV-1a over the scene name and the timestamp bits
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < len; ++k) {
      h ^= bytes[k];
      h *= 1099511628211ull;
    }
  };
  mix(scene.name.data(), scene.name.size());
  std::uint64_t bits = 0;
  std::memcpy(&bits, &timestamp, sizeof bits);
  mix(&bits, sizeof bits);
  return h;
}

}  // namespace

PointCloud simulate_scan(const Scene& scene, const Pose& sensor_pose, const ScanConfig& cfg) {
  cfg.validate();
  struct SolidBox {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
  };
  std::vector<SolidBox> solids;
  auto add_solid = [&](const Box& b, const Eigen::Vector2d& c) {
    const double base = scene.ground.z(c.x(), c.y());
    solids.push_back({Eigen::Vector3d(c.x() - 0.5 * b.extent.x(), c.y() - 0.5 * b.extent.y(), base),
                      Eigen::Vector3d(c.x() + 0.5 * b.extent.x(), c.y() + 0.5 * b.extent.y(), base + b.height)});
  };
  for (const auto& b : scene.static_boxes) add_solid(b, b.center);
  for (const auto& b : scene.moving_boxes) add_solid(b, b.center_at(cfg.timestamp));

  std::mt19937_64 rng(noise_seed(scene, cfg.timestamp));
  std::normal_distribution<double> noise(0.0, 1.0);

  const Eigen::Matrix3d rot = sensor_pose.rotation.toRotationMatrix();
  const Eigen::Vector3d o = sensor_pose.translation;
  const auto& g = scene.ground;

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(cfg.azimuth_count) * cfg.elevation_count);
  constexpr double kDeg = std::numbers::pi / 180.0;
  for (int e = 0; e < cfg.elevation_count; ++e) {
    const double elev =
        cfg.elevation_count == 1
            ? cfg.min_elevation_deg * kDeg
            : (cfg.min_elevation_deg + (cfg.max_elevation_deg - cfg.min_elevation_deg) * e / (cfg.elevation_count - 1)) *
                  kDeg;
    for (int a = 0; a < cfg.azimuth_count; ++a) {
      const double az = 2.0 * std::numbers::pi * a / cfg.azimuth_count;
      const Eigen::Vector3d dir_s(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
      const Eigen::Vector3d d = rot * dir_s;

      double best = std::numeric_limits<double>::infinity();
      double intensity = 0.0;
      const double denom = d.z() - g.a * d.x() - g.b * d.y();
      if (denom < 0.0) {
        const double t = (g.a * o.x() + g.b * o.y() + g.c - o.z()) / denom;
        if (t > 0.0) {
          best = t;
          intensity = 0.2;
        }
      }
      for (const auto& s : solids) {
        double t = 0.0;
        if (intersect_box(o, d, s.lo, s.hi, t) && t < best) {
          best = t;
          intensity = 1.0;
        }
      }
      if (!(best <= cfg.max_range)) continue;
      const double range = cfg.range_noise > 0.0 ? best + cfg.range_noise * noise(rng) : best;
      const Eigen::Vector3d p = range * dir_s;
      cloud.points.push_back({p.x(), p.y(), p.z(), intensity});
    }
  }
  return cloud;
}

namespace {

// Interval of t during which coordinate p lies within half_extent of c0 + v t.
std::pair<double, double> coverage_interval(double p, double c0, double v, double half_extent) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (v == 0.0) {
    return std::abs(p - c0) <= half_extent ? std::pair{-kInf, kInf} : std::pair{kInf, -kInf};
  }
  double a = (p - c0 - half_extent) / v;
  double b = (p - c0 + half_extent) / v;
  if (a > b) std::swap(a, b);
  return {a, b};
}

}  // namespace

std::vector<CellLabel> ground_truth_labels(const Scene& scene, const GridSpec& spec, const Pose& grid_pose, double t0,
                                           double t1) {
  spec.validate();
  if (t1 < t0) std::swap(t0, t1);
  std::vector<CellLabel> labels(spec.cell_count(), CellLabel::kUnknown);
  for (int j = 0; j < spec.height; ++j) {
    for (int i = 0; i < spec.width; ++i) {
      const Point2 c = cell_center(spec, i, j);
      const Eigen::Vector3d w = grid_pose.apply(Eigen::Vector3d(c.x, c.y, 0.0));
      CellLabel label = CellLabel::kUnknown;
      if (scene.bounds.contains(w.x(), w.y())) {
        label = CellLabel::kFree;
        for (const auto& b : scene.static_boxes) {
          if (std::abs(w.x() - b.center.x()) <= 0.5 * b.extent.x() &&
              std::abs(w.y() - b.center.y()) <= 0.5 * b.extent.y()) {
            label = CellLabel::kOccupied;
            break;
          }
        }
        for (std::size_t k = 0; k < scene.moving_boxes.size() && label != CellLabel::kOccupied; ++k) {
          const Box& b = scene.moving_boxes[k];
          const auto [ax, bx] = coverage_interval(w.x(), b.center.x(), b.velocity.x(), 0.5 * b.extent.x());
          const auto [ay, by] = coverage_interval(w.y(), b.center.y(), b.velocity.y(), 0.5 * b.extent.y());
          const double lo = std::max({ax, ay, t0});
          const double hi = std::min({bx, by, t1});
          if (lo > hi) continue;
          if (lo <= t0 && hi >= t1) {
            label = CellLabel::kOccupied;
          } else {
            label = CellLabel::kDynamic;
          }
        }
      }
      labels[spec.index(i, j)] = label;
    }
  }
  return labels;
}

MultiLayerGridMap labels_to_map(const GridSpec& spec, const std::vector<CellLabel>& labels) {
  MultiLayerGridMap map(spec);
  auto& values = map.add_layer("label").values;
  if (labels.size() != values.size()) throw std::invalid_argument("label count does not match grid");
  for (std::size_t k = 0; k < labels.size(); ++k) values[k] = static_cast<float>(labels[k]);
  return map;
}

// ---------------------------------------------------------------------------
// Presets. Box edges sit 0.03 m past a 0.15 m cell boundary on the low side
// and 0.12 m past it on the high side, so on grids aligned to multiples of
// 0.15 m every box covers the centres of exactly the cells it touches.

namespace {

constexpr double kCell = 0.15;

Box aligned_box(int i0, int i1, int j0, int j1, double height) {
  const double x0 = kCell * i0 + 0.03;
  const double x1 = kCell * i1 + 0.12;
  const double y0 = kCell * j0 + 0.03;
  const double y1 = kCell * j1 + 0.12;
  Box b;
  b.center = {0.5 * (x0 + x1), 0.5 * (y0 + y1)};
  b.extent = {x1 - x0, y1 - y0};
  b.height = height;
  return b;
}

Scene static_street() {
  Scene s;
  s.name = "static_street";
  s.bounds = {-45.0, -15.0, 75.0, 15.0};
  s.ego = {{0.0, 0.0}, {3.0, 0.0}, 0.5, 0.0};
  s.static_boxes = {
      aligned_box(40, 69, 20, 31, 1.5),     // parked car, left
      aligned_box(100, 129, -32, -21, 1.6),  // parked car, right
      aligned_box(160, 209, 22, 37, 3.0),    // truck
      aligned_box(50, 52, -14, -12, 2.5),    // pole
      aligned_box(-60, 199, 60, 66, 3.0),    // building front, left
      aligned_box(-60, 199, -67, -61, 3.0),  // building front, right
  };
  return s;
}

Scene crossing_pedestrian() {
  Scene s;
  s.name = "crossing_pedestrian";
  s.bounds = {-45.0, -15.0, 60.0, 15.0};
  s.ego = {{0.0, 0.0}, {1.5, 0.0}, 0.5, 0.0};
  s.static_boxes = {
      aligned_box(100, 129, 20, 31, 1.5),
      aligned_box(-60, 199, 60, 66, 3.0),
      aligned_box(-60, 199, -67, -61, 3.0),
  };
  Box pedestrian;
  pedestrian.center = {12.28, -3.2};
  pedestrian.extent = {0.5, 0.5};
  pedestrian.height = 1.7;
  pedestrian.velocity = {0.0, 1.4};
  s.moving_boxes = {pedestrian};
  return s;
}

Scene parking_row() {
  Scene s;
  s.name = "parking_row";
  s.bounds = {-45.0, -15.0, 75.0, 15.0};
  s.ego = {{0.0, 0.0}, {3.0, 0.0}, 0.5, 0.0};
  for (int k = 0; k < 6; ++k) {
    const int i0 = -20 + k * 40;
    s.static_boxes.push_back(aligned_box(i0, i0 + 29, 24, 35, 1.5));
  }
  s.static_boxes.push_back(aligned_box(-60, 199, 60, 66, 3.0));
  Box oncoming;
  oncoming.center = {35.0, -3.5};
  oncoming.extent = {4.5, 1.8};
  oncoming.height = 1.5;
  oncoming.velocity = {-5.0, 0.0};
  s.moving_boxes = {oncoming};
  return s;
}

}  // namespace

std::vector<std::string> preset_names() { return {"static_street", "crossing_pedestrian", "parking_row"}; }

Scene preset_scene(std::string_view name) {
  if (name == "static_street") return static_street();
  if (name == "crossing_pedestrian") return crossing_pedestrian();
  if (name == "parking_row") return parking_row();
  throw std::invalid_argument("unknown scene preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json vec2(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

Eigen::Vector2d read_vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error("scene: expected a [x, y] pair");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json box_json(const Box& b, bool moving) {
  json j = {{"center", vec2(b.center)}, {"extent", vec2(b.extent)}, {"height", b.height}};
  if (moving) j["velocity"] = vec2(b.velocity);
  return j;
}

Box read_box(const json& j, bool moving) {
  Box b;
  b.center = read_vec2(j.at("center"));
  b.extent = read_vec2(j.at("extent"));
  b.height = j.at("height").get<double>();
  if (moving) b.velocity = read_vec2(j.at("velocity"));
  return b;
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  json j;
  j["name"] = scene.name;
  j["bounds"] = {scene.bounds.min_x, scene.bounds.min_y, scene.bounds.max_x, scene.bounds.max_y};
  j["ground"] = {scene.ground.a, scene.ground.b, scene.ground.c};
  j["ego"] = {{"start", vec2(scene.ego.start)},
              {"velocity", vec2(scene.ego.velocity)},
              {"frame_period", scene.ego.frame_period},
              {"start_time", scene.ego.start_time}};
  j["static_boxes"] = json::array();
  for (const auto& b : scene.static_boxes) j["static_boxes"].push_back(box_json(b, false));
  j["moving_boxes"] = json::array();
  for (const auto& b : scene.moving_boxes) j["moving_boxes"].push_back(box_json(b, true));
  return j.dump(2) + "\n";
}

Scene scene_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    Scene s;
    s.name = j.value("name", std::string("custom"));
    const auto& bounds = j.at("bounds");
    if (!bounds.is_array() || bounds.size() != 4) throw Error("scene: bounds must be [min_x, min_y, max_x, max_y]");
    s.bounds = {bounds.at(0).get<double>(), bounds.at(1).get<double>(), bounds.at(2).get<double>(),
                bounds.at(3).get<double>()};
    if (j.contains("ground")) {
      const auto& g = j.at("ground");
      if (!g.is_array() || g.size() != 3) throw Error("scene: ground must be [a, b, c]");
      s.ground = {g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<double>()};
    }
    if (j.contains("ego")) {
      const auto& e = j.at("ego");
      if (e.contains("start")) s.ego.start = read_vec2(e.at("start"));
      if (e.contains("velocity")) s.ego.velocity = read_vec2(e.at("velocity"));
      s.ego.frame_period = e.value("frame_period", s.ego.frame_period);
      s.ego.start_time = e.value("start_time", s.ego.start_time);
    }
    if (j.contains("static_boxes")) {
      for (const auto& b : j.at("static_boxes")) s.static_boxes.push_back(read_box(b, false));
    }
    if (j.contains("moving_boxes")) {
      for (const auto& b : j.at("moving_boxes")) s.moving_boxes.push_back(read_box(b, true));
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("scene: ") + e.what());
  }
}

}  // namespace evigrid
