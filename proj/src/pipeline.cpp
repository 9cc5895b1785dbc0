#include "evigrid/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "evigrid/io.hpp"
#include "evigrid/parallel.hpp"

namespace evigrid {

void PipelineConfig::validate() const {
  grid.validate();
  sensor.validate();
  ground.validate();
  scan.validate();
  if (!(fusion.radius > 0.0)) throw std::invalid_argument("fusion radius must be positive");
  if (fusion.k < 0) throw std::invalid_argument("fusion window half-width k must be non-negative");
  if (render.range_min.has_value() != render.range_max.has_value()) {
    throw std::invalid_argument("render range needs both range_min and range_max");
  }
  if (render.range_min && !(*render.range_max > *render.range_min)) {
    throw std::invalid_argument("render range_max must exceed range_min");
  }
}

namespace {

using nlohmann::json;

// Reads the keys of one section into fields; rejects keys it does not know.
class Section {
 public:
  Section(const json& root, const char* name) : name_(name) {
    if (!root.contains(name)) return;
    node_ = &root.at(name);
    if (!node_->is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  }

  template <class T>
  Section& field(const char* key, T& out) {
    known_.push_back(key);
    if (node_ && node_->contains(key)) {
      try {
        out = node_->at(key).get<T>();
      } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + name_ + "." + key + "' has the wrong type");
      }
    }
    return *this;
  }

  Section& field(const char* key, std::optional<double>& out) {
    double v = 0.0;
    const bool present = node_ && node_->contains(key);
    field(key, v);
    if (present) out = v;
    return *this;
  }

  void done() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items()) {
      if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
        throw ConfigError(std::string("unknown config key '") + name_ + "." + key + "'");
      }
    }
  }

 private:
  const char* name_;
  const json* node_ = nullptr;
  std::vector<std::string> known_;
};

}  // namespace

PipelineConfig PipelineConfig::from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> sections = {"grid", "sensor", "ground", "fusion", "render", "scan"};
  for (const auto& [key, value] : root.items()) {
    if (std::find(sections.begin(), sections.end(), key) == sections.end()) {
      throw ConfigError("unknown config section '" + key + "'");
    }
  }

  PipelineConfig c;
  Section(root, "grid")
      .field("cell_size", c.grid.cell_size)
      .field("width", c.grid.width)
      .field("height", c.grid.height)
      .field("origin_x", c.grid.origin_x)
      .field("origin_y", c.grid.origin_y)
      .done();
  Section(root, "sensor")
      .field("p_fp", c.sensor.p_fp)
      .field("p_fn_max", c.sensor.p_fn_max)
      .field("max_range", c.sensor.max_range)
      .field("relevant_height", c.sensor.relevant_height)
      .done();
  Section(root, "ground")
      .field("knot_spacing", c.ground.knot_spacing)
      .field("tikhonov_lambda", c.ground.tikhonov_lambda)
      .field("classify_threshold", c.ground.classify_threshold)
      .field("refit_iterations", c.ground.refit_iterations)
      .field("initial_percentile", c.ground.initial_percentile)
      .field("seed_column", c.ground.seed_column)
      .done();
  Section(root, "fusion").field("radius", c.fusion.radius).field("k", c.fusion.k).done();

  std::string palette = std::string(palette_name(c.render.palette));
  std::optional<double> range_min;
  std::optional<double> range_max;
  Section(root, "render").field("palette", palette).field("range_min", range_min).field("range_max", range_max).done();
  try {
    c.render.palette = parse_palette(palette);
  } catch (const RenderError& e) {
    throw ConfigError(e.what());
  }
  c.render.range_min = range_min;
  c.render.range_max = range_max;

  Section(root, "scan")
      .field("azimuth_count", c.scan.azimuth_count)
      .field("elevation_count", c.scan.elevation_count)
      .field("min_elevation_deg", c.scan.min_elevation_deg)
      .field("max_elevation_deg", c.scan.max_elevation_deg)
      .field("max_range", c.scan.max_range)
      .field("sensor_height", c.scan.sensor_height)
      .field("range_noise", c.scan.range_noise)
      .done();

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string PipelineConfig::to_json() const {
  json j;
  j["grid"] = {{"cell_size", grid.cell_size},
               {"width", grid.width},
               {"height", grid.height},
               {"origin_x", grid.origin_x},
               {"origin_y", grid.origin_y}};
  j["sensor"] = {{"p_fp", sensor.p_fp},
                 {"p_fn_max", sensor.p_fn_max},
                 {"max_range", sensor.max_range},
                 {"relevant_height", sensor.relevant_height}};
  j["ground"] = {{"knot_spacing", ground.knot_spacing},
                 {"tikhonov_lambda", ground.tikhonov_lambda},
                 {"classify_threshold", ground.classify_threshold},
                 {"refit_iterations", ground.refit_iterations},
                 {"initial_percentile", ground.initial_percentile},
                 {"seed_column", ground.seed_column}};
  j["fusion"] = {{"radius", fusion.radius}, {"k", fusion.k}};
  j["render"] = {{"palette", palette_name(render.palette)}};
  if (render.range_min) j["render"]["range_min"] = *render.range_min;
  if (render.range_max) j["render"]["range_max"] = *render.range_max;
  j["scan"] = {{"azimuth_count", scan.azimuth_count},
               {"elevation_count", scan.elevation_count},
               {"min_elevation_deg", scan.min_elevation_deg},
               {"max_elevation_deg", scan.max_elevation_deg},
               {"max_range", scan.max_range},
               {"sensor_height", scan.sensor_height},
               {"range_noise", scan.range_noise}};
  return j.dump(2) + "\n";
}

PipelineConfig load_config(const std::optional<std::string>& path) {
  if (!path) return PipelineConfig{};
  return PipelineConfig::from_json(read_text_file(*path));
}

GroundSurface estimate_ground(const PointCloud& grid_cloud, const GridSpec& spec, const GroundFitConfig& cfg) {
  const FitDomain domain{spec.origin_x, spec.origin_y, spec.max_x(), spec.max_y()};
  PointCloud inside;
  inside.sensor_origin = grid_cloud.sensor_origin;
  for (const auto& p : grid_cloud.points) {
    if (p.x >= domain.min_x && p.x <= domain.max_x && p.y >= domain.min_y && p.y <= domain.max_y) {
      inside.points.push_back(p);
    }
  }
  try {
    return fit_ground(inside, cfg, domain);
  } catch (const GroundFitError&) {
    double level = 0.0;
    if (!inside.points.empty()) {
      std::vector<double> z;
      z.reserve(inside.points.size());
      for (const auto& p : inside.points) z.push_back(p.z);
      const auto nth = z.begin() + static_cast<std::ptrdiff_t>(0.05 * static_cast<double>(z.size() - 1));
      std::nth_element(z.begin(), nth, z.end());
      level = *nth;
    }
    return GroundSurface::flat(level, domain, cfg.knot_spacing);
  }
}

FrameRaster map_frame(const PointCloud& cloud, const Pose& pose, const PipelineConfig& cfg) {
  const PointCloud grid_cloud = to_grid_frame(cloud, pose);
  const GroundSurface ground = estimate_ground(grid_cloud, cfg.grid, cfg.ground);
  return rasterize_frame(cloud, pose, ground, cfg.grid, cfg.sensor, cfg.ground.classify_threshold);
}

std::vector<FrameRaster> map_frames(const std::vector<PointCloud>& clouds, const std::vector<Pose>& poses,
                                    const PipelineConfig& cfg, std::size_t workers) {
  if (clouds.size() != poses.size()) throw std::invalid_argument("need one pose per scan");
  std::vector<std::optional<FrameRaster>> slots(clouds.size());
  parallel_for(clouds.size(), resolve_worker_count(workers), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) slots[k] = map_frame(clouds[k], poses[k], cfg);
  });
  std::vector<FrameRaster> frames;
  frames.reserve(slots.size());
  for (auto& s : slots) frames.push_back(std::move(*s));
  return frames;
}

std::vector<std::size_t> window_indices(std::size_t count, std::size_t reference, int k) {
  std::vector<std::size_t> out;
  if (count == 0 || reference >= count) return out;
  const std::size_t lo = reference >= static_cast<std::size_t>(k) ? reference - k : 0;
  const std::size_t hi = std::min(count - 1, reference + static_cast<std::size_t>(k));
  for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
  return out;
}

std::size_t nearest_pose(const std::vector<Pose>& poses, double timestamp) {
  if (poses.empty()) throw std::invalid_argument("no poses");
  std::size_t best = 0;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (std::abs(poses[i].timestamp - timestamp) < std::abs(poses[best].timestamp - timestamp)) best = i;
  }
  return best;
}

MultiLayerGridMap fuse_frames(const std::vector<FrameRaster>& frames, const Pose& reference_pose,
                              const PipelineConfig& cfg, std::size_t workers) {
  if (frames.empty()) throw EmptyWindowError("no frames to fuse");
  std::vector<Pose> poses;
  poses.reserve(frames.size());
  for (const auto& f : frames) poses.push_back(f.sensor_pose);
  FusionWindow window;
  window.reference_pose = reference_pose;
  window.radius = cfg.fusion.radius;
  for (const std::size_t i : window_indices(frames.size(), nearest_pose(poses, reference_pose.timestamp), cfg.fusion.k)) {
    window.frames.push_back(frames[i]);
  }
  return build_target_map(window, cfg.grid, workers);
}

}  // namespace evigrid
