#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evigrid/fusion.hpp"
#include "evigrid/io.hpp"
#include "evigrid/metrics.hpp"
#include "evigrid/pipeline.hpp"
#include "evigrid/render.hpp"
#include "evigrid/simulator.hpp"

namespace fs = std::filesystem;
using namespace evigrid;

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kInputIo = 2,
  kEmptyWindow = 3,
  kEvalMismatch = 4,
  kRenderError = 5,
};

struct Common {
  std::optional<std::string> config;
  std::optional<double> radius;
  std::optional<int> k;
};

PipelineConfig resolve_config(const Common& c) {
  PipelineConfig cfg = load_config(c.config);
  if (c.radius) cfg.fusion.radius = *c.radius;
  if (c.k) cfg.fusion.k = *c.k;
  cfg.validate();
  return cfg;
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// Writes through a temporary so a failed command leaves no partial output.
template <class Fn>
void write_atomically(const fs::path& out, Fn&& write) {
  fs::path tmp = out;
  tmp += ".partial";
  try {
    write(tmp);
    fs::rename(tmp, out);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

PointCloud load_cloud(const std::string& path, CloudFormat format) {
  CloudReadResult r = read_point_cloud(path, format);
  if (r.dropped_non_finite > 0) {
    warn(path + ": dropped " + std::to_string(r.dropped_non_finite) + " non-finite points");
  }
  return std::move(r.cloud);
}

// --- map --------------------------------------------------------------------

struct MapArgs {
  std::string cloud;
  std::string poses;
  std::string out;
  std::string format = "xyzi_f32";
  std::optional<std::size_t> index;
  std::optional<double> timestamp;
  bool aux = false;
};

int cmd_map(const MapArgs& a, const Common& c) {
  const PipelineConfig cfg = resolve_config(c);
  const CloudFormat format = parse_cloud_format(a.format);
  const std::vector<Pose> poses = read_poses(a.poses);
  if (poses.empty()) throw FormatError(a.poses + ": no poses");
  std::size_t idx = 0;
  if (a.index) {
    idx = *a.index;
    if (idx >= poses.size()) throw FormatError(a.poses + ": pose index " + std::to_string(idx) + " out of range");
  } else if (a.timestamp) {
    idx = nearest_pose(poses, *a.timestamp);
  }
  const PointCloud cloud = load_cloud(a.cloud, format);
  if (cloud.points.empty()) warn(a.cloud + ": empty point cloud, writing an all-unknown map");
  const FrameRaster raster = map_frame(cloud, poses[idx], cfg);
  write_atomically(a.out, [&](const fs::path& p) { write_grid_map(raster.to_map(a.aux), p); });
  return kOk;
}

// --- fuse -------------------------------------------------------------------

struct FuseArgs {
  std::vector<std::string> scans;
  std::vector<std::string> maps;
  std::string poses;
  std::string out;
  std::string format = "xyzi_f32";
  std::optional<double> reference;
  std::optional<std::string> reference_pose;
};

int cmd_fuse(const FuseArgs& a, const Common& c) {
  const PipelineConfig cfg = resolve_config(c);
  const std::vector<Pose> poses = read_poses(a.poses);
  const std::size_t count = a.scans.empty() ? a.maps.size() : a.scans.size();
  if (poses.size() != count) {
    throw FormatError(a.poses + ": " + std::to_string(poses.size()) + " poses for " + std::to_string(count) +
                      " inputs");
  }

  std::vector<FrameRaster> frames;
  if (!a.scans.empty()) {
    const CloudFormat format = parse_cloud_format(a.format);
    std::vector<PointCloud> clouds;
    for (const auto& s : a.scans) clouds.push_back(load_cloud(s, format));
    frames = map_frames(clouds, poses, cfg);
  } else {
    for (std::size_t i = 0; i < a.maps.size(); ++i) {
      const MultiLayerGridMap m = read_grid_map(a.maps[i]);
      try {
        frames.push_back(FrameRaster::from_map(m, poses[i]));
      } catch (const std::out_of_range& e) {
        throw FormatError(a.maps[i] + ": " + e.what() + " (write frame maps with 'evigrid map --aux')");
      }
    }
  }

  Pose reference;
  if (a.reference_pose) {
    const auto ref = read_poses(*a.reference_pose);
    if (ref.empty()) throw FormatError(*a.reference_pose + ": no poses");
    reference = ref.front();
  } else {
    reference = poses[a.reference ? nearest_pose(poses, *a.reference) : poses.size() / 2];
  }
  const MultiLayerGridMap target = fuse_frames(frames, reference, cfg);
  write_atomically(a.out, [&](const fs::path& p) { write_grid_map(target, p); });
  return kOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string target;
  std::string estimate;
  std::optional<std::string> mask;
  bool observed_only = false;
  std::optional<std::string> out;
};

int cmd_eval(const EvalArgs& a, const Common&) {
  const MultiLayerGridMap target = read_grid_map(a.target);
  const MultiLayerGridMap estimate = read_grid_map(a.estimate);
  EvalOptions opts;
  opts.mask_layer = a.mask;
  opts.observed_only = a.observed_only;
  const EvalReport report = evaluate_maps(target, estimate, opts);
  std::cout << report.to_text();
  if (a.out) write_text_file(*a.out, report.to_csv());
  return kOk;
}

// --- render -----------------------------------------------------------------

struct RenderArgs {
  std::string map;
  std::string layer;
  std::string out;
  std::optional<double> min;
  std::optional<double> max;
  std::optional<std::string> palette;
};

int cmd_render(const RenderArgs& a, const Common& c) {
  const PipelineConfig cfg = resolve_config(c);
  const MultiLayerGridMap map = read_grid_map(a.map);
  std::optional<ValueRange> range;
  if (cfg.render.range_min) range = ValueRange{*cfg.render.range_min, *cfg.render.range_max};
  if (a.min || a.max) {
    const ValueRange base = range.value_or(map.has_layer(a.layer) ? default_range(map.layer(a.layer)) : ValueRange{});
    range = ValueRange{a.min.value_or(base.min), a.max.value_or(base.max)};
    if (!(range->max > range->min)) throw RenderError("render range max must exceed min");
  }
  const Palette palette = a.palette ? parse_palette(*a.palette) : cfg.render.palette;
  const GrayImage img = render_layer(map, a.layer, range, palette);
  write_png(img, a.out);
  return kOk;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::optional<std::string> scene;
  std::optional<std::string> scene_file;
  int frames = 10;
  std::string out;
  std::string format = "xyzi_f32";
};

int cmd_simulate(const SimulateArgs& a, const Common& c) {
  const PipelineConfig cfg = resolve_config(c);
  const CloudFormat format = parse_cloud_format(a.format);
  Scene scene = a.scene_file ? scene_from_json(read_text_file(*a.scene_file)) : preset_scene(a.scene.value_or(""));
  if (a.frames < 0) throw std::invalid_argument("frame count must be non-negative");
  const double t_first = scene.frame_time(0);
  const double t_last = scene.frame_time(std::max(0, a.frames - 1));
  scene.validate(t_first, t_last);

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) throw IoError("cannot create output directory '" + a.out + "'");
  const fs::path dir(a.out);

  if (a.frames == 0) warn("frame count 0: writing poses and labels only");
  std::vector<Pose> poses;
  for (int f = 0; f < a.frames; ++f) {
    const Pose pose = scene.sensor_pose(f, cfg.scan.sensor_height);
    ScanConfig scan = cfg.scan;
    scan.timestamp = pose.timestamp;
    char name[32];
    std::snprintf(name, sizeof name, "scan_%04d.bin", f);
    write_point_cloud(simulate_scan(scene, pose, scan), dir / name, format);
    poses.push_back(pose);
  }
  write_poses(poses, dir / "poses.txt");
  const Pose label_pose = grid_pose_for(scene.sensor_pose(a.frames / 2, cfg.scan.sensor_height));
  const auto labels = ground_truth_labels(scene, cfg.grid, label_pose, t_first, t_last);
  write_grid_map(labels_to_map(cfg.grid, labels), dir / "labels.egmf");
  write_text_file(dir / "scene.json", scene_to_json(scene));
  return kOk;
}

template <class Fn>
int guarded(Fn&& fn, int io_code) {
  try {
    return fn();
  } catch (const EmptyWindowError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEmptyWindow;
  } catch (const MetricError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEvalMismatch;
  } catch (const RenderError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRenderError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io_code;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io_code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evigrid: evidential top-view grid maps from range scans"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON pipeline config");
  };

  MapArgs map_args;
  auto* map = app.add_subcommand("map", "rasterize one scan into a single-frame grid map");
  add_common(map);
  map->add_option("--cloud", map_args.cloud, "point cloud file")->required();
  map->add_option("--poses", map_args.poses, "pose file")->required();
  map->add_option("--out", map_args.out, "output grid map")->required();
  map->add_option("--format", map_args.format, "xyzi_f32 or nuscenes_bin")->capture_default_str();
  auto* index_opt = map->add_option("--index", map_args.index, "pose line to use (0-based)");
  map->add_option("--timestamp", map_args.timestamp, "use the pose nearest to this time")->excludes(index_opt);
  map->add_flag("--aux", map_args.aux, "also write transmissions and observation_height");

  FuseArgs fuse_args;
  auto* fuse = app.add_subcommand("fuse", "fuse a sequence of scans or frame maps into a target map");
  add_common(fuse);
  auto* scans_opt = fuse->add_option("--scans", fuse_args.scans, "point cloud files in time order");
  auto* maps_opt = fuse->add_option("--maps", fuse_args.maps, "frame maps written with 'map --aux'");
  scans_opt->excludes(maps_opt);
  fuse->add_option("--poses", fuse_args.poses, "one pose per input")->required();
  fuse->add_option("--out", fuse_args.out, "output target map")->required();
  fuse->add_option("--format", fuse_args.format, "xyzi_f32 or nuscenes_bin")->capture_default_str();
  auto* ref_opt = fuse->add_option("--reference", fuse_args.reference, "reference timestamp (default: middle frame)");
  fuse->add_option("--reference-pose", fuse_args.reference_pose, "pose file whose first pose anchors the window")
      ->excludes(ref_opt);
  fuse->add_option("--k", common.k, "window half-width in frames");
  fuse->add_option("--radius", common.radius, "window radius in metres");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "compare an estimate map against a target map");
  eval->add_option("--target", eval_args.target, "target map")->required();
  eval->add_option("--estimate", eval_args.estimate, "estimate map")->required();
  eval->add_option("--mask", eval_args.mask, "only cells where this layer is > 0");
  eval->add_flag("--observed-only", eval_args.observed_only, "only cells with target bel_unknown < 1");
  eval->add_option("--out", eval_args.out, "CSV report");

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "render one layer as an 8-bit grayscale PNG");
  add_common(render);
  render->add_option("--map", render_args.map, "grid map")->required();
  render->add_option("--layer", render_args.layer, "layer name")->required();
  render->add_option("--out", render_args.out, "output PNG")->required();
  render->add_option("--min", render_args.min, "value mapped to black");
  render->add_option("--max", render_args.max, "value mapped to white");
  render->add_option("--palette", render_args.palette, "gray or inverted");

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "write synthetic scans, poses and ground-truth labels");
  add_common(simulate);
  auto* scene_opt = simulate->add_option("--scene", sim_args.scene, "preset name");
  auto* scene_file_opt = simulate->add_option("--scene-file", sim_args.scene_file, "scene JSON file");
  scene_opt->excludes(scene_file_opt);
  simulate->add_option("--frames", sim_args.frames, "number of frames")->capture_default_str();
  simulate->add_option("--out", sim_args.out, "output directory")->required();
  simulate->add_option("--format", sim_args.format, "xyzi_f32 or nuscenes_bin")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (map->parsed()) return guarded([&] { return cmd_map(map_args, common); }, kInputIo);
  if (fuse->parsed()) {
    if (fuse_args.scans.empty() && fuse_args.maps.empty()) {
      std::cerr << "error: fuse needs --scans or --maps\n";
      return kFailure;
    }
    return guarded([&] { return cmd_fuse(fuse_args, common); }, kInputIo);
  }
  if (eval->parsed()) return guarded([&] { return cmd_eval(eval_args, common); }, kInputIo);
  if (render->parsed()) return guarded([&] { return cmd_render(render_args, common); }, kInputIo);
  if (simulate->parsed()) {
    if (!sim_args.scene && !sim_args.scene_file) {
      std::cerr << "error: simulate needs --scene or --scene-file\n";
      return kFailure;
    }
    return guarded([&] { return cmd_simulate(sim_args, common); }, kInputIo);
  }
  return kFailure;
}
