#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "evigrid/io.hpp"
#include "evigrid/pipeline.hpp"

using namespace evigrid;
namespace fs = std::filesystem;

namespace {

// Scratch directory, emptied on first use in each process.
const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "evigrid_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(EVIGRID_CLI_PATH) + " " + args + " >" + (work_dir() / "stdout.txt").string() +
                          " 2>" + (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small grid keeps every command fast.
fs::path small_config() {
  PipelineConfig cfg;
  cfg.grid = GridSpec{0.15, 240, 240, -18.0, -18.0};
  const fs::path p = work_dir() / "config.json";
  write_text_file(p, cfg.to_json());
  return p;
}

fs::path simulated(const std::string& name, const std::string& preset, int frames) {
  const fs::path dir = work_dir() / name;
  if (!fs::exists(dir / "poses.txt")) {
    fs::create_directories(dir);
    REQUIRE(run("simulate --scene " + preset + " --frames " + std::to_string(frames) + " --out " + q(dir) +
                " --config " + q(small_config())) == 0);
  }
  return dir;
}

std::string scan_list(const fs::path& dir, int frames) {
  std::string s;
  for (int f = 0; f < frames; ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "scan_%04d.bin", f);
    s += " " + q(dir / name);
  }
  return s;
}

double mean(const std::vector<float>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }


}  // namespace

TEST_CASE("simulate writes scans, poses, labels and scene, deterministically") {
  const fs::path a = simulated("sim_a", "static_street", 10);
  const fs::path b = simulated("sim_b", "static_street", 10);
  int scans = 0;
  for (const auto& e : fs::directory_iterator(a)) scans += e.path().extension() == ".bin" ? 1 : 0;
  CHECK(scans == 10);
  CHECK(fs::exists(a / "poses.txt"));
  CHECK(fs::exists(a / "labels.egmf"));
  CHECK(fs::exists(a / "scene.json"));
  CHECK(read_poses(a / "poses.txt").size() == 10);
  for (const char* f : {"scan_0000.bin", "scan_0007.bin", "poses.txt", "labels.egmf", "scene.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }

  const fs::path empty = work_dir() / "sim_empty";
  fs::create_directories(empty);
  CHECK(run("simulate --scene parking_row --frames 0 --out " + q(empty) + " --config " + q(small_config())) == 0);
  CHECK(fs::exists(empty / "poses.txt"));
  CHECK(fs::exists(empty / "labels.egmf"));
  CHECK_FALSE(fs::exists(empty / "scan_0000.bin"));
  CHECK(slurp(work_dir() / "stderr.txt").find("warning") != std::string::npos);

  CHECK(run("simulate --scene moon --out " + q(empty)) != 0);
}

TEST_CASE("map writes the 8-layer single-frame map") {
  const fs::path dir = simulated("sim_a", "static_street", 10);
  const fs::path out = work_dir() / "frame3.egmf";
  REQUIRE(run("map --cloud " + q(dir / "scan_0003.bin") + " --poses " + q(dir / "poses.txt") +
              " --index 3 --out " + q(out) + " --config " + q(small_config())) == 0);
  const MultiLayerGridMap m = read_grid_map(out);
  CHECK(m.layers().size() == 8);
  CHECK(m.satisfies(Schema::kInput));
  const auto& o = m.layer(layer_names::kBelOccupied).values;
  const auto& f = m.layer(layer_names::kBelFree).values;
  const auto& u = m.layer(layer_names::kBelUnknown).values;
  for (std::size_t k = 0; k < o.size(); ++k) CHECK(std::abs(o[k] + f[k] + u[k] - 1.0) < 1e-6);

  const fs::path empty_cloud = work_dir() / "empty.bin";
  write_text_file(empty_cloud, "");
  const fs::path empty_out = work_dir() / "empty.egmf";
  CHECK(run("map --cloud " + q(empty_cloud) + " --poses " + q(dir / "poses.txt") + " --out " + q(empty_out) +
            " --config " + q(small_config())) == 0);
  CHECK(slurp(work_dir() / "stderr.txt").find("warning") != std::string::npos);
  const MultiLayerGridMap empty_map = read_grid_map(empty_out);
  for (const float v : empty_map.layer(layer_names::kBelUnknown).values) CHECK(v == 1.0f);

  const fs::path none = work_dir() / "none.egmf";
  CHECK(run("map --cloud " + q(dir / "scan_0003.bin") + " --poses " + q(work_dir() / "missing_poses.txt") +
            " --out " + q(none)) == 2);
  CHECK_FALSE(fs::exists(none));
  CHECK_FALSE(fs::exists(work_dir() / "none.egmf.partial"));
}

TEST_CASE("fuse: one frame is the identity, ten frames are more certain, far reference is empty") {
  const fs::path dir = simulated("sim_a", "static_street", 10);
  const fs::path cfg = small_config();
  const fs::path frame = work_dir() / "frame5_aux.egmf";
  REQUIRE(run("map --cloud " + q(dir / "scan_0005.bin") + " --poses " + q(dir / "poses.txt") +
              " --index 5 --aux --out " + q(frame) + " --config " + q(cfg)) == 0);
  const auto poses = read_poses(dir / "poses.txt");
  const fs::path one_pose = work_dir() / "pose5.txt";
  write_poses({poses[5]}, one_pose);
  const fs::path single = work_dir() / "fused1.egmf";
  REQUIRE(run("fuse --maps " + q(frame) + " --poses " + q(one_pose) + " --out " + q(single) + " --config " +
              q(cfg)) == 0);
  const MultiLayerGridMap fm = read_grid_map(frame);
  const MultiLayerGridMap s = read_grid_map(single);
  CHECK(s.satisfies(Schema::kTarget));
  for (const auto name : {layer_names::kBelOccupied, layer_names::kBelFree, layer_names::kBelUnknown}) {
    const auto& a = fm.layer(name).values;
    const auto& b = s.layer(name).values;
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-6));
  }

  const fs::path all = work_dir() / "fused10.egmf";
  REQUIRE(run("fuse --scans" + scan_list(dir, 10) + " --poses " + q(dir / "poses.txt") + " --out " + q(all) +
              " --config " + q(cfg)) == 0);
  const double fused_unknown = mean(read_grid_map(all).layer(layer_names::kBelUnknown).values);
  for (int f = 0; f < 10; f += 3) {
    const fs::path fp = work_dir() / ("frame_" + std::to_string(f) + ".egmf");
    char name[32];
    std::snprintf(name, sizeof name, "scan_%04d.bin", f);
    REQUIRE(run("map --cloud " + q(dir / name) + " --poses " + q(dir / "poses.txt") + " --index " +
                std::to_string(f) + " --out " + q(fp) + " --config " + q(cfg)) == 0);
    CHECK(fused_unknown < mean(read_grid_map(fp).layer(layer_names::kBelUnknown).values));
  }

  const fs::path far_pose = work_dir() / "far.txt";
  write_poses({Pose::from_xyz_yaw(1000.0, 0.0, 1.8, 0.0, poses[5].timestamp)}, far_pose);
  const fs::path empty = work_dir() / "empty_window.egmf";
  CHECK(run("fuse --scans" + scan_list(dir, 10) + " --poses " + q(dir / "poses.txt") + " --reference-pose " +
            q(far_pose) + " --out " + q(empty) + " --config " + q(cfg)) == 3);
  CHECK_FALSE(fs::exists(empty));
}

TEST_CASE("eval: identity, exact CSV, mismatch") {
  const GridSpec spec{1.0, 2, 2, 0, 0};
  MultiLayerGridMap t(spec);
  t.add_layer("height").values = {0.0f, 1.0f, 2.0f, 3.0f};
  MultiLayerGridMap e(spec);
  e.add_layer("height").values = {0.0f, 1.0f, 2.0f, 5.0f};
  write_grid_map(t, work_dir() / "t.egmf");
  write_grid_map(e, work_dir() / "e.egmf");
  const fs::path csv = work_dir() / "report.csv";
  REQUIRE(run("eval --target " + q(work_dir() / "t.egmf") + " --estimate " + q(work_dir() / "e.egmf") + " --out " + q(csv)) ==
          0);
  CHECK(slurp(csv) == "layer,metric,value,cells\nheight,l1,0.5,4\nheight,l2,1,4\n");

  REQUIRE(run("eval --target " + q(work_dir() / "t.egmf") + " --estimate " + q(work_dir() / "t.egmf") + " --out " + q(csv)) ==
          0);
  CHECK(slurp(csv) == "layer,metric,value,cells\nheight,l1,0,4\nheight,l2,0,4\n");

  MultiLayerGridMap other(spec);
  other.add_layer("reflections");
  write_grid_map(other, work_dir() / "o.egmf");
  CHECK(run("eval --target " + q(work_dir() / "t.egmf") + " --estimate " + q(work_dir() / "o.egmf")) == 4);
  write_grid_map(MultiLayerGridMap(GridSpec{1.0, 3, 2, 0, 0}), work_dir() / "w.egmf");
  CHECK(run("eval --target " + q(work_dir() / "t.egmf") + " --estimate " + q(work_dir() / "w.egmf")) == 4);
  CHECK(run("eval --target " + q(work_dir() / "missing.egmf") + " --estimate " + q(work_dir() / "t.egmf")) == 2);
}

TEST_CASE("render: PNG output and unknown layer") {
  const GridSpec spec{1.0, 4, 3, 0, 0};
  MultiLayerGridMap m(spec);
  m.add_layer("bel_free", 0.5f);
  write_grid_map(m, work_dir() / "r.egmf");
  const fs::path png = work_dir() / "r.png";
  REQUIRE(run("render --map " + q(work_dir() / "r.egmf") + " --layer bel_free --out " + q(png)) == 0);
  const GrayImage img = read_png(png);
  CHECK(img.width == 4);
  CHECK(img.height == 3);
  for (const auto p : img.pixels) CHECK(p == 128);
  CHECK(run("render --map " + q(work_dir() / "r.egmf") + " --layer height --out " + q(work_dir() / "bad.png")) == 5);
  CHECK_FALSE(fs::exists(work_dir() / "bad.png"));
}
