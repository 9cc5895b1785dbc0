#include <doctest.h>

#include <numeric>

#include "evigrid/pipeline.hpp"
#include "scenario.hpp"

using namespace evigrid;

TEST_CASE("config defaults and validation") {
  const PipelineConfig cfg;
  CHECK(cfg.grid.cell_size == 0.15);
  CHECK(cfg.fusion.radius == 40.0);
  CHECK(cfg.fusion.k == 5);
  CHECK_NOTHROW(cfg.validate());
  PipelineConfig bad;
  bad.sensor.p_fp = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("config JSON: partial, round trip, rejection") {
  const PipelineConfig a = PipelineConfig::from_json(R"({"sensor": {"p_fp": 0.2}, "fusion": {"k": 3}})");
  CHECK(a.sensor.p_fp == 0.2);
  CHECK(a.sensor.p_fn_max == 0.9);
  CHECK(a.fusion.k == 3);
  CHECK(PipelineConfig::from_json(a.to_json()).to_json() == a.to_json());

  const PipelineConfig r =
      PipelineConfig::from_json(R"({"render": {"palette": "inverted", "range_min": -1, "range_max": 2}})");
  CHECK(r.render.palette == Palette::kInverted);
  CHECK(r.render.range_min == -1.0);
  CHECK(r.render.range_max == 2.0);
  CHECK_FALSE(PipelineConfig{}.render.range_max.has_value());
  CHECK_THROWS_AS(PipelineConfig::from_json(R"({"render": {"range_min": -1}})"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(R"({"render": {"palette": "rainbow"}})"), ConfigError);

  CHECK_THROWS_AS(PipelineConfig::from_json(R"({"sensor": {"p_fpp": 0.2}})"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(R"({"sensors": {}})"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(R"({"fusion": {"k": "five"}})"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json("[1, 2"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json(R"({"sensor": {"p_fp": 1.5}})"), ConfigError);
  CHECK_NOTHROW(load_config(std::nullopt));
}

TEST_CASE("window indices and nearest pose") {
  CHECK(window_indices(10, 5, 2) == std::vector<std::size_t>{3, 4, 5, 6, 7});
  CHECK(window_indices(10, 0, 2) == std::vector<std::size_t>{0, 1, 2});
  CHECK(window_indices(4, 3, 5) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(window_indices(4, 3, 0) == std::vector<std::size_t>{3});
  std::vector<Pose> poses(4);
  for (int k = 0; k < 4; ++k) poses[k].timestamp = 0.5 * k;
  CHECK(nearest_pose(poses, 0.74) == 1);
  CHECK(nearest_pose(poses, 0.75) == 1);
  CHECK(nearest_pose(poses, 99.0) == 3);
  CHECK(nearest_pose(poses, -3.0) == 0);
}

TEST_CASE("ground estimate falls back to flat for sparse clouds") {
  PointCloud c;
  c.points = {{0, 0, -1.8, 0}, {1, 0, -1.7, 0}};
  const GridSpec spec{0.15, 100, 100, -7.5, -7.5};
  const GroundSurface s = estimate_ground(c, spec, {});
  CHECK(s.eval(0.0, 0.0) == doctest::Approx(s.eval(5.0, -5.0)));
  CHECK(estimate_ground(PointCloud{}, spec, {}).eval(1.0, 1.0) == 0.0);
}

TEST_CASE("map_frame of an empty cloud is all unknown") {
  PipelineConfig cfg;
  cfg.grid = GridSpec{0.15, 60, 60, -4.5, -4.5};
  const FrameRaster r = map_frame(PointCloud{}, Pose::from_xyz_yaw(3, 4, 1.8, 0.2), cfg);
  for (const float u : r.m_unknown) CHECK(u == 1.0f);
}

TEST_CASE("fusing more frames lowers the mean unknown mass") {
  PipelineConfig cfg;
  cfg.grid = GridSpec{0.15, 200, 200, -15.0, -15.0};
  const auto run = testing::run_scenario("static_street", 10, cfg);
  const MultiLayerGridMap single = fuse_frames({run.frames[5]}, run.reference, cfg, 1);
  const auto mean = [](const std::vector<float>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const double u1 = mean(single.layer(layer_names::kBelUnknown).values);
  const double u10 = mean(run.fused.layer(layer_names::kBelUnknown).values);
  CHECK(u10 < u1);

  // single-frame window reproduces the raster
  const auto& occ = single.layer(layer_names::kBelOccupied).values;
  for (std::size_t k = 0; k < occ.size(); ++k) {
    CHECK(occ[k] == doctest::Approx(run.frames[5].m_occupied[k]).epsilon(1e-6));
  }

  CHECK_THROWS_AS(fuse_frames({}, run.reference, cfg), EmptyWindowError);
  CHECK(fuse_frames(run.frames, run.reference, cfg, 1).layers() == run.fused.layers());
}
