#include <doctest.h>

#include <cmath>
#include <numbers>

#include "evigrid/grid.hpp"

using namespace evigrid;

TEST_CASE("world_to_cell floors and rejects the max boundary") {
  const GridSpec spec{0.5, 4, 2, -1.0, 0.0};
  CHECK(world_to_cell(spec, -1.0, 0.0) == CellIndex{0, 0});
  CHECK(world_to_cell(spec, -0.51, 0.49) == CellIndex{0, 0});
  CHECK(world_to_cell(spec, -0.5, 0.5) == CellIndex{1, 1});
  CHECK(world_to_cell(spec, 0.999, 0.999) == CellIndex{3, 1});
  CHECK_FALSE(world_to_cell(spec, 1.0, 0.5).has_value());
  CHECK_FALSE(world_to_cell(spec, -1.0001, 0.5).has_value());
  CHECK_FALSE(world_to_cell(spec, 0.0, 1.0).has_value());
  CHECK_FALSE(world_to_cell(spec, NAN, 0.5).has_value());
}

TEST_CASE("world_to_cell examples at 0.15 m") {
  const GridSpec spec{0.15, 10, 10, 0.0, 0.0};
  CHECK(world_to_cell(spec, 0.0, 0.0) == CellIndex{0, 0});
  // 0.45 / 0.15 rounds just below 3 in binary; one ulp above lands in cell 3
  CHECK(world_to_cell(spec, std::nextafter(0.45, 1.0), 0.0) == CellIndex{3, 0});
  CHECK_FALSE(world_to_cell(spec, -0.01, 0.5).has_value());
  const Point2 c = cell_center(spec, 3, 0);
  CHECK(c.x == doctest::Approx(0.525).epsilon(1e-15));
  CHECK(c.y == doctest::Approx(0.075).epsilon(1e-15));
}

TEST_CASE("transform_point examples") {
  const Eigen::Vector3d p(1.0, 2.0, 3.0);
  CHECK(transform_point(Pose{}, p) == p);
  CHECK(transform_point(Pose::from_xyz_yaw(10, 0, 0, 0), {1, 0, 0}) == Eigen::Vector3d(11, 0, 0));
  const Eigen::Vector3d r = transform_point(Pose::from_xyz_yaw(0, 0, 0, std::numbers::pi / 2), {1, 0, 0});
  CHECK((r - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("cell_center round trips through world_to_cell") {
  const GridSpec spec;
  for (int j = 0; j < spec.height; j += 37) {
    for (int i = 0; i < spec.width; i += 41) {
      const Point2 c = cell_center(spec, i, j);
      CHECK(world_to_cell(spec, c.x, c.y) == CellIndex{i, j});
    }
  }
  CHECK_THROWS_AS(cell_center(spec, -1, 0), std::out_of_range);
  CHECK_THROWS_AS(cell_center(spec, 0, spec.height), std::out_of_range);
}

TEST_CASE("default grid is 536 x 536 cells of 0.15 m centred on the origin") {
  const GridSpec spec = GridSpec::reference_default();
  CHECK(spec.width == 536);
  CHECK(spec.cell_count() == 536u * 536u);
  CHECK(spec.origin_x + spec.max_x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(spec.index(3, 2) == 2u * 536u + 3u);
}

TEST_CASE("grid spec validation") {
  CHECK_THROWS_AS((GridSpec{0.0, 4, 4, 0, 0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{0.1, 0, 4, 0, 0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{0.1, 4, 4, INFINITY, 0}.validate()), std::invalid_argument);
  CHECK_NOTHROW(GridSpec{}.validate());
}

TEST_CASE("layers: duplicates, sizes and lookup") {
  MultiLayerGridMap m(GridSpec{1.0, 3, 2, 0, 0});
  m.add_layer("a", 2.0f);
  CHECK(m.layer("a").values == std::vector<float>(6, 2.0f));
  CHECK_THROWS_AS(m.add_layer("a"), std::invalid_argument);
  CHECK_THROWS_AS(m.add_layer(Layer{"b", {1.0f}}), std::invalid_argument);
  CHECK_THROWS_AS(m.add_layer(""), std::invalid_argument);
  CHECK_THROWS_AS(m.layer("missing"), std::out_of_range);
  m.layer("a").values[5] = 7.0f;
  CHECK(m.layer("a").values[5] == 7.0f);
}

TEST_CASE("schema detection follows the layer inventory") {
  MultiLayerGridMap m(GridSpec{1.0, 2, 2, 0, 0});
  CHECK(m.schema() == Schema::kCustom);
  for (const auto n : LayerSchema::kInput) m.add_layer(n);
  CHECK(m.schema() == Schema::kInput);
  for (const auto n : LayerSchema::kTarget) {
    if (!m.has_layer(n)) m.add_layer(n);
  }
  CHECK(m.schema() == Schema::kTarget);
  CHECK(m.satisfies(Schema::kInput));
  CHECK(schema_name(Schema::kTarget) == "target");
}

TEST_CASE("pose inverse and compose") {
  const Pose a = Pose::from_xyz_yaw(1.0, -2.0, 0.5, 0.7, 3.0);
  const Pose b = Pose::from_xyz_yaw(-0.3, 4.0, 1.0, -1.2, 4.0);
  const Eigen::Vector3d p(0.25, -1.5, 2.0);
  CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
  CHECK((compose(a, b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
  CHECK(a.yaw() == doctest::Approx(0.7));
  CHECK((transform_point(a, p) - a.apply(p)).norm() == 0.0);
}

TEST_CASE("planar projection drops roll, pitch and height") {
  Pose p;
  p.translation = Eigen::Vector3d(3.0, 4.0, 1.8);
  p.rotation = Eigen::AngleAxisd(0.4, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(0.05, Eigen::Vector3d::UnitY());
  const Pose g = p.planar();
  CHECK(g.translation.z() == 0.0);
  CHECK(g.translation.x() == 3.0);
  CHECK(g.yaw() == doctest::Approx(0.4).epsilon(1e-3));
  const Eigen::Vector3d up = g.rotation * Eigen::Vector3d::UnitZ();
  CHECK(up.z() == doctest::Approx(1.0));
}

TEST_CASE("pose validation rejects non-unit quaternions") {
  Pose p;
  CHECK_NOTHROW(p.validate());
  p.rotation = Eigen::Quaterniond(1.001, 0, 0, 0);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("transform_cloud moves points and the sensor origin") {
  PointCloud c;
  c.points.push_back({1.0, 0.0, 0.0, 0.5});
  const Pose pose = Pose::from_xyz_yaw(10.0, 0.0, 2.0, std::numbers::pi / 2);
  const PointCloud w = transform_cloud(c, pose);
  CHECK(w.points[0].x == doctest::Approx(10.0));
  CHECK(w.points[0].y == doctest::Approx(1.0));
  CHECK(w.points[0].z == doctest::Approx(2.0));
  CHECK(w.points[0].intensity == 0.5);
  CHECK(w.sensor_origin.isApprox(Eigen::Vector3d(10.0, 0.0, 2.0)));
}

namespace {
int g_invalid_seen = 0;
void count_invalid(const CellEvidence& e) {
  if (!e.valid()) ++g_invalid_seen;
}
}  // namespace

TEST_CASE("evidence check hook sees every constructed triple") {
  const auto previous = set_evidence_check_hook(&count_invalid);
  g_invalid_seen = 0;
  const CellEvidence ok(0.2, 0.3, 0.5);
  CHECK(ok.valid());
  const CellEvidence bad(0.7, 0.7, -0.4);
  CHECK_FALSE(bad.valid());
  CHECK(g_invalid_seen == 1);
  set_evidence_check_hook(previous);
  const CellEvidence def;
  CHECK(def.unknown == 1.0);
}
