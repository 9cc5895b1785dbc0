#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "evigrid/fusion.hpp"

using namespace evigrid;

namespace {

CellEvidence random_mass(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // uniform on the simplex via sorted cuts
  double a = u(rng);
  double b = u(rng);
  if (a > b) std::swap(a, b);
  return {a, b - a, 1.0 - b};
}

void check_close(const BeliefTriple& a, const BeliefTriple& b, double tol) {
  CHECK(std::abs(a.occupied - b.occupied) <= tol);
  CHECK(std::abs(a.free - b.free) <= tol);
  CHECK(std::abs(a.unknown - b.unknown) <= tol);
}

FrameRaster random_raster(const GridSpec& spec, const Pose& sensor, std::uint64_t seed) {
  FrameRaster r = FrameRaster::unknown(spec, grid_pose_for(sensor), sensor);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(0, 5);
  std::uniform_real_distribution<float> h(0.0f, 3.0f);
  for (std::size_t k = 0; k < spec.cell_count(); ++k) {
    const CellEvidence e = random_mass(rng);
    r.m_occupied[k] = static_cast<float>(e.occupied);
    r.m_free[k] = static_cast<float>(e.free);
    r.m_unknown[k] = static_cast<float>(e.unknown);
    r.reflections[k] = static_cast<float>(count(rng));
    r.transmissions[k] = static_cast<float>(count(rng));
    r.observations[k] = (r.reflections[k] > 0 || r.transmissions[k] > 0) ? 1.0f : 0.0f;
    r.height[k] = h(rng);
    r.shadow_height[k] = h(rng);
    r.max_observable[k] = std::max(r.shadow_height[k], h(rng));
    r.reflected_energy[k] = h(rng) / 3.0f;
  }
  return r;
}

}  // namespace

TEST_CASE("fusion examples") {
  const std::vector<CellEvidence> one = {{0.2, 0.3, 0.5}};
  const BeliefTriple s = fuse_cell_evidence(one);
  CHECK(s.occupied == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.free == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(s.unknown == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<CellEvidence> contra = {{1, 0, 0}, {0, 1, 0}};
  check_close(fuse_cell_evidence(contra), {0, 0, 1}, 1e-15);
  check_close(fuse_cell_evidence_bruteforce(contra), {0, 0, 1}, 1e-15);

  const std::vector<CellEvidence> half = {{0.5, 0, 0.5}, {0.5, 0, 0.5}};
  check_close(fuse_cell_evidence(half), {0.75, 0, 0.25}, 1e-15);
  check_close(fuse_cell_evidence_bruteforce(half), {0.75, 0, 0.25}, 1e-15);

  CHECK_THROWS_AS(fuse_cell_evidence({}), std::invalid_argument);
  CHECK_THROWS_AS(fuse_cell_evidence_bruteforce({}), std::invalid_argument);
  CHECK_THROWS_AS(fuse_cell_evidence_bruteforce(std::vector<CellEvidence>(13)), std::invalid_argument);
}

TEST_CASE("closed form equals brute-force enumeration") {
  std::mt19937_64 rng(21);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<CellEvidence> m;
      for (int k = 0; k < n; ++k) m.push_back(random_mass(rng));
      check_close(fuse_cell_evidence(m), fuse_cell_evidence_bruteforce(m), 1e-12);
    }
  }
}

TEST_CASE("fusion properties") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CellEvidence> m;
    for (int k = 0; k < 4; ++k) m.push_back(random_mass(rng));
    const BeliefTriple base = fuse_cell_evidence(m);
    CHECK(std::abs(base.occupied + base.free + base.unknown - 1.0) < 1e-12);

    auto perm = m;
    std::shuffle(perm.begin(), perm.end(), rng);
    check_close(fuse_cell_evidence(perm), base, 1e-12);

    auto neutral = m;
    neutral.push_back({0, 0, 1});
    check_close(fuse_cell_evidence(neutral), base, 1e-12);

    // a frame without free mass cannot raise the dynamic/unknown share of an occupied-leaning cell
    auto consistent = m;
    consistent.push_back({0.6, 0.0, 0.4});
    CHECK(fuse_cell_evidence(consistent).free <= base.free + 1e-12);
  }
}

TEST_CASE("unknown does not grow with consistent frames") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CellEvidence> m;
    double before = 1.0;
    for (int k = 0; k < 8; ++k) {
      const double o = u(rng);
      m.push_back({o, 0.0, 1.0 - o});
      const double now = fuse_cell_evidence(m).unknown;
      CHECK(now <= before + 1e-12);
      before = now;
    }
  }
}

TEST_CASE("height fusion") {
  const std::vector<HeightEstimate> single = {{1.3, 0.2}};
  CHECK(fuse_height(single).mu == 1.3);
  CHECK(fuse_height(single).sigma_sq == doctest::Approx(0.2));

  const std::vector<HeightEstimate> sym = {{1.0, 0.4}, {2.0, 0.4}};
  CHECK(fuse_height(sym).mu == 1.5);

  const std::vector<HeightEstimate> ex = {{1.0, 1.0}, {3.0, 0.5}};
  const HeightEstimate f = fuse_height(ex);
  CHECK(f.mu == doctest::Approx(7.0 / 3.0).epsilon(1e-14));
  CHECK(f.sigma_sq == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  // brute-force maximiser of the density product
  double best = 0.0;
  double best_log = -INFINITY;
  for (double z = 0.0; z <= 4.0; z += 1e-5) {
    const double l = -(z - 1.0) * (z - 1.0) / 2.0 - (z - 3.0) * (z - 3.0) / 1.0;
    if (l > best_log) {
      best_log = l;
      best = z;
    }
  }
  CHECK(std::abs(f.mu - best) < 2e-5);

  const std::vector<HeightEstimate> zero = {{0.7, 0.0}, {0.7, -1.0}};
  CHECK(fuse_height(zero).mu == doctest::Approx(0.7));
  CHECK(fuse_height(zero).sigma_sq == doctest::Approx(kSigmaMin / 2.0));

  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<HeightEstimate> e;
    const double common = u(rng);
    for (int k = 0; k < 5; ++k) e.push_back({common, u(rng)});
    CHECK(fuse_height(e).mu == doctest::Approx(common).epsilon(1e-12));
    auto p = e;
    std::shuffle(p.begin(), p.end(), rng);
    CHECK(fuse_height(p).mu == doctest::Approx(fuse_height(e).mu).epsilon(1e-12));
  }
  CHECK_THROWS_AS(fuse_height({}), std::invalid_argument);
}

TEST_CASE("resample: identity, 2-cell shift, 180 degree yaw") {
  const GridSpec spec{0.15, 20, 20, -1.5, -1.5};
  const Pose sensor = Pose::from_xyz_yaw(0.0, 0.0, 1.8, 0.0);
  const FrameRaster r = random_raster(spec, sensor, 31);

  CHECK(resample_to_reference(r, spec, sensor) == r);

  const Pose shifted = Pose::from_xyz_yaw(0.3, 0.0, 1.8, 0.0);
  const FrameRaster s = resample_to_reference(r, spec, shifted);
  for (int j = 0; j < 20; ++j) {
    for (int i = 0; i < 20; ++i) {
      const std::size_t k = spec.index(i, j);
      if (i < 18) {
        CHECK(s.m_free[k] == r.m_free[spec.index(i + 2, j)]);
        CHECK(s.height[k] == r.height[spec.index(i + 2, j)]);
      } else {
        CHECK(s.m_unknown[k] == 1.0f);
        CHECK(s.reflections[k] == 0.0f);
        CHECK(s.transmissions[k] == 0.0f);
      }
    }
  }

  const Pose turned = Pose::from_xyz_yaw(0.0, 0.0, 1.8, std::numbers::pi);
  const FrameRaster t = resample_to_reference(r, spec, turned);
  for (int j = 0; j < 20; ++j) {
    for (int i = 0; i < 20; ++i) {
      CHECK(t.m_occupied[spec.index(i, j)] == r.m_occupied[spec.index(19 - i, 19 - j)]);
    }
  }
}

TEST_CASE("cell mapping between differently placed grids") {
  const GridSpec ref{1.0, 4, 4, 0.0, 0.0};
  const GridSpec src{1.0, 4, 4, 0.0, 0.0};
  const CellMapping m(ref, Pose::from_xyz_yaw(1.0, 0.0, 0.0, 0.0), src, Pose::from_xyz_yaw(0.0, 0.0, 0.0, 0.0));
  CHECK(m.source_index(0, 0) == src.index(1, 0));
  CHECK_FALSE(m.source_index(3, 0).has_value());
}

TEST_CASE("target map: single frame reproduces the frame, empty window throws") {
  const GridSpec spec{0.15, 16, 12, -1.2, -0.9};
  const Pose sensor = Pose::from_xyz_yaw(5.0, -2.0, 1.8, 0.3);
  const FrameRaster r = random_raster(spec, sensor, 41);
  FusionWindow w;
  w.frames.push_back(r);
  w.reference_pose = sensor;
  const MultiLayerGridMap m = build_target_map(w, spec, 1);
  CHECK(m.schema() == Schema::kTarget);
  namespace ln = layer_names;
  for (std::size_t k = 0; k < spec.cell_count(); ++k) {
    CHECK(m.layer(ln::kBelOccupied).values[k] == doctest::Approx(r.m_occupied[k]).epsilon(1e-6));
    CHECK(m.layer(ln::kBelFree).values[k] == doctest::Approx(r.m_free[k]).epsilon(1e-6));
    CHECK(m.layer(ln::kReflections).values[k] == r.reflections[k]);
  }

  FusionWindow far = w;
  far.reference_pose = Pose::from_xyz_yaw(500.0, 0.0, 1.8, 0.0);
  CHECK(qualifying_frames(far).empty());
  CHECK_THROWS_AS(build_target_map(far, spec, 1), EmptyWindowError);
}

TEST_CASE("target map is deterministic and worker-independent") {
  const GridSpec spec{0.15, 30, 30, -2.25, -2.25};
  FusionWindow w;
  for (int f = 0; f < 4; ++f) {
    const Pose p = Pose::from_xyz_yaw(0.2 * f, 0.05 * f, 1.8, 0.02 * f);
    w.frames.push_back(random_raster(spec, p, 50 + f));
  }
  w.reference_pose = w.frames[1].sensor_pose;
  const MultiLayerGridMap a = build_target_map(w, spec, 1);
  const MultiLayerGridMap b = build_target_map(w, spec, 3);
  CHECK(a.layers() == b.layers());

  std::reverse(w.frames.begin(), w.frames.end());
  const MultiLayerGridMap c = build_target_map(w, spec, 1);
  namespace ln = layer_names;
  for (const auto name : {ln::kBelOccupied, ln::kBelFree, ln::kBelUnknown}) {
    for (std::size_t k = 0; k < spec.cell_count(); ++k) {
      CHECK(c.layer(name).values[k] == doctest::Approx(a.layer(name).values[k]).epsilon(1e-6));
    }
  }
}
