#include "evigrid/ground.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace evigrid {

void GroundFitConfig::validate() const {
  if (!(knot_spacing > 0.0) || !(tikhonov_lambda > 0.0) || !(classify_threshold > 0.0) ||
      !(seed_column > 0.0) ||
      !(initial_percentile > 0.0 && initial_percentile <= 1.0)) {
    throw std::invalid_argument("ground fit parameters must be positive (percentile in (0,1])");
  }
  if (refit_iterations < 1) {
    throw std::invalid_argument("refit_iterations must be >= 1");
  }
}

std::array<double, 4> cubic_bspline_basis(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double s = 1.0 - t;
  return {s * s * s / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0, (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
          t3 / 6.0};
}

GroundSurface::GroundSurface(int nu, int nv, double knot_spacing, double origin_u, double origin_v,
                             std::vector<double> control)
    : nu_(nu), nv_(nv), h_(knot_spacing), u0_(origin_u), v0_(origin_v), control_(std::move(control)) {
  if (nu_ < 4 || nv_ < 4) {
    throw std::invalid_argument("bicubic surface needs at least 4x4 control points");
  }
  if (!(h_ > 0.0)) {
    throw std::invalid_argument("knot spacing must be positive");
  }
  if (control_.size() != static_cast<std::size_t>(nu_) * static_cast<std::size_t>(nv_)) {
    throw std::invalid_argument("control grid size does not match nu*nv");
  }
}

namespace {

int segments_for(double extent, double h) {
  return std::max(1, static_cast<int>(std::ceil(extent / h - 1e-9)));
}

}  // namespace

GroundSurface GroundSurface::zeros_for(const FitDomain& domain, double knot_spacing) {
  const int nu = segments_for(domain.max_x - domain.min_x, knot_spacing) + 3;
  const int nv = segments_for(domain.max_y - domain.min_y, knot_spacing) + 3;
  return GroundSurface(nu, nv, knot_spacing, domain.min_x, domain.min_y,
                       std::vector<double>(static_cast<std::size_t>(nu) * nv, 0.0));
}

GroundSurface GroundSurface::flat(double height, const FitDomain& domain, double knot_spacing) {
  GroundSurface s = zeros_for(domain, knot_spacing);
  std::fill(s.control_.begin(), s.control_.end(), height);
  return s;
}

GroundSurface::Support GroundSurface::support(double x, double y) const {
  auto locate = [this](double coord, double origin, int n, int& first, std::array<double, 4>& w) {
    const double s = std::clamp((coord - origin) / h_, 0.0, static_cast<double>(n - 3));
    const int seg = std::min(static_cast<int>(s), n - 4);
    first = seg;
    w = cubic_bspline_basis(s - seg);
  };
  Support sup;
  locate(std::isfinite(x) ? x : u0_, u0_, nu_, sup.first_u, sup.wu);
  locate(std::isfinite(y) ? y : v0_, v0_, nv_, sup.first_v, sup.wv);
  return sup;
}

double GroundSurface::eval(double x, double y) const {
  const Support s = support(x, y);
  double z = 0.0;
  for (int b = 0; b < 4; ++b) {
    const double* row = &control_[static_cast<std::size_t>(s.first_v + b) * nu_ + s.first_u];
    const double acc = s.wu[0] * row[0] + s.wu[1] * row[1] + s.wu[2] * row[2] + s.wu[3] * row[3];
    z += s.wv[b] * acc;
  }
  return z;
}

GroundSurface fit_surface_to_points(std::span<const Eigen::Vector3d> points, const FitDomain& domain,
                                    double knot_spacing, double lambda) {
  GroundSurface surface = GroundSurface::zeros_for(domain, knot_spacing);
  const int nu = surface.nu();
  const int nv = surface.nv();
  const int n = nu * nv;

  // Normal matrix couples control points at most 3 apart per axis; keep a
  // 7x7 band per unknown.
  constexpr int kBand = 7;
  std::vector<double> band(static_cast<std::size_t>(n) * kBand * kBand, 0.0);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  auto slot = [&](int a, int b, int da, int db) -> double& {
    return band[(static_cast<std::size_t>(b) * nu + a) * kBand * kBand + (da + 3) * kBand + (db + 3)];
  };

  for (const auto& p : points) {
    const auto s = surface.support(p.x(), p.y());
    std::array<double, 16> w;
    for (int b = 0; b < 4; ++b) {
      for (int a = 0; a < 4; ++a) w[b * 4 + a] = s.wu[a] * s.wv[b];
    }
    for (int k = 0; k < 16; ++k) {
      const int ak = s.first_u + k % 4;
      const int bk = s.first_v + k / 4;
      rhs[bk * nu + ak] += w[k] * p.z();
      for (int l = 0; l < 16; ++l) {
        slot(ak, bk, l % 4 - k % 4, l / 4 - k / 4) += w[k] * w[l];
      }
    }
  }

  // lambda * D^T D for second differences along rows and columns.
  auto add_second_difference = [&](int a0, int b0, int da, int db) {
    const std::array<int, 3> as = {a0 - da, a0, a0 + da};
    const std::array<int, 3> bs = {b0 - db, b0, b0 + db};
    constexpr std::array<double, 3> coef = {1.0, -2.0, 1.0};
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        slot(as[k], bs[k], as[l] - as[k], bs[l] - bs[k]) += lambda * coef[k] * coef[l];
      }
    }
  };
  for (int b = 0; b < nv; ++b) {
    for (int a = 1; a + 1 < nu; ++a) add_second_difference(a, b, 1, 0);
  }
  for (int b = 1; b + 1 < nv; ++b) {
    for (int a = 0; a < nu; ++a) add_second_difference(a, b, 0, 1);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * 49);
  for (int b = 0; b < nv; ++b) {
    for (int a = 0; a < nu; ++a) {
      for (int db = -3; db <= 3; ++db) {
        for (int da = -3; da <= 3; ++da) {
          const double v = slot(a, b, da, db);
          if (v != 0.0) triplets.emplace_back(b * nu + a, (b + db) * nu + (a + da), v);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> normal(n, n);
  normal.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success) {
    throw GroundFitError("ground fit: normal equations could not be factorised");
  }
  const Eigen::VectorXd d = solver.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > 1e-12 * dmax)) {
    throw GroundFitError("ground fit: rank-deficient normal equations (too few or collinear points)");
  }
  const Eigen::VectorXd c = solver.solve(rhs);
  return GroundSurface(nu, nv, knot_spacing, surface.origin_u(), surface.origin_v(),
                       std::vector<double>(c.data(), c.data() + c.size()));
}

namespace {

FitDomain bounds_of(const PointCloud& cloud) {
  FitDomain d{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& p : cloud.points) {
    d.min_x = std::min(d.min_x, p.x);
    d.min_y = std::min(d.min_y, p.y);
    d.max_x = std::max(d.max_x, p.x);
    d.max_y = std::max(d.max_y, p.y);
  }
  return d;
}

// Lowest point of every column x column cell, so dense obstacle returns do
// not outnumber the ground in the percentile selection.
std::vector<Eigen::Vector3d> column_minima(const PointCloud& cloud, const FitDomain& domain, double column) {
  std::unordered_map<long long, std::size_t> lowest;
  const long long stride = 1LL << 32;
  for (std::size_t k = 0; k < cloud.points.size(); ++k) {
    const auto& p = cloud.points[k];
    const auto cx = static_cast<long long>(std::floor((p.x - domain.min_x) / column));
    const auto cy = static_cast<long long>(std::floor((p.y - domain.min_y) / column));
    auto [it, inserted] = lowest.try_emplace(cy * stride + cx, k);
    if (!inserted && p.z < cloud.points[it->second].z) it->second = k;
  }
  std::vector<std::size_t> picked;
  picked.reserve(lowest.size());
  for (const auto& [key, k] : lowest) picked.push_back(k);
  std::sort(picked.begin(), picked.end());
  std::vector<Eigen::Vector3d> out;
  out.reserve(picked.size());
  for (const std::size_t k : picked) out.emplace_back(cloud.points[k].x, cloud.points[k].y, cloud.points[k].z);
  return out;
}

std::vector<Eigen::Vector3d> percentile_seeds(const PointCloud& cloud, const FitDomain& domain, double cell,
                                              double percentile, double column) {
  const std::vector<Eigen::Vector3d> columns = column_minima(cloud, domain, column);
  std::unordered_map<long long, std::vector<std::size_t>> buckets;
  const long long stride = 1LL << 32;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& p = columns[k];
    const auto cx = static_cast<long long>(std::floor((p.x() - domain.min_x) / cell));
    const auto cy = static_cast<long long>(std::floor((p.y() - domain.min_y) / cell));
    buckets[cy * stride + cx].push_back(k);
  }
  std::vector<long long> keys;
  keys.reserve(buckets.size());
  for (const auto& [key, _] : buckets) keys.push_back(key);
  std::sort(keys.begin(), keys.end());

  std::vector<Eigen::Vector3d> seeds;
  for (const long long key : keys) {
    auto& idx = buckets[key];
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(percentile * idx.size())));
    auto by_z = [&](std::size_t a, std::size_t b) { return columns[a].z() < columns[b].z(); };
    std::nth_element(idx.begin(), idx.begin() + static_cast<long>(keep - 1), idx.end(), by_z);
    std::sort(idx.begin(), idx.begin() + static_cast<long>(keep), by_z);
    for (std::size_t k = 0; k < keep; ++k) seeds.push_back(columns[idx[k]]);
  }
  return seeds;
}

constexpr std::size_t kMinSeedPoints = 16;

}  // namespace

GroundSurface fit_ground(const PointCloud& cloud, const GroundFitConfig& cfg, std::optional<FitDomain> domain) {
  cfg.validate();
  if (cloud.points.empty()) {
    throw GroundFitError("ground fit: empty point cloud");
  }
  const FitDomain dom = domain.value_or(bounds_of(cloud));

  std::vector<Eigen::Vector3d> seeds = percentile_seeds(cloud, dom, cfg.knot_spacing, cfg.initial_percentile, cfg.seed_column);
  if (seeds.size() < kMinSeedPoints) {
    throw GroundFitError("ground fit: fewer than 16 seed points");
  }
  GroundSurface surface = fit_surface_to_points(seeds, dom, cfg.knot_spacing, cfg.tikhonov_lambda);

  for (int pass = 1; pass < cfg.refit_iterations; ++pass) {
    PointCloud near;
    for (const auto& p : cloud.points) {
      if (std::abs(p.z - surface.eval(p.x, p.y)) <= cfg.classify_threshold) near.points.push_back(p);
    }
    seeds = column_minima(near, dom, cfg.seed_column);
    if (seeds.size() < kMinSeedPoints) break;
    surface = fit_surface_to_points(seeds, dom, cfg.knot_spacing, cfg.tikhonov_lambda);
  }
  return surface;
}

GroundPartition classify_points(const PointCloud& cloud, const GroundSurface& surface, double threshold) {
  GroundPartition out;
  for (std::size_t k = 0; k < cloud.points.size(); ++k) {
    const auto& p = cloud.points[k];
    if (std::abs(p.z - surface.eval(p.x, p.y)) <= threshold) {
      out.ground.push_back(k);
    } else {
      out.non_ground.push_back(k);
    }
  }
  return out;
}

double fit_rmse(std::span<const Eigen::Vector3d> points, const GroundSurface& surface) {
  if (points.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : points) {
    const double r = p.z() - surface.eval(p.x(), p.y());
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(points.size()));
}

}  // namespace evigrid
