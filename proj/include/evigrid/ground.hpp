#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "evigrid/grid.hpp"

namespace evigrid {

class GroundFitError : public Error {
 public:
  using Error::Error;
};

struct GroundFitConfig {
  double knot_spacing = 5.0;
  double tikhonov_lambda = 1e-2;
  double classify_threshold = 0.3;
  int refit_iterations = 2;
  // fraction of lowest column minima per coarse cell seeding the first pass
  double initial_percentile = 0.2;
  // side of the columns reduced to their lowest point before seeding
  double seed_column = 0.5;

  void validate() const;
};

/// Axis-aligned rectangle the spline must cover.
struct FitDomain {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

/// Uniform cubic B-spline basis values at local parameter t in [0,1].
std::array<double, 4> cubic_bspline_basis(double t);

/// Uniform bicubic B-spline height field. Segment (a, b) spans
/// [origin + a*h, origin + (a+1)*h] in each axis and blends control points
/// a..a+3 / b..b+3. Queries outside the domain are clamped to its border.
class GroundSurface {
 public:
  struct Support {
    int first_u = 0;
    int first_v = 0;
    std::array<double, 4> wu{};
    std::array<double, 4> wv{};
  };

  GroundSurface(int nu, int nv, double knot_spacing, double origin_u, double origin_v, std::vector<double> control);

  /// Surface of constant height over `domain`.
  static GroundSurface flat(double height, const FitDomain& domain, double knot_spacing = 5.0);
  /// Control grid sized to cover `domain` with all heights zero.
  static GroundSurface zeros_for(const FitDomain& domain, double knot_spacing);

  double eval(double x, double y) const;
  /// The 4x4 active control points and their basis weights at (x, y).
  Support support(double x, double y) const;

  int nu() const { return nu_; }
  int nv() const { return nv_; }
  double knot_spacing() const { return h_; }
  double origin_u() const { return u0_; }
  double origin_v() const { return v0_; }
  /// Control heights, index a + b * nu.
  const std::vector<double>& control() const { return control_; }
  double& control_at(int a, int b) { return control_[static_cast<std::size_t>(b) * nu_ + a]; }
  double control_at(int a, int b) const { return control_[static_cast<std::size_t>(b) * nu_ + a]; }
  /// Greville abscissa of control point (a, b): the location whose linear
  /// function value it carries.
  Point2 control_position(int a, int b) const { return {u0_ + (a - 1) * h_, v0_ + (b - 1) * h_}; }
  FitDomain domain() const { return {u0_, v0_, u0_ + (nu_ - 3) * h_, v0_ + (nv_ - 3) * h_}; }

 private:
  int nu_;
  int nv_;
  double h_;
  double u0_;
  double v0_;
  std::vector<double> control_;
};

inline double eval_ground(const GroundSurface& surface, double x, double y) { return surface.eval(x, y); }

/// One regularised least-squares pass: minimises
///   sum_p (z_p - S(x_p, y_p))^2 + lambda * |second differences of control grid|^2
/// over the given points. Throws GroundFitError if the normal equations are singular.
GroundSurface fit_surface_to_points(std::span<const Eigen::Vector3d> points, const FitDomain& domain,
                                    double knot_spacing, double lambda);

/// Fit seeded by the lowest initial_percentile of column minima per knot cell,
/// followed by refit_iterations-1 passes on the points
/// within classify_threshold of the previous surface. The domain defaults to
/// the cloud's xy bounds.
GroundSurface fit_ground(const PointCloud& cloud, const GroundFitConfig& cfg,
                         std::optional<FitDomain> domain = std::nullopt);

struct GroundPartition {
  std::vector<std::size_t> ground;
  std::vector<std::size_t> non_ground;
};

/// Point is ground iff |z - S(x, y)| <= threshold.
GroundPartition classify_points(const PointCloud& cloud, const GroundSurface& surface, double threshold);

/// Root-mean-square of z - S(x, y) over the given points.
double fit_rmse(std::span<const Eigen::Vector3d> points, const GroundSurface& surface);

}  // namespace evigrid
