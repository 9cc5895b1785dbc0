#include "evigrid/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "evigrid/parallel.hpp"

namespace evigrid {

FusedBeliefs FusedBeliefs::from_map(const MultiLayerGridMap& map) {
  return {map.spec(), map.layer(layer_names::kBelOccupied).values, map.layer(layer_names::kBelFree).values,
          map.layer(layer_names::kBelUnknown).values};
}

CellMapping::CellMapping(const GridSpec& ref_spec, const Pose& ref_grid_pose, const GridSpec& src_spec,
                         const Pose& src_grid_pose)
    : ref_(ref_spec), src_(src_spec) {
  const Pose t = compose(src_grid_pose.inverse(), ref_grid_pose);
  rot_ = t.rotation.toRotationMatrix().topLeftCorner<2, 2>();
  offset_ = t.translation.head<2>();
}

std::optional<std::size_t> CellMapping::source_index(int i, int j) const {
  const Eigen::Vector2d c(ref_.origin_x + (i + 0.5) * ref_.cell_size, ref_.origin_y + (j + 0.5) * ref_.cell_size);
  const Eigen::Vector2d p = rot_ * c + offset_;
  const auto cell = world_to_cell(src_, p.x(), p.y());
  if (!cell) return std::nullopt;
  return src_.index(cell->i, cell->j);
}

FrameRaster resample_to_reference(const FrameRaster& raster, const GridSpec& ref_spec, const Pose& ref_pose) {
  const Pose ref_grid = grid_pose_for(ref_pose);
  FrameRaster out = FrameRaster::unknown(ref_spec, ref_grid, raster.sensor_pose);
  const CellMapping mapping(ref_spec, ref_grid, raster.spec, raster.grid_pose);
  for (int j = 0; j < ref_spec.height; ++j) {
    for (int i = 0; i < ref_spec.width; ++i) {
      const auto src = mapping.source_index(i, j);
      if (!src) continue;
      const std::size_t dst = ref_spec.index(i, j);
      const std::size_t s = *src;
      out.reflections[dst] = raster.reflections[s];
      out.transmissions[dst] = raster.transmissions[s];
      out.observations[dst] = raster.observations[s];
      out.reflected_energy[dst] = raster.reflected_energy[s];
      out.height[dst] = raster.height[s];
      out.shadow_height[dst] = raster.shadow_height[s];
      out.max_observable[dst] = raster.max_observable[s];
      out.m_occupied[dst] = raster.m_occupied[s];
      out.m_free[dst] = raster.m_free[s];
      out.m_unknown[dst] = raster.m_unknown[s];
    }
  }
  return out;
}

BeliefTriple fuse_cell_evidence(std::span<const CellEvidence> masses) {
  if (masses.empty()) {
    throw std::invalid_argument("fuse_cell_evidence: no masses to fuse");
  }
  double occ_or_unknown = 1.0;
  double free_or_unknown = 1.0;
  double all_unknown = 1.0;
  for (const auto& m : masses) {
    occ_or_unknown *= m.occupied + m.unknown;
    free_or_unknown *= m.free + m.unknown;
    all_unknown *= m.unknown;
  }
  BeliefTriple b;
  b.occupied = occ_or_unknown - all_unknown;
  b.free = free_or_unknown - all_unknown;
  b.unknown = 1.0 - b.occupied - b.free;
  return b;
}

BeliefTriple fuse_cell_evidence_bruteforce(std::span<const CellEvidence> masses) {
  const std::size_t n = masses.size();
  if (n == 0 || n > 12) {
    throw std::invalid_argument("fuse_cell_evidence_bruteforce: need 1..12 frames");
  }
  std::size_t hypotheses = 1;
  for (std::size_t k = 0; k < n; ++k) hypotheses *= 3;

  double occupied = 0.0;
  double free = 0.0;
  double dynamic = 0.0;
  for (std::size_t h = 0; h < hypotheses; ++h) {
    std::size_t code = h;
    double mass = 1.0;
    bool any_occupied = false;
    bool any_free = false;
    for (std::size_t k = 0; k < n; ++k) {
      switch (code % 3) {
        case 0:
          mass *= masses[k].occupied;
          any_occupied = true;
          break;
        case 1:
          mass *= masses[k].free;
          any_free = true;
          break;
        default:
          mass *= masses[k].unknown;
          break;
      }
      code /= 3;
    }
    if (any_occupied && !any_free) {
      occupied += mass;
    } else if (any_free && !any_occupied) {
      free += mass;
    } else {
      dynamic += mass;
    }
  }
  return {occupied, free, dynamic};
}

HeightEstimate fuse_height(std::span<const HeightEstimate> estimates, double sigma_min) {
  if (estimates.empty()) {
    throw std::invalid_argument("fuse_height: no estimates to fuse");
  }
  // Weights relative to the tightest variance, so equal variances give
  // weights of exactly 1 and the plain mean.
  double var_min = std::numeric_limits<double>::infinity();
  for (const auto& e : estimates) var_min = std::min(var_min, std::max(e.sigma_sq, sigma_min));
  double weight_sum = 0.0;
  double weighted = 0.0;
  for (const auto& e : estimates) {
    const double w = var_min / std::max(e.sigma_sq, sigma_min);
    weight_sum += w;
    weighted += w * e.mu;
  }
  return {weighted / weight_sum, var_min / weight_sum};
}

std::vector<std::size_t> qualifying_frames(const FusionWindow& window) {
  std::vector<std::size_t> out;
  const Eigen::Vector2d ref = window.reference_pose.translation.head<2>();
  for (std::size_t k = 0; k < window.frames.size(); ++k) {
    const Eigen::Vector3d sensor = window.frames[k].sensor_pose.translation;
    if ((sensor.head<2>() - ref).norm() <= window.radius) out.push_back(k);
  }
  return out;
}

MultiLayerGridMap build_target_map(const FusionWindow& window, const GridSpec& ref_spec, std::size_t workers) {
  ref_spec.validate();
  const std::vector<std::size_t> used = qualifying_frames(window);
  if (used.empty()) {
    throw EmptyWindowError("fusion window has no frame within " + std::to_string(window.radius) +
                           " m of the reference pose");
  }

  const Pose ref_grid = grid_pose_for(window.reference_pose);
  std::vector<CellMapping> mappings;
  mappings.reserve(used.size());
  for (const std::size_t k : used) {
    mappings.emplace_back(ref_spec, ref_grid, window.frames[k].spec, window.frames[k].grid_pose);
  }

  namespace ln = layer_names;
  MultiLayerGridMap map(ref_spec);
  for (const auto name : LayerSchema::kTarget) {
    map.add_layer(name, name == ln::kBelUnknown ? 1.0f : 0.0f);
  }
  auto& reflections = map.layer(ln::kReflections).values;
  auto& observation_height = map.layer(ln::kObservationHeight).values;
  auto& energy = map.layer(ln::kReflectedEnergy).values;
  auto& height = map.layer(ln::kHeight).values;
  auto& bel_free = map.layer(ln::kBelFree).values;
  auto& bel_occupied = map.layer(ln::kBelOccupied).values;
  auto& bel_unknown = map.layer(ln::kBelUnknown).values;

  parallel_for(static_cast<std::size_t>(ref_spec.height), resolve_worker_count(workers),
               [&](std::size_t row_begin, std::size_t row_end) {
                 for (auto row = row_begin; row < row_end; ++row) {
                   const int j = static_cast<int>(row);
                   for (int i = 0; i < ref_spec.width; ++i) {
                     bool contributed = false;
                     double occ_or_unknown = 1.0;
                     double free_or_unknown = 1.0;
                     double all_unknown = 1.0;
                     double n_sum = 0.0;
                     double energy_sum = 0.0;
                     double precision = 0.0;
                     double weighted_mu = 0.0;
                     double obs_height = -std::numeric_limits<double>::infinity();

                     for (std::size_t f = 0; f < used.size(); ++f) {
                       const auto src = mappings[f].source_index(i, j);
                       if (!src) continue;
                       contributed = true;
                       const FrameRaster& fr = window.frames[used[f]];
                       const std::size_t s = *src;
                       const double mo = fr.m_occupied[s];
                       const double mf = fr.m_free[s];
                       const double mu = fr.m_unknown[s];
                       occ_or_unknown *= mo + mu;
                       free_or_unknown *= mf + mu;
                       all_unknown *= mu;

                       const double m = fr.transmissions[s];
                       const double n = fr.reflections[s];
                       if (m > 0.0) obs_height = std::max(obs_height, static_cast<double>(fr.max_observable[s]));
                       if (n > 0.0) {
                         n_sum += n;
                         energy_sum += n * fr.reflected_energy[s];
                         const double det = fr.height[s];
                         // without transmissions the observable top is the detection itself
                         const double top = m > 0.0 ? static_cast<double>(fr.max_observable[s]) : det;
                         const HeightEstimate e = height_estimate(top, det);
                         const double var = std::max(e.sigma_sq, kSigmaMin);
                         precision += 1.0 / var;
                         weighted_mu += e.mu / var;
                       }
                     }
                     if (!contributed) continue;

                     const std::size_t dst = ref_spec.index(i, j);
                     const double occupied = occ_or_unknown - all_unknown;
                     const double free = free_or_unknown - all_unknown;
                     bel_occupied[dst] = static_cast<float>(occupied);
                     bel_free[dst] = static_cast<float>(free);
                     bel_unknown[dst] = static_cast<float>(1.0 - occupied - free);
                     reflections[dst] = static_cast<float>(n_sum);
                     if (n_sum > 0.0) {
                       energy[dst] = static_cast<float>(energy_sum / n_sum);
                       height[dst] = static_cast<float>(weighted_mu / precision);
                     }
                     if (std::isfinite(obs_height)) observation_height[dst] = static_cast<float>(obs_height);
                   }
                 }
               });
  return map;
}

}  // namespace evigrid
