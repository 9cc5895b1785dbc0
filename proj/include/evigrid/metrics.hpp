#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evigrid/fusion.hpp"
#include "evigrid/grid.hpp"

namespace evigrid {

class MetricError : public Error {
 public:
  using Error::Error;
};

struct ErrorNorms {
  double l1 = 0.0;  // mean |target - estimate|
  double l2 = 0.0;  // mean (target - estimate)^2
  std::size_t cells = 0;
};

/// Cell-wise error means over all cells, or over cells where mask > 0.
/// Throws MetricError on size mismatch or when the mask selects no cell.
ErrorNorms layer_error(std::span<const float> target, std::span<const float> estimate,
                       std::optional<std::span<const float>> mask = std::nullopt);
ErrorNorms layer_error(const Layer& target, const Layer& estimate, const Layer* mask = nullptr);

struct FalseBeliefMetrics {
  double false_occupied = 0.0;
  double false_free = 0.0;
  std::size_t cells = 0;
};

/// max(0, est_occupied + tgt_free - 1): estimate claims occupied where the target is free.
inline double false_occupied(double est_occupied, double tgt_free) {
  return std::max(0.0, est_occupied + tgt_free - 1.0);
}
/// max(0, tgt_occupied + est_free - 1): estimate claims free where the target is occupied.
inline double false_free(double tgt_occupied, double est_free) { return std::max(0.0, tgt_occupied + est_free - 1.0); }

FalseBeliefMetrics false_belief_metrics(const FusedBeliefs& estimate, const FusedBeliefs& target,
                                        std::optional<std::span<const float>> mask = std::nullopt);

/// W_k = 1 - k * bel_unknown per cell; k must lie in [0, 1].
std::vector<float> loss_mask(std::span<const float> bel_unknown, double k = 0.9);

struct TaskLosses {
  double grid_map = 0.0;        // L_gm, already mask-weighted
  double evidential = 0.0;      // L_ev
  double localization = 0.0;    // L_loc, opaque
  double classification = 0.0;  // L_cls, opaque
};

/// Task-uncertainty scalars sigma_1..sigma_4, all > 0.
struct LossWeights {
  std::array<double, 4> sigma{1.0, 1.0, 1.0, 1.0};
};

struct CombinedLoss {
  double total = 0.0;
  double enrichment = 0.0;
  std::array<double, 4> d_sigma{};  // d total / d sigma_i
};

/// L_enr = L_gm / (2 s1^2) + L_ev / s2^2 + ln s1 + ln s2
/// L     = L_enr + L_loc / (2 s3^2) + L_cls / s4^2 + ln s3 + ln s4
CombinedLoss combined_loss(const TaskLosses& losses, const LossWeights& weights);

struct EvalRow {
  std::string layer;
  std::string metric;
  double value = 0.0;
  std::size_t cells = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  std::optional<double> value(std::string_view layer, std::string_view metric) const;
  std::string to_csv() const;
  std::string to_text() const;
};

struct EvalOptions {
  std::optional<std::string> mask_layer;  // cells where this layer is > 0
  bool observed_only = false;             // cells where target bel_unknown < 1
};

/// L1/L2 rows for every target layer plus false_occupied / false_free when
/// both maps carry beliefs. Throws MetricError on a spec mismatch or a target
/// layer missing from the estimate.
EvalReport evaluate_maps(const MultiLayerGridMap& target, const MultiLayerGridMap& estimate,
                         const EvalOptions& options = {});

}  // namespace evigrid
