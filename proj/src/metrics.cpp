#include "evigrid/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace evigrid {

namespace {

std::vector<char> selection(std::size_t n, std::optional<std::span<const float>> mask) {
  std::vector<char> keep(n, 1);
  if (!mask) return keep;
  if (mask->size() != n) {
    throw MetricError("mask has " + std::to_string(mask->size()) + " cells, expected " + std::to_string(n));
  }
  for (std::size_t k = 0; k < n; ++k) keep[k] = (*mask)[k] > 0.0f ? 1 : 0;
  return keep;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

ErrorNorms layer_error(std::span<const float> target, std::span<const float> estimate,
                       std::optional<std::span<const float>> mask) {
  if (target.size() != estimate.size()) {
    throw MetricError("layer size mismatch: " + std::to_string(target.size()) + " vs " +
                      std::to_string(estimate.size()));
  }
  const auto keep = selection(target.size(), mask);
  ErrorNorms out;
  double l1 = 0.0;
  double l2 = 0.0;
  for (std::size_t k = 0; k < target.size(); ++k) {
    if (!keep[k]) continue;
    const double d = static_cast<double>(target[k]) - static_cast<double>(estimate[k]);
    l1 += std::abs(d);
    l2 += d * d;
    ++out.cells;
  }
  if (out.cells == 0) throw MetricError("evaluation mask selects no cells");
  out.l1 = l1 / static_cast<double>(out.cells);
  out.l2 = l2 / static_cast<double>(out.cells);
  return out;
}

ErrorNorms layer_error(const Layer& target, const Layer& estimate, const Layer* mask) {
  std::optional<std::span<const float>> m;
  if (mask) m = std::span<const float>(mask->values);
  return layer_error(target.values, estimate.values, m);
}

FalseBeliefMetrics false_belief_metrics(const FusedBeliefs& estimate, const FusedBeliefs& target,
                                        std::optional<std::span<const float>> mask) {
  const std::size_t n = target.occupied.size();
  if (!(estimate.spec == target.spec) || estimate.occupied.size() != n || estimate.free.size() != n ||
      target.free.size() != n) {
    throw MetricError("belief maps have mismatching dimensions");
  }
  const auto keep = selection(n, mask);
  FalseBeliefMetrics out;
  double fo = 0.0;
  double ff = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!keep[k]) continue;
    fo += false_occupied(estimate.occupied[k], target.free[k]);
    ff += false_free(target.occupied[k], estimate.free[k]);
    ++out.cells;
  }
  if (out.cells == 0) throw MetricError("evaluation mask selects no cells");
  out.false_occupied = fo / static_cast<double>(out.cells);
  out.false_free = ff / static_cast<double>(out.cells);
  return out;
}

std::vector<float> loss_mask(std::span<const float> bel_unknown, double k) {
  if (!(k >= 0.0 && k <= 1.0)) {
    throw std::invalid_argument("loss mask factor k must lie in [0,1]");
  }
  std::vector<float> w(bel_unknown.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = static_cast<float>(1.0 - k * static_cast<double>(bel_unknown[i]));
  }
  return w;
}

CombinedLoss combined_loss(const TaskLosses& losses, const LossWeights& weights) {
  for (const double s : weights.sigma) {
    if (!(s > 0.0)) throw std::invalid_argument("task uncertainties must be positive");
  }
  const auto& [s1, s2, s3, s4] = weights.sigma;
  CombinedLoss out;
  out.enrichment = losses.grid_map / (2.0 * s1 * s1) + losses.evidential / (s2 * s2) + std::log(s1) + std::log(s2);
  out.total = out.enrichment + losses.localization / (2.0 * s3 * s3) + losses.classification / (s4 * s4) +
              std::log(s3) + std::log(s4);
  out.d_sigma = {-losses.grid_map / (s1 * s1 * s1) + 1.0 / s1,
                 -2.0 * losses.evidential / (s2 * s2 * s2) + 1.0 / s2,
                 -losses.localization / (s3 * s3 * s3) + 1.0 / s3,
                 -2.0 * losses.classification / (s4 * s4 * s4) + 1.0 / s4};
  return out;
}

std::optional<double> EvalReport::value(std::string_view layer, std::string_view metric) const {
  for (const auto& r : rows) {
    if (r.layer == layer && r.metric == metric) return r.value;
  }
  return std::nullopt;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "layer,metric,value,cells\n";
  for (const auto& r : rows) os << r.layer << ',' << r.metric << ',' << format_value(r.value) << ',' << r.cells << '\n';
  return os.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %-15s %14.6g  (%zu cells)\n", r.layer.c_str(), r.metric.c_str(), r.value,
                  r.cells);
    os << line;
  }
  return os.str();
}

EvalReport evaluate_maps(const MultiLayerGridMap& target, const MultiLayerGridMap& estimate,
                         const EvalOptions& options) {
  if (!(target.spec() == estimate.spec())) {
    throw MetricError("target and estimate grid specs differ");
  }
  for (const auto& l : target.layers()) {
    if (!estimate.has_layer(l.name)) throw MetricError("estimate lacks layer '" + l.name + "'");
  }

  std::vector<float> mask_values;
  bool masked = false;
  if (options.mask_layer) {
    const auto& name = *options.mask_layer;
    if (target.has_layer(name)) {
      mask_values = target.layer(name).values;
    } else if (estimate.has_layer(name)) {
      mask_values = estimate.layer(name).values;
    } else {
      throw MetricError("mask layer '" + name + "' not found in either map");
    }
    masked = true;
  }
  if (options.observed_only) {
    if (!target.has_layer(layer_names::kBelUnknown)) {
      throw MetricError("observed-only evaluation needs bel_unknown in the target");
    }
    const auto& unknown = target.layer(layer_names::kBelUnknown).values;
    if (!masked) mask_values.assign(unknown.size(), 1.0f);
    for (std::size_t k = 0; k < unknown.size(); ++k) {
      if (!(unknown[k] < 1.0f)) mask_values[k] = 0.0f;
    }
    masked = true;
  }
  std::optional<std::span<const float>> mask;
  if (masked) mask = std::span<const float>(mask_values);

  EvalReport report;
  for (const auto& l : target.layers()) {
    const ErrorNorms e = layer_error(l.values, estimate.layer(l.name).values, mask);
    report.rows.push_back({l.name, "l1", e.l1, e.cells});
    report.rows.push_back({l.name, "l2", e.l2, e.cells});
  }
  auto has_beliefs = [](const MultiLayerGridMap& m) {
    return m.has_layer(layer_names::kBelOccupied) && m.has_layer(layer_names::kBelFree) &&
           m.has_layer(layer_names::kBelUnknown);
  };
  if (has_beliefs(target) && has_beliefs(estimate)) {
    const auto fb = false_belief_metrics(FusedBeliefs::from_map(estimate), FusedBeliefs::from_map(target), mask);
    report.rows.push_back({"evidence", "false_occupied", fb.false_occupied, fb.cells});
    report.rows.push_back({"evidence", "false_free", fb.false_free, fb.cells});
  }
  return report;
}

}  // namespace evigrid
