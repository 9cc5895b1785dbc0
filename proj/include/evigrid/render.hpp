#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "evigrid/grid.hpp"

namespace evigrid {

class RenderError : public Error {
 public:
  using Error::Error;
};

struct ValueRange {
  double min = 0.0;
  double max = 1.0;
};

/// Layers whose values are masses or beliefs and render over [0, 1] by default.
bool is_belief_layer(std::string_view name);

/// [0, 1] for belief layers, finite data min/max otherwise.
ValueRange default_range(const Layer& layer);

/// Linear map of v from [lo, hi] to 0..255, clamped, round half up.
/// Non-finite values and a degenerate range map to 0.
std::uint8_t quantize(double v, const ValueRange& range);

enum class Palette {
  kGray,      // low values dark
  kInverted,  // low values bright
};

/// "gray" or "inverted"; throws RenderError otherwise.
Palette parse_palette(std::string_view name);
std::string_view palette_name(Palette palette);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, row 0 at the top
};

/// North-up image of one layer: image row 0 is grid row height-1.
/// Throws RenderError when the layer is missing.
GrayImage render_layer(const MultiLayerGridMap& map, std::string_view layer,
                       std::optional<ValueRange> range = std::nullopt, Palette palette = Palette::kGray);

void write_png(const GrayImage& image, const std::filesystem::path& path);
/// 8-bit grayscale PNGs only.
GrayImage read_png(const std::filesystem::path& path);

}  // namespace evigrid
