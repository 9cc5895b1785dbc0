#include "evigrid/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include <png.h>

namespace evigrid {

bool is_belief_layer(std::string_view name) {
  return name == layer_names::kBelFree || name == layer_names::kBelOccupied || name == layer_names::kBelUnknown ||
         name == layer_names::kObservations;
}

ValueRange default_range(const Layer& layer) {
  if (is_belief_layer(layer.name)) return {0.0, 1.0};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const float v : layer.values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (lo > hi) return {0.0, 1.0};
  return {lo, hi};
}

std::uint8_t quantize(double v, const ValueRange& range) {
  if (!std::isfinite(v) || !(range.max > range.min)) return 0;
  const double t = std::clamp((v - range.min) / (range.max - range.min), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(t * 255.0 + 0.5));
}

Palette parse_palette(std::string_view name) {
  if (name == "gray") return Palette::kGray;
  if (name == "inverted") return Palette::kInverted;
  throw RenderError("unknown palette '" + std::string(name) + "'");
}

std::string_view palette_name(Palette palette) { return palette == Palette::kGray ? "gray" : "inverted"; }

GrayImage render_layer(const MultiLayerGridMap& map, std::string_view layer, std::optional<ValueRange> range,
                       Palette palette) {
  if (!map.has_layer(layer)) throw RenderError("map has no layer '" + std::string(layer) + "'");
  const Layer& l = map.layer(layer);
  const ValueRange r = range.value_or(default_range(l));
  const GridSpec& spec = map.spec();
  GrayImage img{spec.width, spec.height, std::vector<std::uint8_t>(spec.cell_count())};
  for (int row = 0; row < spec.height; ++row) {
    const int j = spec.height - 1 - row;
    for (int i = 0; i < spec.width; ++i) {
      const std::uint8_t q = quantize(l.values[spec.index(i, j)], r);
      img.pixels[static_cast<std::size_t>(row) * spec.width + i] = palette == Palette::kGray ? q : 255 - q;
    }
  }
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const GrayImage& image, const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw RenderError("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw RenderError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw RenderError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw RenderError("failed to encode '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int row = 0; row < image.height; ++row) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(row) * image.width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw RenderError("error while writing '" + path.string() + "'");
}

GrayImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw RenderError("cannot open '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw RenderError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw RenderError("libpng initialisation failed");
  }
  GrayImage img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RenderError("failed to decode '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RenderError("'" + path.string() + "' is not an 8-bit grayscale PNG");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int row = 0; row < img.height; ++row) {
    png_read_row(png, img.pixels.data() + static_cast<std::size_t>(row) * img.width, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace evigrid
