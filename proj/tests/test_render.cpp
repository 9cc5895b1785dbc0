#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "evigrid/render.hpp"

using namespace evigrid;
namespace fs = std::filesystem;

TEST_CASE("quantization") {
  const ValueRange unit;
  CHECK(quantize(0.0, unit) == 0);
  CHECK(quantize(0.5, unit) == 128);
  CHECK(quantize(1.0, unit) == 255);
  CHECK(quantize(-3.0, unit) == 0);
  CHECK(quantize(7.0, unit) == 255);
  CHECK(quantize(NAN, unit) == 0);
  CHECK(quantize(0.5, {1.0, 1.0}) == 0);
  CHECK(quantize(2.0, {0.0, 4.0}) == 128);
}

TEST_CASE("default ranges") {
  CHECK(is_belief_layer("bel_free"));
  CHECK(is_belief_layer("observations"));
  CHECK_FALSE(is_belief_layer("height"));
  const Layer h{"height", {0.5f, NAN, 2.5f, -1.0f}};
  const ValueRange r = default_range(h);
  CHECK(r.min == -1.0);
  CHECK(r.max == 2.5);
  const Layer b{"bel_occupied", {0.2f, 0.3f}};
  CHECK(default_range(b).min == 0.0);
  CHECK(default_range(b).max == 1.0);
}

TEST_CASE("palettes") {
  CHECK(parse_palette("gray") == Palette::kGray);
  CHECK(parse_palette("inverted") == Palette::kInverted);
  CHECK(palette_name(Palette::kInverted) == "inverted");
  CHECK_THROWS_AS(parse_palette("viridis"), RenderError);
}

TEST_CASE("render is north-up and honours the palette") {
  MultiLayerGridMap m(GridSpec{1.0, 3, 2, 0, 0});
  m.add_layer("bel_free");
  m.layer("bel_free").values = {0.0f, 0.5f, 1.0f, 1.0f, 1.0f, 1.0f};
  const GrayImage g = render_layer(m, "bel_free");
  CHECK(g.width == 3);
  CHECK(g.height == 2);
  // grid row 0 (minimum y) is the bottom image row
  CHECK(g.pixels == std::vector<std::uint8_t>{255, 255, 255, 0, 128, 255});
  const GrayImage inv = render_layer(m, "bel_free", std::nullopt, Palette::kInverted);
  CHECK(inv.pixels[3] == 255);
  CHECK(inv.pixels[0] == 0);

  m.add_layer("bel_unknown");
  const GrayImage black = render_layer(m, "bel_unknown");
  for (const auto p : black.pixels) CHECK(p == 0);
  CHECK_THROWS_AS(render_layer(m, "height"), RenderError);
}

TEST_CASE("PNG round trip") {
  GrayImage img;
  img.width = 17;
  img.height = 5;
  for (int k = 0; k < img.width * img.height; ++k) img.pixels.push_back(static_cast<std::uint8_t>(k * 3));
  const fs::path p = fs::temp_directory_path() / "evigrid_test_render.png";
  write_png(img, p);
  const GrayImage back = read_png(p);
  CHECK(back.width == 17);
  CHECK(back.height == 5);
  CHECK(back.pixels == img.pixels);
  CHECK_THROWS_AS(read_png(fs::temp_directory_path() / "evigrid_missing.png"), Error);
}
