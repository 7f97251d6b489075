#pragma once

#include "layersim/matrix.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace layersim {

enum class Colormap { Viridis, Gray };

Colormap parse_colormap(std::string_view name);
std::array<std::uint8_t, 3> colormap_rgb(Colormap map, double t);

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb; // row-major, top row first

  std::array<std::uint8_t, 3> pixel(std::size_t x, std::size_t y) const {
    const std::size_t o = 3 * (y * width + x);
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }
};

struct HeatmapStyle {
  Colormap colormap = Colormap::Viridis;
  double vmin = 0.0;
  double vmax = 1.0;
  std::size_t cell_px = 8;
};

// Cell (i, j) becomes a cell_px square; row 0 is drawn at the bottom so depth
// increases upwards, column 0 at the left.
Image render_heatmap(const Matrix& values, const HeatmapStyle& style = {});

// Binary PPM (P6, maxval 255).
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

} // namespace layersim
