#include "layersim/render.hpp"

#include "io_util.hpp"
#include "layersim/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace layersim {
namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 9> kViridis = {{
    {68, 1, 84},
    {71, 44, 122},
    {59, 81, 139},
    {44, 113, 142},
    {33, 145, 140},
    {39, 173, 129},
    {92, 200, 99},
    {170, 220, 50},
    {253, 231, 37},
}};

} // namespace

Colormap parse_colormap(std::string_view name) {
  if (name == "viridis") return Colormap::Viridis;
  if (name == "gray" || name == "grey") return Colormap::Gray;
  throw Error(ErrorCode::InvalidArgument, "unknown colormap '" + std::string(name) + "'");
}

std::array<std::uint8_t, 3> colormap_rgb(Colormap map, double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (map == Colormap::Gray) {
    const auto g = static_cast<std::uint8_t>(std::lround(255.0 * t));
    return {g, g, g};
  }
  const double pos = t * static_cast<double>(kViridis.size() - 1);
  const auto lo = std::min<std::size_t>(static_cast<std::size_t>(pos), kViridis.size() - 2);
  const double f = pos - static_cast<double>(lo);
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c)
    out[c] = static_cast<std::uint8_t>(std::lround(std::lerp(kViridis[lo][c], kViridis[lo + 1][c], f)));
  return out;
}

Image render_heatmap(const Matrix& values, const HeatmapStyle& style) {
  if (values.rows == 0 || values.cols == 0) throw Error(ErrorCode::InvalidArgument, "cannot render an empty matrix");
  if (style.cell_px == 0) throw Error(ErrorCode::InvalidArgument, "cell size must be positive");
  if (!(style.vmax > style.vmin)) throw Error(ErrorCode::InvalidArgument, "color range needs vmax > vmin");
  for (double v : values.values)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "cannot render non-finite values");

  Image img;
  img.width = values.cols * style.cell_px;
  img.height = values.rows * style.cell_px;
  img.rgb.resize(3 * img.width * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    const std::size_t i = values.rows - 1 - y / style.cell_px;
    for (std::size_t x = 0; x < img.width; ++x) {
      const double v = values(i, x / style.cell_px);
      const auto rgb = colormap_rgb(style.colormap, (v - style.vmin) / (style.vmax - style.vmin));
      std::copy(rgb.begin(), rgb.end(), img.rgb.begin() + 3 * (y * img.width + x));
    }
  }
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
  detail::write_file(path, out);
}

Image read_ppm(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  std::istringstream in(bytes);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (!in || magic != "P6" || maxval != 255)
    throw Error(ErrorCode::Format, path.string() + ": not a P6 image with maxval 255");
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() - offset != 3 * w * h) throw Error(ErrorCode::Format, path.string() + ": pixel data size mismatch");
  Image img{w, h, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end())};
  return img;
}

} // namespace layersim
