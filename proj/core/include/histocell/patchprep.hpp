#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "histocell/dataset.hpp"

namespace histocell {

inline constexpr int kDefaultPatchSize = 224;
inline constexpr std::uint8_t kDefaultWhiteThreshold = 220;
inline constexpr double kDefaultMaxBackground = 0.8;

/// Square crop window; top-left corner plus side length, in pixels.
struct PatchBBox {
  int x0 = 0;
  int y0 = 0;
  int size = kDefaultPatchSize;

  friend bool operator==(const PatchBBox&, const PatchBBox&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major RGB8 pixels.
struct PatchRaster {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  PatchRaster() = default;
  PatchRaster(int w, int h, Rgb fill = {0, 0, 0});

  Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  const Rgb& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

/// Crop window of side `size` centered on (center_x, center_y), shifted to
/// lie fully inside the image.
PatchBBox patch_bbox(double center_x, double center_y, int size, int image_w, int image_h);

PatchRaster crop(const PatchRaster& image, const PatchBBox& box);

/// Fraction of pixels whose three channels all exceed `white_threshold`.
double background_fraction(const PatchRaster& patch, std::uint8_t white_threshold = kDefaultWhiteThreshold);

/// Keeps spots whose background fraction is <= max_background, in order.
/// Every spot must have an entry in `fractions`.
SpotTable filter_spots(const SpotTable& spots, const std::map<std::string, double>& fractions,
                       double max_background = kDefaultMaxBackground);

/// `spot_id,background_fraction` files.
std::map<std::string, double> load_fractions(const std::filesystem::path& path);
void save_fractions(const std::map<std::string, double>& fractions, const std::filesystem::path& path);

/// PNG decoding/encoding boundary. Any bit depth and color type is
/// converted to 8-bit RGB on read; alpha is dropped.
PatchRaster read_png(const std::filesystem::path& path);
void write_png(const PatchRaster& raster, const std::filesystem::path& path);

}  // namespace histocell
