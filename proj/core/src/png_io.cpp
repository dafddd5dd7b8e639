#include <cstdio>
#include <memory>

#include <png.h>

#include "histocell/errors.hpp"
#include "histocell/patchprep.hpp"

namespace histocell {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PatchRaster read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  PatchRaster raster(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < raster.pixels.size(); ++i)
    raster.pixels[i] = {buffer[3 * i], buffer[3 * i + 1], buffer[3 * i + 2]};
  return raster;
}

void write_png(const PatchRaster& raster, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer;
  buffer.reserve(raster.pixels.size() * 3);
  for (const auto& p : raster.pixels) buffer.insert(buffer.end(), p.begin(), p.end());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  if (!png_image_write_to_stdio(&image, file.get(), 0, buffer.data(), 0, nullptr))
    throw IoError("cannot encode PNG " + path.string() + ": " + image.message);
}

}  // namespace histocell
