#include "histocell/patchprep.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "histocell/csv.hpp"
#include "histocell/errors.hpp"

namespace histocell {

PatchRaster::PatchRaster(int w, int h, Rgb fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
  if (w < 0 || h < 0) throw Error("PatchRaster: negative size");
}

PatchBBox patch_bbox(double center_x, double center_y, int size, int image_w, int image_h) {
  if (size <= 0) throw Error("patch_bbox: size must be positive");
  if (size > image_w || size > image_h)
    throw Error("patch_bbox: image " + std::to_string(image_w) + "x" + std::to_string(image_h) + " is smaller than a " +
                std::to_string(size) + " px patch");
  if (!std::isfinite(center_x) || !std::isfinite(center_y) || center_x < 0 || center_y < 0 || center_x > image_w ||
      center_y > image_h)
    throw Error("patch_bbox: center outside image");
  const auto place = [size](double center, int extent) {
    const auto x0 = static_cast<long long>(std::llround(center)) - size / 2;
    return static_cast<int>(std::clamp<long long>(x0, 0, extent - size));
  };
  return {place(center_x, image_w), place(center_y, image_h), size};
}

PatchRaster crop(const PatchRaster& image, const PatchBBox& box) {
  if (box.x0 < 0 || box.y0 < 0 || box.x0 + box.size > image.width || box.y0 + box.size > image.height)
    throw Error("crop: box outside image");
  PatchRaster out(box.size, box.size);
  for (int y = 0; y < box.size; ++y)
    for (int x = 0; x < box.size; ++x) out.at(x, y) = image.at(box.x0 + x, box.y0 + y);
  return out;
}

double background_fraction(const PatchRaster& patch, std::uint8_t white_threshold) {
  if (patch.pixels.empty()) return 0.0;
  const auto background = std::count_if(patch.pixels.begin(), patch.pixels.end(), [&](const Rgb& p) {
    return std::min({p[0], p[1], p[2]}) > white_threshold;
  });
  return static_cast<double>(background) / static_cast<double>(patch.pixels.size());
}

SpotTable filter_spots(const SpotTable& spots, const std::map<std::string, double>& fractions, double max_background) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < spots.size(); ++i) {
    const auto it = fractions.find(spots.spot_ids[i]);
    if (it == fractions.end()) throw Error("filter_spots: no background fraction for spot '" + spots.spot_ids[i] + "'");
    if (it->second <= max_background) keep.push_back(i);
  }
  if (keep.empty() && spots.size() > 0)
    spdlog::warn("filter_spots: all {} spots exceed background fraction {}", spots.size(), max_background);
  auto out = spots.subset(keep);
  if (keep.empty()) out.embeddings.resize(0, spots.embeddings.cols());
  return out;
}

std::map<std::string, double> load_fractions(const std::filesystem::path& path) {
  csv::LineReader reader(path);
  std::string line;
  if (!reader.next(line) || line != "spot_id,background_fraction")
    throw SchemaError(reader.path(), 1, "expected header 'spot_id,background_fraction'");
  std::map<std::string, double> out;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const auto v = fields.size() == 2 ? csv::parse_real(fields[1]) : std::nullopt;
    if (!v || *v < 0.0 || *v > 1.0) throw SchemaError(reader.path(), reader.line_number(), "malformed fraction row");
    if (!out.emplace(std::string(fields[0]), *v).second)
      throw SchemaError(reader.path(), reader.line_number(), "duplicate spot_id '" + std::string(fields[0]) + "'");
  }
  return out;
}

void save_fractions(const std::map<std::string, double>& fractions, const std::filesystem::path& path) {
  auto out = csv::open_output(path);
  out << "spot_id,background_fraction\n";
  for (const auto& [id, f] : fractions) out << id << ',' << csv::format_real(f) << '\n';
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

}  // namespace histocell
