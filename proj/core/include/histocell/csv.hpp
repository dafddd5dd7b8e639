#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace histocell::csv {

/// Splits one CSV line on commas. No quoting is recognised.
std::vector<std::string_view> split(std::string_view line);

/// Parses a finite decimal or scientific-notation real. NaN, Inf, empty
/// fields and trailing garbage yield nullopt.
std::optional<double> parse_real(std::string_view field);

/// Shortest-unambiguous-enough decimal form: 17 significant digits, so
/// that parse_real(format_real(v)) == v for every finite v.
std::string format_real(double value);

std::string join(const std::vector<std::string>& fields, char sep = ',');

/// Line reader that tracks 1-based line numbers and strips a trailing '\r'.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);

  bool next(std::string& line);
  std::size_t line_number() const noexcept { return line_no_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

/// Opens `path` for writing, creating parent directories. Throws IoError.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace histocell::csv
