#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "histocell/dataset.hpp"

namespace histocell {

inline constexpr double kDefaultLengthScaleFactor = 1.5;

/// RBF spatial weights over the n spots of one sample, rescaled so that
/// the entries sum to n. Symmetric with a zero diagonal.
struct WeightMatrix {
  Matrix w;
  double length_scale = 0.0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(w.rows()); }
};

/// w0_ij = exp(-d_ij^2 / (2 l^2)) for i != j, w0_ii = 0, then
/// w_ij = (n / sum w0) * w0_ij. Coincident spots get w0 = 1.
WeightMatrix rbf_weights(const Matrix& coords, double length_scale);

/// Bivariate Moran's R:
///   sum_ij w_ij (x_i - mean x)(y_j - mean y) / sqrt(sum (x_i - mean x)^2 * sum (y_i - mean y)^2)
/// Throws when x or y is constant.
double morans_r(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const WeightMatrix& w);

/// Median over spots of the distance to the nearest other spot.
double median_nearest_neighbor_distance(const Matrix& coords);

/// factor * median nearest-neighbour distance. Throws when that distance is 0.
double default_length_scale(const Matrix& coords, double factor = kDefaultLengthScaleFactor);

/// C x C Moran's R between cell-type columns. Entries involving a constant
/// column are NaN ("undefined"); the diagonal is univariate Moran's I.
struct ColocMatrix {
  std::string label;  // sample id or "averaged"
  std::vector<std::string> cell_types;
  Matrix r;

  std::size_t size() const noexcept { return cell_types.size(); }
  bool defined(std::size_t a, std::size_t b) const;
};

ColocMatrix colocalization_matrix(const AbundanceMatrix& abundances, const Matrix& coords, double length_scale,
                                  std::string label = {});

/// Entrywise mean weighted by `weights` (spot counts) over defined entries;
/// an entry undefined in every input stays undefined.
ColocMatrix average_coloc(const std::vector<ColocMatrix>& mats, const std::vector<double>& weights);

struct ColocComparison {
  std::vector<std::optional<double>> per_type_cosine;
  std::vector<std::optional<double>> per_type_correlation;
  double mean_cosine = 0.0;
  double mean_correlation = 0.0;
};

/// Row-by-row cosine similarity and Pearson correlation between predicted
/// and true colocalization rows (diagonal included). Columns undefined in
/// either matrix are dropped pairwise; rows without a usable pair are
/// excluded from the means. Throws when no row is usable.
ColocComparison compare_colocalization(const ColocMatrix& pred, const ColocMatrix& truth);

/// Clustermap leaf order from average-linkage clustering on 1 - r
/// (undefined entries count as distance 2). Ties resolve by cell-type name,
/// so the result does not depend on the input order of the types.
std::vector<std::size_t> upgma_order(const ColocMatrix& m);

/// Diverging color scale over [-1, 1]: blue, white, red.
struct HeatmapColors {
  static constexpr std::array<std::uint8_t, 3> negative{33, 102, 172};   // #2166ac at -1
  static constexpr std::array<std::uint8_t, 3> midpoint{247, 247, 247};  // #f7f7f7 at 0
  static constexpr std::array<std::uint8_t, 3> positive{178, 24, 43};    // #b2182b at +1
  static constexpr std::array<std::uint8_t, 3> undefined{189, 189, 189};
};

/// "#rrggbb" for a value; values outside [-1, 1] saturate, NaN is gray.
std::string heatmap_color(double value);

/// SVG heatmap with one <rect class="cell"> per matrix entry in `order`,
/// row/column labels and a color legend.
std::string render_heatmap(const ColocMatrix& m, const std::vector<std::size_t>& order);

/// Matrix CSV with a header row and a leading name column; undefined
/// entries are written as NA.
void save_coloc_csv(const ColocMatrix& m, const std::filesystem::path& path);

}  // namespace histocell
