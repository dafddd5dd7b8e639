#include "histocell/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "histocell/csv.hpp"
#include "histocell/errors.hpp"
#include "histocell/metrics.hpp"

namespace histocell {
namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

// Centered copy; exactly zero for a constant vector (the mean of a constant
// vector is not always representable as that constant).
Eigen::VectorXd center(const Eigen::VectorXd& v) {
  if ((v.array() == v(0)).all()) return Eigen::VectorXd::Zero(v.size());
  return v.array() - v.mean();
}

}  // namespace

WeightMatrix rbf_weights(const Matrix& coords, double length_scale) {
  if (coords.cols() != 2) throw Error("rbf_weights: coordinates must be n x 2");
  const Eigen::Index n = coords.rows();
  if (n < 2) throw Error("rbf_weights: need at least 2 spots");
  if (!(length_scale > 0.0) || !std::isfinite(length_scale)) throw Error("rbf_weights: length scale must be > 0");

  WeightMatrix out;
  out.length_scale = length_scale;
  out.w = Matrix::Zero(n, n);
  const double two_l2 = 2.0 * length_scale * length_scale;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (coords.row(i) - coords.row(j)).squaredNorm();
      const double w0 = std::exp(-d2 / two_l2);
      out.w(i, j) = w0;
      out.w(j, i) = w0;
      total += 2.0 * w0;
    }
  }
  if (!(total > 0.0)) throw Error("rbf_weights: every kernel weight underflowed; length scale too small");
  // n * w0 / W rather than (n / W) * w0 keeps the two-spot case exactly 1.
  const double nn = static_cast<double>(n);
  out.w = (nn * out.w.array() / total).matrix();
  return out;
}

double morans_r(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const WeightMatrix& w) {
  const auto n = static_cast<Eigen::Index>(w.size());
  if (x.size() != n || y.size() != n) throw Error("morans_r: vector length does not match weight matrix");
  const Eigen::VectorXd xc = center(x);
  const Eigen::VectorXd yc = center(y);
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) throw Error("morans_r: zero variance");
  return xc.dot(w.w * yc) / std::sqrt(sxx * syy);
}

double median_nearest_neighbor_distance(const Matrix& coords) {
  const Eigen::Index n = coords.rows();
  if (n < 2) throw Error("median_nearest_neighbor_distance: need at least 2 spots");
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (coords.row(i) - coords.row(j)).norm();
      nearest[static_cast<std::size_t>(i)] = std::min(nearest[static_cast<std::size_t>(i)], d);
      nearest[static_cast<std::size_t>(j)] = std::min(nearest[static_cast<std::size_t>(j)], d);
    }
  std::sort(nearest.begin(), nearest.end());
  const auto mid = nearest.size() / 2;
  return nearest.size() % 2 ? nearest[mid] : 0.5 * (nearest[mid - 1] + nearest[mid]);
}

double default_length_scale(const Matrix& coords, double factor) {
  const double d = median_nearest_neighbor_distance(coords);
  if (!(d > 0.0)) throw Error("default_length_scale: median nearest-neighbour distance is 0");
  return factor * d;
}

bool ColocMatrix::defined(std::size_t a, std::size_t b) const {
  return !std::isnan(r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
}

ColocMatrix colocalization_matrix(const AbundanceMatrix& abundances, const Matrix& coords, double length_scale,
                                  std::string label) {
  if (coords.rows() != abundances.values.rows()) throw Error("colocalization_matrix: coords and abundances differ in length");
  if (abundances.size() < 2) throw Error("colocalization_matrix: need at least 2 spots");
  const WeightMatrix w = rbf_weights(coords, length_scale);

  const Eigen::Index c = abundances.values.cols();
  Matrix centered(abundances.values.rows(), c);
  for (Eigen::Index k = 0; k < c; ++k) centered.col(k) = center(abundances.values.col(k));
  const Eigen::VectorXd ss = centered.colwise().squaredNorm().transpose();
  const Matrix cross = centered.transpose() * (w.w * centered);

  ColocMatrix out;
  out.label = std::move(label);
  out.cell_types = abundances.cell_types;
  out.r = Matrix::Constant(c, c, kUndefined);
  for (Eigen::Index a = 0; a < c; ++a)
    for (Eigen::Index b = a; b < c; ++b) {
      if (ss(a) == 0.0 || ss(b) == 0.0) continue;
      const double v = cross(a, b) / std::sqrt(ss(a) * ss(b));
      out.r(a, b) = v;
      out.r(b, a) = v;
    }
  return out;
}

ColocMatrix average_coloc(const std::vector<ColocMatrix>& mats, const std::vector<double>& weights) {
  if (mats.empty()) throw Error("average_coloc: no matrices");
  if (weights.size() != mats.size()) throw Error("average_coloc: one weight per matrix required");
  const auto& types = mats.front().cell_types;
  for (std::size_t k = 0; k < mats.size(); ++k) {
    if (mats[k].cell_types != types) throw Error("average_coloc: cell types differ between matrices");
    if (!(weights[k] > 0.0)) throw Error("average_coloc: weights must be positive");
  }
  const auto c = static_cast<Eigen::Index>(types.size());
  ColocMatrix out;
  out.label = "averaged";
  out.cell_types = types;
  out.r = Matrix::Constant(c, c, kUndefined);
  for (Eigen::Index a = 0; a < c; ++a)
    for (Eigen::Index b = 0; b < c; ++b) {
      double sum = 0.0;
      double mass = 0.0;
      for (std::size_t k = 0; k < mats.size(); ++k) {
        const double v = mats[k].r(a, b);
        if (std::isnan(v)) continue;
        sum += weights[k] * v;
        mass += weights[k];
      }
      if (mass > 0.0) out.r(a, b) = sum / mass;
    }
  return out;
}

ColocComparison compare_colocalization(const ColocMatrix& pred, const ColocMatrix& truth) {
  if (pred.cell_types != truth.cell_types) throw Error("compare_colocalization: cell types differ");
  const std::size_t c = pred.size();
  ColocComparison out;
  double cos_sum = 0.0;
  double corr_sum = 0.0;
  std::size_t cos_n = 0;
  std::size_t corr_n = 0;
  for (std::size_t a = 0; a < c; ++a) {
    std::vector<double> p;
    std::vector<double> t;
    for (std::size_t b = 0; b < c; ++b) {
      if (!pred.defined(a, b) || !truth.defined(a, b)) continue;
      p.push_back(pred.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
      t.push_back(truth.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
    }
    const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<Eigen::Index>(p.size()));
    const Eigen::Map<const Eigen::VectorXd> tv(t.data(), static_cast<Eigen::Index>(t.size()));
    std::optional<double> cosine;
    const double norms = pv.norm() * tv.norm();
    if (!p.empty() && norms > 0.0) cosine = std::clamp(pv.dot(tv) / norms, -1.0, 1.0);
    const auto corr = p.empty() ? std::nullopt : pearson_correlation(pv, tv);
    if (cosine) {
      cos_sum += *cosine;
      ++cos_n;
    }
    if (corr) {
      corr_sum += *corr;
      ++corr_n;
    }
    out.per_type_cosine.push_back(cosine);
    out.per_type_correlation.push_back(corr);
  }
  if (cos_n == 0 && corr_n == 0) throw Error("compare_colocalization: no valid rows");
  out.mean_cosine = cos_n ? cos_sum / static_cast<double>(cos_n) : kUndefined;
  out.mean_correlation = corr_n ? corr_sum / static_cast<double>(corr_n) : kUndefined;
  return out;
}

std::vector<std::size_t> upgma_order(const ColocMatrix& m) {
  const std::size_t c = m.size();
  if (c == 0) return {};

  // Work in name order so that the input permutation cannot matter.
  std::vector<std::size_t> by_name(c);
  std::iota(by_name.begin(), by_name.end(), std::size_t{0});
  std::stable_sort(by_name.begin(), by_name.end(),
                   [&](std::size_t a, std::size_t b) { return m.cell_types[a] < m.cell_types[b]; });

  auto leaf_distance = [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    const double ab = m.r(ia, ib);
    const double ba = m.r(ib, ia);
    if (std::isnan(ab) || std::isnan(ba)) return 2.0;
    return 1.0 - 0.5 * (ab + ba);
  };

  struct Cluster {
    std::vector<std::size_t> leaves;  // name ranks, in display order
    std::size_t first_rank;           // smallest name rank among leaves
  };
  std::vector<Cluster> clusters;
  std::vector<std::vector<double>> dist(c, std::vector<double>(c, 0.0));
  for (std::size_t i = 0; i < c; ++i) {
    clusters.push_back({{i}, i});
    for (std::size_t j = 0; j < c; ++j)
      if (i != j) dist[i][j] = leaf_distance(by_name[i], by_name[j]);
  }

  std::vector<std::size_t> active(c);
  std::iota(active.begin(), active.end(), std::size_t{0});
  while (active.size() > 1) {
    std::size_t best_a = 0;
    std::size_t best_b = 1;
    auto key = [&](std::size_t a, std::size_t b) {
      const auto ra = clusters[active[a]].first_rank;
      const auto rb = clusters[active[b]].first_rank;
      return std::make_tuple(dist[active[a]][active[b]], std::min(ra, rb), std::max(ra, rb));
    };
    for (std::size_t a = 0; a < active.size(); ++a)
      for (std::size_t b = a + 1; b < active.size(); ++b)
        if (key(a, b) < key(best_a, best_b)) {
          best_a = a;
          best_b = b;
        }

    const auto ca = active[best_a];
    const auto cb = active[best_b];
    const auto& lo = clusters[ca].first_rank < clusters[cb].first_rank ? clusters[ca] : clusters[cb];
    const auto& hi = clusters[ca].first_rank < clusters[cb].first_rank ? clusters[cb] : clusters[ca];
    Cluster merged{lo.leaves, lo.first_rank};
    merged.leaves.insert(merged.leaves.end(), hi.leaves.begin(), hi.leaves.end());

    const double na = static_cast<double>(clusters[ca].leaves.size());
    const double nb = static_cast<double>(clusters[cb].leaves.size());
    const std::size_t id = clusters.size();
    for (auto& row : dist) row.push_back(0.0);
    dist.emplace_back(id + 1, 0.0);
    for (const auto k : active) {
      if (k == ca || k == cb) continue;
      const double d = (na * dist[k][ca] + nb * dist[k][cb]) / (na + nb);
      dist[k][id] = d;
      dist[id][k] = d;
    }
    clusters.push_back(std::move(merged));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_a));
    active.push_back(id);
  }

  std::vector<std::size_t> order;
  for (const auto rank : clusters[active.front()].leaves) order.push_back(by_name[rank]);
  return order;
}

void save_coloc_csv(const ColocMatrix& m, const std::filesystem::path& path) {
  auto out = csv::open_output(path);
  out << "cell_type";
  for (const auto& t : m.cell_types) out << ',' << t;
  out << '\n';
  for (std::size_t a = 0; a < m.size(); ++a) {
    out << m.cell_types[a];
    for (std::size_t b = 0; b < m.size(); ++b)
      out << ',' << (m.defined(a, b) ? csv::format_real(m.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))) : "NA");
    out << '\n';
  }
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

}  // namespace histocell
