#include "histocell/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "histocell/errors.hpp"

namespace histocell {

std::optional<double> pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw Error("pearson_correlation: length mismatch");
  if (a.size() < 2) return std::nullopt;
  // Constant columns are caught before centering: their mean need not be
  // representable, which would leave a tiny spurious variance.
  if ((a.array() == a(0)).all() || (b.array() == b(0)).all()) return std::nullopt;
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double na = ca.norm();
  const double nb = cb.norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return std::clamp(ca.dot(cb) / (na * nb), -1.0, 1.0);
}

void check_aligned(const AbundanceMatrix& pred, const AbundanceMatrix& truth) {
  if (pred.cell_types != truth.cell_types) throw Error("metrics: cell types of prediction and truth differ");
  if (pred.spot_ids != truth.spot_ids) throw Error("metrics: spot ids of prediction and truth differ");
  if (pred.values.rows() != truth.values.rows() || pred.values.cols() != truth.values.cols())
    throw Error("metrics: shape mismatch");
}

CcScore cc_score(const AbundanceMatrix& pred, const AbundanceMatrix& truth) {
  check_aligned(pred, truth);
  if (pred.size() < 2) throw Error("cc_score: need at least 2 spots");
  CcScore out;
  double sum = 0.0;
  std::size_t defined = 0;
  for (Eigen::Index c = 0; c < pred.values.cols(); ++c) {
    auto r = pearson_correlation(pred.values.col(c), truth.values.col(c));
    if (r) {
      sum += *r;
      ++defined;
    } else {
      out.undefined_types.push_back(pred.cell_types[static_cast<std::size_t>(c)]);
    }
    out.per_type.push_back(r);
  }
  if (defined == 0) throw Error("cc_score: no defined correlations");
  out.mean = sum / static_cast<double>(defined);
  return out;
}

Matrix row_normalize(const Matrix& values) {
  Matrix out = values;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s != 0.0) out.row(i) /= s;
  }
  return out;
}

double l1_score(const AbundanceMatrix& pred, const AbundanceMatrix& truth, bool normalize) {
  check_aligned(pred, truth);
  if (pred.values.size() == 0) throw Error("l1_score: empty input");
  if (normalize) return (row_normalize(pred.values) - row_normalize(truth.values)).cwiseAbs().mean();
  return (pred.values - truth.values).cwiseAbs().mean();
}

EvalReport evaluate(const AbundanceMatrix& pred, const AbundanceMatrix& truth, const std::string& sample_id,
                    bool normalize) {
  check_aligned(pred, truth);
  EvalReport report;
  report.sample_id = sample_id;
  report.cell_types = pred.cell_types;
  report.n_spots = pred.size();
  report.l1 = l1_score(pred, truth, normalize);

  const Matrix p = normalize ? row_normalize(pred.values) : pred.values;
  const Matrix t = normalize ? row_normalize(truth.values) : truth.values;
  double sum = 0.0;
  std::size_t defined = 0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    report.per_cell_type_l1.push_back((p.col(c) - t.col(c)).cwiseAbs().mean());
    // The CC axis is always on raw values so it matches cc_score.
    auto r = pearson_correlation(pred.values.col(c), truth.values.col(c));
    if (r) {
      sum += *r;
      ++defined;
    } else {
      report.undefined_cc_types.push_back(pred.cell_types[static_cast<std::size_t>(c)]);
    }
    report.per_cell_type_cc.push_back(r);
  }
  report.mean_cc = defined ? sum / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
  return report;
}

std::vector<EvalReport> evaluate_by_sample(const AbundanceMatrix& pred, const AbundanceMatrix& truth,
                                           const SpotTable& spots, bool normalize) {
  check_aligned(pred, truth);
  if (spots.spot_ids != pred.spot_ids) throw Error("evaluate_by_sample: spots are not aligned with predictions");
  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (std::size_t i = 0; i < spots.size(); ++i) rows_of[spots.sample_ids[i]].push_back(i);
  std::vector<EvalReport> reports;
  for (const auto& [sample, rows] : rows_of)
    reports.push_back(evaluate(pred.subset(rows), truth.subset(rows), sample, normalize));
  return reports;
}

}  // namespace histocell
