#include "histocell/objective.hpp"

#include <cmath>

#include "histocell/errors.hpp"

namespace histocell {
namespace {

void check_shapes(const Matrix& pred, const Matrix& truth, const char* what) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw Error(std::string(what) + ": shape mismatch (" + std::to_string(pred.rows()) + "x" +
                std::to_string(pred.cols()) + " vs " + std::to_string(truth.rows()) + "x" +
                std::to_string(truth.cols()) + ")");
  if (pred.size() == 0) throw Error(std::string(what) + ": empty input");
}

// Centered copy, exactly zero when v is constant.
Eigen::VectorXd center(const Eigen::VectorXd& v) {
  if ((v.array() == v(0)).all()) return Eigen::VectorXd::Zero(v.size());
  return v.array() - v.mean();
}

// Per-column Pearson term and, optionally, its gradient w.r.t. the pred column.
double pearson_column(const Eigen::VectorXd& p, const Eigen::VectorXd& t, double epsilon, Eigen::VectorXd* grad) {
  const Eigen::VectorXd a = center(p);
  const Eigen::VectorXd b = center(t);
  const double numer = a.dot(b);
  const double norm_a = a.norm();
  const double norm_b = b.norm();
  const double denom = norm_a * norm_b + epsilon;
  if (grad) {
    // d/dp_i of -numer/denom; the centering terms vanish because a and b sum to 0.
    *grad = -b / denom;
    if (norm_a > 0.0) *grad += (numer * norm_b / (norm_a * denom * denom)) * a;
  }
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return -numer / denom;
}

}  // namespace

double mse(const Matrix& pred, const Matrix& truth) {
  check_shapes(pred, truth, "mse");
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

double mae(const Matrix& pred, const Matrix& truth) {
  check_shapes(pred, truth, "mae");
  return (pred - truth).cwiseAbs().sum() / static_cast<double>(pred.size());
}

double pearson_loss(const Matrix& pred, const Matrix& truth, double epsilon) {
  check_shapes(pred, truth, "pearson_loss");
  if (pred.rows() < 2) throw Error("pearson_loss: need at least 2 rows");
  if (!(epsilon > 0.0)) throw Error("pearson_loss: epsilon must be positive");
  double sum = 0.0;
  for (Eigen::Index c = 0; c < pred.cols(); ++c) sum += pearson_column(pred.col(c), truth.col(c), epsilon, nullptr);
  return sum / static_cast<double>(pred.cols());
}

LossBreakdown composite_loss(const Matrix& pred, const Matrix& truth, const LossWeights& weights) {
  check_shapes(pred, truth, "composite_loss");
  if (pred.rows() < 2) throw Error("composite_loss: need at least 2 rows");
  if (!(weights.epsilon > 0.0)) throw Error("composite_loss: epsilon must be positive");

  const double count = static_cast<double>(pred.size());
  const Matrix diff = pred - truth;

  LossBreakdown out;
  out.mse = diff.squaredNorm() / count;
  out.mae = diff.cwiseAbs().sum() / count;
  out.grad = (2.0 / count) * diff;
  out.grad += (weights.lambda1 / count) * diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });

  const double cols = static_cast<double>(pred.cols());
  Eigen::VectorXd col_grad;
  double pearson_sum = 0.0;
  for (Eigen::Index c = 0; c < pred.cols(); ++c) {
    pearson_sum += pearson_column(pred.col(c), truth.col(c), weights.epsilon, &col_grad);
    out.grad.col(c) += (weights.lambda2 / cols) * col_grad;
  }
  out.pearson = pearson_sum / cols;
  out.total = out.mse + weights.lambda1 * out.mae + weights.lambda2 * out.pearson;
  return out;
}

}  // namespace histocell
