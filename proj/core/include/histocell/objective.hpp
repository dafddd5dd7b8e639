#pragma once

#include "histocell/dataset.hpp"

namespace histocell {

/// Weights of the composite loss MSE + lambda1*MAE + lambda2*Pearson.
struct LossWeights {
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double epsilon = 1e-8;  // added to the Pearson denominator
};

struct LossBreakdown {
  double mse = 0.0;
  double mae = 0.0;
  double pearson = 0.0;
  double total = 0.0;
  Matrix grad;  // d total / d pred, same shape as pred
};

/// Mean squared error over all n*C entries.
double mse(const Matrix& pred, const Matrix& truth);

/// Mean absolute error over all n*C entries.
double mae(const Matrix& pred, const Matrix& truth);

/// Negated Pearson correlation, computed per column across rows and averaged
/// over columns:
///
///   -sum(a_i * b_i) / (sqrt(sum a_i^2) * sqrt(sum b_i^2) + epsilon)
///
/// with a, b the column-centered pred and truth. A column with zero variance
/// in either input contributes exactly 0. Requires at least 2 rows.
double pearson_loss(const Matrix& pred, const Matrix& truth, double epsilon);

/// All three terms, their weighted total and the analytic gradient of the
/// total with respect to `pred`. The MAE subgradient at zero error is 0.
LossBreakdown composite_loss(const Matrix& pred, const Matrix& truth, const LossWeights& weights);

}  // namespace histocell
