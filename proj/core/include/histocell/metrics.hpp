#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "histocell/dataset.hpp"

namespace histocell {

/// Pearson correlation of two equal-length columns; nullopt when either has
/// zero variance or fewer than 2 entries.
std::optional<double> pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct CcScore {
  std::vector<std::optional<double>> per_type;
  double mean = 0.0;  // over defined entries only
  std::vector<std::string> undefined_types;
};

/// Per-cell-type correlation across spots. Throws when no type is defined.
CcScore cc_score(const AbundanceMatrix& pred, const AbundanceMatrix& truth);

/// Rows scaled to sum to 1; all-zero rows stay zero.
Matrix row_normalize(const Matrix& values);

/// Mean absolute error over all entries, optionally on row proportions.
double l1_score(const AbundanceMatrix& pred, const AbundanceMatrix& truth, bool normalize = false);

struct EvalReport {
  std::string sample_id;
  std::vector<std::string> cell_types;
  std::vector<std::optional<double>> per_cell_type_cc;
  std::vector<double> per_cell_type_l1;
  double mean_cc = 0.0;  // NaN when no cell type has a defined correlation
  double l1 = 0.0;
  std::size_t n_spots = 0;
  std::vector<std::string> undefined_cc_types;
};

/// Report over all rows of `pred`/`truth`, labelled `sample_id`.
EvalReport evaluate(const AbundanceMatrix& pred, const AbundanceMatrix& truth, const std::string& sample_id,
                    bool normalize = false);

/// One report per sample of `spots` (rows aligned with pred/truth), sorted
/// by sample id.
std::vector<EvalReport> evaluate_by_sample(const AbundanceMatrix& pred, const AbundanceMatrix& truth,
                                           const SpotTable& spots, bool normalize = false);

/// Throws Error unless spot ids and cell types agree.
void check_aligned(const AbundanceMatrix& pred, const AbundanceMatrix& truth);

}  // namespace histocell
