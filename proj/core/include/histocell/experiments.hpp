#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "histocell/dataset.hpp"
#include "histocell/metrics.hpp"
#include "histocell/patchprep.hpp"
#include "histocell/regressor.hpp"
#include "histocell/spatial.hpp"

namespace histocell {

/// Files making up one dataset. Extra embedding blocks are used only when
/// the spots file carries no inline e0.. columns.
struct DatasetPaths {
  std::filesystem::path spots;
  std::filesystem::path abundances;
  std::vector<std::filesystem::path> embeddings;
  std::filesystem::path fractions;  // optional background fractions
  double max_background = kDefaultMaxBackground;
};

struct SpatialOptions {
  double length_scale = 0.0;  // <= 0: derive per sample
  double length_scale_factor = kDefaultLengthScaleFactor;
};

enum class ExperimentMode { loo, cross };

struct ExperimentConfig {
  std::string name = "experiment";
  ExperimentMode mode = ExperimentMode::loo;
  DatasetPaths data;       // training data (and test data for loo)
  DatasetPaths test_data;  // cross mode only
  TrainConfig train;
  SpatialOptions spatial;
  std::filesystem::path output_dir = "out";
  bool normalize = false;  // L1 on row proportions
  bool clamp = false;      // clamp predictions at zero
  std::size_t workers = 1;
  std::vector<std::string> folds;  // restrict loo to these folds; empty = all
  std::filesystem::path model;     // checkpoint for stand-alone evaluation

  std::filesystem::path experiment_dir() const { return output_dir / name; }
};

/// Strict JSON mapping: unknown keys and mistyped values throw ConfigError.
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

struct Dataset {
  SpotTable spots;
  AbundanceMatrix abundances;
};

/// Loads spots (joining embedding blocks), applies the optional background
/// filter, then loads ground-truth abundances in spot order.
Dataset load_dataset(const DatasetPaths& paths);

/// Everything computed when scoring predictions on a set of spots.
struct Evaluation {
  std::vector<EvalReport> per_sample;
  EvalReport pooled;
  std::optional<double> baseline_l1;  // constant training-mean predictor
  std::vector<std::optional<ColocComparison>> per_sample_coloc;
  std::optional<ColocComparison> coloc;  // spot-weighted average over samples
};

/// Scores `pred` against `truth` per sample and pooled, computes predicted
/// and true colocalization per sample, and writes report.csv plus
/// pred/ and truth/ coloc CSV+SVG files under `dir`.
/// `baseline_means` (one value per cell type) enables the baseline row.
Evaluation evaluate_and_write(const SpotTable& spots, const AbundanceMatrix& truth, const AbundanceMatrix& pred,
                              const ExperimentConfig& cfg, const std::filesystem::path& dir,
                              const std::string& split_name,
                              const std::optional<Eigen::RowVectorXd>& baseline_means = std::nullopt);

struct FoldResult {
  std::string name;
  bool ok = false;
  std::string error;
  std::size_t n_test_spots = 0;
  Evaluation evaluation;
  std::vector<double> history;
};

struct ExperimentResult {
  std::vector<FoldResult> folds;
  std::filesystem::path directory;
  std::optional<std::filesystem::path> summary;  // absent when only some folds ran
};

/// Leave-one-patient-out: one fold per patient, each trained on every other
/// patient. Folds run on `cfg.workers` threads; a failed fold is reported in
/// the summary without stopping the others. When `cancel` becomes true,
/// folds that have not started are marked cancelled.
ExperimentResult run_loo(const ExperimentConfig& cfg, const std::atomic<bool>* cancel = nullptr);
ExperimentResult run_loo(const Dataset& data, const ExperimentConfig& cfg, const std::atomic<bool>* cancel = nullptr);

/// Trains on all of `cfg.data` and evaluates on all of `cfg.test_data`.
ExperimentResult run_cross_dataset(const ExperimentConfig& cfg);
ExperimentResult run_cross_dataset(const Dataset& train_data, const Dataset& test_data, const ExperimentConfig& cfg);

/// Throws Error describing differing cell types or embedding widths.
void check_compatible(const Dataset& train_data, const Dataset& test_data);

/// summary.csv columns, in order.
inline constexpr const char* kSummaryHeader =
    "fold,status,n_test_spots,mean_cc,l1,baseline_l1,coloc_cosine,coloc_correlation";
/// report.csv columns, in order.
inline constexpr const char* kReportHeader = "split,sample_id,cell_type,n_spots,cc,l1,coloc_cosine,coloc_correlation";

}  // namespace histocell
