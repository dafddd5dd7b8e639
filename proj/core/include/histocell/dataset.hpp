#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace histocell {

using Matrix = Eigen::MatrixXd;

/// Per-spot identity, grouping and location, plus the embedding of the
/// image patch centered on the spot (one row per spot).
///
/// Invariants (checked by the loaders and by `validate`): unique spot ids,
/// non-empty sample and patient ids, each sample belongs to one patient,
/// finite coordinates and embedding dimension >= 1.
struct SpotTable {
  std::vector<std::string> spot_ids;
  std::vector<std::string> sample_ids;
  std::vector<std::string> patient_ids;
  std::vector<double> x;
  std::vector<double> y;
  Matrix embeddings;

  std::size_t size() const noexcept { return spot_ids.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(embeddings.cols()); }

  /// Rows `rows` in the given order.
  SpotTable subset(std::span<const std::size_t> rows) const;
  /// n x 2 matrix of (x, y).
  Matrix coords() const;
};

/// Embedding vectors from one source (e.g. one foundation model), keyed by
/// spot id.
struct EmbeddingBlock {
  std::string source_name;
  std::vector<std::string> spot_ids;
  Matrix rows;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(rows.cols()); }
};

/// Per-spot abundances of C cell types. Rows follow `spot_ids`.
struct AbundanceMatrix {
  std::vector<std::string> spot_ids;
  std::vector<std::string> cell_types;
  Matrix values;

  std::size_t size() const noexcept { return spot_ids.size(); }
  AbundanceMatrix subset(std::span<const std::size_t> rows) const;
};

/// Train/test partition of the spots of one table. Ids are listed in table
/// order.
struct SampleSplit {
  std::string name;
  std::vector<std::string> train_spot_ids;
  std::vector<std::string> test_spot_ids;
};

struct LeaveOnePatientOut {};
struct FixedSplit {
  std::string name = "fixed";
  std::vector<std::string> train_spot_ids;
  std::vector<std::string> test_spot_ids;
};
using SplitMode = std::variant<LeaveOnePatientOut, FixedSplit>;

/// One schema problem found while checking a file.
struct Finding {
  std::string file;
  std::size_t line = 0;  // 0: whole-file finding
  std::string message;

  std::string str() const;
};

/// Loads a spots CSV with inline embedding columns e0..e{D-1}.
SpotTable load_spot_table(const std::filesystem::path& path);

/// Loads a spots CSV; when it has no inline embedding columns, the
/// concatenation of `blocks` is joined by spot id. Inline columns take
/// precedence over blocks.
SpotTable load_spot_table(const std::filesystem::path& path, std::span<const EmbeddingBlock> blocks);

/// Loads a spots CSV whose embedding columns are optional (coordinates and
/// grouping only are required). Used where embeddings are not needed.
SpotTable load_spot_locations(const std::filesystem::path& path);

/// Every schema finding in a spots CSV, instead of stopping at the first.
/// An empty result means the file is clean. Missing files throw IoError.
std::vector<Finding> check_spot_file(const std::filesystem::path& path, bool require_embeddings = true);

/// Loads abundances and reorders rows to follow `spots`. Spots absent from
/// the table are ignored (they may have been filtered out). Ground truth
/// must be non-negative; predictions (ground_truth = false) may not be.
AbundanceMatrix load_abundance_table(const std::filesystem::path& path, const SpotTable& spots,
                                     bool ground_truth = true);

/// Schema findings for an abundance CSV. When `expected_spot_ids` is
/// non-null, each of those ids must be present.
std::vector<Finding> check_abundance_file(const std::filesystem::path& path,
                                          const std::vector<std::string>* expected_spot_ids);

/// Loads a per-source embedding CSV (`spot_id,e0,...`).
EmbeddingBlock load_embedding_block(const std::filesystem::path& path, std::string source_name);

/// Joins blocks column-wise in the given order; row order follows the first
/// block. Names are joined with '+'.
EmbeddingBlock concat_embeddings(std::span<const EmbeddingBlock> blocks);

std::vector<SampleSplit> make_splits(const SpotTable& spots, const SplitMode& mode);

/// Checks the in-memory invariants; throws Error on the first violation.
void validate(const SpotTable& spots);
void validate(const AbundanceMatrix& abundances, bool ground_truth);

void save_spot_table(const SpotTable& spots, const std::filesystem::path& path);
void save_abundance_table(const AbundanceMatrix& abundances, const std::filesystem::path& path);
void save_embedding_block(const EmbeddingBlock& block, const std::filesystem::path& path);

/// Row indices of `ids` in `all_ids`; throws Error naming the first unknown id.
std::vector<std::size_t> index_rows(const std::vector<std::string>& all_ids, const std::vector<std::string>& ids);

/// Distinct values in first-appearance order.
std::vector<std::string> distinct(const std::vector<std::string>& values);

}  // namespace histocell
