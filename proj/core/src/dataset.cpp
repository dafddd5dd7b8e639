#include "histocell/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "histocell/csv.hpp"
#include "histocell/errors.hpp"

namespace histocell {
namespace {

// Throws on the first finding, or collects all of them.
class FindingSink {
 public:
  FindingSink(std::string file, bool collect) : file_(std::move(file)), collect_(collect) {}

  void operator()(std::size_t line, const std::string& message) {
    if (!collect_) throw SchemaError(file_, line, message);
    findings_.push_back({file_, line, message});
  }

  bool empty() const noexcept { return findings_.empty(); }
  std::vector<Finding> take() { return std::move(findings_); }

 private:
  std::string file_;
  bool collect_;
  std::vector<Finding> findings_;
};

// "e17" -> 17
std::optional<std::size_t> embedding_column_index(std::string_view name) {
  if (name.size() < 2 || name.front() != 'e') return std::nullopt;
  std::size_t index = 0;
  const auto* first = name.data() + 1;
  const auto* last = name.data() + name.size();
  const auto [ptr, ec] = std::from_chars(first, last, index);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  if (name.size() > 2 && name[1] == '0') return std::nullopt;
  return index;
}

struct EmbeddingColumns {
  std::vector<std::size_t> field_of_dim;  // dim index -> field index
};

// Validates `e0..e{D-1}` columns given their (dim index, field index) pairs.
bool check_embedding_columns(std::vector<std::pair<std::size_t, std::size_t>> cols, EmbeddingColumns& out,
                             FindingSink& sink) {
  std::sort(cols.begin(), cols.end());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i].first != i) {
      sink(1, "embedding columns must be e0..e" + std::to_string(cols.size() - 1) + " without gaps; missing e" +
                  std::to_string(i));
      return false;
    }
    out.field_of_dim.push_back(cols[i].second);
  }
  return true;
}

struct SpotParse {
  SpotTable table;
  std::vector<Finding> findings;
};

SpotParse parse_spots(const std::filesystem::path& path, bool collect, bool require_embeddings) {
  csv::LineReader reader(path);
  FindingSink sink(reader.path(), collect);
  SpotParse result;
  auto& table = result.table;

  std::string line;
  if (!reader.next(line)) {
    sink(0, "empty file (missing header)");
    result.findings = sink.take();
    return result;
  }

  const auto header = csv::split(line);
  static constexpr std::array<std::string_view, 5> kRequired = {"spot_id", "sample_id", "patient_id", "x", "y"};
  std::array<std::optional<std::size_t>, kRequired.size()> required_field;
  std::vector<std::pair<std::size_t, std::size_t>> emb_cols;
  std::set<std::string_view> seen;
  bool header_ok = true;
  for (std::size_t f = 0; f < header.size(); ++f) {
    const auto name = header[f];
    if (!seen.insert(name).second) {
      sink(1, "duplicate header column '" + std::string(name) + "'");
      header_ok = false;
      continue;
    }
    const auto it = std::find(kRequired.begin(), kRequired.end(), name);
    if (it != kRequired.end()) {
      required_field[static_cast<std::size_t>(it - kRequired.begin())] = f;
    } else if (auto idx = embedding_column_index(name)) {
      emb_cols.emplace_back(*idx, f);
    } else {
      sink(1, "unknown header column '" + std::string(name) + "'");
      header_ok = false;
    }
  }
  for (std::size_t r = 0; r < kRequired.size(); ++r) {
    if (!required_field[r]) {
      sink(1, "missing header column '" + std::string(kRequired[r]) + "'");
      header_ok = false;
    }
  }
  EmbeddingColumns emb;
  if (!check_embedding_columns(emb_cols, emb, sink)) header_ok = false;
  if (header_ok && require_embeddings && emb.field_of_dim.empty()) {
    sink(1, "no embedding columns (expected e0..e{D-1})");
    header_ok = false;
  }
  if (!header_ok) {
    result.findings = sink.take();
    return result;
  }

  const std::size_t n_fields = header.size();
  const std::size_t dim = emb.field_of_dim.size();
  std::vector<double> emb_values;
  std::unordered_map<std::string, std::size_t> id_line;
  std::unordered_map<std::string, std::pair<std::string, std::size_t>> sample_patient;

  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto ln = reader.line_number();
    const auto fields = csv::split(line);
    if (fields.size() != n_fields) {
      sink(ln, "expected " + std::to_string(n_fields) + " fields, got " + std::to_string(fields.size()));
      continue;
    }
    bool ok = true;
    const std::string spot_id(fields[*required_field[0]]);
    const std::string sample_id(fields[*required_field[1]]);
    const std::string patient_id(fields[*required_field[2]]);
    if (spot_id.empty()) {
      sink(ln, "empty spot_id");
      ok = false;
    } else if (auto [it, inserted] = id_line.emplace(spot_id, ln); !inserted) {
      sink(ln, "duplicate spot_id '" + spot_id + "' (first seen on line " + std::to_string(it->second) + ")");
      ok = false;
    }
    if (sample_id.empty()) {
      sink(ln, "empty sample_id");
      ok = false;
    }
    if (patient_id.empty()) {
      sink(ln, "empty patient_id");
      ok = false;
    }
    if (!sample_id.empty() && !patient_id.empty()) {
      auto [it, inserted] = sample_patient.emplace(sample_id, std::make_pair(patient_id, ln));
      if (!inserted && it->second.first != patient_id) {
        sink(ln, "sample '" + sample_id + "' assigned to patient '" + patient_id + "' but line " +
                     std::to_string(it->second.second) + " assigns it to '" + it->second.first + "'");
        ok = false;
      }
    }
    auto number = [&](std::size_t field, const char* what) -> double {
      auto v = csv::parse_real(fields[field]);
      if (!v) {
        sink(ln, std::string("non-finite or non-numeric ") + what + " '" + std::string(fields[field]) + "'");
        ok = false;
        return 0.0;
      }
      return *v;
    };
    const double x = number(*required_field[3], "x");
    const double y = number(*required_field[4], "y");
    const auto before = emb_values.size();
    for (std::size_t d = 0; d < dim; ++d) {
      emb_values.push_back(number(emb.field_of_dim[d], ("e" + std::to_string(d)).c_str()));
    }
    if (!ok) {
      emb_values.resize(before);
      continue;
    }
    table.spot_ids.push_back(spot_id);
    table.sample_ids.push_back(sample_id);
    table.patient_ids.push_back(patient_id);
    table.x.push_back(x);
    table.y.push_back(y);
  }

  if (id_line.empty()) sink(0, "no spots");

  const auto n = table.spot_ids.size();
  table.embeddings.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d)
      table.embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = emb_values[i * dim + d];
  result.findings = sink.take();
  return result;
}

struct AbundanceParse {
  AbundanceMatrix matrix;  // file order
  std::vector<Finding> findings;
};

AbundanceParse parse_abundances(const std::filesystem::path& path, bool collect, bool ground_truth) {
  csv::LineReader reader(path);
  FindingSink sink(reader.path(), collect);
  AbundanceParse result;
  auto& m = result.matrix;

  std::string line;
  if (!reader.next(line)) {
    sink(0, "empty file (missing header)");
    result.findings = sink.take();
    return result;
  }
  const auto header = csv::split(line);
  bool header_ok = true;
  if (header.empty() || header.front() != "spot_id") {
    sink(1, "first header column must be 'spot_id'");
    header_ok = false;
  }
  std::set<std::string_view> seen;
  for (std::size_t f = 1; f < header.size(); ++f) {
    if (header[f].empty()) {
      sink(1, "empty cell type name in column " + std::to_string(f + 1));
      header_ok = false;
    } else if (!seen.insert(header[f]).second) {
      sink(1, "duplicate cell type '" + std::string(header[f]) + "'");
      header_ok = false;
    }
    m.cell_types.emplace_back(header[f]);
  }
  if (header.size() < 3) {
    sink(1, "need at least 2 cell type columns");
    header_ok = false;
  }
  if (!header_ok) {
    result.findings = sink.take();
    return result;
  }

  const std::size_t n_types = m.cell_types.size();
  std::vector<double> values;
  std::unordered_map<std::string, std::size_t> id_line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto ln = reader.line_number();
    const auto fields = csv::split(line);
    if (fields.size() != header.size()) {
      sink(ln, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
      continue;
    }
    bool ok = true;
    const std::string spot_id(fields[0]);
    if (spot_id.empty()) {
      sink(ln, "empty spot_id");
      ok = false;
    } else if (auto [it, inserted] = id_line.emplace(spot_id, ln); !inserted) {
      sink(ln, "duplicate spot_id '" + spot_id + "' (first seen on line " + std::to_string(it->second) + ")");
      ok = false;
    }
    const auto before = values.size();
    for (std::size_t c = 0; c < n_types; ++c) {
      const auto v = csv::parse_real(fields[c + 1]);
      if (!v) {
        sink(ln, "non-finite or non-numeric abundance '" + std::string(fields[c + 1]) + "' for '" + m.cell_types[c] +
                     "'");
        ok = false;
      } else if (ground_truth && *v < 0.0) {
        sink(ln, "negative abundance " + std::string(fields[c + 1]) + " for '" + m.cell_types[c] + "'");
        ok = false;
      }
      values.push_back(v.value_or(0.0));
    }
    if (!ok) {
      values.resize(before);
      continue;
    }
    m.spot_ids.push_back(spot_id);
  }
  const auto n = m.spot_ids.size();
  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n_types));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < n_types; ++c)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = values[i * n_types + c];
  result.findings = sink.take();
  return result;
}

void write_matrix_rows(std::ofstream& out, const std::vector<std::string>& ids, const Matrix& values,
                       const std::function<void(std::size_t)>& prefix) {
  std::string row;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    row.clear();
    out << ids[i];
    if (prefix) prefix(i);
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      row.push_back(',');
      row += csv::format_real(values(static_cast<Eigen::Index>(i), c));
    }
    out << row << '\n';
  }
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string Finding::str() const {
  return line > 0 ? file + ":" + std::to_string(line) + ": " + message : file + ": " + message;
}

SpotTable SpotTable::subset(std::span<const std::size_t> rows) const {
  SpotTable out;
  out.embeddings.resize(static_cast<Eigen::Index>(rows.size()), embeddings.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = rows[k];
    out.spot_ids.push_back(spot_ids.at(i));
    out.sample_ids.push_back(sample_ids[i]);
    out.patient_ids.push_back(patient_ids[i]);
    out.x.push_back(x[i]);
    out.y.push_back(y[i]);
    out.embeddings.row(static_cast<Eigen::Index>(k)) = embeddings.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

Matrix SpotTable::coords() const {
  Matrix c(static_cast<Eigen::Index>(size()), 2);
  for (std::size_t i = 0; i < size(); ++i) {
    c(static_cast<Eigen::Index>(i), 0) = x[i];
    c(static_cast<Eigen::Index>(i), 1) = y[i];
  }
  return c;
}

AbundanceMatrix AbundanceMatrix::subset(std::span<const std::size_t> rows) const {
  AbundanceMatrix out;
  out.cell_types = cell_types;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.spot_ids.push_back(spot_ids.at(rows[k]));
    out.values.row(static_cast<Eigen::Index>(k)) = values.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

SpotTable load_spot_table(const std::filesystem::path& path) {
  return parse_spots(path, /*collect=*/false, /*require_embeddings=*/true).table;
}

SpotTable load_spot_table(const std::filesystem::path& path, std::span<const EmbeddingBlock> blocks) {
  auto table = parse_spots(path, false, /*require_embeddings=*/blocks.empty()).table;
  if (table.dim() > 0) {
    if (!blocks.empty())
      spdlog::warn("{}: inline embedding columns present; ignoring {} external block(s)", path.string(),
                   blocks.size());
    return table;
  }
  const auto joined = concat_embeddings(blocks);
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < joined.spot_ids.size(); ++i) row_of.emplace(joined.spot_ids[i], i);
  table.embeddings.resize(static_cast<Eigen::Index>(table.size()), joined.rows.cols());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto it = row_of.find(table.spot_ids[i]);
    if (it == row_of.end())
      throw SchemaError(path.string(), 0,
                        "spot '" + table.spot_ids[i] + "' has no embedding in source '" + joined.source_name + "'");
    table.embeddings.row(static_cast<Eigen::Index>(i)) = joined.rows.row(static_cast<Eigen::Index>(it->second));
  }
  return table;
}

SpotTable load_spot_locations(const std::filesystem::path& path) {
  return parse_spots(path, /*collect=*/false, /*require_embeddings=*/false).table;
}

std::vector<Finding> check_spot_file(const std::filesystem::path& path, bool require_embeddings) {
  return parse_spots(path, /*collect=*/true, require_embeddings).findings;
}

AbundanceMatrix load_abundance_table(const std::filesystem::path& path, const SpotTable& spots, bool ground_truth) {
  auto parsed = parse_abundances(path, /*collect=*/false, ground_truth).matrix;
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < parsed.spot_ids.size(); ++i) row_of.emplace(parsed.spot_ids[i], i);
  std::vector<std::size_t> rows;
  rows.reserve(spots.size());
  for (const auto& id : spots.spot_ids) {
    const auto it = row_of.find(id);
    if (it == row_of.end()) throw SchemaError(path.string(), 0, "missing abundances for spot '" + id + "'");
    rows.push_back(it->second);
  }
  return parsed.subset(rows);
}

std::vector<Finding> check_abundance_file(const std::filesystem::path& path,
                                          const std::vector<std::string>* expected_spot_ids) {
  auto parsed = parse_abundances(path, /*collect=*/true, /*ground_truth=*/true);
  if (expected_spot_ids && !parsed.matrix.cell_types.empty()) {
    std::unordered_set<std::string_view> present(parsed.matrix.spot_ids.begin(), parsed.matrix.spot_ids.end());
    for (const auto& id : *expected_spot_ids) {
      if (!present.contains(id)) parsed.findings.push_back({path.string(), 0, "missing abundances for spot '" + id + "'"});
    }
  }
  return parsed.findings;
}

EmbeddingBlock load_embedding_block(const std::filesystem::path& path, std::string source_name) {
  csv::LineReader reader(path);
  FindingSink sink(reader.path(), false);
  std::string line;
  if (!reader.next(line)) sink(0, "empty file (missing header)");
  const auto header = csv::split(line);
  if (header.front() != "spot_id") sink(1, "first header column must be 'spot_id'");
  std::vector<std::pair<std::size_t, std::size_t>> cols;
  for (std::size_t f = 1; f < header.size(); ++f) {
    const auto idx = embedding_column_index(header[f]);
    if (!idx) sink(1, "unknown header column '" + std::string(header[f]) + "'");
    cols.emplace_back(*idx, f);
  }
  EmbeddingColumns emb;
  check_embedding_columns(cols, emb, sink);
  if (emb.field_of_dim.empty()) sink(1, "no embedding columns");

  EmbeddingBlock block;
  block.source_name = std::move(source_name);
  const auto dim = emb.field_of_dim.size();
  std::vector<double> values;
  std::unordered_set<std::string> seen;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto ln = reader.line_number();
    const auto fields = csv::split(line);
    if (fields.size() != header.size())
      sink(ln, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    std::string id(fields[0]);
    if (id.empty()) sink(ln, "empty spot_id");
    if (!seen.insert(id).second) sink(ln, "duplicate spot_id '" + id + "'");
    for (std::size_t d = 0; d < dim; ++d) {
      const auto v = csv::parse_real(fields[emb.field_of_dim[d]]);
      if (!v) sink(ln, "non-finite or non-numeric value '" + std::string(fields[emb.field_of_dim[d]]) + "'");
      values.push_back(*v);
    }
    block.spot_ids.push_back(std::move(id));
  }
  if (block.spot_ids.empty()) sink(0, "no spots");
  block.rows.resize(static_cast<Eigen::Index>(block.spot_ids.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < block.spot_ids.size(); ++i)
    for (std::size_t d = 0; d < dim; ++d)
      block.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = values[i * dim + d];
  return block;
}

EmbeddingBlock concat_embeddings(std::span<const EmbeddingBlock> blocks) {
  if (blocks.empty()) throw Error("concat_embeddings: no blocks");
  const auto& first = blocks.front();
  if (blocks.size() == 1) return first;

  std::unordered_set<std::string_view> first_ids(first.spot_ids.begin(), first.spot_ids.end());
  EmbeddingBlock out;
  out.source_name = first.source_name;
  out.spot_ids = first.spot_ids;
  Eigen::Index total_dim = 0;
  for (const auto& b : blocks) total_dim += b.rows.cols();
  out.rows.resize(first.rows.rows(), total_dim);
  out.rows.leftCols(first.rows.cols()) = first.rows;

  Eigen::Index offset = first.rows.cols();
  for (std::size_t k = 1; k < blocks.size(); ++k) {
    const auto& b = blocks[k];
    std::unordered_map<std::string_view, std::size_t> row_of;
    for (std::size_t i = 0; i < b.spot_ids.size(); ++i) row_of.emplace(b.spot_ids[i], i);

    std::set<std::string> diff;
    for (const auto& id : first.spot_ids)
      if (!row_of.contains(id)) diff.insert(id);
    for (const auto& id : b.spot_ids)
      if (!first_ids.contains(id)) diff.insert(id);
    if (!diff.empty()) {
      std::string listed;
      std::size_t shown = 0;
      for (const auto& id : diff) {
        if (shown == 10) break;
        listed += (shown++ ? ", " : "") + id;
      }
      throw Error("concat_embeddings: spot ids of '" + first.source_name + "' and '" + b.source_name + "' differ in " +
                  std::to_string(diff.size()) + " id(s): " + listed + (diff.size() > 10 ? ", ..." : ""));
    }
    for (std::size_t i = 0; i < out.spot_ids.size(); ++i)
      out.rows.row(static_cast<Eigen::Index>(i)).segment(offset, b.rows.cols()) =
          b.rows.row(static_cast<Eigen::Index>(row_of.at(out.spot_ids[i])));
    offset += b.rows.cols();
    out.source_name += "+" + b.source_name;
  }
  return out;
}

std::vector<SampleSplit> make_splits(const SpotTable& spots, const SplitMode& mode) {
  std::vector<SampleSplit> splits;
  if (std::holds_alternative<LeaveOnePatientOut>(mode)) {
    std::set<std::string> patients(spots.patient_ids.begin(), spots.patient_ids.end());
    if (patients.size() < 2)
      throw Error("leave-one-patient-out needs at least 2 patients, found " + std::to_string(patients.size()));
    for (const auto& p : patients) {
      SampleSplit s;
      s.name = p;
      for (std::size_t i = 0; i < spots.size(); ++i)
        (spots.patient_ids[i] == p ? s.test_spot_ids : s.train_spot_ids).push_back(spots.spot_ids[i]);
      splits.push_back(std::move(s));
    }
    return splits;
  }

  const auto& fixed = std::get<FixedSplit>(mode);
  if (fixed.train_spot_ids.empty()) throw Error("fixed split '" + fixed.name + "': empty train set");
  if (fixed.test_spot_ids.empty()) throw Error("fixed split '" + fixed.name + "': empty test set");
  std::unordered_set<std::string_view> train(fixed.train_spot_ids.begin(), fixed.train_spot_ids.end());
  std::unordered_set<std::string_view> test(fixed.test_spot_ids.begin(), fixed.test_spot_ids.end());
  for (const auto& id : fixed.test_spot_ids)
    if (train.contains(id)) throw Error("fixed split '" + fixed.name + "': spot '" + id + "' is in both train and test");
  std::unordered_set<std::string_view> known(spots.spot_ids.begin(), spots.spot_ids.end());
  for (const auto* ids : {&fixed.train_spot_ids, &fixed.test_spot_ids})
    for (const auto& id : *ids)
      if (!known.contains(id)) throw Error("fixed split '" + fixed.name + "': unknown spot '" + id + "'");

  SampleSplit s;
  s.name = fixed.name;
  for (const auto& id : spots.spot_ids) {
    if (train.contains(id)) s.train_spot_ids.push_back(id);
    if (test.contains(id)) s.test_spot_ids.push_back(id);
  }
  splits.push_back(std::move(s));
  return splits;
}

void validate(const SpotTable& spots) {
  const auto n = spots.size();
  if (n == 0) throw Error("spot table: no spots");
  if (spots.sample_ids.size() != n || spots.patient_ids.size() != n || spots.x.size() != n || spots.y.size() != n ||
      static_cast<std::size_t>(spots.embeddings.rows()) != n)
    throw Error("spot table: column lengths disagree");
  if (spots.dim() == 0) throw Error("spot table: embedding dimension is 0");
  std::unordered_set<std::string_view> ids;
  std::unordered_map<std::string_view, std::string_view> patient_of;
  for (std::size_t i = 0; i < n; ++i) {
    if (spots.spot_ids[i].empty()) throw Error("spot table: empty spot_id at row " + std::to_string(i));
    if (!ids.insert(spots.spot_ids[i]).second) throw Error("spot table: duplicate spot_id '" + spots.spot_ids[i] + "'");
    if (spots.sample_ids[i].empty() || spots.patient_ids[i].empty())
      throw Error("spot table: spot '" + spots.spot_ids[i] + "' lacks a sample_id or patient_id");
    auto [it, inserted] = patient_of.emplace(spots.sample_ids[i], spots.patient_ids[i]);
    if (!inserted && it->second != spots.patient_ids[i])
      throw Error("spot table: sample '" + spots.sample_ids[i] + "' maps to more than one patient");
    if (!std::isfinite(spots.x[i]) || !std::isfinite(spots.y[i]))
      throw Error("spot table: non-finite coordinate for '" + spots.spot_ids[i] + "'");
  }
  if (!spots.embeddings.allFinite()) throw Error("spot table: non-finite embedding value");
}

void validate(const AbundanceMatrix& abundances, bool ground_truth) {
  if (abundances.cell_types.size() < 2) throw Error("abundance matrix: need at least 2 cell types");
  if (static_cast<std::size_t>(abundances.values.rows()) != abundances.size() ||
      static_cast<std::size_t>(abundances.values.cols()) != abundances.cell_types.size())
    throw Error("abundance matrix: shape disagrees with labels");
  if (!abundances.values.allFinite()) throw Error("abundance matrix: non-finite value");
  if (ground_truth && (abundances.values.array() < 0.0).any()) throw Error("abundance matrix: negative ground truth");
}

void save_spot_table(const SpotTable& spots, const std::filesystem::path& path) {
  auto out = csv::open_output(path);
  out << "spot_id,sample_id,patient_id,x,y";
  for (std::size_t d = 0; d < spots.dim(); ++d) out << ",e" << d;
  out << '\n';
  write_matrix_rows(out, spots.spot_ids, spots.embeddings, [&](std::size_t i) {
    out << ',' << spots.sample_ids[i] << ',' << spots.patient_ids[i] << ',' << csv::format_real(spots.x[i]) << ','
        << csv::format_real(spots.y[i]);
  });
  finish_write(out, path);
}

void save_abundance_table(const AbundanceMatrix& abundances, const std::filesystem::path& path) {
  auto out = csv::open_output(path);
  out << "spot_id";
  for (const auto& t : abundances.cell_types) out << ',' << t;
  out << '\n';
  write_matrix_rows(out, abundances.spot_ids, abundances.values, nullptr);
  finish_write(out, path);
}

void save_embedding_block(const EmbeddingBlock& block, const std::filesystem::path& path) {
  auto out = csv::open_output(path);
  out << "spot_id";
  for (std::size_t d = 0; d < block.dim(); ++d) out << ",e" << d;
  out << '\n';
  write_matrix_rows(out, block.spot_ids, block.rows, nullptr);
  finish_write(out, path);
}

std::vector<std::size_t> index_rows(const std::vector<std::string>& all_ids, const std::vector<std::string>& ids) {
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < all_ids.size(); ++i) row_of.emplace(all_ids[i], i);
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = row_of.find(id);
    if (it == row_of.end()) throw Error("unknown spot '" + id + "'");
    rows.push_back(it->second);
  }
  return rows;
}

std::vector<std::string> distinct(const std::vector<std::string>& values) {
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& v : values)
    if (seen.insert(v).second) out.push_back(v);
  return out;
}

}  // namespace histocell
