#include "histocell/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "histocell/csv.hpp"
#include "histocell/errors.hpp"

namespace histocell {
namespace fs = std::filesystem;

namespace {

std::string field(double v) { return std::isnan(v) ? std::string() : csv::format_real(v); }
std::string field(const std::optional<double>& v) { return v ? field(*v) : std::string(); }

// Sample ids become file names.
std::string file_safe(const std::string& name) {
  std::string out = name;
  for (auto& ch : out)
    if (ch == '/' || ch == '\\' || ch == ':' || ch == ' ') ch = '_';
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = csv::open_output(path);
  out << text;
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

void write_coloc(const ColocMatrix& m, const fs::path& dir) {
  const auto stem = "coloc_" + file_safe(m.label);
  save_coloc_csv(m, dir / (stem + ".csv"));
  write_text(dir / (stem + ".svg"), render_heatmap(m, upgma_order(m)));
}

void write_report_rows(std::ofstream& out, const std::string& split, const EvalReport& r,
                       const std::optional<ColocComparison>& coloc) {
  for (std::size_t c = 0; c < r.cell_types.size(); ++c) {
    out << split << ',' << r.sample_id << ',' << r.cell_types[c] << ',' << r.n_spots << ','
        << field(r.per_cell_type_cc[c]) << ',' << field(r.per_cell_type_l1[c]) << ','
        << (coloc ? field(coloc->per_type_cosine[c]) : "") << ','
        << (coloc ? field(coloc->per_type_correlation[c]) : "") << '\n';
  }
  out << split << ',' << r.sample_id << ",__mean__," << r.n_spots << ',' << field(r.mean_cc) << ',' << field(r.l1)
      << ',' << (coloc ? field(coloc->mean_cosine) : "") << ',' << (coloc ? field(coloc->mean_correlation) : "")
      << '\n';
}

void write_report(const fs::path& path, const std::string& split, const Evaluation& ev) {
  auto out = csv::open_output(path);
  out << kReportHeader << '\n';
  for (std::size_t s = 0; s < ev.per_sample.size(); ++s) write_report_rows(out, split, ev.per_sample[s], ev.per_sample_coloc[s]);
  write_report_rows(out, split, ev.pooled, ev.coloc);
  if (ev.baseline_l1)
    out << split << ',' << ev.pooled.sample_id << ",__baseline__," << ev.pooled.n_spots << ",," << field(*ev.baseline_l1)
        << ",,\n";
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

void write_history(const fs::path& path, const std::vector<double>& history) {
  auto out = csv::open_output(path);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) out << e << ',' << csv::format_real(history[e]) << '\n';
  if (!out.flush()) throw IoError("write failed: " + path.string());
}

std::string summary_row(const FoldResult& f) {
  if (!f.ok && f.error == "cancelled") return f.name + ",cancelled," + std::to_string(f.n_test_spots) + ",,,,,";
  if (!f.ok) {
    std::string msg = f.error;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    return f.name + ",failed: " + msg + "," + std::to_string(f.n_test_spots) + ",,,,,";
  }
  const auto& ev = f.evaluation;
  return f.name + ",ok," + std::to_string(f.n_test_spots) + "," + field(ev.pooled.mean_cc) + "," + field(ev.pooled.l1) +
         "," + field(ev.baseline_l1) + "," + (ev.coloc ? field(ev.coloc->mean_cosine) : "") + "," +
         (ev.coloc ? field(ev.coloc->mean_correlation) : "");
}

fs::path write_summary(const fs::path& dir, const std::vector<FoldResult>& folds) {
  const auto path = dir / "summary.csv";
  auto out = csv::open_output(path);
  out << kSummaryHeader << '\n';
  for (const auto& f : folds) out << summary_row(f) << '\n';
  if (!out.flush()) throw IoError("write failed: " + path.string());
  return path;
}

struct FoldJob {
  std::string name;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

FoldResult run_fold(const FoldJob& job, const Dataset& train_data, const Dataset& test_data,
                    const ExperimentConfig& cfg, const fs::path& dir) {
  FoldResult result;
  result.name = job.name;
  result.n_test_spots = job.test_rows.size();
  try {
    std::error_code ec;
    fs::remove_all(dir, ec);
    const auto train_spots = train_data.spots.subset(job.train_rows);
    const auto train_truth = train_data.abundances.subset(job.train_rows);
    auto trained = train(train_spots, train_truth, cfg.train);
    save_model(trained.model, dir / "model.ckpt");
    write_history(dir / "history.csv", trained.history);

    const auto test_spots = test_data.spots.subset(job.test_rows);
    const auto test_truth = test_data.abundances.subset(job.test_rows);
    const auto pred = predict(trained.model, test_spots, cfg.clamp);
    save_abundance_table(pred, dir / "predictions.csv");

    const Eigen::RowVectorXd means = train_truth.values.colwise().mean();
    result.evaluation = evaluate_and_write(test_spots, test_truth, pred, cfg, dir, job.name, means);
    result.history = std::move(trained.history);
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
    spdlog::error("fold {} failed: {}", job.name, e.what());
    try {
      write_text(dir / "error.txt", result.error + "\n");
    } catch (const std::exception&) {
    }
  }
  return result;
}

std::vector<FoldResult> run_folds(const std::vector<FoldJob>& jobs, const Dataset& train_data,
                                  const Dataset& test_data, const ExperimentConfig& cfg, const fs::path& dir,
                                  const std::atomic<bool>* cancel) {
  std::vector<FoldResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      if (cancel && cancel->load()) {
        results[k].name = jobs[k].name;
        results[k].n_test_spots = jobs[k].test_rows.size();
        results[k].error = "cancelled";
        continue;
      }
      spdlog::info("fold {} ({} train / {} test spots)", jobs[k].name, jobs[k].train_rows.size(),
                   jobs[k].test_rows.size());
      results[k] = run_fold(jobs[k], train_data, test_data, cfg, dir / file_safe(jobs[k].name));
    }
  };
  const auto n_workers = std::max<std::size_t>(1, std::min(cfg.workers, jobs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

}  // namespace

Dataset load_dataset(const DatasetPaths& paths) {
  if (paths.spots.empty()) throw ConfigError("dataset: no spots file configured");
  if (paths.abundances.empty()) throw ConfigError("dataset: no abundance file configured");
  for (const auto* p : {&paths.spots, &paths.abundances})
    if (!fs::exists(*p)) throw IoError("no such file: " + p->string());

  std::vector<EmbeddingBlock> blocks;
  for (const auto& p : paths.embeddings) blocks.push_back(load_embedding_block(p, p.stem().string()));
  Dataset data;
  data.spots = load_spot_table(paths.spots, blocks);
  if (!paths.fractions.empty()) {
    const auto before = data.spots.size();
    data.spots = filter_spots(data.spots, load_fractions(paths.fractions), paths.max_background);
    spdlog::info("background filter kept {} of {} spots", data.spots.size(), before);
    if (data.spots.size() == 0) throw Error("dataset: background filter removed every spot");
  }
  validate(data.spots);
  data.abundances = load_abundance_table(paths.abundances, data.spots);
  validate(data.abundances, /*ground_truth=*/true);
  return data;
}

Evaluation evaluate_and_write(const SpotTable& spots, const AbundanceMatrix& truth, const AbundanceMatrix& pred,
                              const ExperimentConfig& cfg, const fs::path& dir, const std::string& split_name,
                              const std::optional<Eigen::RowVectorXd>& baseline_means) {
  Evaluation ev;
  ev.per_sample = evaluate_by_sample(pred, truth, spots, cfg.normalize);
  ev.pooled = evaluate(pred, truth, "__pooled__", cfg.normalize);
  if (baseline_means) {
    AbundanceMatrix constant = truth;
    constant.values.rowwise() = *baseline_means;
    ev.baseline_l1 = l1_score(constant, truth, cfg.normalize);
  }

  // Colocalization per sample, in sample-id order (evaluate_by_sample sorts).
  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (std::size_t i = 0; i < spots.size(); ++i) rows_of[spots.sample_ids[i]].push_back(i);
  std::vector<ColocMatrix> pred_mats;
  std::vector<ColocMatrix> truth_mats;
  std::vector<double> weights;
  for (const auto& report : ev.per_sample) {
    const auto& rows = rows_of.at(report.sample_id);
    std::optional<ColocComparison> cmp;
    try {
      if (rows.size() < 2) throw Error("fewer than 2 spots");
      const auto sample_spots = spots.subset(rows);
      const Matrix coords = sample_spots.coords();
      const double l = cfg.spatial.length_scale > 0.0 ? cfg.spatial.length_scale
                                                      : default_length_scale(coords, cfg.spatial.length_scale_factor);
      auto t = colocalization_matrix(truth.subset(rows), coords, l, report.sample_id);
      auto p = colocalization_matrix(pred.subset(rows), coords, l, report.sample_id);
      write_coloc(t, dir / "truth");
      write_coloc(p, dir / "pred");
      try {
        cmp = compare_colocalization(p, t);
      } catch (const Error& e) {
        spdlog::warn("{}: sample {}: {}", split_name, report.sample_id, e.what());
      }
      truth_mats.push_back(std::move(t));
      pred_mats.push_back(std::move(p));
      weights.push_back(static_cast<double>(rows.size()));
    } catch (const Error& e) {
      spdlog::warn("{}: no colocalization for sample {}: {}", split_name, report.sample_id, e.what());
    }
    ev.per_sample_coloc.push_back(std::move(cmp));
  }
  if (!pred_mats.empty()) {
    auto t = average_coloc(truth_mats, weights);
    auto p = average_coloc(pred_mats, weights);
    write_coloc(t, dir / "truth");
    write_coloc(p, dir / "pred");
    try {
      ev.coloc = compare_colocalization(p, t);
    } catch (const Error& e) {
      spdlog::warn("{}: averaged colocalization not comparable: {}", split_name, e.what());
    }
  }
  write_report(dir / "report.csv", split_name, ev);
  return ev;
}

ExperimentResult run_loo(const ExperimentConfig& cfg, const std::atomic<bool>* cancel) {
  return run_loo(load_dataset(cfg.data), cfg, cancel);
}

ExperimentResult run_loo(const Dataset& data, const ExperimentConfig& cfg, const std::atomic<bool>* cancel) {
  validate(cfg.train);
  const auto splits = make_splits(data.spots, LeaveOnePatientOut{});
  std::set<std::string> wanted(cfg.folds.begin(), cfg.folds.end());
  for (const auto& f : wanted) {
    if (std::none_of(splits.begin(), splits.end(), [&](const SampleSplit& s) { return s.name == f; }))
      throw ConfigError("unknown fold '" + f + "' (folds are patient ids)");
  }
  std::vector<FoldJob> jobs;
  for (const auto& s : splits) {
    if (!wanted.empty() && !wanted.contains(s.name)) continue;
    jobs.push_back({s.name, index_rows(data.spots.spot_ids, s.train_spot_ids),
                    index_rows(data.spots.spot_ids, s.test_spot_ids)});
  }
  ExperimentResult result;
  result.directory = cfg.experiment_dir();
  result.folds = run_folds(jobs, data, data, cfg, result.directory, cancel);
  if (wanted.empty()) result.summary = write_summary(result.directory, result.folds);
  return result;
}

void check_compatible(const Dataset& train_data, const Dataset& test_data) {
  const auto& a = train_data.abundances.cell_types;
  const auto& b = test_data.abundances.cell_types;
  if (a != b) {
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    std::string only_a;
    std::string only_b;
    for (const auto& t : sa)
      if (!sb.contains(t)) only_a += (only_a.empty() ? "" : ", ") + t;
    for (const auto& t : sb)
      if (!sa.contains(t)) only_b += (only_b.empty() ? "" : ", ") + t;
    if (only_a.empty() && only_b.empty())
      throw Error("cell types differ in order between training and test data");
    throw Error("cell types differ: only in training data {" + only_a + "}; only in test data {" + only_b + "}");
  }
  if (train_data.spots.dim() != test_data.spots.dim())
    throw Error("embedding dimension differs: training " + std::to_string(train_data.spots.dim()) + ", test " +
                std::to_string(test_data.spots.dim()));
}

ExperimentResult run_cross_dataset(const ExperimentConfig& cfg) {
  if (cfg.test_data.spots.empty()) throw ConfigError("cross mode needs test_data.spots and test_data.abundances");
  return run_cross_dataset(load_dataset(cfg.data), load_dataset(cfg.test_data), cfg);
}

ExperimentResult run_cross_dataset(const Dataset& train_data, const Dataset& test_data, const ExperimentConfig& cfg) {
  validate(cfg.train);
  check_compatible(train_data, test_data);
  const std::vector<FoldJob> jobs{{"cross", all_rows(train_data.spots.size()), all_rows(test_data.spots.size())}};
  ExperimentResult result;
  result.directory = cfg.experiment_dir();
  result.folds = run_folds(jobs, train_data, test_data, cfg, result.directory, nullptr);
  result.summary = write_summary(result.directory, result.folds);
  return result;
}

}  // namespace histocell
