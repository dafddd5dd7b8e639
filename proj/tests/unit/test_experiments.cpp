#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "histocell/csv.hpp"
#include "histocell/errors.hpp"
#include "histocell/experiments.hpp"
#include "histocell/synthetic.hpp"

using namespace histocell;
using testing_support::read_text;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

SyntheticSpec small_spec(std::uint64_t seed = 7, double noise = 0.0) {
  SyntheticSpec s;
  s.n_patients = 3;
  s.spots_per_patient = 60;
  s.samples_per_patient = 2;
  s.dim = 6;
  s.cell_types = 4;
  s.noise_sigma = noise;
  s.seed = seed;
  return s;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.name = "exp";
  c.output_dir = out;
  c.train.hidden_width = 12;
  c.train.epochs = 4;
  c.train.batch_size = 32;
  c.train.seed = 3;
  return c;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    for (auto f : csv::split(line)) row.emplace_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, std::string> tree_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = read_text(e.path());
  return out;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.name = "x";
  c.mode = ExperimentMode::cross;
  c.data.spots = "a.csv";
  c.data.embeddings = {"e1.csv", "e2.csv"};
  c.train.loss.lambda2 = 0.0;
  c.train.seed = 1234567890123ULL;
  c.spatial.length_scale = 12.5;
  c.folds = {"P1"};
  const auto j = to_json(c);
  const auto back = experiment_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.train.seed, c.train.seed);
  EXPECT_EQ(back.mode, ExperimentMode::cross);
}

TEST(Config, UnknownKeysAndWrongTypesRejected) {
  auto j = to_json(ExperimentConfig{});
  j["train"]["typo"] = 1;
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
  j = to_json(ExperimentConfig{});
  j["train"]["epochs"] = "ten";
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
  j = to_json(ExperimentConfig{});
  j["train"]["epochs"] = -3;
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
  j = to_json(ExperimentConfig{});
  j["mode"] = "both";
  EXPECT_THROW(experiment_config_from_json(j), ConfigError);
}

TEST(Synthetic, DeterministicFilesAndNonNegative) {
  TempDir a, b;
  SyntheticSpec spec;  // 3 x 200, D=16, C=5, sigma 0, seed 7
  const auto pa = write_synthetic(spec, a.path());
  const auto pb = write_synthetic(spec, b.path());
  EXPECT_EQ(read_text(pa.spots), read_text(pb.spots));
  EXPECT_EQ(read_text(pa.abundances), read_text(pb.abundances));
  const auto data = load_dataset(pa);
  EXPECT_EQ(data.spots.size(), 600u);
  EXPECT_EQ(data.spots.dim(), 16u);
  EXPECT_EQ(data.abundances.cell_types.size(), 5u);
  EXPECT_GE(data.abundances.values.minCoeff(), 0.0);

  auto noisy = spec;
  noisy.noise_sigma = 2.0;
  EXPECT_GE(generate_synthetic(noisy).abundances.values.minCoeff(), 0.0);
}

TEST(Synthetic, SpecJsonStrict) {
  auto j = to_json(SyntheticSpec{});
  EXPECT_EQ(to_json(synthetic_spec_from_json(j)), j);
  j["extra"] = 1;
  EXPECT_THROW(synthetic_spec_from_json(j), ConfigError);
}

TEST(RunLoo, FoldsSummaryAndArtifacts) {
  TempDir dir;
  const auto data = generate_synthetic(small_spec());
  const auto cfg = small_config(dir.path());
  const auto res = run_loo(data, cfg);
  ASSERT_EQ(res.folds.size(), 3u);
  ASSERT_TRUE(res.summary);
  const auto rows = read_csv(*res.summary);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(csv::join(rows[0]), kSummaryHeader);
  for (const auto& f : res.folds) {
    EXPECT_TRUE(f.ok) << f.error;
    const auto fd = res.directory / f.name;
    for (const char* name : {"model.ckpt", "history.csv", "predictions.csv", "report.csv"})
      EXPECT_TRUE(fs::exists(fd / name)) << fd / name;
    EXPECT_EQ(read_csv(fd / "report.csv")[0][0], "split");
    EXPECT_TRUE(fs::exists(fd / "pred" / "coloc_averaged.svg"));
    EXPECT_TRUE(fs::exists(fd / "truth" / "coloc_averaged.csv"));
  }
}

TEST(RunLoo, SummaryMatchesRecomputationFromFoldFiles) {
  TempDir dir;
  const auto data = generate_synthetic(small_spec());
  const auto res = run_loo(data, small_config(dir.path()));
  const auto rows = read_csv(*res.summary);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto fd = res.directory / rows[k][0];
    // Prediction rows are the fold's test spots in table order.
    SpotTable spots;
    for (const auto& r : read_csv(fd / "predictions.csv")) spots.spot_ids.push_back(r[0]);
    spots.spot_ids.erase(spots.spot_ids.begin());
    const auto idx = index_rows(data.spots.spot_ids, spots.spot_ids);
    const auto subset = data.spots.subset(idx);
    const auto pred = load_abundance_table(fd / "predictions.csv", subset, false);
    const auto truth = data.abundances.subset(idx);
    const auto cc = cc_score(pred, truth).mean;
    EXPECT_EQ(*csv::parse_real(rows[k][3]), cc);
    EXPECT_EQ(*csv::parse_real(rows[k][4]), l1_score(pred, truth));
  }
}

TEST(RunLoo, DeterministicAcrossRunsAndWorkerCounts) {
  TempDir a, b;
  const auto data = generate_synthetic(small_spec());
  auto cfg_a = small_config(a.path());
  auto cfg_b = small_config(b.path());
  cfg_b.workers = 3;
  run_loo(data, cfg_a);
  run_loo(data, cfg_b);
  EXPECT_EQ(tree_bytes(a.path()), tree_bytes(b.path()));
}

TEST(RunLoo, RerunningOneFoldReproducesIt) {
  TempDir dir;
  const auto data = generate_synthetic(small_spec());
  auto cfg = small_config(dir.path());
  const auto res = run_loo(data, cfg);
  const auto fold_dir = res.directory / "P01";
  const auto before = tree_bytes(fold_dir);
  const auto summary = read_text(*res.summary);
  fs::remove_all(fold_dir);
  cfg.folds = {"P01"};
  const auto again = run_loo(data, cfg);
  EXPECT_EQ(again.folds.size(), 1u);
  EXPECT_FALSE(again.summary);
  EXPECT_EQ(tree_bytes(fold_dir), before);
  EXPECT_EQ(read_text(*res.summary), summary);

  cfg.folds = {"nobody"};
  EXPECT_THROW(run_loo(data, cfg), ConfigError);
}

TEST(RunLoo, FailedFoldIsReportedNotFatal) {
  TempDir dir;
  const auto data = generate_synthetic(small_spec());
  auto cfg = small_config(dir.path());
  cfg.train.learning_rate = 1e300;
  const auto res = run_loo(data, cfg);
  ASSERT_TRUE(res.summary);
  const auto rows = read_csv(*res.summary);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_EQ(rows[k][1].rfind("failed", 0), 0u) << rows[k][1];
  EXPECT_TRUE(fs::exists(res.directory / "P00" / "error.txt"));
}

TEST(RunLoo, CancelledBeforeStartMarksFolds) {
  TempDir dir;
  const auto data = generate_synthetic(small_spec());
  std::atomic<bool> cancel{true};
  const auto res = run_loo(data, small_config(dir.path()), &cancel);
  for (const auto& f : res.folds) EXPECT_EQ(f.error, "cancelled");
  EXPECT_NE(read_text(*res.summary).find("P00,cancelled"), std::string::npos);
}

TEST(RunLoo, NeedsTwoPatients) {
  TempDir dir;
  auto spec = small_spec();
  spec.n_patients = 1;
  EXPECT_THROW(run_loo(generate_synthetic(spec), small_config(dir.path())), Error);
}

TEST(CrossDataset, SameDataEqualsTrainAllEvalAll) {
  TempDir dir;
  const auto data = generate_synthetic(small_spec());
  const auto cfg = small_config(dir.path());
  const auto res = run_cross_dataset(data, data, cfg);
  ASSERT_EQ(res.folds.size(), 1u);
  ASSERT_TRUE(res.folds[0].ok) << res.folds[0].error;
  const auto& ev = res.folds[0].evaluation;

  const auto model = train(data.spots, data.abundances, cfg.train).model;
  const auto pred = predict(model, data.spots, cfg.clamp);
  const auto direct = evaluate(pred, data.abundances, "__pooled__");
  EXPECT_NEAR(ev.pooled.mean_cc, direct.mean_cc, 1e-12);
  EXPECT_NEAR(ev.pooled.l1, direct.l1, 1e-12);
  const auto per_sample = evaluate_by_sample(pred, data.abundances, data.spots);
  ASSERT_EQ(ev.per_sample.size(), per_sample.size());
  for (std::size_t s = 0; s < per_sample.size(); ++s) {
    EXPECT_NEAR(ev.per_sample[s].mean_cc, per_sample[s].mean_cc, 1e-12);
    EXPECT_NEAR(ev.per_sample[s].l1, per_sample[s].l1, 1e-12);
  }
}

TEST(CrossDataset, MismatchedCellTypesNamed) {
  TempDir dir;
  const auto a = generate_synthetic(small_spec());
  auto b = a;
  b.abundances.cell_types[2] = "mystery";
  try {
    run_cross_dataset(a, b, small_config(dir.path()));
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("mystery"), std::string::npos) << msg;
    EXPECT_NE(msg.find("ct02"), std::string::npos) << msg;
  }
  auto c = a;
  c.spots.embeddings = Matrix::Zero(static_cast<Eigen::Index>(a.spots.size()), 3);
  EXPECT_THROW(check_compatible(a, c), Error);
}

TEST(Synthetic, NoiseLowersHeldOutCorrelation) {
  double clean = 0.0, noisy = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (double sigma : {0.0, 1.0}) {
      TempDir dir;
      auto spec = small_spec(seed, sigma);
      spec.n_patients = 2;
      spec.spots_per_patient = 100;
      auto cfg = small_config(dir.path());
      cfg.train.epochs = 20;
      cfg.folds = {"P00"};
      const auto res = run_loo(generate_synthetic(spec), cfg);
      ASSERT_TRUE(res.folds[0].ok);
      (sigma == 0.0 ? clean : noisy) += res.folds[0].evaluation.pooled.mean_cc;
    }
  }
  EXPECT_GE(clean / 5.0, noisy / 5.0);
}
