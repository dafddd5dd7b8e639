#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "histocell/errors.hpp"
#include "histocell/regressor.hpp"
#include "oracles.hpp"

using namespace histocell;
using testing_support::random_matrix;
using testing_support::TempDir;

namespace {

std::vector<std::size_t> small_dims() { return {5, 4, 4, 4, 4, 4, 4, 4, 3}; }

struct ToyData {
  SpotTable spots;
  AbundanceMatrix abundances;
};

ToyData toy(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ToyData d;
  for (std::size_t i = 0; i < n; ++i) {
    d.spots.spot_ids.push_back("s" + std::to_string(i));
    d.spots.sample_ids.push_back(i % 2 ? "A1" : "B1");
    d.spots.patient_ids.push_back(i % 2 ? "A" : "B");
    d.spots.x.push_back(static_cast<double>(i));
    d.spots.y.push_back(0.0);
  }
  d.spots.embeddings = random_matrix(rng, static_cast<Eigen::Index>(n), 5, -3.0, 3.0);
  d.abundances.spot_ids = d.spots.spot_ids;
  d.abundances.cell_types = {"a", "b", "c"};
  d.abundances.values = random_matrix(rng, static_cast<Eigen::Index>(n), 3, 0.0, 2.0);
  return d;
}

TrainConfig small_config() {
  TrainConfig c;
  c.hidden_width = 8;
  c.epochs = 3;
  c.batch_size = 16;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Standardizer, Examples) {
  const auto s = fit_standardizer(Matrix{{1.0, 5.0}, {3.0, 5.0}});
  EXPECT_EQ(s.means(0), 2.0);
  EXPECT_EQ(s.stds(0), 1.0);
  EXPECT_EQ(s.means(1), 5.0);
  EXPECT_EQ(s.stds(1), 1.0);
  const Matrix z = transform(s, Matrix{{1.0, 5.0}, {3.0, 5.0}});
  EXPECT_EQ(z(0, 0), -1.0);
  EXPECT_EQ(z(1, 0), 1.0);
  EXPECT_EQ(z(0, 1), 0.0);

  const auto one = fit_standardizer(Matrix{{4.0, -2.0, 7.0}});
  EXPECT_TRUE((one.stds.array() == 1.0).all());
  EXPECT_TRUE(transform(one, Matrix{{4.0, -2.0, 7.0}}).isZero(0.0));

  EXPECT_THROW(fit_standardizer(Matrix(0, 3)), Error);
  EXPECT_THROW(transform(one, Matrix::Zero(1, 2)), Error);
}

TEST(Standardizer, ColumnsHaveZeroMean) {
  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(rng, 37, 6, -50, 80);
  const Matrix z = transform(fit_standardizer(x), x);
  for (Eigen::Index c = 0; c < z.cols(); ++c) EXPECT_LT(std::abs(z.col(c).mean()), 1e-12);
}

TEST(Mlp, SiluValue) {
  EXPECT_NEAR(silu(1.0), 0.7310585786300049, 1e-15);
  EXPECT_EQ(silu(0.0), 0.0);
}

TEST(Mlp, InitIsSeededAndGlorotBounded) {
  const auto a = init_model(small_dims(), 17);
  const auto b = init_model(small_dims(), 17);
  const auto c = init_model(small_dims(), 18);
  ASSERT_EQ(a.layers.size(), kHiddenLayers + 1);
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    EXPECT_EQ(a.layers[k].weight, b.layers[k].weight);
    const double fan = static_cast<double>(a.layers[k].weight.rows() + a.layers[k].weight.cols());
    EXPECT_LE(a.layers[k].weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / fan));
    EXPECT_TRUE(a.layers[k].bias.isZero(0.0));
  }
  EXPECT_NE(a.layers[0].weight, c.layers[0].weight);
  EXPECT_THROW(init_model({5, 4, 3}, 0), Error);
}

TEST(Mlp, ZeroParametersGiveZeroOutput) {
  auto m = init_model(small_dims(), 1);
  for (auto& l : m.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  EXPECT_TRUE(forward(m, Matrix::Random(4, 5)).isZero(0.0));
}

TEST(Mlp, OneUnitChainEvaluatesSilu) {
  auto m = init_model({1, 1, 1, 1, 1, 1, 1, 1, 1}, 0);
  for (auto& l : m.layers) {
    l.weight.setIdentity();
    l.bias.setZero();
  }
  // Seven hidden SiLUs then a linear identity head.
  double expect = 1.0;
  for (std::size_t k = 0; k < kHiddenLayers; ++k) expect = silu(expect);
  EXPECT_DOUBLE_EQ(forward(m, Matrix::Constant(1, 1, 1.0))(0, 0), expect);

  m.layers[1].weight.setZero();
  m.layers[1].bias(0) = 1.0;  // restart the chain at 1 from layer 2
  double tail = 1.0;
  for (std::size_t k = 1; k < kHiddenLayers; ++k) tail = silu(tail);
  EXPECT_DOUBLE_EQ(forward(m, Matrix::Constant(1, 1, -4.0))(0, 0), tail);
}

TEST(Mlp, EqualRowsGiveEqualOutputs) {
  const auto m = init_model(small_dims(), 2);
  Matrix x(2, 5);
  x.row(0) << 0.1, -0.2, 0.3, 0.4, -0.5;
  x.row(1) = x.row(0);
  const Matrix y = forward(m, x);
  EXPECT_EQ(y.row(0), y.row(1));
}

TEST(Mlp, FiniteInputsGiveFiniteOutputs) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 50; ++k) {
    const auto m = init_model(small_dims(), rng());
    EXPECT_TRUE(forward(m, random_matrix(rng, 10, 5, -100.0, 100.0)).allFinite());
  }
}

TEST(Mlp, NonFiniteActivationNamesLayer) {
  auto m = init_model(small_dims(), 2);
  m.layers[3].bias(0) = std::numeric_limits<double>::infinity();
  try {
    forward(m, Matrix::Zero(1, 5));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("layer 4"), std::string::npos) << e.what();
  }
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(77);
  auto model = init_model(small_dims(), 3);
  for (auto& l : model.layers) l.bias = random_matrix(rng, l.bias.size(), 1, -0.5, 0.5);
  const Matrix x = random_matrix(rng, 6, 5, -2.0, 2.0);
  const Matrix y = random_matrix(rng, 6, 3, 0.0, 1.0);
  const LossWeights w;
  Gradients g;
  loss_and_gradients(model, x, y, w, g);
  const auto loss = [&] { return composite_loss(forward(model, x), y, w).total; };
  std::size_t checked = 0;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    auto& layer = model.layers[k];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      const double numeric = oracle::central_difference(layer.weight.data() + i, 1e-5, loss);
      EXPECT_TRUE(oracle::gradient_close(g.layers[k].weight.data()[i], numeric, 1e-4, 1e-7))
          << "layer " << k << " weight " << i;
      ++checked;
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      const double numeric = oracle::central_difference(layer.bias.data() + i, 1e-5, loss);
      EXPECT_TRUE(oracle::gradient_close(g.layers[k].bias(i), numeric, 1e-4, 1e-7)) << "layer " << k << " bias " << i;
      ++checked;
    }
  }
  EXPECT_EQ(checked, model.parameter_count());
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto d = toy(40, 1);
  auto cfg = small_config();
  cfg.epochs = 0;
  const auto r = train(d.spots, d.abundances, cfg);
  const auto init = init_model(r.model.layer_dims, cfg.seed);
  for (std::size_t k = 0; k < init.layers.size(); ++k) EXPECT_EQ(r.model.layers[k].weight, init.layers[k].weight);
  EXPECT_TRUE(r.history.empty());
}

TEST(Train, DeterministicForFixedSeed) {
  const auto d = toy(70, 2);
  const auto a = train(d.spots, d.abundances, small_config());
  const auto b = train(d.spots, d.abundances, small_config());
  EXPECT_EQ(a.history, b.history);
  for (std::size_t k = 0; k < a.model.layers.size(); ++k) {
    EXPECT_EQ(a.model.layers[k].weight, b.model.layers[k].weight);
    EXPECT_EQ(a.model.layers[k].bias, b.model.layers[k].bias);
  }
}

TEST(Train, LossDecreases) {
  const auto d = toy(200, 3);
  auto cfg = small_config();
  cfg.epochs = 30;
  cfg.hidden_width = 16;
  const auto r = train(d.spots, d.abundances, cfg);
  ASSERT_EQ(r.history.size(), 30u);
  EXPECT_LT(r.history.back(), r.history.front());
}

TEST(Train, StandardizerFitOnTrainingSplitOnly) {
  const auto d = toy(30, 4);
  SampleSplit split{"x", {}, {}};
  for (std::size_t i = 0; i < d.spots.size(); ++i)
    (d.spots.patient_ids[i] == "A" ? split.test_spot_ids : split.train_spot_ids).push_back(d.spots.spot_ids[i]);
  auto cfg = small_config();
  cfg.epochs = 1;
  const auto r = train(d.spots, d.abundances, split, cfg);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.spots.size(); ++i)
    if (d.spots.patient_ids[i] != "A") rows.push_back(i);
  const auto expected = fit_standardizer(d.spots.embeddings(rows, Eigen::all));
  EXPECT_EQ(r.model.standardizer.means, expected.means);
  EXPECT_EQ(r.model.standardizer.stds, expected.stds);
}

TEST(Train, RejectsBadConfig) {
  const auto d = toy(10, 5);
  auto cfg = small_config();
  cfg.batch_size = 1;
  EXPECT_THROW(train(d.spots, d.abundances, cfg), ConfigError);
  cfg = small_config();
  cfg.learning_rate = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Train, NonFiniteLossReportsEpochAndBatch) {
  const auto d = toy(40, 6);
  auto cfg = small_config();
  cfg.learning_rate = 1e300;
  try {
    train(d.spots, d.abundances, cfg);
    FAIL() << "expected a training error";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(Predict, ZeroModelClampAndPurity) {
  const auto d = toy(12, 7);
  auto m = init_model({5, 4, 4, 4, 4, 4, 4, 4, 3}, 1);
  m.standardizer = fit_standardizer(d.spots.embeddings);
  m.cell_types = d.abundances.cell_types;
  for (auto& l : m.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  EXPECT_TRUE(predict(m, d.spots).values.isZero(0.0));

  m.layers.back().bias(1) = -0.2;
  EXPECT_EQ(predict(m, d.spots).values(0, 1), -0.2);
  EXPECT_EQ(predict(m, d.spots, true).values(0, 1), 0.0);

  const auto trained = train(d.spots, d.abundances, small_config()).model;
  EXPECT_EQ(predict(trained, d.spots).values, predict(trained, d.spots).values);

  auto narrow = d.spots;
  narrow.embeddings = Matrix::Zero(12, 4);
  EXPECT_THROW(predict(trained, narrow), Error);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  TempDir dir;
  const auto d = toy(50, 8);
  const auto m = train(d.spots, d.abundances, small_config()).model;
  save_model(m, dir / "a.ckpt");
  const auto loaded = load_model(dir / "a.ckpt");
  save_model(loaded, dir / "b.ckpt");
  EXPECT_EQ(testing_support::read_text(dir / "a.ckpt"), testing_support::read_text(dir / "b.ckpt"));
  EXPECT_EQ(testing_support::read_text(dir / "a.ckpt").rfind("histocell-mlp v1\n", 0), 0u);
  EXPECT_EQ(predict(loaded, d.spots).values, predict(m, d.spots).values);
  EXPECT_EQ(loaded.cell_types, m.cell_types);
}

TEST(Checkpoint, RejectsWrongHeader) {
  TempDir dir;
  testing_support::write_text(dir / "bad.ckpt", "something else\n");
  EXPECT_THROW(load_model(dir / "bad.ckpt"), Error);
}
