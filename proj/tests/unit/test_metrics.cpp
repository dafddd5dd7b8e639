#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "histocell/errors.hpp"
#include "histocell/metrics.hpp"
#include "oracles.hpp"

using namespace histocell;
using testing_support::random_matrix;

namespace {

AbundanceMatrix matrix_of(const Matrix& v) {
  AbundanceMatrix m;
  for (Eigen::Index i = 0; i < v.rows(); ++i) m.spot_ids.push_back("s" + std::to_string(i));
  for (Eigen::Index c = 0; c < v.cols(); ++c) m.cell_types.push_back("t" + std::to_string(c));
  m.values = v;
  return m;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(CcScore, Examples) {
  std::mt19937_64 rng(1);
  const auto truth = matrix_of(random_matrix(rng, 10, 4, 0.0, 3.0));
  const auto same = cc_score(truth, truth);
  for (const auto& v : same.per_type) EXPECT_NEAR(*v, 1.0, 1e-15);
  EXPECT_NEAR(same.mean, 1.0, 1e-15);

  auto neg = truth;
  neg.values = -truth.values;
  for (const auto& v : cc_score(neg, truth).per_type) EXPECT_NEAR(*v, -1.0, 1e-15);

  auto flat = truth;
  flat.values.col(2).setConstant(0.7);
  const auto s = cc_score(flat, truth);
  EXPECT_FALSE(s.per_type[2]);
  EXPECT_EQ(s.undefined_types, std::vector<std::string>{"t2"});
  EXPECT_NEAR(s.mean, 1.0, 1e-15);
}

TEST(CcScore, AllUndefinedIsError) {
  const auto m = matrix_of(Matrix::Ones(4, 2));
  EXPECT_THROW(cc_score(m, m), Error);
}

TEST(CcScore, MatchesScalarOracle) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const auto p = matrix_of(random_matrix(rng, 12, 3));
    const auto t = matrix_of(random_matrix(rng, 12, 3));
    const auto s = cc_score(p, t);
    for (Eigen::Index c = 0; c < 3; ++c)
      EXPECT_NEAR(*s.per_type[static_cast<std::size_t>(c)],
                  oracle::pearson(to_vec(p.values.col(c)), to_vec(t.values.col(c))), 1e-12);
  }
}

TEST(CcScore, PositiveAffineInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> a(0.01, 50.0), b(-20.0, 20.0);
  for (int k = 0; k < 200; ++k) {
    const auto p = matrix_of(random_matrix(rng, 15, 3));
    const auto t = matrix_of(random_matrix(rng, 15, 3));
    auto q = p;
    q.values = (p.values.array() * a(rng) + b(rng)).matrix();
    const auto s1 = cc_score(p, t);
    const auto s2 = cc_score(q, t);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(*s1.per_type[c], *s2.per_type[c], 1e-12);
  }
}

TEST(L1Score, Examples) {
  std::mt19937_64 rng(4);
  const auto t = matrix_of(random_matrix(rng, 5, 3, 0.0, 1.0));
  EXPECT_EQ(l1_score(t, t), 0.0);
  auto p = t;
  p.values = (t.values.array() + 0.5).matrix();
  EXPECT_NEAR(l1_score(p, t), 0.5, 1e-15);
  EXPECT_THROW(l1_score(matrix_of(Matrix::Zero(2, 2)), matrix_of(Matrix::Zero(2, 3))), Error);
}

TEST(L1Score, NormalizedUsesProportions) {
  const auto t = matrix_of(Matrix{{1.0, 3.0}, {0.0, 0.0}});
  const auto p = matrix_of(Matrix{{2.0, 6.0}, {0.0, 0.0}});
  EXPECT_EQ(l1_score(p, t, true), 0.0);
  EXPECT_GT(l1_score(p, t, false), 0.0);
  EXPECT_TRUE(row_normalize(t.values).row(1).isZero(0.0));
}

TEST(L1Score, TriangleInequality) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 500; ++k) {
    const auto a = matrix_of(random_matrix(rng, 6, 4));
    const auto b = matrix_of(random_matrix(rng, 6, 4));
    const auto c = matrix_of(random_matrix(rng, 6, 4));
    EXPECT_LE(l1_score(a, c), l1_score(a, b) + l1_score(b, c) + 1e-15);
  }
}

TEST(Metrics, InvariantUnderJointRowPermutation) {
  std::mt19937_64 rng(6);
  const auto p = matrix_of(random_matrix(rng, 20, 3));
  const auto t = matrix_of(random_matrix(rng, 20, 3));
  std::vector<Eigen::Index> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto pp = p, tp = t;
  pp.values = p.values(perm, Eigen::all);
  tp.values = t.values(perm, Eigen::all);
  EXPECT_NEAR(l1_score(pp, tp), l1_score(p, t), 1e-14);
  const auto a = cc_score(p, t), b = cc_score(pp, tp);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(*a.per_type[c], *b.per_type[c], 1e-12);
}

TEST(Evaluate, PerSampleReportsSortedBySample) {
  std::mt19937_64 rng(7);
  const auto t = matrix_of(random_matrix(rng, 6, 2, 0.0, 1.0));
  SpotTable spots;
  spots.spot_ids = t.spot_ids;
  spots.sample_ids = {"b", "a", "b", "a", "b", "a"};
  spots.patient_ids.assign(6, "P");
  spots.x.assign(6, 0.0);
  spots.y.assign(6, 0.0);
  spots.embeddings = Matrix::Zero(6, 1);
  const auto reports = evaluate_by_sample(t, t, spots);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0].sample_id, "a");
  EXPECT_EQ(reports[0].n_spots, 3u);
  EXPECT_NEAR(reports[1].mean_cc, 1.0, 1e-12);
  EXPECT_EQ(reports[1].l1, 0.0);
}

TEST(Evaluate, UndefinedMeanIsNaN) {
  const auto m = matrix_of(Matrix::Ones(3, 2));
  const auto r = evaluate(m, m, "x");
  EXPECT_TRUE(std::isnan(r.mean_cc));
  EXPECT_EQ(r.undefined_cc_types.size(), 2u);
}

TEST(Evaluate, MisalignedInputsRejected) {
  auto a = matrix_of(Matrix::Ones(3, 2));
  auto b = a;
  b.cell_types[1] = "other";
  EXPECT_THROW(evaluate(a, b, "x"), Error);
}
