#include <gtest/gtest.h>

#include <cmath>

#include "longeval/metrics.hpp"
#include "longeval/models.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace longeval;
using testing_util::dense_panel;
using testing_util::kind_of;

namespace {

Design random_problem(int n, int p, std::uint64_t seed, double noise = 0.1) {
  Rng rng(seed);
  Eigen::VectorXd w(p);
  for (int j = 0; j < p; ++j) w(j) = rng.normal();
  Design d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.X(i, j) = rng.normal() + 0.5;
    d.y(i) = 3.0 + d.X.row(i).dot(w) + noise * rng.normal();
  }
  return d;
}

std::vector<std::vector<double>> rows(const Eigen::MatrixXd& X) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) out[static_cast<std::size_t>(i)].push_back(X(i, j));
  return out;
}

double dev_mae(const RidgeModel& m, const Design& dev) {
  return (m.predict_rows(dev.X) - dev.y).cwiseAbs().mean();
}

}  // namespace

TEST(MeanBaseline, Examples) {
  const std::vector<double> a{1, 2, 3}, b{4};
  EXPECT_EQ(fit_mean_baseline(a).mean, 2.0);
  EXPECT_EQ(fit_mean_baseline(a).predict(), 2.0);
  EXPECT_EQ(fit_mean_baseline(b).mean, 4.0);
  EXPECT_THROW(fit_mean_baseline(std::vector<double>{}), Error);
  EXPECT_EQ(mean_baseline_from_text(mean_baseline_to_text(fit_mean_baseline(a))).mean, 2.0);
}

TEST(Ridge, IdentityDesign) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd y = Eigen::Vector2d(1.0, 2.0);
  for (double lambda : {0.01, 1.0, 7.0}) {
    const auto m = fit_ridge(X, y, lambda);
    // Centered: Xc'Xc has eigenvalue 1 along yc = (-0.5, 0.5), so w = yc / (1 + lambda).
    EXPECT_NEAR(m.weights(0), -0.5 / (1.0 + lambda), 1e-14);
    EXPECT_NEAR(m.weights(1), 0.5 / (1.0 + lambda), 1e-14);
    EXPECT_NEAR(m.bias, 1.5 - 0.5 * (m.weights(0) + m.weights(1)), 1e-14);
  }
}

TEST(Ridge, HugePenaltyIsMeanBaseline) {
  const auto d = random_problem(40, 5, 1);
  const auto m = fit_ridge(d.X, d.y, 1e12);
  const double mean = d.y.mean();
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) EXPECT_NEAR(m.predict(d.X.row(i).transpose()), mean, 1e-3);
}

TEST(Ridge, MatchesExtendedPrecisionOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = random_problem(20, 5, seed);
    for (double lambda : {0.01, 1.0, 100.0}) {
      const auto m = fit_ridge(d.X, d.y, lambda);
      const auto o = oracle::ridge(rows(d.X), {d.y.data(), d.y.data() + d.y.size()}, lambda);
      for (int j = 0; j < 5; ++j) EXPECT_NEAR(m.weights(j), o.weights[j], 1e-8);
      EXPECT_NEAR(m.bias, o.bias, 1e-8);
    }
  }
}

TEST(Ridge, OptimalityAndShrinkage) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const int n = 3 + static_cast<int>(rng.below(40));
    const int p = 1 + static_cast<int>(rng.below(12));
    const auto d = random_problem(n, p, seed + 50, 0.5);
    const Eigen::RowVectorXd xm = d.X.colwise().mean();
    const Eigen::MatrixXd Xc = d.X.rowwise() - xm;
    const Eigen::VectorXd yc = d.y.array() - d.y.mean();
    double last_norm = INFINITY;
    for (double lambda : default_lambda_grid()) {
      const auto m = fit_ridge(d.X, d.y, lambda);
      const Eigen::VectorXd grad = -2.0 * Xc.transpose() * (yc - Xc * m.weights) + 2.0 * lambda * m.weights;
      EXPECT_LE(grad.cwiseAbs().maxCoeff(), 1e-6) << "lambda " << lambda;
      EXPECT_LE(m.weights.norm(), last_norm * (1 + 1e-12));
      last_norm = m.weights.norm();
    }
  }
}

TEST(Ridge, Errors) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
  EXPECT_EQ(kind_of([&] { fit_ridge(X, y, 0.0); }), ErrorKind::Parameter);
  X(1, 1) = NAN;
  EXPECT_EQ(kind_of([&] { fit_ridge(X, y, 1.0); }), ErrorKind::NonFinite);
  EXPECT_THROW(fit_ridge(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), 1.0), Error);
  const auto m = fit_ridge(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 2), 1.0);
  EXPECT_EQ(kind_of([&] { m.predict(Eigen::VectorXd(Eigen::Vector3d::Zero())); }), ErrorKind::Shape);
  EXPECT_EQ(m.predict(Eigen::VectorXd(Eigen::Vector2d::Zero())), m.bias);
}

TEST(Ridge, TextRoundTripIsExact) {
  const auto d = random_problem(15, 4, 8);
  auto m = fit_ridge(d.X, d.y, 0.1);
  m.encoding = HistoryEncoding::Pooled;
  m.history_len = 3;
  const auto back = ridge_from_text(ridge_to_text(m));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.lambda, m.lambda);
  EXPECT_EQ(back.encoding, m.encoding);
  EXPECT_EQ(back.history_len, 3);
}

TEST(SelectRidge, GridHasEightEntries) {
  EXPECT_EQ(default_lambda_grid().size(), 8u);
  EXPECT_DOUBLE_EQ(default_lambda_grid().front(), 0.01);
  EXPECT_DOUBLE_EQ(default_lambda_grid().back(), 1e5);
}

TEST(SelectRidge, NoiselessPrefersSmallestPenalty) {
  const auto d = random_problem(60, 4, 3, 0.0);
  const auto grid = default_lambda_grid();
  const auto sel = select_ridge(d, d, grid, Regime::Traditional, HistoryEncoding::Stacked, 1);
  EXPECT_EQ(sel.trace.grid.size(), 8u);
  EXPECT_DOUBLE_EQ(sel.trace.chosen, 0.01);
  EXPECT_EQ(sel.model.lambda, 0.01);
}

TEST(SelectRidge, PureNoisePrefersLargestPenalty) {
  // Hadamard columns and a target orthogonal to all of them: the features
  // carry no signal, w = 0 at every penalty, and dev scores tie exactly.
  Design train{Eigen::MatrixXd(8, 3), Eigen::VectorXd(8)};
  for (int i = 0; i < 8; ++i) {
    train.X(i, 0) = (i & 1) ? 1.0 : -1.0;
    train.X(i, 1) = (i & 2) ? 1.0 : -1.0;
    train.X(i, 2) = (i & 4) ? 1.0 : -1.0;
    const int parity = ((i & 1) + ((i >> 1) & 1) + ((i >> 2) & 1)) % 2;
    train.y(i) = parity ? 3.5 : 2.5;
  }
  Rng rng(21);
  Design dev{Eigen::MatrixXd(50, 3), Eigen::VectorXd(50)};
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 3; ++j) dev.X(i, j) = rng.normal();
    dev.y(i) = 3.0 + rng.normal();
  }
  const auto grid = default_lambda_grid();
  const auto sel = select_ridge(train, dev, grid, Regime::CrossSectional, HistoryEncoding::Stacked, 1);
  for (const auto& [lambda, score] : sel.trace.grid) EXPECT_EQ(score, sel.trace.grid.front().second);
  EXPECT_DOUBLE_EQ(sel.trace.chosen, 1e5);
  EXPECT_EQ(sel.trace.dev_regime, Regime::CrossSectional);
}

TEST(SelectRidge, ChoiceMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto train = random_problem(30, 6, seed, 2.0);
    const auto dev = random_problem(20, 6, seed + 1000, 2.0);
    const auto grid = default_lambda_grid();
    const auto sel = select_ridge(train, dev, grid, Regime::Prospective, HistoryEncoding::Stacked, 1);
    double best = INFINITY, chosen = 0;
    for (double lambda : grid) {
      const double score = dev_mae(fit_ridge(train.X, train.y, lambda), dev);
      if (score <= best) {
        best = score;
        chosen = lambda;
      }
    }
    EXPECT_EQ(sel.trace.chosen, chosen);
    // Refit on train + dev.
    Eigen::MatrixXd X(50, 6);
    X << train.X, dev.X;
    Eigen::VectorXd y(50);
    y << train.y, dev.y;
    const auto refit = fit_ridge(X, y, chosen);
    EXPECT_LT((refit.weights - sel.model.weights).norm(), 1e-12);
  }
}

TEST(SelectRidge, EmptyDevRejected) {
  const auto d = random_problem(10, 2, 1);
  const Design empty{Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)};
  EXPECT_THROW(select_ridge(d, empty, default_lambda_grid(), Regime::Traditional, HistoryEncoding::Stacked, 1), Error);
}

TEST(Ridge, BoeAndArAgreeAtHistoryOne) {
  const auto ds = build_instances(dense_panel(5, 20, 4), TaskMode::ForecastOneAhead, 1);
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto stacked = build_design(ds, idx, HistoryEncoding::Stacked);
  const auto pooled = build_design(ds, idx, HistoryEncoding::Pooled);
  const auto ar = fit_ridge(stacked.X, stacked.y, 10.0);
  const auto boe = fit_ridge(pooled.X, pooled.y, 10.0);
  EXPECT_LE((ar.predict_rows(stacked.X) - boe.predict_rows(pooled.X)).cwiseAbs().maxCoeff(), 1e-10);
}
