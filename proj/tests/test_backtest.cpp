#include <gtest/gtest.h>

#include <cmath>

#include "smvp/backtest.hpp"
#include "smvp/covariance.hpp"
#include "smvp/io.hpp"
#include "test_util.hpp"

using namespace smvp;
using smvp::testing::linf;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ReturnsPanel random_panel(std::size_t t, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.04);
  std::normal_distribution<double> market(0.008, 0.03);
  Matrix r(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    const double m = market(rng);
    for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = m * (0.5 + 0.2 * j) + noise(rng);
  }
  std::vector<std::int64_t> dates(t);
  std::vector<std::string> ids(p);
  for (std::size_t i = 0; i < t; ++i) dates[i] = 200001 + static_cast<std::int64_t>(i);
  for (std::size_t j = 0; j < p; ++j) ids[j] = "X" + std::to_string(j);
  return ReturnsPanel(dates, ids, r);
}

const ReturnsPanel& fixture() {
  static const ReturnsPanel panel = io::read_panel(smvp::testing::data_dir() / "synthetic_panel.csv");
  return panel;
}

}  // namespace

TEST(Metrics, PortfolioReturn) {
  EXPECT_DOUBLE_EQ(portfolio_return(vec({0.5, 0.5}), vec({0.02, 0.04})), 0.03);
  EXPECT_DOUBLE_EQ(portfolio_return(vec({0.3, 0.7}), vec({0.05, 0.05})), 0.05);
  EXPECT_NEAR(portfolio_return(vec({1.2, -0.2}), vec({0.01, 0.05})), 0.002, 1e-15);
  EXPECT_THROW(portfolio_return(vec({1.0}), vec({0.1, 0.2})), DimensionError);
}

TEST(Metrics, Turnover) {
  const Vector half = vec({0.5, 0.5});
  EXPECT_DOUBLE_EQ(turnover(half, half, vec({0.0, 0.0})), 0.0);
  EXPECT_NEAR(turnover(vec({0.6, 0.4}), half, vec({0.0, 0.0})), 0.2, 1e-15);
  EXPECT_NEAR(turnover(half, half, vec({0.1, 0.0})), 0.047619047619047616, 1e-12);
  EXPECT_THROW(turnover(half, vec({2.0, -1.0}), vec({-0.6, 0.5})), DataError);
}

TEST(Metrics, PacAps) {
  EXPECT_DOUBLE_EQ(pac(vec({0.5, 0.5, 0.0, 0.0})), 0.5);
  EXPECT_DOUBLE_EQ(aps(vec({0.5, 0.5, 0.0, 0.0})), 0.0);
  EXPECT_DOUBLE_EQ(pac(vec({1.2, -0.2})), 1.0);
  EXPECT_DOUBLE_EQ(aps(vec({1.2, -0.2})), 0.2);
  EXPECT_DOUBLE_EQ(pac(Vector::Constant(7, 1.0 / 7.0)), 1.0);
  EXPECT_DOUBLE_EQ(aps(Vector::Constant(7, 1.0 / 7.0)), 0.0);
  // Entries inside the tolerance band count as zero.
  EXPECT_DOUBLE_EQ(pac(vec({1.0, 1e-9, -1e-9})), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(aps(vec({1.0, 1e-9, -1e-9})), 0.0);
}

TEST(Metrics, Median) {
  EXPECT_DOUBLE_EQ(median(vec({3.0, 1.0, 2.0})), 2.0);
  EXPECT_DOUBLE_EQ(median(vec({std::nan(""), 4.0, 1.0, 2.0, 3.0})), 2.5);
  EXPECT_TRUE(std::isnan(median(vec({std::nan("")}))));
}

TEST(Backtest, EqualWeightHandCheck) {
  const Matrix r{{0.01, 0.02, -0.01},
                 {0.03, -0.02, 0.00},
                 {0.02, 0.01, 0.05},
                 {-0.04, 0.02, 0.01},
                 {0.00, 0.03, -0.02}};
  const ReturnsPanel panel({1, 2, 3, 4, 5}, {"a", "b", "c"}, r);
  BacktestOptions opts;
  opts.window = 2;
  const auto rep = run(panel, EqualWeight{}, opts);
  ASSERT_EQ(rep.dates(), 3u);
  EXPECT_EQ(rep.rebalance_dates, (std::vector<std::int64_t>{3, 4, 5}));
  EXPECT_TRUE(std::isnan(rep.turnover(0)));
  for (Eigen::Index k = 0; k < 3; ++k) {
    const Vector rt = r.row(k + 2).transpose();
    EXPECT_NEAR(rep.portfolio_returns(k), rt.mean(), 1e-15);
    EXPECT_DOUBLE_EQ(rep.pac(k), 1.0);
    EXPECT_DOUBLE_EQ(rep.aps(k), 0.0);
    EXPECT_TRUE(std::isnan(rep.gamma(k)));
    if (k > 0) {
      const Vector prev = r.row(k + 1).transpose();
      const double bar = prev.mean();
      double expected = 0.0;
      for (Eigen::Index i = 0; i < 3; ++i)
        expected += std::abs(1.0 / 3.0 - (1.0 / 3.0) * (1.0 + prev(i)) / (1.0 + bar));
      EXPECT_NEAR(rep.turnover(k), expected, 1e-15);
      EXPECT_NEAR(rep.fees(k), expected * 0.0015, 1e-17);
    }
  }
  const Vector out = rep.portfolio_returns;
  const double mean = out.mean();
  const double var = (out.array() - mean).square().sum() / 2.0;
  EXPECT_NEAR(rep.oos_variance, var, 1e-16);
  EXPECT_NEAR(rep.sharpe, mean / std::sqrt(var), 1e-12);
}

TEST(Backtest, UnpenalizedIsClosedFormEachDate) {
  const auto panel = random_panel(40, 4, 61);
  BacktestOptions opts;
  opts.window = 24;
  const auto rep = run(panel, Penalized{ElasticNet{0.0, 1.0}}, opts);
  for (std::size_t k = 0; k < rep.dates(); ++k) {
    const auto sigma = sample_covariance(panel, k, 24);
    const Vector expected = smvp::testing::mvp_closed_form(sigma.sigma());
    EXPECT_LE(linf(rep.weights.row(static_cast<Eigen::Index>(k)).transpose(), expected), 1e-10);
    EXPECT_TRUE(rep.diagnostics[k].converged);
  }
}

TEST(Backtest, Invariants) {
  const auto& panel = fixture();
  BacktestOptions opts;
  const std::vector<Strategy> strategies{EqualWeight{}, NoShortsale{}, Penalized{ElasticNet{0.0, 1.0}},
                                         Penalized{ElasticNet{5.0, 1.0}}, Penalized{Berhu{2.0, 0.1}}};
  for (const auto& s : strategies) {
    const auto rep = run(panel, s, opts);
    ASSERT_EQ(rep.dates(), panel.periods() - 120);
    for (std::size_t k = 0; k < rep.dates(); ++k) {
      const auto row = rep.weights.row(static_cast<Eigen::Index>(k));
      EXPECT_NEAR(row.sum(), 1.0, opts.solver.budget_tol) << rep.strategy;
      EXPECT_TRUE(rep.diagnostics[k].converged) << rep.strategy;
    }
    if (std::holds_alternative<NoShortsale>(s)) {
      EXPECT_GE(rep.weights.minCoeff(), -1e-9);
      EXPECT_LE(rep.aps.maxCoeff(), 1e-9);
    }
    if (std::holds_alternative<EqualWeight>(s)) {
      EXPECT_EQ(rep.pac.minCoeff(), 1.0);
      EXPECT_EQ(rep.aps.maxCoeff(), 0.0);
    }
  }
}

TEST(Backtest, DeterministicAndThreadIndependent) {
  const auto& panel = fixture();
  BacktestOptions opts;
  const Strategy s = Penalized{ElasticNet{2.0, 1.0}};
  const auto a = run(panel, s, opts);
  const auto b = run(panel, s, opts);
  opts.threads = 4;
  const auto c = run(panel, s, opts);
  EXPECT_EQ(io::summary_json(a), io::summary_json(b));
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.weights, c.weights);
  EXPECT_EQ(a.gamma, c.gamma);
}

TEST(Backtest, WarmStartAgrees) {
  const auto& panel = fixture();
  BacktestOptions opts;
  for (double lambda : {0.5, 5.0, 30.0}) {
    const Strategy s = Penalized{ElasticNet{lambda, 1.0}};
    const auto cold = run(panel, s, opts);
    opts.warm_start = true;
    const auto warm = run(panel, s, opts);
    opts.warm_start = false;
    EXPECT_LE((cold.weights - warm.weights).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Backtest, MedianTurnoverFallsWithLambda) {
  const auto& panel = fixture();
  std::vector<double> medians;
  for (double lambda : {0.0, 2.0, 5.0, 10.0, 30.0})
    medians.push_back(median(run(panel, Penalized{ElasticNet{lambda, 1.0}}).turnover));
  int inversions = 0;
  for (std::size_t k = 1; k < medians.size(); ++k)
    if (medians[k] > medians[k - 1]) ++inversions;
  EXPECT_LE(inversions, 1);
}

TEST(Backtest, FailedSolveCarriesForward) {
  // Asset 2 is constant during the first window, so its variance is zero there.
  Matrix r(8, 3);
  r << 0.01, 0.02, 0.0, 0.03, -0.01, 0.0, -0.02, 0.01, 0.0, 0.02, 0.03, 0.0, 0.01, -0.02, 0.01,
      0.00, 0.01, -0.01, 0.02, 0.02, 0.02, -0.01, 0.00, 0.01;
  const ReturnsPanel panel({1, 2, 3, 4, 5, 6, 7, 8}, {"a", "b", "c"}, r);
  BacktestOptions opts;
  opts.window = 4;
  const auto rep = run(panel, Penalized{ElasticNet{1.0, 1.0}}, opts);
  ASSERT_EQ(rep.dates(), 4u);
  EXPECT_TRUE(rep.diagnostics[0].carried_forward);
  EXPECT_FALSE(rep.diagnostics[0].message.empty());
  EXPECT_TRUE(std::isnan(rep.gamma(0)));
  EXPECT_LE(linf(rep.weights.row(0).transpose(), Vector::Constant(3, 1.0 / 3.0)), 0.0);
  EXPECT_FALSE(rep.diagnostics[3].carried_forward);
}

TEST(Backtest, NonConvergenceIsFlagged) {
  const auto& panel = fixture();
  BacktestOptions opts;
  opts.solver.max_sweeps = 1;
  const auto rep = run(panel, Penalized{ElasticNet{5.0, 1.0}}, opts);
  for (const auto& d : rep.diagnostics) {
    EXPECT_FALSE(d.converged);
    EXPECT_FALSE(d.carried_forward);
  }
}

TEST(Backtest, Preconditions) {
  const auto panel = random_panel(10, 3, 62);
  BacktestOptions opts;
  opts.window = 10;
  EXPECT_THROW(run(panel, EqualWeight{}, opts), InvalidArgument);
  opts.window = 1;
  EXPECT_THROW(run(panel, EqualWeight{}, opts), InvalidArgument);
  opts.window = 5;
  opts.covariance_scale = 0.0;
  EXPECT_THROW(run(panel, EqualWeight{}, opts), InvalidArgument);
  opts.covariance_scale = 1.0;
  EXPECT_THROW(run(panel, Penalized{ElasticNet{-1.0, 1.0}}, opts), InvalidArgument);
}
