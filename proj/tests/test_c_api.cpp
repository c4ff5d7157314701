// Exercises the shared library through its C header only.
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "smvp/smvp.h"

namespace {

const std::string kData = SMVP_TEST_DATA_DIR;

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("smvp_c_api_" + name);
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(smvp_version(), "0.1.0");
  EXPECT_STREQ(smvp_status_name(SMVP_OK), "ok");
  EXPECT_STREQ(smvp_status_name(SMVP_NOT_CONVERGED), "not converged");
}

TEST(CApi, SolveDiagonal) {
  const double values[] = {1.0, 0.0, 0.0, 4.0};
  smvp_covariance* cov = nullptr;
  ASSERT_EQ(smvp_covariance_create(2, values, nullptr, &cov), SMVP_OK);
  smvp_penalty* pen = nullptr;
  ASSERT_EQ(smvp_penalty_elastic_net(0.0, 1.0, &pen), SMVP_OK);
  EXPECT_STREQ(smvp_penalty_family(pen), "elastic-net");
  smvp_solution* sol = nullptr;
  ASSERT_EQ(smvp_solve(cov, pen, nullptr, &sol), SMVP_OK);
  ASSERT_EQ(smvp_solution_dim(sol), 2u);
  EXPECT_NEAR(smvp_solution_weights(sol)[0], 0.8, 1e-12);
  EXPECT_NEAR(smvp_solution_weights(sol)[1], 0.2, 1e-12);
  EXPECT_TRUE(smvp_solution_converged(sol));
  double obj = 0.0;
  ASSERT_EQ(smvp_objective(cov, pen, smvp_solution_weights(sol), 2, &obj), SMVP_OK);
  EXPECT_NEAR(obj, smvp_solution_objective(sol), 1e-15);

  smvp_solution* ref = nullptr;
  ASSERT_EQ(smvp_solve_reference(cov, pen, &ref), SMVP_OK);
  EXPECT_NEAR(smvp_solution_weights(ref)[0], 0.8, 1e-10);
  smvp_solution* ns = nullptr;
  ASSERT_EQ(smvp_solve_no_shortsale(cov, &ns), SMVP_OK);
  EXPECT_NEAR(smvp_solution_weights(ns)[1], 0.2, 1e-12);

  smvp_solution_free(ns);
  smvp_solution_free(ref);
  smvp_solution_free(sol);
  smvp_penalty_free(pen);
  smvp_covariance_free(cov);
}

TEST(CApi, ErrorsAndNotConverged) {
  const double asym[] = {1.0, 0.5, 0.0, 1.0};
  smvp_covariance* cov = nullptr;
  EXPECT_EQ(smvp_covariance_create(2, asym, nullptr, &cov), SMVP_DATA);
  EXPECT_EQ(cov, nullptr);
  EXPECT_NE(std::string(smvp_last_error()), "");

  smvp_penalty* pen = nullptr;
  EXPECT_EQ(smvp_penalty_elastic_net(-1.0, 1.0, &pen), SMVP_INVALID_ARGUMENT);
  EXPECT_EQ(smvp_penalty_berhu(1.0, 0.0, &pen), SMVP_INVALID_ARGUMENT);
  EXPECT_EQ(smvp_solve(nullptr, nullptr, nullptr, nullptr), SMVP_INVALID_ARGUMENT);

  const double degenerate[] = {1.0, 0.0, 0.0, 0.0};
  ASSERT_EQ(smvp_covariance_create(2, degenerate, nullptr, &cov), SMVP_OK);
  ASSERT_EQ(smvp_penalty_elastic_net(1.0, 1.0, &pen), SMVP_OK);
  smvp_solution* sol = nullptr;
  EXPECT_EQ(smvp_solve(cov, pen, nullptr, &sol), SMVP_DEGENERATE);
  smvp_covariance_free(cov);

  const double s3[] = {2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5};
  ASSERT_EQ(smvp_covariance_create(3, s3, nullptr, &cov), SMVP_OK);
  smvp_solver_options opts;
  smvp_solver_options_init(&opts);
  EXPECT_EQ(opts.max_sweeps, 10000u);
  opts.max_sweeps = 1;
  EXPECT_EQ(smvp_solve(cov, pen, &opts, &sol), SMVP_NOT_CONVERGED);
  ASSERT_NE(sol, nullptr);
  EXPECT_FALSE(smvp_solution_converged(sol));
  smvp_solution_free(sol);

  smvp_covariance* missing = nullptr;
  EXPECT_EQ(smvp_covariance_read("/nonexistent/cov.csv", &missing), SMVP_IO);
  smvp_penalty_free(pen);
  smvp_covariance_free(cov);
}

TEST(CApi, PanelBacktestAndReportRoundTrip) {
  smvp_ingest_options ing;
  smvp_ingest_options_init(&ing);
  ing.impute = 0;
  smvp_panel* raw = nullptr;
  ASSERT_EQ(smvp_panel_read((kData + "/synthetic_panel.csv").c_str(), &ing, &raw), SMVP_OK);
  EXPECT_EQ(smvp_panel_periods(raw), 140u);
  EXPECT_EQ(smvp_panel_assets(raw), 5u);
  EXPECT_EQ(smvp_panel_missing_count(raw), 3u);
  EXPECT_STREQ(smvp_panel_asset_id(raw, 0), "Agric");
  EXPECT_EQ(smvp_panel_date(raw, 0), 200101);
  EXPECT_NEAR(smvp_panel_return(raw, 0, 0), 0.0108, 1e-15);
  smvp_panel* panel = nullptr;
  ASSERT_EQ(smvp_panel_impute(raw, &panel), SMVP_OK);
  EXPECT_EQ(smvp_panel_missing_count(panel), 0u);

  smvp_covariance* cov = nullptr;
  ASSERT_EQ(smvp_covariance_from_panel(panel, 0, 120, SMVP_DIVISOR_UNBIASED, 1e4, &cov), SMVP_OK);
  EXPECT_EQ(smvp_covariance_dim(cov), 5u);
  EXPECT_GT(smvp_covariance_get(cov, 0, 0), 1.0);

  smvp_backtest_options opts;
  smvp_backtest_options_init(&opts);
  EXPECT_EQ(opts.window, 120u);
  smvp_penalty* pen = nullptr;
  ASSERT_EQ(smvp_penalty_elastic_net(5.0, 1.0, &pen), SMVP_OK);
  smvp_report* rep = nullptr;
  ASSERT_EQ(smvp_backtest_run(panel, SMVP_STRATEGY_PENALIZED, pen, &opts, &rep), SMVP_OK);
  ASSERT_EQ(smvp_report_dates(rep), 20u);
  EXPECT_EQ(smvp_report_date(rep, 0), 201101);
  std::vector<double> aps(20), turnover(20);
  ASSERT_EQ(smvp_report_series(rep, SMVP_SERIES_APS, aps.data()), SMVP_OK);
  ASSERT_EQ(smvp_report_series(rep, SMVP_SERIES_TURNOVER, turnover.data()), SMVP_OK);
  EXPECT_TRUE(std::isnan(turnover[0]));
  for (std::size_t k = 0; k < 20; ++k) EXPECT_TRUE(smvp_report_converged(rep, k));

  const auto dir = temp_dir("report");
  ASSERT_EQ(smvp_report_write(rep, dir.c_str()), SMVP_OK);
  smvp_report* back = nullptr;
  ASSERT_EQ(smvp_report_read(dir.c_str(), &back), SMVP_OK);
  EXPECT_STREQ(smvp_report_summary_json(back), smvp_report_summary_json(rep));
  EXPECT_EQ(smvp_report_weight(back, 7, 3), smvp_report_weight(rep, 7, 3));
  EXPECT_EQ(smvp_report_sharpe(back), smvp_report_sharpe(rep));
  EXPECT_EQ(smvp_report_median(back, SMVP_SERIES_TURNOVER), smvp_report_median(rep, SMVP_SERIES_TURNOVER));

  smvp_report* ew = nullptr;
  ASSERT_EQ(smvp_backtest_run(panel, SMVP_STRATEGY_EQUAL_WEIGHT, nullptr, &opts, &ew), SMVP_OK);
  EXPECT_EQ(smvp_report_median(ew, SMVP_SERIES_PAC), 1.0);
  EXPECT_EQ(smvp_backtest_run(panel, SMVP_STRATEGY_PENALIZED, nullptr, &opts, &ew), SMVP_INVALID_ARGUMENT);

  smvp_report_free(ew);
  smvp_report_free(back);
  smvp_report_free(rep);
  smvp_penalty_free(pen);
  smvp_covariance_free(cov);
  smvp_panel_free(panel);
  smvp_panel_free(raw);
}

TEST(CApi, PanelCreateAndSweep) {
  const int64_t dates[] = {1, 2, 3, 4};
  const char* ids[] = {"a", "b"};
  const double r[] = {0.01, 0.02, -0.01, NAN, 0.03, 0.0, 0.0, 0.01};
  smvp_panel* panel = nullptr;
  ASSERT_EQ(smvp_panel_create(4, 2, dates, ids, r, &panel), SMVP_OK);
  EXPECT_TRUE(smvp_panel_is_missing(panel, 1, 1));
  smvp_panel_free(panel);

  smvp_covariance* cov = nullptr;
  ASSERT_EQ(smvp_covariance_read((kData + "/cov48.csv").c_str(), &cov), SMVP_OK);
  EXPECT_STREQ(smvp_covariance_asset_id(cov, 47), "I48");
  smvp_penalty* pen = nullptr;
  ASSERT_EQ(smvp_penalty_elastic_net(0.0, 1.0, &pen), SMVP_OK);
  const double lambdas[] = {0.0, 5.0, 30.0};
  const double alphas[] = {1.0, 0.5};
  smvp_sweep_result* res = nullptr;
  ASSERT_EQ(smvp_sweep(cov, pen, lambdas, 3, alphas, 2, nullptr, 2, &res), SMVP_OK);
  EXPECT_EQ(smvp_sweep_points(res), 6u);
  EXPECT_EQ(smvp_sweep_failures(res), 0u);
  EXPECT_EQ(smvp_sweep_nonconverged(res), 0u);
  const auto dir = temp_dir("sweep");
  EXPECT_EQ(smvp_sweep_write(res, dir.c_str()), SMVP_OK);
  EXPECT_TRUE(std::filesystem::exists(dir + "/profile.csv"));
  smvp_sweep_free(res);
  smvp_penalty_free(pen);
  smvp_covariance_free(cov);
}
