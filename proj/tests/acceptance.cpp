// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Tolerances are fixed here.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "smvp/backtest.hpp"
#include "smvp/berhu_solver.hpp"
#include "smvp/cd_solver.hpp"
#include "smvp/covariance.hpp"
#include "smvp/group_solver.hpp"
#include "smvp/io.hpp"
#include "smvp/oracle.hpp"
#include "smvp/solve.hpp"

using namespace smvp;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SMVP_TEST_DATA_DIR;

constexpr double kKktScale = 1e-6;
constexpr double kBudgetTol = 1e-8;
constexpr double kKktSeconds = 60.0;
constexpr double kOracleTol = 1e-6;
constexpr double kOracleGroupTol = 1e-5;
constexpr double kOracleSeconds = 300.0;
constexpr double kRidgeTol = 1e-7;
constexpr double kNoShortsaleL1 = 1e-3;
constexpr double kReductionTol = 1e-6;
constexpr double kReductionUnitEtaTol = 1e-9;
constexpr double kGoldenTol = 1e-9;
constexpr double kTurnoverHandTol = 1e-12;

struct Outcome {
  bool pass = true;
  std::string detail;
};

Matrix random_spd(std::size_t p, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(2 * p + 3);
  Matrix x(n, static_cast<Eigen::Index>(p));
  for (auto& v : x.reshaped()) v = normal(rng);
  return (x.transpose() * x) / static_cast<double>(n);
}

Vector uniform(std::size_t p, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(static_cast<Eigen::Index>(p));
  for (auto& x : v) x = u(rng);
  return v;
}

GroupStructure contiguous(std::size_t p, std::size_t groups) {
  std::vector<std::size_t> labels(p);
  for (std::size_t i = 0; i < p; ++i) labels[i] = i * groups / p;
  return GroupStructure::from_labels(labels);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome kkt_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::size_t solves = 0, unconverged = 0, violations = 0;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t p = 3 + static_cast<std::size_t>(k % 10);
    const CovarianceMatrix sigma(random_spd(p, rng));
    std::vector<PenaltyConfig> grid;
    for (double alpha : {0.0, 0.5, 1.0})
      for (double lambda : {0.0, 0.5, 5.0}) grid.push_back(ElasticNet{lambda, alpha});
    for (double delta : {0.1, 1.0})
      for (double lambda : {0.5, 5.0}) grid.push_back(Berhu{lambda, delta});
    for (double lambda : {0.5, 5.0}) grid.push_back(WeightedL1{lambda, uniform(p, rng, 0.2, 2.0)});
    const double bound = kKktScale * (1.0 + sigma.max_variance());
    for (const auto& pen : grid) {
      const auto s = solve_penalized(sigma, pen);
      ++solves;
      if (!s.converged) {
        ++unconverged;
        continue;
      }
      const double budget = std::abs(s.weights.sum() - 1.0);
      worst = std::max(worst, s.kkt_residual / bound);
      if (s.kkt_residual > bound || budget > kBudgetTol) ++violations;
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = violations == 0 && unconverged == 0 && elapsed <= kKktSeconds;
  o.detail = std::to_string(solves) + " solves, " + std::to_string(unconverged) + " unconverged, " +
             std::to_string(violations) + " violations, worst residual/bound " + fmt("%.2e", worst) +
             fmt(", %.1f s", elapsed);
  return o;
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  struct Family {
    const char* name;
    double tol;
    std::function<PenaltyConfig(std::size_t)> make;
    double worst = -1.0;
    int failures = 0;
  };
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Family> families{
      {"elastic-net", kOracleTol, [&](std::size_t) { return PenaltyConfig{ElasticNet{0.1 + 3.0 * u(rng), u(rng)}}; }},
      {"mean-variance", kOracleTol,
       [&](std::size_t p) {
         return PenaltyConfig{MeanVariance{0.1 + 2.0 * u(rng), u(rng), u(rng), uniform(p, rng, -1.0, 1.0)}};
       }},
      {"weighted-l1", kOracleTol,
       [&](std::size_t p) { return PenaltyConfig{WeightedL1{0.1 + 2.0 * u(rng), uniform(p, rng, 0.2, 2.0)}}; }},
      {"berhu", kOracleTol, [&](std::size_t) { return PenaltyConfig{Berhu{0.1 + 3.0 * u(rng), 0.05 + 0.5 * u(rng)}}; }},
      {"adaptive-group", kOracleGroupTol,
       [&](std::size_t p) {
         return PenaltyConfig{AdaptiveGroup{0.1 + 1.5 * u(rng), contiguous(p, 1 + p % 3)}};
       }},
  };
  for (auto& fam : families) {
    for (int k = 0; k < 100; ++k) {
      const std::size_t p = 2 + static_cast<std::size_t>(k % 7);
      const CovarianceMatrix sigma(random_spd(p, rng));
      const auto pen = fam.make(p);
      const auto s = solve_penalized(sigma, pen);
      const auto o = solve_generic(sigma, pen);
      const double gap = (s.objective - o.objective) / (1.0 + std::abs(o.objective));
      fam.worst = std::max(fam.worst, gap);
      if (!s.converged || gap > fam.tol) ++fam.failures;
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = elapsed <= kOracleSeconds;
  for (const auto& fam : families) {
    out.pass = out.pass && fam.failures == 0;
    out.detail += std::string(fam.name) + fmt(" %.1e", fam.worst) + (fam.failures ? " FAILED" : "") + ", ";
  }
  out.detail += fmt("%.1f s (max relative gap, 100 instances each)", elapsed);
  return out;
}

Outcome ridge_closed_form() {
  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  bool converged = true;
  for (int k = 0; k < 50; ++k) {
    const std::size_t p = 2 + static_cast<std::size_t>(k) * 48 / 49;
    const Matrix m = random_spd(p, rng);
    const double lambda = 0.01 + 5.0 * u(rng);
    const auto s = solve_penalized(CovarianceMatrix(m), ElasticNet{lambda, 0.0});
    converged = converged && s.converged;
    const Vector x = (m + lambda * Matrix::Identity(m.rows(), m.cols())).ldlt().solve(Vector::Ones(m.rows()));
    worst = std::max(worst, (s.weights - x / x.sum()).cwiseAbs().maxCoeff());
  }
  return {converged && worst <= kRidgeTol, fmt("max l-inf error %.2e over 50 instances, p up to 50", worst)};
}

Outcome no_shortsale_limit() {
  const auto sigma = io::read_covariance(kData / "cov48.csv");
  const auto ns = solve_no_shortsale(sigma);
  const auto l30 = solve_penalized(sigma, ElasticNet{30.0, 1.0});
  const auto l5 = solve_penalized(sigma, ElasticNet{5.0, 1.0});
  const double d30 = (l30.weights - ns.weights).lpNorm<1>();
  const double d5 = (l5.weights - ns.weights).lpNorm<1>();
  const bool ok = ns.converged && l30.converged && l5.converged && d30 <= kNoShortsaleL1 && d30 <= d5;
  return {ok, fmt("l1 distance %.2e at lambda 30, %.2e at lambda 5", d30, d5)};
}

Outcome reduction_chain() {
  std::mt19937_64 rng(5005);
  double group_vs_wl1 = 0.0, berhu_vs_lasso = 0.0, wl1_vs_lasso = 0.0;
  bool converged = true;
  for (int k = 0; k < 30; ++k) {
    const std::size_t p = 3 + static_cast<std::size_t>(k % 10);
    const CovarianceMatrix sigma(random_spd(p, rng));
    const double lambda = 0.2 + 0.3 * (k % 7);
    const Vector eta = sigma.sigma().diagonal().cwiseSqrt();
    const auto g = solve_penalized(sigma, AdaptiveGroup{lambda, contiguous(p, p)});
    const auto w = solve_penalized(sigma, WeightedL1{lambda, eta});
    const auto b = solve_penalized(sigma, Berhu{lambda, 1e6});
    const auto l = solve_penalized(sigma, ElasticNet{lambda, 1.0});
    const auto u = solve_penalized(sigma, WeightedL1{lambda, Vector::Ones(static_cast<Eigen::Index>(p))});
    converged = converged && g.converged && w.converged && b.converged && l.converged && u.converged;
    group_vs_wl1 = std::max(group_vs_wl1, (g.weights - w.weights).cwiseAbs().maxCoeff());
    berhu_vs_lasso = std::max(berhu_vs_lasso, (b.weights - l.weights).cwiseAbs().maxCoeff());
    wl1_vs_lasso = std::max(wl1_vs_lasso, (u.weights - l.weights).cwiseAbs().maxCoeff());
  }
  const bool ok = converged && group_vs_wl1 <= kReductionTol && berhu_vs_lasso <= kReductionTol &&
                  wl1_vs_lasso <= kReductionUnitEtaTol;
  return {ok, fmt("singleton group vs weighted-l1 %.1e, berhu(1e6) vs lasso %.1e, unit-eta vs lasso %.1e",
                  group_vs_wl1, berhu_vs_lasso, wl1_vs_lasso)};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool close(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= kGoldenTol * std::max(1.0, std::abs(b));
}

// Largest field deviation; -1 if the shapes or labels differ.
double report_gap(const BacktestReport& a, const BacktestReport& b, const std::function<bool(double, double)>& eq,
                  std::size_t& mismatches) {
  if (a.rebalance_dates != b.rebalance_dates || a.asset_ids != b.asset_ids || a.strategy != b.strategy ||
      a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols())
    return -1.0;
  double worst = 0.0;
  auto visit = [&](double x, double y) {
    if (!eq(x, y)) ++mismatches;
    if (std::isfinite(x) && std::isfinite(y)) worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
  };
  for (Eigen::Index k = 0; k < a.weights.size(); ++k) visit(a.weights.reshaped()(k), b.weights.reshaped()(k));
  for (auto member : {&BacktestReport::portfolio_returns, &BacktestReport::turnover, &BacktestReport::pac,
                      &BacktestReport::aps, &BacktestReport::gamma, &BacktestReport::fees})
    for (Eigen::Index k = 0; k < (a.*member).size(); ++k) visit((a.*member)(k), (b.*member)(k));
  visit(a.oos_variance, b.oos_variance);
  visit(a.sharpe, b.sharpe);
  for (std::size_t k = 0; k < a.diagnostics.size(); ++k)
    if (a.diagnostics[k].converged != b.diagnostics[k].converged ||
        a.diagnostics[k].carried_forward != b.diagnostics[k].carried_forward)
      ++mismatches;
  return worst;
}

Outcome backtest_golden() {
  const auto panel = io::read_panel(kData / "synthetic_panel.csv");
  BacktestOptions opts;
  // The golden values are exact; tighten the stopping rule so the iterate is too.
  opts.solver.coord_tol = 1e-10;
  opts.solver.budget_tol = 1e-12;
  struct Case {
    const char* dir;
    Strategy strategy;
    bool exact;
  };
  const std::vector<Case> cases{{"equal_weight", EqualWeight{}, true},
                                {"elastic_net_l0", Penalized{ElasticNet{0.0, 1.0}}, false},
                                {"elastic_net_l5", Penalized{ElasticNet{5.0, 1.0}}, false},
                                {"no_shortsale", NoShortsale{}, false}};
  Outcome o;
  for (const auto& c : cases) {
    const auto rep = run(panel, c.strategy, opts);
    const auto golden = io::read_report(kData / "golden" / c.dir);
    std::size_t mismatches = 0;
    const double gap = c.exact ? report_gap(rep, golden, same, mismatches) : report_gap(rep, golden, close, mismatches);
    bool ok = gap >= 0.0 && mismatches == 0;
    if (c.exact) ok = ok && io::summary_json(rep) == read_text(kData / "golden" / c.dir / "summary.json");
    o.pass = o.pass && ok;
    o.detail += std::string(c.dir) + (c.exact ? " bit-exact " : fmt(" %.1e ", gap)) + (ok ? "ok" : "MISMATCH") + ", ";
  }
  o.detail.resize(o.detail.size() - 2);
  return o;
}

double ulp(double x) { return std::nextafter(x, 2.0 * x) - x; }

Outcome metric_formulas() {
  auto v = [](std::initializer_list<double> x) {
    Vector out(static_cast<Eigen::Index>(x.size()));
    Eigen::Index i = 0;
    for (double e : x) out(i++) = e;
    return out;
  };
  const Vector half = v({0.5, 0.5});
  std::vector<std::pair<const char*, bool>> checks{
      {"return", portfolio_return(half, v({0.02, 0.04})) == 0.03},
      {"return const", std::abs(portfolio_return(v({0.3, 0.7}), v({0.05, 0.05})) - 0.05) <= 2 * ulp(0.05)},
      {"return short", std::abs(portfolio_return(v({1.2, -0.2}), v({0.01, 0.05})) - 0.002) <= 1e-15},
      {"turnover still", turnover(half, half, v({0.0, 0.0})) == 0.0},
      {"turnover rebalance", std::abs(turnover(v({0.6, 0.4}), half, v({0.0, 0.0})) - 0.2) <= 1e-15},
      {"turnover drift", std::abs(turnover(half, half, v({0.1, 0.0})) - 1.0 / 21.0) <= kTurnoverHandTol},
      {"pac half", pac(v({0.5, 0.5, 0.0, 0.0})) == 0.5},
      {"aps none", aps(v({0.5, 0.5, 0.0, 0.0})) == 0.0},
      {"pac short", pac(v({1.2, -0.2})) == 1.0},
      {"aps short", aps(v({1.2, -0.2})) == 0.2},
      {"pac ew", pac(Vector::Constant(9, 1.0 / 9.0)) == 1.0},
      {"aps ew", aps(Vector::Constant(9, 1.0 / 9.0)) == 0.0},
  };
  Outcome o;
  int passed = 0;
  for (const auto& [name, ok] : checks) {
    if (ok) ++passed;
    else o.detail += std::string(name) + " failed; ";
  }
  o.pass = passed == static_cast<int>(checks.size());
  o.detail += std::to_string(passed) + "/" + std::to_string(checks.size()) + " examples";
  return o;
}

Outcome lambda_grid_shape() {
  const auto panel = io::read_panel(kData / "synthetic_panel.csv");
  std::vector<double> med_aps, med_pac;
  for (double lambda : {0.0, 2.0, 5.0, 10.0, 30.0}) {
    const auto rep = run(panel, Penalized{ElasticNet{lambda, 1.0}});
    med_aps.push_back(median(rep.aps));
    med_pac.push_back(median(rep.pac));
  }
  auto inversions = [](const std::vector<double>& s) {
    int n = 0;
    for (std::size_t k = 1; k < s.size(); ++k)
      if (s[k] > s[k - 1]) ++n;
    return n;
  };
  std::string detail = "median APS";
  for (double x : med_aps) detail += fmt(" %.4f", x);
  detail += ", median PAC";
  for (double x : med_pac) detail += fmt(" %.2f", x);
  return {inversions(med_aps) <= 1 && inversions(med_pac) <= 1, detail};
}

Outcome determinism_round_trip() {
  const auto panel = io::read_panel(kData / "synthetic_panel.csv");
  bool ok = true;
  const std::vector<Strategy> strategies{EqualWeight{}, NoShortsale{}, Penalized{ElasticNet{2.0, 0.5}},
                                         Penalized{Berhu{2.0, 0.1}}, Penalized{AdaptiveGroup{1.0, contiguous(5, 2)}}};
  for (const auto& s : strategies) {
    BacktestOptions opts;
    const auto a = run(panel, s, opts);
    opts.threads = 3;
    const auto b = run(panel, s, opts);
    std::size_t mismatches = 0;
    ok = ok && report_gap(a, b, same, mismatches) == 0.0 && mismatches == 0 &&
         io::summary_json(a) == io::summary_json(b);
  }
  const fs::path dir = fs::temp_directory_path() / "smvp_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::IngestOptions raw;
  raw.impute = false;
  const auto original = io::read_panel(kData / "synthetic_panel.csv", raw);
  io::write_panel(dir / "panel.csv", original);
  const auto back = io::read_panel(dir / "panel.csv", raw);
  bool panel_ok = back.dates() == original.dates() && back.asset_ids() == original.asset_ids() &&
                  (back.missing() == original.missing()).all();
  for (Eigen::Index k = 0; panel_ok && k < original.returns().size(); ++k)
    if (!original.missing().reshaped()(k)) panel_ok = back.returns().reshaped()(k) == original.returns().reshaped()(k);

  const auto rep = run(panel, Penalized{ElasticNet{5.0, 1.0}});
  io::write_report(dir / "report", rep);
  std::size_t mismatches = 0;
  const bool report_ok = report_gap(io::read_report(dir / "report"), rep, same, mismatches) == 0.0 && mismatches == 0;
  return {ok && panel_ok && report_ok,
          std::string("repeat/threaded runs ") + (ok ? "identical" : "DIFFER") + ", panel round trip " +
              (panel_ok ? "exact" : "INEXACT") + ", report round trip " + (report_ok ? "exact" : "INEXACT")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"KKT suite", kkt_suite},
      {"oracle equivalence", oracle_equivalence},
      {"ridge closed form", ridge_closed_form},
      {"no-shortsale limit", no_shortsale_limit},
      {"reduction chain", reduction_chain},
      {"backtest golden", backtest_golden},
      {"metric formulas", metric_formulas},
      {"lambda grid shape", lambda_grid_shape},
      {"determinism and round trip", determinism_round_trip},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %d. %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
