// smvp: command-line front end over the C library interface.
//
//   smvp ingest   INPUT -o PANEL.csv
//   smvp solve    --cov COV.csv --family elastic-net --lambda 5 -o weights.csv
//   smvp sweep    (--cov COV.csv | --panel P.csv) --lambdas 0,2,5 --params 1 -o DIR
//   smvp backtest --panel P.csv --strategy penalized --family berhu ... -o DIR
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 solver non-convergence.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smvp/smvp.h"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNotConverged = 3;

// Thrown to unwind with a specific exit code after printing a message.
struct Exit {
  int code;
};

int exit_code(smvp_status s) {
  switch (s) {
    case SMVP_OK:
      return 0;
    case SMVP_INVALID_ARGUMENT:
      return kExitUsage;
    case SMVP_NOT_CONVERGED:
      return kExitNotConverged;
    default:
      return kExitData;
  }
}

// Throws Exit unless s is OK; NOT_CONVERGED is returned to the caller so
// partial outputs can still be written.
smvp_status check(smvp_status s, const std::string& context) {
  if (s == SMVP_OK) return s;
  std::cerr << "smvp: " << context << ": " << smvp_last_error() << '\n';
  if (s == SMVP_NOT_CONVERGED) return s;
  throw Exit{exit_code(s)};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Panel = std::unique_ptr<smvp_panel, Deleter<smvp_panel, smvp_panel_free>>;
using Cov = std::unique_ptr<smvp_covariance, Deleter<smvp_covariance, smvp_covariance_free>>;
using Penalty = std::unique_ptr<smvp_penalty, Deleter<smvp_penalty, smvp_penalty_free>>;
using Sol = std::unique_ptr<smvp_solution, Deleter<smvp_solution, smvp_solution_free>>;
using Sweep = std::unique_ptr<smvp_sweep_result, Deleter<smvp_sweep_result, smvp_sweep_free>>;
using Report = std::unique_ptr<smvp_report, Deleter<smvp_report, smvp_report_free>>;

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---- shared option groups

struct IngestFlags {
  std::string units = "percent";
  std::vector<double> missing{-99.99, -999.0};
  bool no_impute = false;

  void add(CLI::App* app) {
    app->add_option("--input-units", units, "Units of the return values in the file")
        ->check(CLI::IsMember({"percent", "fraction"}))
        ->capture_default_str();
    app->add_option("--missing", missing, "Missing-value markers")->delimiter(',')->capture_default_str();
    app->add_flag("--no-impute", no_impute, "Keep missing cells instead of filling row means");
  }

  Panel read(const std::string& path) const {
    smvp_ingest_options o;
    smvp_ingest_options_init(&o);
    o.missing_markers = missing.data();
    o.n_missing_markers = missing.size();
    o.impute = no_impute ? 0 : 1;
    o.units = units == "fraction" ? SMVP_UNITS_FRACTION : SMVP_UNITS_PERCENT;
    smvp_panel* p = nullptr;
    check(smvp_panel_read(path.c_str(), &o, &p), "reading " + path);
    return Panel(p);
  }

  json echo() const { return {{"input_units", units}, {"missing_markers", missing}, {"impute", !no_impute}}; }
};

struct PenaltyFlags {
  std::string family = "elastic-net";
  double lambda = 0.0;
  double alpha = 1.0;
  double delta = 1.0;
  double tau = 0.0;
  std::string mu_file, eta_file, groups_file;

  void add(CLI::App* app, bool with_lambda = true) {
    app->add_option("--family", family, "Penalty family")
        ->check(CLI::IsMember({"elastic-net", "mean-variance", "weighted-l1", "berhu", "adaptive-group"}))
        ->capture_default_str();
    if (with_lambda) app->add_option("--lambda", lambda, "Penalty scale")->capture_default_str();
    app->add_option("--alpha", alpha, "l1 share for elastic-net and mean-variance")->capture_default_str();
    app->add_option("--delta", delta, "Berhu threshold")->capture_default_str();
    app->add_option("--tau", tau, "Mean-variance risk tolerance")->capture_default_str();
    app->add_option("--mu", mu_file, "Expected returns file (asset,value)");
    app->add_option("--eta", eta_file, "Weighted-l1 weights file (asset,value)");
    app->add_option("--groups", groups_file, "Grouping file, one group per line");
  }

  Penalty build(const std::vector<std::string>& ids) const {
    std::vector<const char*> cids;
    for (const auto& s : ids) cids.push_back(s.c_str());
    const std::size_t p = ids.size();
    smvp_penalty* out = nullptr;
    auto values = [&](const std::string& path, const char* what) {
      if (path.empty()) {
        std::cerr << "smvp: --" << what << " is required for family " << family << '\n';
        throw Exit{kExitUsage};
      }
      std::vector<double> v(p);
      check(smvp_read_asset_values(path.c_str(), cids.data(), p, v.data()), "reading " + path);
      return v;
    };
    if (family == "elastic-net") {
      check(smvp_penalty_elastic_net(lambda, alpha, &out), "penalty");
    } else if (family == "mean-variance") {
      const auto mu = values(mu_file, "mu");
      check(smvp_penalty_mean_variance(lambda, alpha, tau, mu.data(), p, &out), "penalty");
    } else if (family == "weighted-l1") {
      const auto eta = values(eta_file, "eta");
      check(smvp_penalty_weighted_l1(lambda, eta.data(), p, &out), "penalty");
    } else if (family == "berhu") {
      check(smvp_penalty_berhu(lambda, delta, &out), "penalty");
    } else {
      if (groups_file.empty()) {
        std::cerr << "smvp: --groups is required for family adaptive-group\n";
        throw Exit{kExitUsage};
      }
      std::vector<std::size_t> labels(p);
      check(smvp_read_grouping(groups_file.c_str(), cids.data(), p, labels.data()),
            "reading " + groups_file);
      check(smvp_penalty_adaptive_group(lambda, labels.data(), p, &out), "penalty");
    }
    return Penalty(out);
  }

  double grid_default() const {
    if (family == "elastic-net" || family == "mean-variance") return alpha;
    if (family == "berhu") return delta;
    return 0.0;
  }

  json echo() const {
    json j{{"family", family}, {"lambda", lambda}};
    if (family == "elastic-net" || family == "mean-variance") j["alpha"] = alpha;
    if (family == "mean-variance") j["tau"] = tau, j["mu"] = mu_file;
    if (family == "weighted-l1") j["eta"] = eta_file;
    if (family == "berhu") j["delta"] = delta;
    if (family == "adaptive-group") j["groups"] = groups_file;
    return j;
  }
};

struct SolverFlags {
  smvp_solver_options opts{};
  SolverFlags() { smvp_solver_options_init(&opts); }

  void add(CLI::App* app) {
    app->add_option("--max-sweeps", opts.max_sweeps, "Sweep cap per solve")->capture_default_str();
    app->add_option("--coord-tol", opts.coord_tol, "Coordinate change tolerance")->capture_default_str();
    app->add_option("--budget-tol", opts.budget_tol, "Budget constraint tolerance")->capture_default_str();
  }

  json echo() const {
    return {{"max_sweeps", opts.max_sweeps}, {"coord_tol", opts.coord_tol}, {"budget_tol", opts.budget_tol}};
  }
};

std::vector<std::string> panel_ids(const smvp_panel* p) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < smvp_panel_assets(p); ++i) ids.emplace_back(smvp_panel_asset_id(p, i));
  return ids;
}

std::vector<std::string> cov_ids(const smvp_covariance* c) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < smvp_covariance_dim(c); ++i) ids.emplace_back(smvp_covariance_asset_id(c, i));
  return ids;
}

double risk_scale(const std::string& units) { return units == "percent" ? 1e4 : 1.0; }

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "smvp: cannot write " << path << '\n';
    throw Exit{kExitData};
  }
  out << j.dump(2) << '\n';
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "smvp: cannot create " << dir << ": " << ec.message() << '\n';
    throw Exit{kExitData};
  }
}

// ---- commands

struct IngestCmd {
  std::string input, output;
  IngestFlags ingest;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("ingest", "Parse a returns file and write a normalized panel");
    c->add_option("input", input, "Fama-French style CSV")->required();
    c->add_option("-o,--output", output, "Normalized panel (fractions, 17 digits)");
    ingest.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    Panel p = ingest.read(input);
    std::cout << "periods " << smvp_panel_periods(p.get()) << "\nassets " << smvp_panel_assets(p.get())
              << "\nmissing " << smvp_panel_missing_count(p.get()) << "\nfirst_date "
              << smvp_panel_date(p.get(), 0) << "\nlast_date "
              << smvp_panel_date(p.get(), smvp_panel_periods(p.get()) - 1) << '\n';
    if (!output.empty()) check(smvp_panel_write(p.get(), output.c_str()), "writing " + output);
  }
};

struct SolveCmd {
  std::string cov_file, output;
  bool no_shortsale = false;
  PenaltyFlags penalty;
  SolverFlags solver;
  int status = 0;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("solve", "Solve one covariance file and print the weights");
    c->add_option("--cov", cov_file, "Covariance CSV (header of names, p rows)")->required();
    c->add_option("-o,--output", output, "Write asset,weight CSV here");
    c->add_flag("--no-shortsale", no_shortsale, "Solve the no-shortsale MVP instead");
    penalty.add(c);
    solver.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    smvp_covariance* raw = nullptr;
    check(smvp_covariance_read(cov_file.c_str(), &raw), "reading " + cov_file);
    Cov cov(raw);
    const auto ids = cov_ids(cov.get());
    smvp_solution* sraw = nullptr;
    smvp_status s;
    if (no_shortsale) {
      s = check(smvp_solve_no_shortsale(cov.get(), &sraw), "solve");
    } else {
      Penalty pen = penalty.build(ids);
      s = check(smvp_solve(cov.get(), pen.get(), &solver.opts, &sraw), "solve");
    }
    Sol sol(sraw);
    const double* w = smvp_solution_weights(sol.get());
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!output.empty()) {
      file.open(output);
      if (!file) {
        std::cerr << "smvp: cannot write " << output << '\n';
        throw Exit{kExitData};
      }
      out = &file;
    }
    *out << "asset,weight\n";
    for (std::size_t i = 0; i < ids.size(); ++i) *out << ids[i] << ',' << fmt(w[i]) << '\n';
    std::cerr << "gamma " << fmt(smvp_solution_gamma(sol.get())) << "\nobjective "
              << fmt(smvp_solution_objective(sol.get())) << "\nkkt_residual "
              << fmt(smvp_solution_kkt_residual(sol.get())) << "\niterations "
              << smvp_solution_iterations(sol.get()) << "\nconverged "
              << smvp_solution_converged(sol.get()) << '\n';
    status = exit_code(s);
  }
};

struct SweepCmd {
  std::string cov_file, panel_file, output;
  std::size_t window = 120;
  std::string risk_units = "percent";
  std::vector<double> lambdas{0, 2, 5, 10, 30};
  std::vector<double> params;
  std::size_t threads = 1;
  IngestFlags ingest;
  PenaltyFlags penalty;
  SolverFlags solver;
  int status = 0;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("sweep", "Weight and activity profiles over a (lambda, alpha|delta) grid");
    auto* cov = c->add_option("--cov", cov_file, "Covariance CSV");
    auto* pan = c->add_option("--panel", panel_file, "Returns panel; the first window is used");
    cov->excludes(pan);
    c->add_option("--window", window, "Window length for --panel")->capture_default_str();
    c->add_option("--risk-units", risk_units, "Covariance units for --panel (percent scales by 1e4)")
        ->check(CLI::IsMember({"percent", "fraction"}))
        ->capture_default_str();
    c->add_option("--lambdas", lambdas, "Lambda grid")->delimiter(',')->capture_default_str();
    c->add_option("--params", params, "Alpha (elastic net) or delta (berhu) grid")->delimiter(',');
    c->add_option("--threads", threads, "Concurrent grid solves")->capture_default_str();
    c->add_option("-o,--output", output, "Output directory")->required();
    ingest.add(c);
    penalty.add(c, false);
    solver.add(c);
    c->callback([this] {
      if (cov_file.empty() == panel_file.empty()) {
        std::cerr << "smvp: sweep needs exactly one of --cov or --panel\n";
        throw Exit{kExitUsage};
      }
      run();
    });
  }

  void run() {
    smvp_covariance* raw = nullptr;
    if (!cov_file.empty()) {
      check(smvp_covariance_read(cov_file.c_str(), &raw), "reading " + cov_file);
    } else {
      Panel p = ingest.read(panel_file);
      check(smvp_covariance_from_panel(p.get(), 0, window, SMVP_DIVISOR_UNBIASED, risk_scale(risk_units), &raw),
            "window covariance");
      Cov tmp(raw);
      // Carry the panel's asset names onto the window covariance.
      const auto ids = panel_ids(p.get());
      std::vector<const char*> cids;
      for (const auto& s : ids) cids.push_back(s.c_str());
      std::vector<double> vals;
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < ids.size(); ++j) vals.push_back(smvp_covariance_get(tmp.get(), i, j));
      raw = nullptr;
      check(smvp_covariance_create(ids.size(), vals.data(), cids.data(), &raw), "window covariance");
    }
    Cov cov(raw);
    if (params.empty()) params = {penalty.grid_default()};
    Penalty base = penalty.build(cov_ids(cov.get()));
    smvp_sweep_result* sraw = nullptr;
    const smvp_status s = check(smvp_sweep(cov.get(), base.get(), lambdas.data(), lambdas.size(), params.data(),
                                           params.size(), &solver.opts, threads, &sraw),
                                "sweep");
    Sweep res(sraw);
    make_dir(output);
    check(smvp_sweep_write(res.get(), output.c_str()), "writing sweep");
    json cfg{{"command", "sweep"}, {"cov", cov_file}, {"panel", panel_file}, {"window", window},
             {"risk_units", risk_units}, {"lambdas", lambdas}, {"params", params}, {"threads", threads},
             {"penalty", penalty.echo()}, {"solver", solver.echo()}};
    if (!panel_file.empty()) cfg["ingest"] = ingest.echo();
    write_json(fs::path(output) / "config.json", cfg);
    std::cout << "points " << smvp_sweep_points(res.get()) << "\nfailed " << smvp_sweep_failures(res.get())
              << "\nnot_converged " << smvp_sweep_nonconverged(res.get()) << '\n';
    status = exit_code(s);
  }
};

struct BacktestCmd {
  std::string panel_file, output;
  std::string strategy = "penalized";
  std::string risk_units = "percent";
  std::size_t window = 120;
  std::size_t threads = 1;
  bool warm_start = false;
  IngestFlags ingest;
  PenaltyFlags penalty;
  SolverFlags solver;
  int status = 0;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("backtest", "Rolling-window out-of-sample backtest");
    c->add_option("--panel", panel_file, "Returns panel")->required();
    c->add_option("--strategy", strategy, "Strategy")
        ->check(CLI::IsMember({"penalized", "equal-weight", "no-shortsale"}))
        ->capture_default_str();
    c->add_option("--window", window, "Estimation window length")->capture_default_str();
    c->add_option("--risk-units", risk_units, "Covariance units (percent scales by 1e4)")
        ->check(CLI::IsMember({"percent", "fraction"}))
        ->capture_default_str();
    c->add_option("--threads", threads, "Concurrent per-date solves")->capture_default_str();
    c->add_flag("--warm-start", warm_start, "Start each date from the previous solution");
    c->add_option("-o,--output", output, "Output directory")->required();
    ingest.add(c);
    penalty.add(c);
    solver.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    Panel p = ingest.read(panel_file);
    Penalty pen;
    smvp_strategy st = SMVP_STRATEGY_PENALIZED;
    if (strategy == "equal-weight") {
      st = SMVP_STRATEGY_EQUAL_WEIGHT;
    } else if (strategy == "no-shortsale") {
      st = SMVP_STRATEGY_NO_SHORTSALE;
    } else {
      pen = penalty.build(panel_ids(p.get()));
    }
    smvp_backtest_options o;
    smvp_backtest_options_init(&o);
    o.window = window;
    o.solver = solver.opts;
    o.covariance_scale = risk_scale(risk_units);
    o.warm_start = warm_start ? 1 : 0;
    o.threads = threads;

    smvp_report* raw = nullptr;
    const smvp_status s = check(smvp_backtest_run(p.get(), st, pen.get(), &o, &raw), "backtest");
    Report rep(raw);
    make_dir(output);
    check(smvp_report_write(rep.get(), output.c_str()), "writing report");
    json cfg{{"command", "backtest"}, {"panel", panel_file}, {"strategy", strategy}, {"window", window},
             {"risk_units", risk_units}, {"covariance_scale", o.covariance_scale}, {"divisor", "unbiased"},
             {"warm_start", warm_start}, {"threads", threads}, {"active_tol", o.active_tol},
             {"fee_rate", o.fee_rate}, {"ingest", ingest.echo()}};
    if (st == SMVP_STRATEGY_PENALIZED) {
      cfg["penalty"] = penalty.echo();
      cfg["solver"] = solver.echo();
    }
    write_json(fs::path(output) / "config.json", cfg);

    std::cout << "dates " << smvp_report_dates(rep.get()) << "\noos_variance "
              << fmt(smvp_report_oos_variance(rep.get())) << "\nsharpe " << fmt(smvp_report_sharpe(rep.get()))
              << "\nmedian_turnover " << fmt(smvp_report_median(rep.get(), SMVP_SERIES_TURNOVER))
              << "\nmedian_pac " << fmt(smvp_report_median(rep.get(), SMVP_SERIES_PAC)) << "\nmedian_aps "
              << fmt(smvp_report_median(rep.get(), SMVP_SERIES_APS)) << '\n';
    status = exit_code(s);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized minimum-variance portfolios: solve, sweep and backtest"};
  app.set_config("--config", "", "TOML configuration file; flags override it");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(smvp_version()));

  IngestCmd ingest;
  SolveCmd solve;
  SweepCmd sweep;
  BacktestCmd backtest;
  ingest.add(app);
  solve.add(app);
  sweep.add(app);
  backtest.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const Exit& e) {
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "smvp: " << e.what() << '\n';
    return kExitData;
  }
  return std::max({solve.status, sweep.status, backtest.status});
}
