#pragma once

// File formats: Fama-French style return panels, covariance CSVs, group and
// per-asset value files, and backtest report sets.

#include <filesystem>
#include <string>
#include <vector>

#include "smvp/backtest.hpp"
#include "smvp/model.hpp"
#include "smvp/sweep.hpp"

namespace smvp::io {

enum class Units { Percent, Fraction };

std::string units_name(Units u);
/// Accepts "percent" or "fraction".
Units parse_units(const std::string& name);

struct IngestOptions {
  std::vector<double> missing_markers{-99.99, -999.0};
  bool impute = true;
  Units units = Units::Percent;  ///< overridden by a "# units: ..." line in the file
};

/// Parses a panel: optional '#' comment lines, a header row whose first cell
/// labels the date column and whose other cells name the assets, then one
/// row per period (integer date, then p values). Data ends at end of file or
/// at the first blank line after data. Throws DataError with a line number.
ReturnsPanel read_panel(std::istream& in, const IngestOptions& opts = {});
ReturnsPanel read_panel(const std::filesystem::path& path, const IngestOptions& opts = {});

/// Writes fractional returns with a "# units: fraction" line and 17
/// significant digits, so read_panel reproduces the panel exactly. Missing
/// cells are written as the first marker.
void write_panel(std::ostream& out, const ReturnsPanel& panel,
                 const std::vector<double>& missing_markers = {-99.99});
void write_panel(const std::filesystem::path& path, const ReturnsPanel& panel);

/// Covariance CSV: header of p asset names, then p rows of values. Rows may
/// start with a label cell, in which case the header may have an extra
/// leading cell.
CovarianceMatrix read_covariance(const std::filesystem::path& path);
void write_covariance(const std::filesystem::path& path, const CovarianceMatrix& sigma);

/// One group per line, comma-separated asset ids from `asset_ids`.
GroupStructure read_grouping(const std::filesystem::path& path,
                             const std::vector<std::string>& asset_ids);

/// "asset,value" lines covering every asset (a header line is allowed).
Vector read_asset_values(const std::filesystem::path& path,
                         const std::vector<std::string>& asset_ids);

/// Formats a double with 17 significant digits ("nan" for NaN).
std::string format_double(double x);

/// Writes weights.csv, one CSV per metric series, diagnostics.csv and
/// summary.json into `dir` (created if needed).
void write_report(const std::filesystem::path& dir, const BacktestReport& report);
/// Reads back what write_report wrote.
BacktestReport read_report(const std::filesystem::path& dir);

/// summary.json text: strategy, window, dates, aggregates and medians.
std::string summary_json(const BacktestReport& report);

/// weights.csv (lambda, param, asset, weight) and profile.csv (lambda, param,
/// pac, prop_positive, prop_negative, gamma, converged).
void write_sweep(const std::filesystem::path& dir, const std::vector<SweepPoint>& points,
                 const std::vector<std::string>& asset_ids);

}  // namespace smvp::io
