#include "smvp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "json.hpp"

namespace smvp::io {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (c == ',' && !quoted) {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r,") == std::string::npos;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

double require_double(const std::string& s, long line, const std::string& what) {
  auto v = parse_double(s);
  if (!v) throw DataError("cannot parse " + what + " '" + s + "'", line);
  return *v;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::size_t find_asset(const std::string& id, const std::vector<std::string>& ids, long line) {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return i;
  throw DataError("unknown asset id '" + id + "'", line);
}

void write_series(const fs::path& path, const std::vector<std::int64_t>& dates, const Vector& v) {
  auto out = open_out(path);
  out << "date,value\n";
  for (std::size_t k = 0; k < dates.size(); ++k) out << dates[k] << ',' << format_double(v(ix(k))) << '\n';
}

// Rows of a CSV below its header line.
std::vector<std::vector<std::string>> read_rows(const fs::path& path, std::vector<std::string>& header) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file " + path.string());
  header = split_csv(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!is_blank(line)) rows.push_back(split_csv(line));
  return rows;
}

Vector read_series(const fs::path& path, std::size_t n) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  if (rows.size() != n) throw DataError(path.string() + ": expected " + std::to_string(n) + " rows");
  Vector v(ix(n));
  for (std::size_t k = 0; k < n; ++k) {
    if (rows[k].size() != 2) throw DataError(path.string() + ": expected 2 columns", static_cast<long>(k + 2));
    v(ix(k)) = require_double(rows[k][1], static_cast<long>(k + 2), "value");
  }
  return v;
}

nlohmann::ordered_json number_or_null(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

double number_from(const nlohmann::ordered_json& j) {
  return j.is_null() ? kNaN : j.get<double>();
}

}  // namespace

std::string units_name(Units u) { return u == Units::Percent ? "percent" : "fraction"; }

Units parse_units(const std::string& name) {
  if (name == "percent") return Units::Percent;
  if (name == "fraction") return Units::Fraction;
  throw InvalidArgument("unknown units '" + name + "' (expected percent or fraction)");
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

ReturnsPanel read_panel(std::istream& in, const IngestOptions& opts) {
  Units units = opts.units;
  std::vector<std::string> ids;
  std::vector<std::int64_t> dates;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<bool>> missing;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (!t.empty() && t.front() == '#') {
      const std::string body = trim(std::string_view(t).substr(1));
      if (body.rfind("units:", 0) == 0) units = parse_units(trim(std::string_view(body).substr(6)));
      continue;
    }
    if (is_blank(line)) {
      if (!dates.empty()) break;
      continue;
    }
    auto cells = split_csv(line);
    if (ids.empty()) {
      if (cells.size() < 3) throw DataError("header needs a date column and at least two assets", lineno);
      ids.assign(cells.begin() + 1, cells.end());
      continue;
    }
    if (cells.size() != ids.size() + 1)
      throw DataError("expected " + std::to_string(ids.size() + 1) + " cells, found " +
                          std::to_string(cells.size()),
                      lineno);
    const auto date = parse_int(cells[0]);
    if (!date) throw DataError("cannot parse date '" + cells[0] + "'", lineno);
    if (!dates.empty() && *date <= dates.back())
      throw DataError("dates must be strictly increasing", lineno);
    dates.push_back(*date);
    std::vector<double> row(ids.size());
    std::vector<bool> miss(ids.size(), false);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double v = require_double(cells[i + 1], lineno, "return");
      bool is_marker = false;
      for (double m : opts.missing_markers) is_marker = is_marker || v == m;
      if (is_marker || std::isnan(v)) {
        miss[i] = true;
        row[i] = kNaN;
        continue;
      }
      const double r = units == Units::Percent ? v / 100.0 : v;
      if (!std::isfinite(r) || r <= -1.0) throw DataError("return must be finite and above -100%", lineno);
      row[i] = r;
    }
    values.push_back(std::move(row));
    missing.push_back(std::move(miss));
  }
  if (ids.empty()) throw DataError("no header row found");
  if (dates.empty()) throw DataError("no data rows found");

  Matrix r(ix(dates.size()), ix(ids.size()));
  Mask m(ix(dates.size()), ix(ids.size()));
  for (std::size_t t = 0; t < dates.size(); ++t)
    for (std::size_t i = 0; i < ids.size(); ++i) {
      r(ix(t), ix(i)) = values[t][i];
      m(ix(t), ix(i)) = missing[t][i];
    }
  ReturnsPanel panel(std::move(dates), std::move(ids), std::move(r), std::move(m));
  return opts.impute && panel.has_missing() ? impute_missing(panel) : panel;
}

ReturnsPanel read_panel(const fs::path& path, const IngestOptions& opts) {
  auto in = open_in(path);
  return read_panel(in, opts);
}

void write_panel(std::ostream& out, const ReturnsPanel& panel,
                 const std::vector<double>& missing_markers) {
  const std::string marker = format_double(missing_markers.empty() ? -99.99 : missing_markers[0]);
  out << "# units: fraction\n";
  out << "date";
  for (const auto& id : panel.asset_ids()) out << ',' << csv_quote(id);
  out << '\n';
  for (std::size_t t = 0; t < panel.periods(); ++t) {
    out << panel.dates()[t];
    for (std::size_t i = 0; i < panel.assets(); ++i) {
      out << ',';
      if (panel.missing()(ix(t), ix(i)))
        out << marker;
      else
        out << format_double(panel.returns()(ix(t), ix(i)));
    }
    out << '\n';
  }
}

void write_panel(const fs::path& path, const ReturnsPanel& panel) {
  auto out = open_out(path);
  write_panel(out, panel);
}

CovarianceMatrix read_covariance(const fs::path& path) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  const std::size_t p = rows.size();
  if (p < 1) throw DataError(path.string() + ": no covariance rows");
  const bool labelled = rows[0].size() == p + 1;
  std::vector<std::string> ids;
  if (header.size() == p + 1)
    ids.assign(header.begin() + 1, header.end());
  else if (header.size() == p)
    ids = header;
  else
    throw DataError("covariance header must name " + std::to_string(p) + " assets", 1);
  Matrix s(ix(p), ix(p));
  for (std::size_t r = 0; r < p; ++r) {
    const long lineno = static_cast<long>(r + 2);
    const auto& cells = rows[r];
    if (cells.size() != (labelled ? p + 1 : p))
      throw DataError("covariance row has " + std::to_string(cells.size()) + " cells", lineno);
    if (labelled && cells[0] != ids[r])
      throw DataError("row label '" + cells[0] + "' does not match column '" + ids[r] + "'", lineno);
    for (std::size_t c = 0; c < p; ++c)
      s(ix(r), ix(c)) = require_double(cells[c + (labelled ? 1 : 0)], lineno, "covariance entry");
  }
  if (!s.allFinite()) throw DataError("covariance entries must be finite");
  try {
    return CovarianceMatrix(std::move(s), std::move(ids));
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("invalid covariance: ") + e.what());
  }
}

void write_covariance(const fs::path& path, const CovarianceMatrix& sigma) {
  auto out = open_out(path);
  const auto& ids = sigma.asset_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : "") << csv_quote(ids[i]);
  out << '\n';
  for (std::size_t r = 0; r < sigma.dim(); ++r) {
    for (std::size_t c = 0; c < sigma.dim(); ++c) out << (c ? "," : "") << format_double(sigma(r, c));
    out << '\n';
  }
}

GroupStructure read_grouping(const fs::path& path, const std::vector<std::string>& asset_ids) {
  auto in = open_in(path);
  std::vector<std::vector<std::size_t>> groups;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::size_t> g;
    for (const auto& cell : split_csv(line)) {
      if (cell.empty()) continue;
      g.push_back(find_asset(cell, asset_ids, lineno));
    }
    groups.push_back(std::move(g));
  }
  try {
    return GroupStructure(std::move(groups), asset_ids.size());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("invalid grouping: ") + e.what());
  }
}

Vector read_asset_values(const fs::path& path, const std::vector<std::string>& asset_ids) {
  auto in = open_in(path);
  Vector v = Vector::Constant(ix(asset_ids.size()), kNaN);
  std::string line;
  long lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = split_csv(line);
    if (cells.size() != 2) throw DataError("expected 'asset,value'", lineno);
    const auto value = parse_double(cells[1]);
    if (!value) {
      if (first) {  // header line
        first = false;
        continue;
      }
      throw DataError("cannot parse value '" + cells[1] + "'", lineno);
    }
    first = false;
    const std::size_t i = find_asset(cells[0], asset_ids, lineno);
    if (!std::isnan(v(ix(i)))) throw DataError("asset '" + cells[0] + "' listed twice", lineno);
    v(ix(i)) = *value;
  }
  for (std::size_t i = 0; i < asset_ids.size(); ++i)
    if (std::isnan(v(ix(i)))) throw DataError(path.string() + ": no value for asset '" + asset_ids[i] + "'");
  return v;
}

std::string summary_json(const BacktestReport& report) {
  std::size_t converged = 0, carried = 0, wiped = 0;
  for (const auto& d : report.diagnostics) {
    converged += d.converged;
    carried += d.carried_forward;
    wiped += d.wiped_out;
  }
  nlohmann::ordered_json j;
  j["strategy"] = report.strategy;
  j["window"] = report.window;
  j["assets"] = report.asset_ids;
  j["dates"] = report.dates();
  j["first_date"] = report.rebalance_dates.empty() ? 0 : report.rebalance_dates.front();
  j["last_date"] = report.rebalance_dates.empty() ? 0 : report.rebalance_dates.back();
  j["oos_variance"] = number_or_null(report.oos_variance);
  j["sharpe"] = number_or_null(report.sharpe);
  j["median_turnover"] = number_or_null(median(report.turnover));
  j["median_pac"] = number_or_null(median(report.pac));
  j["median_aps"] = number_or_null(median(report.aps));
  j["converged_dates"] = converged;
  j["carried_forward_dates"] = carried;
  j["wiped_out_dates"] = wiped;
  return j.dump(2) + "\n";
}

void write_report(const fs::path& dir, const BacktestReport& report) {
  fs::create_directories(dir);
  const auto& dates = report.rebalance_dates;
  {
    auto out = open_out(dir / "weights.csv");
    out << "date";
    for (const auto& id : report.asset_ids) out << ',' << csv_quote(id);
    out << '\n';
    for (std::size_t k = 0; k < dates.size(); ++k) {
      out << dates[k];
      for (Eigen::Index i = 0; i < report.weights.cols(); ++i)
        out << ',' << format_double(report.weights(ix(k), i));
      out << '\n';
    }
  }
  write_series(dir / "portfolio_returns.csv", dates, report.portfolio_returns);
  write_series(dir / "turnover.csv", dates, report.turnover);
  write_series(dir / "pac.csv", dates, report.pac);
  write_series(dir / "aps.csv", dates, report.aps);
  write_series(dir / "gamma.csv", dates, report.gamma);
  write_series(dir / "fees.csv", dates, report.fees);
  {
    auto out = open_out(dir / "diagnostics.csv");
    out << "date,converged,carried_forward,wiped_out,iterations,kkt_residual,message\n";
    for (std::size_t k = 0; k < dates.size(); ++k) {
      const auto& d = report.diagnostics[k];
      out << dates[k] << ',' << d.converged << ',' << d.carried_forward << ',' << d.wiped_out << ','
          << d.iterations << ',' << format_double(d.kkt_residual) << ',' << csv_quote(d.message) << '\n';
    }
  }
  auto out = open_out(dir / "summary.json");
  out << summary_json(report);
}

BacktestReport read_report(const fs::path& dir) {
  BacktestReport rep;
  nlohmann::ordered_json j;
  {
    auto in = open_in(dir / "summary.json");
    try {
      j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("summary.json: ") + e.what());
    }
  }
  rep.strategy = j.at("strategy").get<std::string>();
  rep.window = j.at("window").get<std::size_t>();
  rep.oos_variance = number_from(j.at("oos_variance"));
  rep.sharpe = number_from(j.at("sharpe"));

  std::vector<std::string> header;
  const auto rows = read_rows(dir / "weights.csv", header);
  rep.asset_ids.assign(header.begin() + 1, header.end());
  const std::size_t n = rows.size();
  const std::size_t p = rep.asset_ids.size();
  rep.weights.resize(ix(n), ix(p));
  for (std::size_t k = 0; k < n; ++k) {
    const long lineno = static_cast<long>(k + 2);
    if (rows[k].size() != p + 1) throw DataError("weights.csv: wrong cell count", lineno);
    const auto date = parse_int(rows[k][0]);
    if (!date) throw DataError("weights.csv: bad date", lineno);
    rep.rebalance_dates.push_back(*date);
    for (std::size_t i = 0; i < p; ++i) rep.weights(ix(k), ix(i)) = require_double(rows[k][i + 1], lineno, "weight");
  }
  rep.portfolio_returns = read_series(dir / "portfolio_returns.csv", n);
  rep.turnover = read_series(dir / "turnover.csv", n);
  rep.pac = read_series(dir / "pac.csv", n);
  rep.aps = read_series(dir / "aps.csv", n);
  rep.gamma = read_series(dir / "gamma.csv", n);
  rep.fees = read_series(dir / "fees.csv", n);

  const auto drows = read_rows(dir / "diagnostics.csv", header);
  if (drows.size() != n) throw DataError("diagnostics.csv: wrong row count");
  for (std::size_t k = 0; k < n; ++k) {
    const long lineno = static_cast<long>(k + 2);
    const auto& c = drows[k];
    if (c.size() != 7) throw DataError("diagnostics.csv: wrong cell count", lineno);
    DateDiagnostics d;
    d.converged = c[1] == "1";
    d.carried_forward = c[2] == "1";
    d.wiped_out = c[3] == "1";
    const auto it = parse_int(c[4]);
    if (!it) throw DataError("diagnostics.csv: bad iteration count", lineno);
    d.iterations = static_cast<std::size_t>(*it);
    d.kkt_residual = require_double(c[5], lineno, "kkt residual");
    d.message = c[6];
    rep.diagnostics.push_back(std::move(d));
  }
  return rep;
}

void write_sweep(const fs::path& dir, const std::vector<SweepPoint>& points,
                 const std::vector<std::string>& asset_ids) {
  fs::create_directories(dir);
  auto weights = open_out(dir / "weights.csv");
  auto profile = open_out(dir / "profile.csv");
  weights << "lambda,param,asset,weight\n";
  profile << "lambda,param,pac,prop_positive,prop_negative,gamma,converged,error\n";
  for (const auto& pt : points) {
    const std::string l = format_double(pt.lambda), a = format_double(pt.param);
    if (pt.solution) {
      for (std::size_t i = 0; i < asset_ids.size(); ++i)
        weights << l << ',' << a << ',' << csv_quote(asset_ids[i]) << ','
                << format_double(pt.solution->weights(ix(i))) << '\n';
      profile << l << ',' << a << ',' << format_double(pt.pac) << ',' << format_double(pt.prop_positive)
              << ',' << format_double(pt.prop_negative) << ',' << format_double(pt.solution->gamma)
              << ',' << pt.solution->converged << ",\n";
    } else {
      profile << l << ',' << a << ",nan,nan,nan,nan,0," << csv_quote(pt.error) << '\n';
    }
  }
}

}  // namespace smvp::io
