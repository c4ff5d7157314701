#pragma once

// Core domain types shared by the solvers and the backtest engine.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "smvp/errors.hpp"

namespace smvp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Dated T x p matrix of simple periodic returns stored as fractions
/// (0.012 == 1.2%). Missing cells are flagged in the mask and hold NaN.
class ReturnsPanel {
 public:
  /// Validates: dates strictly increasing, T >= 1, p >= 2, every
  /// non-missing return finite and > -1.
  ReturnsPanel(std::vector<std::int64_t> dates, std::vector<std::string> asset_ids,
               Matrix returns, Mask missing);

  /// Panel without missing cells.
  ReturnsPanel(std::vector<std::int64_t> dates, std::vector<std::string> asset_ids,
               Matrix returns);

  std::size_t periods() const noexcept { return static_cast<std::size_t>(returns_.rows()); }
  std::size_t assets() const noexcept { return static_cast<std::size_t>(returns_.cols()); }

  const std::vector<std::int64_t>& dates() const noexcept { return dates_; }
  const std::vector<std::string>& asset_ids() const noexcept { return asset_ids_; }
  const Matrix& returns() const noexcept { return returns_; }
  const Mask& missing() const noexcept { return missing_; }

  bool has_missing() const noexcept { return missing_.any(); }
  /// True if any cell in rows [start, start + length) is missing.
  bool has_missing(std::size_t start, std::size_t length) const;

 private:
  std::vector<std::int64_t> dates_;
  std::vector<std::string> asset_ids_;
  Matrix returns_;
  Mask missing_;
};

/// Symmetric positive-semidefinite p x p covariance matrix of returns.
/// The full matrix is stored so coordinate updates can scan rows directly.
class CovarianceMatrix {
 public:
  /// Builds from user-supplied data. The input must be symmetric to a relative
  /// 1e-12 (it is then mirrored from the upper triangle so storage is exactly
  /// symmetric), have nonnegative diagonal, and pass the PSD check
  /// lambda_min >= -1e-10 * lambda_max.
  explicit CovarianceMatrix(Matrix sigma, std::vector<std::string> asset_ids = {});

  /// Builds without the eigenvalue check; used for sample covariances which
  /// are PSD by construction. Storage is still mirrored to exact symmetry.
  static CovarianceMatrix trusted(Matrix sigma, std::vector<std::string> asset_ids = {});

  std::size_t dim() const noexcept { return static_cast<std::size_t>(sigma_.rows()); }
  const Matrix& sigma() const noexcept { return sigma_; }
  double operator()(std::size_t i, std::size_t j) const {
    return sigma_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double variance(std::size_t i) const { return (*this)(i, i); }
  double max_variance() const { return sigma_.diagonal().maxCoeff(); }
  double min_variance() const { return sigma_.diagonal().minCoeff(); }
  double trace() const { return sigma_.trace(); }
  const std::vector<std::string>& asset_ids() const noexcept { return asset_ids_; }

  /// Copy with every entry multiplied by `factor` (> 0).
  CovarianceMatrix scaled(double factor) const;
  /// Copy with assets reordered: result(i, j) = this(order[i], order[j]).
  CovarianceMatrix permuted(std::span<const std::size_t> order) const;

 private:
  struct Unchecked {};
  CovarianceMatrix(Matrix sigma, std::vector<std::string> asset_ids, Unchecked);

  Matrix sigma_;
  std::vector<std::string> asset_ids_;
};

/// Ordered partition of {0, ..., p-1} into L nonempty disjoint groups.
class GroupStructure {
 public:
  GroupStructure(std::vector<std::vector<std::size_t>> groups, std::size_t p);

  /// From a per-asset group label; labels must be 0..L-1, each used.
  static GroupStructure from_labels(std::span<const std::size_t> group_of_asset);

  std::size_t groups() const noexcept { return groups_.size(); }
  std::size_t assets() const noexcept { return p_; }
  std::span<const std::size_t> members(std::size_t l) const { return groups_.at(l); }
  std::size_t size(std::size_t l) const { return groups_.at(l).size(); }
  const std::vector<std::vector<std::size_t>>& all() const noexcept { return groups_; }

 private:
  std::vector<std::vector<std::size_t>> groups_;
  std::size_t p_;
};

// Penalty families. Each carries only its own parameters.

struct ElasticNet {
  double lambda = 0.0;
  double alpha = 1.0;
};

/// Mean-variance objective -tau w'mu + w'Sigma w + elastic net.
struct MeanVariance {
  double lambda = 0.0;
  double alpha = 1.0;
  double tau = 0.0;
  Vector mu;
};

struct WeightedL1 {
  double lambda = 0.0;
  Vector eta;
};

struct Berhu {
  double lambda = 0.0;
  double delta = 1.0;
};

/// lambda1 * sum_l sqrt(w_l' A_ll w_l). `lambda2` (an extra l1 term) is not
/// supported and must stay zero.
struct AdaptiveGroup {
  double lambda1 = 0.0;
  GroupStructure grouping;
  double lambda2 = 0.0;
};

using PenaltyConfig = std::variant<ElasticNet, MeanVariance, WeightedL1, Berhu, AdaptiveGroup>;

/// Throws InvalidArgument / DimensionError if parameters are out of range or
/// vector lengths differ from p.
void validate(const PenaltyConfig& penalty, std::size_t p);

/// Short family label: "elastic-net", "mean-variance", "weighted-l1",
/// "berhu", "adaptive-group".
std::string family_name(const PenaltyConfig& penalty);

/// Overall penalty scale (lambda, or lambda1 for the group family).
double penalty_scale(const PenaltyConfig& penalty);

struct SolverOptions {
  std::size_t max_sweeps = 10000;
  double coord_tol = 1e-9;
  double budget_tol = 1e-8;
  double kkt_tol = 1e-6;

  void validate() const;
};

struct Solution {
  Vector weights;
  double gamma = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double objective = 0.0;
  double kkt_residual = 0.0;
};

/// Optional starting point for a solve (warm start across rebalances).
struct WarmStart {
  Vector weights;
  double gamma = 0.0;
};

/// w'Sigma w plus the configured penalty (minus tau w'mu for MeanVariance).
double objective_value(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                       const Vector& w);

/// w'Sigma w.
double quadratic_form(const CovarianceMatrix& sigma, const Vector& w);

}  // namespace smvp
