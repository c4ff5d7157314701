#include "smvp/model.hpp"

#include "smvp/berhu_solver.hpp"
#include "overloaded.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace smvp {

namespace {

void check_shape(std::size_t dates, std::size_t ids, const Matrix& returns, const Mask& missing) {
  if (returns.rows() < 1) throw DataError("returns panel needs at least one period");
  if (returns.cols() < 2) throw DataError("returns panel needs at least two assets");
  if (static_cast<Eigen::Index>(dates) != returns.rows())
    throw DimensionError("panel: date count does not match return rows");
  if (static_cast<Eigen::Index>(ids) != returns.cols())
    throw DimensionError("panel: asset id count does not match return columns");
  if (missing.rows() != returns.rows() || missing.cols() != returns.cols())
    throw DimensionError("panel: missing mask shape does not match returns");
}

Matrix mirror_upper(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) m(i, j) = m(j, i);
  return m;
}

std::vector<std::string> default_ids(std::size_t p, std::vector<std::string> ids) {
  if (ids.empty()) {
    ids.reserve(p);
    for (std::size_t i = 0; i < p; ++i) ids.push_back("A" + std::to_string(i + 1));
  }
  if (ids.size() != p) throw DimensionError("covariance: asset id count does not match dimension");
  return ids;
}

}  // namespace

ReturnsPanel::ReturnsPanel(std::vector<std::int64_t> dates, std::vector<std::string> asset_ids,
                           Matrix returns, Mask missing)
    : dates_(std::move(dates)),
      asset_ids_(std::move(asset_ids)),
      returns_(std::move(returns)),
      missing_(std::move(missing)) {
  check_shape(dates_.size(), asset_ids_.size(), returns_, missing_);
  for (std::size_t t = 1; t < dates_.size(); ++t) {
    if (dates_[t] <= dates_[t - 1])
      throw DataError("panel dates not strictly increasing at period " + std::to_string(dates_[t]));
  }
  for (Eigen::Index t = 0; t < returns_.rows(); ++t) {
    for (Eigen::Index i = 0; i < returns_.cols(); ++i) {
      if (missing_(t, i)) {
        returns_(t, i) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const double r = returns_(t, i);
      if (!std::isfinite(r) || r <= -1.0) {
        std::ostringstream msg;
        msg << "invalid return " << r << " at period " << dates_[static_cast<std::size_t>(t)]
            << ", asset " << asset_ids_[static_cast<std::size_t>(i)];
        throw DataError(msg.str());
      }
    }
  }
}

ReturnsPanel::ReturnsPanel(std::vector<std::int64_t> dates, std::vector<std::string> asset_ids,
                           Matrix returns)
    : ReturnsPanel(std::move(dates), std::move(asset_ids), returns,
                   Mask::Constant(returns.rows(), returns.cols(), false)) {}

bool ReturnsPanel::has_missing(std::size_t start, std::size_t length) const {
  if (start + length > periods()) throw InvalidArgument("panel window out of bounds");
  return missing_.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(length))
      .any();
}

CovarianceMatrix::CovarianceMatrix(Matrix sigma, std::vector<std::string> asset_ids, Unchecked)
    : sigma_(mirror_upper(std::move(sigma))),
      asset_ids_(default_ids(static_cast<std::size_t>(sigma_.rows()), std::move(asset_ids))) {}

CovarianceMatrix::CovarianceMatrix(Matrix sigma, std::vector<std::string> asset_ids) {
  if (sigma.rows() != sigma.cols()) throw DimensionError("covariance must be square");
  if (sigma.rows() < 1) throw DataError("covariance must be nonempty");
  if (!sigma.allFinite()) throw DataError("covariance has non-finite entries");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    if (sigma(i, i) < 0.0)
      throw DataError("covariance has negative variance at index " + std::to_string(i));
    for (Eigen::Index j = i + 1; j < sigma.cols(); ++j) {
      if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-12 * scale)
        throw DataError("covariance is not symmetric at (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
    }
  }
  *this = CovarianceMatrix(std::move(sigma), std::move(asset_ids), Unchecked{});
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo < -1e-10 * std::max(hi, 0.0))
    throw DataError("covariance is not positive semidefinite (smallest eigenvalue " +
                    std::to_string(lo) + ")");
}

CovarianceMatrix CovarianceMatrix::trusted(Matrix sigma, std::vector<std::string> asset_ids) {
  if (sigma.rows() != sigma.cols()) throw DimensionError("covariance must be square");
  return CovarianceMatrix(std::move(sigma), std::move(asset_ids), Unchecked{});
}

CovarianceMatrix CovarianceMatrix::scaled(double factor) const {
  if (!(factor > 0.0)) throw InvalidArgument("covariance scale factor must be positive");
  return CovarianceMatrix(sigma_ * factor, asset_ids_, Unchecked{});
}

CovarianceMatrix CovarianceMatrix::permuted(std::span<const std::size_t> order) const {
  const auto p = dim();
  if (order.size() != p) throw DimensionError("permutation length does not match dimension");
  std::vector<bool> seen(p, false);
  for (auto k : order) {
    if (k >= p || seen[k]) throw InvalidArgument("not a permutation");
    seen[k] = true;
  }
  Matrix out(sigma_.rows(), sigma_.cols());
  std::vector<std::string> ids(p);
  for (std::size_t i = 0; i < p; ++i) {
    ids[i] = asset_ids_[order[i]];
    for (std::size_t j = 0; j < p; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(order[i], order[j]);
  }
  return CovarianceMatrix(std::move(out), std::move(ids), Unchecked{});
}

GroupStructure::GroupStructure(std::vector<std::vector<std::size_t>> groups, std::size_t p)
    : groups_(std::move(groups)), p_(p) {
  if (groups_.empty()) throw InvalidArgument("grouping must contain at least one group");
  std::vector<bool> seen(p_, false);
  std::size_t covered = 0;
  for (std::size_t l = 0; l < groups_.size(); ++l) {
    if (groups_[l].empty()) throw InvalidArgument("group " + std::to_string(l) + " is empty");
    for (auto i : groups_[l]) {
      if (i >= p_) throw InvalidArgument("group member index out of range");
      if (seen[i])
        throw InvalidArgument("asset " + std::to_string(i) + " appears in more than one group");
      seen[i] = true;
      ++covered;
    }
  }
  if (covered != p_) throw InvalidArgument("groups do not cover every asset");
}

GroupStructure GroupStructure::from_labels(std::span<const std::size_t> group_of_asset) {
  std::size_t n_groups = 0;
  for (auto g : group_of_asset) n_groups = std::max(n_groups, g + 1);
  std::vector<std::vector<std::size_t>> groups(n_groups);
  for (std::size_t i = 0; i < group_of_asset.size(); ++i) groups[group_of_asset[i]].push_back(i);
  return GroupStructure(std::move(groups), group_of_asset.size());
}

namespace {

void check_lambda(double lambda, const char* name) {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw InvalidArgument(std::string(name) + " must be finite and >= 0");
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in [0, 1]");
}

}  // namespace

using detail::Overloaded;

void validate(const PenaltyConfig& penalty, std::size_t p) {
  std::visit(Overloaded{
                 [](const ElasticNet& en) {
                   check_lambda(en.lambda, "lambda");
                   check_alpha(en.alpha);
                 },
                 [p](const MeanVariance& mv) {
                   check_lambda(mv.lambda, "lambda");
                   check_alpha(mv.alpha);
                   if (!std::isfinite(mv.tau) || mv.tau < 0.0)
                     throw InvalidArgument("tau must be finite and >= 0");
                   if (static_cast<std::size_t>(mv.mu.size()) != p)
                     throw DimensionError("mu length does not match asset count");
                   if (!mv.mu.allFinite()) throw InvalidArgument("mu must be finite");
                 },
                 [p](const WeightedL1& wl) {
                   check_lambda(wl.lambda, "lambda");
                   if (static_cast<std::size_t>(wl.eta.size()) != p)
                     throw DimensionError("eta length does not match asset count");
                   if (!wl.eta.allFinite() || (wl.eta.array() < 0.0).any())
                     throw InvalidArgument("eta entries must be finite and >= 0");
                 },
                 [](const Berhu& b) {
                   check_lambda(b.lambda, "lambda");
                   if (!std::isfinite(b.delta) || !(b.delta > 0.0))
                     throw InvalidArgument("delta must be finite and > 0");
                 },
                 [p](const AdaptiveGroup& g) {
                   check_lambda(g.lambda1, "lambda1");
                   if (g.lambda2 != 0.0)
                     throw InvalidArgument(
                         "adaptive group penalty with an additional l1 term (lambda2 > 0) is "
                         "not supported");
                   if (g.grouping.assets() != p)
                     throw DimensionError("grouping asset count does not match covariance");
                 },
             },
             penalty);
}

std::string family_name(const PenaltyConfig& penalty) {
  return std::visit(Overloaded{
                        [](const ElasticNet&) { return std::string("elastic-net"); },
                        [](const MeanVariance&) { return std::string("mean-variance"); },
                        [](const WeightedL1&) { return std::string("weighted-l1"); },
                        [](const Berhu&) { return std::string("berhu"); },
                        [](const AdaptiveGroup&) { return std::string("adaptive-group"); },
                    },
                    penalty);
}

double penalty_scale(const PenaltyConfig& penalty) {
  return std::visit(Overloaded{
                        [](const AdaptiveGroup& g) { return g.lambda1; },
                        [](const auto& other) { return other.lambda; },
                    },
                    penalty);
}

void SolverOptions::validate() const {
  if (max_sweeps < 1) throw InvalidArgument("max_sweeps must be >= 1");
  if (!(coord_tol > 0.0) || !(budget_tol > 0.0) || !(kkt_tol > 0.0))
    throw InvalidArgument("solver tolerances must be > 0");
}

double quadratic_form(const CovarianceMatrix& sigma, const Vector& w) {
  return w.dot(sigma.sigma() * w);
}

double objective_value(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                       const Vector& w) {
  const auto p = sigma.dim();
  if (static_cast<std::size_t>(w.size()) != p)
    throw DimensionError("weight vector length does not match covariance");
  validate(penalty, p);
  const double risk = quadratic_form(sigma, w);
  const double extra = std::visit(
      Overloaded{
          [&](const ElasticNet& en) {
            if (en.lambda == 0.0) return 0.0;
            return en.lambda * en.alpha * w.lpNorm<1>() +
                   en.lambda * (1.0 - en.alpha) * w.squaredNorm();
          },
          [&](const MeanVariance& mv) {
            return -mv.tau * w.dot(mv.mu) + mv.lambda * mv.alpha * w.lpNorm<1>() +
                   mv.lambda * (1.0 - mv.alpha) * w.squaredNorm();
          },
          [&](const WeightedL1& wl) { return wl.lambda * wl.eta.dot(w.cwiseAbs()); },
          [&](const Berhu& b) { return berhu_penalty(w, b.lambda, b.delta); },
          [&](const AdaptiveGroup& g) {
            double total = 0.0;
            for (std::size_t l = 0; l < g.grouping.groups(); ++l) {
              const auto members = g.grouping.members(l);
              double q = 0.0;
              for (auto i : members)
                for (auto j : members)
                  q += w(static_cast<Eigen::Index>(i)) * sigma(i, j) *
                       w(static_cast<Eigen::Index>(j));
              total += std::sqrt(std::max(q, 0.0));
            }
            return g.lambda1 * total;
          },
      },
      penalty);
  return risk + extra;
}

}  // namespace smvp
