#include "smvp/group_solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "smvp/cd_solver.hpp"

namespace smvp {

namespace {

constexpr std::size_t kRefreshEvery = 50;

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

Matrix gather(const Matrix& m, std::span<const std::size_t> rows,
              std::span<const std::size_t> cols) {
  Matrix out(ix(rows.size()), ix(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out(ix(r), ix(c)) = m(ix(rows[r]), ix(cols[c]));
  return out;
}

Vector gather(const Vector& v, std::span<const std::size_t> idx) {
  Vector out(ix(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(ix(k)) = v(ix(idx[k]));
  return out;
}

}  // namespace

Matrix inverse_sqrt_sym(const Matrix& a, double rel_floor) {
  if (a.rows() != a.cols() || a.rows() == 0) throw DimensionError("inverse_sqrt_sym: need square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  if (eig.info() != Eigen::Success) throw IllConditionedError("eigendecomposition failed");
  const Vector& ev = eig.eigenvalues();
  const double hi = ev.maxCoeff();
  if (!(hi > 0.0) || !(ev.minCoeff() > rel_floor * hi))
    throw IllConditionedError("covariance block is not positive definite (smallest eigenvalue " +
                              std::to_string(ev.minCoeff()) + ")");
  const Matrix& q = eig.eigenvectors();
  Matrix m = q * ev.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

GroupWorkspace::GroupWorkspace(const CovarianceMatrix& sigma, const GroupStructure& grouping) {
  if (grouping.assets() != sigma.dim())
    throw DimensionError("grouping asset count does not match covariance");
  blocks.reserve(grouping.groups());
  for (std::size_t l = 0; l < grouping.groups(); ++l) {
    GroupBlock blk;
    const auto members = grouping.members(l);
    blk.members.assign(members.begin(), members.end());
    blk.a = gather(sigma.sigma(), members, members);
    try {
      blk.inv_sqrt = inverse_sqrt_sym(blk.a);
    } catch (const IllConditionedError& e) {
      throw IllConditionedError("group " + std::to_string(l) + ": " + e.what());
    }
    blk.inv = blk.inv_sqrt * blk.inv_sqrt;
    blk.inv = 0.5 * (blk.inv + blk.inv.transpose());
    blk.inv_sqrt_ones = blk.inv_sqrt * Vector::Ones(blk.a.rows());
    blocks.push_back(std::move(blk));
  }
  b.assign(blocks.size(), Vector());
  for (std::size_t l = 0; l < blocks.size(); ++l) b[l] = Vector::Zero(blocks[l].a.rows());
  gamma_scale = gamma_floor(sigma);
}

void GroupWorkspace::refresh(const CovarianceMatrix& sigma, const Vector& w) {
  const Vector sw = sigma.sigma() * w;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& blk = blocks[l];
    b[l] = 2.0 * (gather(sw, blk.members) - blk.a * gather(w, blk.members));
  }
}

double lambda_l(double gamma, const GroupWorkspace& ws, std::size_t l) {
  const auto& blk = ws.blocks.at(l);
  return (gamma * blk.inv_sqrt_ones - blk.inv_sqrt * ws.b[l]).norm();
}

Vector update_group(std::size_t l, double gamma, const GroupWorkspace& ws, double lambda1) {
  const auto& blk = ws.blocks.at(l);
  const Vector r = Vector::Constant(blk.a.rows(), gamma) - ws.b[l];
  const double lam = (blk.inv_sqrt * r).norm();
  if (lam <= lambda1) return Vector::Zero(blk.a.rows());
  return 0.5 * (1.0 - lambda1 / lam) * (blk.inv * r);
}

GammaSearch solve_gamma(const GroupWorkspace& ws, double lambda1, double gamma_prev) {
  // With u = A^{-1/2} 1 and v = A^{-1/2} B_l the group budget contribution is
  // 1/2 (1 - lambda1 / ||gamma u - v||)_+ u'(gamma u - v).
  std::vector<Vector> v(ws.groups());
  for (std::size_t l = 0; l < ws.groups(); ++l) v[l] = ws.blocks[l].inv_sqrt * ws.b[l];
  auto residual = [&](double gamma) {
    double s = 0.0;
    for (std::size_t l = 0; l < ws.groups(); ++l) {
      const Vector& u = ws.blocks[l].inv_sqrt_ones;
      const Vector d = gamma * u - v[l];
      const double lam = d.norm();
      if (lam <= lambda1) continue;
      s += 0.5 * (1.0 - lambda1 / lam) * u.dot(d);
    }
    return s - 1.0;
  };

  GammaSearch out;
  const double r_prev = residual(gamma_prev);
  out.gamma = gamma_prev;
  out.residual_sq = r_prev * r_prev;
  if (r_prev == 0.0) {
    out.bracketed = true;
    return out;
  }

  double lo = gamma_prev, hi = gamma_prev;
  double r_lo = r_prev, r_hi = r_prev;
  double step = 0.1 * std::max(std::abs(gamma_prev), ws.gamma_scale);
  constexpr int kMaxExpand = 200;
  int n = 0;
  if (r_prev < 0.0) {
    while (r_hi < 0.0 && n++ < kMaxExpand) {
      lo = hi;
      r_lo = r_hi;
      hi += step;
      step *= 2.0;
      r_hi = residual(hi);
    }
  } else {
    while (r_lo > 0.0 && n++ < kMaxExpand) {
      hi = lo;
      r_hi = r_lo;
      lo -= step;
      step *= 2.0;
      r_lo = residual(lo);
    }
  }
  out.bracketed = r_lo <= 0.0 && r_hi >= 0.0;
  if (out.bracketed) {
    for (int it = 0; it < 300; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double r = residual(mid);
      if (r < 0.0) {
        lo = mid;
        r_lo = r;
      } else {
        hi = mid;
        r_hi = r;
        if (r == 0.0) break;
      }
    }
  }
  for (auto [g, r] : {std::pair{lo, r_lo}, std::pair{hi, r_hi}}) {
    if (r * r < out.residual_sq) {
      out.gamma = g;
      out.residual_sq = r * r;
    }
  }
  return out;
}

Solution solve_adaptive_group(const CovarianceMatrix& sigma, const GroupStructure& grouping,
                              double lambda1, const SolverOptions& opts, const WarmStart* warm) {
  opts.validate();
  const PenaltyConfig penalty = AdaptiveGroup{lambda1, grouping};
  const auto p = sigma.dim();
  validate(penalty, p);

  auto finish = [&](Solution sol) {
    sol.objective = objective_value(sigma, penalty, sol.weights);
    sol.kkt_residual = kkt_residual(sigma, penalty, sol);
    return sol;
  };

  GroupWorkspace ws(sigma, grouping);
  if (below_regularization_floor(sigma, lambda1)) return finish(solve_unpenalized(sigma));

  Vector w = Vector::Constant(ix(p), 1.0 / static_cast<double>(p));
  double gamma = std::max(lambda1 * std::sqrt(sigma.max_variance()), gamma_floor(sigma)) * 1.1;
  if (warm && static_cast<std::size_t>(warm->weights.size()) == p && warm->weights.allFinite() &&
      std::isfinite(warm->gamma)) {
    w = warm->weights;
    gamma = warm->gamma;
  }

  Solution sol;
  Vector sw = sigma.sigma() * w;
  std::size_t sweep = 0;
  while (sweep < opts.max_sweeps) {
    ++sweep;
    double max_dw = 0.0;
    for (std::size_t l = 0; l < ws.groups(); ++l) {
      const auto& blk = ws.blocks[l];
      const Vector wl = gather(w, blk.members);
      ws.b[l] = 2.0 * (gather(sw, blk.members) - blk.a * wl);
      const Vector next = update_group(l, gamma, ws, lambda1);
      const Vector delta = next - wl;
      if (delta.isZero(0.0)) continue;
      max_dw = std::max(max_dw, delta.cwiseAbs().maxCoeff());
      for (std::size_t k = 0; k < blk.members.size(); ++k) {
        const auto i = blk.members[k];
        w(ix(i)) = next(ix(k));
        sw.noalias() += delta(ix(k)) * sigma.sigma().col(ix(i));
      }
    }
    if (sweep % kRefreshEvery == 0) sw = sigma.sigma() * w;

    ws.refresh(sigma, w);
    const GammaSearch gs = solve_gamma(ws, lambda1, gamma);
    const double dgamma = std::abs(gs.gamma - gamma);
    gamma = gs.gamma;
    const double budget = std::abs(w.sum() - 1.0);
    if (max_dw <= opts.coord_tol && budget <= opts.budget_tol &&
        dgamma <= opts.coord_tol * (1.0 + std::abs(gamma))) {
      sol.converged = true;
      break;
    }
  }
  sol.weights = std::move(w);
  sol.gamma = gamma;
  sol.iterations = sweep;
  return finish(std::move(sol));
}

double group_stationarity(const CovarianceMatrix& sigma, const GroupStructure& grouping,
                          double lambda1, const Solution& sol) {
  GroupWorkspace ws(sigma, grouping);
  const Vector grad = 2.0 * (sigma.sigma() * sol.weights);
  double worst = 0.0;
  for (std::size_t l = 0; l < ws.groups(); ++l) {
    const auto& blk = ws.blocks[l];
    const Vector wl = gather(sol.weights, blk.members);
    const Vector gl = gather(grad, blk.members);
    if (wl.isZero(0.0)) {
      // Zero block: B_l equals the full gradient block; test Lambda_l <= lambda1.
      const double lam = (blk.inv_sqrt * (Vector::Constant(wl.size(), sol.gamma) - gl)).norm();
      worst = std::max(worst, std::max(lam - lambda1, 0.0));
    } else {
      const Vector aw = blk.a * wl;
      const double norm_a = std::sqrt(std::max(wl.dot(aw), 0.0));
      Vector r = gl - Vector::Constant(wl.size(), sol.gamma);
      if (norm_a > 0.0) r += (lambda1 / norm_a) * aw;
      worst = std::max(worst, (blk.inv_sqrt * r).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace smvp
