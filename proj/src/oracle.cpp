#include "smvp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>

#include "overloaded.hpp"

namespace smvp {

using detail::Overloaded;

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Equality-constrained quadratic subproblem: min x'Qx + c'x s.t. 1'x = 1.

struct Eqp {
  Vector x;
  double gamma = 0.0;
};

Eqp solve_eqp(const Matrix& q, const Vector& c) {
  const Eigen::Index n = q.rows();
  const Vector ones = Vector::Ones(n);
  Eigen::LDLT<Matrix> ldlt(q);
  const double dmax = ldlt.info() == Eigen::Success ? ldlt.vectorD().cwiseAbs().maxCoeff() : 0.0;
  if (ldlt.info() == Eigen::Success && dmax > 0.0 &&
      (ldlt.vectorD().array() > 1e-13 * dmax).all()) {
    // Stationarity 2Qx + c = gamma 1.
    const Vector a = ldlt.solve(ones);
    const Vector b = ldlt.solve(c);
    Eqp out;
    out.gamma = (2.0 + ones.dot(b)) / ones.dot(a);
    out.x = 0.5 * (out.gamma * a - b);
    return out;
  }
  Matrix kkt = Matrix::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = 2.0 * q;
  kkt.topRightCorner(n, 1) = -ones;
  kkt.bottomLeftCorner(1, n) = ones.transpose();
  Vector rhs(n + 1);
  rhs << -c, 1.0;
  const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  return {sol.head(n), sol(n)};
}

// ---------------------------------------------------------------------------
// Separable piecewise-quadratic penalties (elastic net, mean-variance,
// weighted l1, berhu). Each coordinate lives on one smooth piece.

enum class Piece { Zero, Pos, Neg, QuadPos, QuadNeg };

struct SeparableSpec {
  Vector radius;  // subdifferential half-width at zero
  Vector ridge;
  Vector linear;
  bool berhu = false;
  double lambda = 0.0;
  double delta = 0.0;

  // Piece contributes h w^2 + c w (plus a constant).
  double h(std::size_t i, Piece pc) const {
    if (berhu) return (pc == Piece::QuadPos || pc == Piece::QuadNeg) ? lambda / (2.0 * delta) : 0.0;
    return ridge(ix(i));
  }
  double c(std::size_t i, Piece pc) const {
    switch (pc) {
      case Piece::Pos:
        return radius(ix(i)) - linear(ix(i));
      case Piece::Neg:
        return -radius(ix(i)) - linear(ix(i));
      default:
        return -linear(ix(i));
    }
  }
  double lower(Piece pc) const {
    switch (pc) {
      case Piece::Pos:
        return 0.0;
      case Piece::QuadPos:
        return delta;
      default:
        return -kInf;
    }
  }
  double upper(Piece pc) const {
    switch (pc) {
      case Piece::Neg:
        return 0.0;
      case Piece::QuadNeg:
        return -delta;
      case Piece::Pos:
        return berhu ? delta : kInf;
      default:
        return kInf;
    }
  }
  // Piece entered when a coordinate reaches `bound` leaving piece `pc`.
  Piece across(Piece pc, double bound) const {
    if (bound == 0.0) return Piece::Zero;
    switch (pc) {
      case Piece::Pos:
        return Piece::QuadPos;
      case Piece::QuadPos:
        return Piece::Pos;
      case Piece::Neg:
        return Piece::QuadNeg;
      default:
        return Piece::Neg;
    }
  }
  Piece piece_for(double w) const {
    if (w == 0.0) return Piece::Zero;
    if (berhu && std::abs(w) >= delta) return w > 0.0 ? Piece::QuadPos : Piece::QuadNeg;
    return w > 0.0 ? Piece::Pos : Piece::Neg;
  }
  // One subgradient of the penalty part at w_i.
  double subgradient(std::size_t i, double w) const {
    const double s = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
    if (berhu) return std::abs(w) >= delta ? lambda * w / delta : lambda * s;
    return radius(ix(i)) * s + 2.0 * ridge(ix(i)) * w - linear(ix(i));
  }
};

SeparableSpec separable_spec(const PenaltyConfig& penalty, std::size_t p) {
  const auto n = ix(p);
  SeparableSpec s;
  s.radius = Vector::Zero(n);
  s.ridge = Vector::Zero(n);
  s.linear = Vector::Zero(n);
  std::visit(Overloaded{
                 [&](const ElasticNet& en) {
                   s.radius.setConstant(en.lambda * en.alpha);
                   s.ridge.setConstant(en.lambda * (1.0 - en.alpha));
                 },
                 [&](const MeanVariance& mv) {
                   s.radius.setConstant(mv.lambda * mv.alpha);
                   s.ridge.setConstant(mv.lambda * (1.0 - mv.alpha));
                   s.linear = mv.tau * mv.mu;
                 },
                 [&](const WeightedL1& wl) { s.radius = wl.lambda * wl.eta; },
                 [&](const Berhu& b) {
                   s.berhu = true;
                   s.lambda = b.lambda;
                   s.delta = b.delta;
                   s.radius.setConstant(b.lambda);
                 },
                 [](const AdaptiveGroup&) {},
             },
             penalty);
  return s;
}

// Optimality residual for the separable family at (w, gamma).
double separable_violation(const CovarianceMatrix& sigma, const SeparableSpec& spec,
                           const Vector& w, double gamma) {
  const Vector grad = 2.0 * (sigma.sigma() * w);
  double worst = std::abs(w.sum() - 1.0);
  for (std::size_t i = 0; i < sigma.dim(); ++i) {
    const double wi = w(ix(i));
    if (wi == 0.0) {
      const double g = grad(ix(i)) - spec.linear(ix(i)) - gamma;
      worst = std::max(worst, std::abs(g) - spec.radius(ix(i)));
    } else {
      worst = std::max(worst, std::abs(grad(ix(i)) + spec.subgradient(i, wi) - gamma));
    }
  }
  return worst;
}

struct Walk {
  Vector w;
  double gamma = 0.0;
  bool optimal = false;
};

// Primal active-set walk over pieces. Starts from a feasible point that is
// consistent with `pieces`; every step moves toward the minimizer of the
// current piece's equality-constrained quadratic and stops at the first
// piece boundary, so the objective never increases.
Walk active_set_walk(const CovarianceMatrix& sigma, const SeparableSpec& spec, Vector w,
                     std::vector<Piece> pieces, double tol) {
  const auto p = sigma.dim();
  Walk out;
  const std::size_t max_steps = 50 * p + 50;
  for (std::size_t step = 0; step < max_steps; ++step) {
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < p; ++i)
      if (pieces[i] != Piece::Zero) free.push_back(i);
    if (free.empty()) break;

    const auto nf = ix(free.size());
    Matrix q(nf, nf);
    Vector c(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto i = free[static_cast<std::size_t>(a)];
      for (Eigen::Index b = 0; b < nf; ++b) q(a, b) = sigma(i, free[static_cast<std::size_t>(b)]);
      q(a, a) += spec.h(i, pieces[i]);
      c(a) = spec.c(i, pieces[i]);
    }
    const Eqp eqp = solve_eqp(q, c);
    out.gamma = eqp.gamma;

    double t = 1.0;
    std::optional<std::size_t> blocking;
    double blocking_bound = 0.0;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto i = free[static_cast<std::size_t>(a)];
      const double cur = w(ix(i));
      const double target = eqp.x(a);
      const double d = target - cur;
      const double lo = spec.lower(pieces[i]);
      const double hi = spec.upper(pieces[i]);
      double ti = kInf, bound = 0.0;
      if (target < lo && d < 0.0) {
        ti = (lo - cur) / d;
        bound = lo;
      } else if (target > hi && d > 0.0) {
        ti = (hi - cur) / d;
        bound = hi;
      }
      ti = std::max(ti, 0.0);
      if (ti < t) {
        t = ti;
        blocking = i;
        blocking_bound = bound;
      }
    }
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto i = free[static_cast<std::size_t>(a)];
      w(ix(i)) += t * (eqp.x(a) - w(ix(i)));
    }
    if (blocking) {
      w(ix(*blocking)) = blocking_bound;
      pieces[*blocking] = spec.across(pieces[*blocking], blocking_bound);
      continue;
    }

    // At the piece minimizer: price the zero coordinates.
    const Vector grad = 2.0 * (sigma.sigma() * w);
    double worst = tol;
    std::optional<std::size_t> enter;
    double enter_g = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      if (pieces[i] != Piece::Zero) continue;
      const double g = grad(ix(i)) - spec.linear(ix(i)) - out.gamma;
      const double v = std::abs(g) - spec.radius(ix(i));
      if (v > worst) {
        worst = v;
        enter = i;
        enter_g = g;
      }
    }
    if (!enter) {
      out.optimal = true;
      break;
    }
    pieces[*enter] = enter_g < 0.0 ? Piece::Pos : Piece::Neg;
  }
  out.w = std::move(w);
  return out;
}

// ---------------------------------------------------------------------------
// Group penalty lambda1 sum_l ||w_l||_{A_ll}.

struct GroupSpec {
  std::vector<std::vector<std::size_t>> members;
  std::vector<Matrix> a;
  double lambda1 = 0.0;
};

GroupSpec group_spec(const CovarianceMatrix& sigma, const AdaptiveGroup& g) {
  GroupSpec s;
  s.lambda1 = g.lambda1;
  for (const auto& m : g.grouping.all()) {
    s.members.push_back(m);
    Matrix blk(ix(m.size()), ix(m.size()));
    for (std::size_t r = 0; r < m.size(); ++r)
      for (std::size_t c = 0; c < m.size(); ++c) blk(ix(r), ix(c)) = sigma(m[r], m[c]);
    s.a.push_back(std::move(blk));
  }
  return s;
}

Vector block_of(const Vector& w, const std::vector<std::size_t>& m) {
  Vector out(ix(m.size()));
  for (std::size_t k = 0; k < m.size(); ++k) out(ix(k)) = w(ix(m[k]));
  return out;
}

double a_norm(const Matrix& a, const Vector& x) { return std::sqrt(std::max(x.dot(a * x), 0.0)); }

double group_objective(const CovarianceMatrix& sigma, const GroupSpec& spec, const Vector& w) {
  double pen = 0.0;
  for (std::size_t l = 0; l < spec.members.size(); ++l)
    pen += a_norm(spec.a[l], block_of(w, spec.members[l]));
  return w.dot(sigma.sigma() * w) + spec.lambda1 * pen;
}

Vector group_subgradient(const CovarianceMatrix& sigma, const GroupSpec& spec, const Vector& w) {
  Vector g = 2.0 * (sigma.sigma() * w);
  for (std::size_t l = 0; l < spec.members.size(); ++l) {
    const Vector wl = block_of(w, spec.members[l]);
    const Vector aw = spec.a[l] * wl;
    const double n = std::sqrt(std::max(wl.dot(aw), 0.0));
    if (n <= 0.0) continue;
    for (std::size_t k = 0; k < spec.members[l].size(); ++k)
      g(ix(spec.members[l][k])) += spec.lambda1 * aw(ix(k)) / n;
  }
  return g;
}

// sqrt(r' A^{-1} r) through a Cholesky solve.
double inverse_norm(const Matrix& a, const Vector& r) {
  Eigen::LLT<Matrix> llt(a);
  return std::sqrt(std::max(r.dot(llt.solve(r)), 0.0));
}

void project_budget(Vector& w, const std::vector<bool>& active_coord) {
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (active_coord[static_cast<std::size_t>(i)]) {
      sum += w(i);
      ++n;
    } else {
      w(i) = 0.0;
    }
  }
  if (n == 0) return;
  const double shift = (1.0 - sum) / static_cast<double>(n);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (active_coord[static_cast<std::size_t>(i)]) w(i) += shift;
}

struct GroupPolish {
  Vector w;
  double gamma = 0.0;
  double violation = kInf;
};

// Equality-constrained Newton on the smooth restriction to active groups,
// with a group-entry/exit loop on top.
GroupPolish group_polish(const CovarianceMatrix& sigma, const GroupSpec& spec, Vector w,
                         std::vector<bool> active, double tol) {
  const auto p = sigma.dim();
  const std::size_t n_groups = spec.members.size();
  const double scale = 1.0 + sigma.max_variance();
  GroupPolish out;

  auto coords = [&]() {
    std::vector<bool> c(p, false);
    for (std::size_t l = 0; l < n_groups; ++l)
      if (active[l])
        for (auto i : spec.members[l]) c[i] = true;
    return c;
  };

  for (std::size_t outer = 0; outer < 4 * n_groups + 8; ++outer) {
    if (std::none_of(active.begin(), active.end(), [](bool b) { return b; }))
      std::fill(active.begin(), active.end(), true);
    auto on = coords();
    project_budget(w, on);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < p; ++i)
      if (on[i]) idx.push_back(i);
    const auto n = ix(idx.size());

    std::optional<std::size_t> dropped;
    for (int it = 0; it < 200; ++it) {
      // Drop a group that collapsed to the origin; the smooth model is
      // undefined there.
      for (std::size_t l = 0; l < n_groups && !dropped; ++l)
        if (active[l] && a_norm(spec.a[l], block_of(w, spec.members[l])) <= 1e-11) dropped = l;
      if (dropped) break;

      const Vector g_full = group_subgradient(sigma, spec, w);
      Matrix h = Matrix::Zero(n, n);
      Vector g(n);
      for (Eigen::Index a = 0; a < n; ++a) {
        g(a) = g_full(ix(idx[static_cast<std::size_t>(a)]));
        for (Eigen::Index b = 0; b < n; ++b)
          h(a, b) = 2.0 * sigma(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
      }
      // Hessian of lambda1 ||w_l||_A: lambda1 (A / n - A w w' A / n^3).
      std::vector<Eigen::Index> pos(p, -1);
      for (Eigen::Index a = 0; a < n; ++a) pos[idx[static_cast<std::size_t>(a)]] = a;
      for (std::size_t l = 0; l < n_groups; ++l) {
        if (!active[l]) continue;
        const auto& m = spec.members[l];
        const Vector wl = block_of(w, m);
        const Vector aw = spec.a[l] * wl;
        const double nl = std::sqrt(wl.dot(aw));
        const Matrix hl = spec.lambda1 * (spec.a[l] / nl - aw * aw.transpose() / (nl * nl * nl));
        for (std::size_t r = 0; r < m.size(); ++r)
          for (std::size_t c = 0; c < m.size(); ++c) h(pos[m[r]], pos[m[c]]) += hl(ix(r), ix(c));
      }
      Matrix kkt = Matrix::Zero(n + 1, n + 1);
      kkt.topLeftCorner(n, n) = h;
      kkt.topRightCorner(n, 1).setOnes();
      kkt.bottomLeftCorner(1, n).setOnes();
      Vector rhs(n + 1);
      double sum = 0.0;
      for (auto i : idx) sum += w(ix(i));
      rhs << -g, 1.0 - sum;
      const Vector sol = kkt.fullPivLu().solve(rhs);
      const Vector dw = sol.head(n);
      if (!dw.allFinite()) break;

      const double f0 = group_objective(sigma, spec, w);
      const double slope = g.dot(dw);
      double t = 1.0;
      Vector trial = w;
      for (int ls = 0; ls < 60; ++ls) {
        trial = w;
        for (Eigen::Index a = 0; a < n; ++a) trial(ix(idx[static_cast<std::size_t>(a)])) += t * dw(a);
        if (group_objective(sigma, spec, trial) <= f0 + 1e-4 * t * std::min(slope, 0.0)) break;
        t *= 0.5;
      }
      w = trial;
      if (t * dw.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + w.cwiseAbs().maxCoeff())) break;
    }
    if (dropped) {
      active[*dropped] = false;
      continue;
    }

    // Multiplier by least squares over active coordinates.
    const Vector g_full = group_subgradient(sigma, spec, w);
    double gamma = 0.0;
    for (auto i : idx) gamma += g_full(ix(i));
    gamma /= static_cast<double>(idx.size());

    double worst = std::abs(w.sum() - 1.0);
    for (auto i : idx) worst = std::max(worst, std::abs(g_full(ix(i)) - gamma));
    const Vector grad = 2.0 * (sigma.sigma() * w);
    std::optional<std::size_t> enter;
    double enter_v = tol * scale;
    for (std::size_t l = 0; l < n_groups; ++l) {
      if (active[l]) continue;
      const Vector r = Vector::Constant(ix(spec.members[l].size()), gamma) -
                       block_of(grad, spec.members[l]);
      const double v = inverse_norm(spec.a[l], r) - spec.lambda1;
      worst = std::max(worst, v);
      if (v > enter_v) {
        enter_v = v;
        enter = l;
      }
    }
    out.w = w;
    out.gamma = gamma;
    out.violation = worst;
    if (!enter) break;
    // Seed the entering group along its block descent direction.
    const auto& m = spec.members[*enter];
    const Vector r = Vector::Constant(ix(m.size()), gamma) - block_of(grad, m);
    Vector dir = Eigen::LLT<Matrix>(spec.a[*enter]).solve(r);
    dir *= 1e-3 / std::max(dir.cwiseAbs().maxCoeff(), 1e-300);
    for (std::size_t k = 0; k < m.size(); ++k) w(ix(m[k])) = dir(ix(k));
    active[*enter] = true;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Candidate {
  Vector w;
  double gamma = 0.0;
  double objective = kInf;
  double violation = kInf;
};

Vector random_feasible(std::size_t p, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector w(ix(p));
  for (std::size_t i = 0; i < p; ++i) w(ix(i)) = normal(rng) / std::sqrt(static_cast<double>(p));
  w.array() += (1.0 - w.sum()) / static_cast<double>(p);
  return w;
}

// Projected subgradient descent on the affine budget set.
Vector subgradient_descent(Vector w, const OracleOptions& opts,
                           const std::function<double(const Vector&)>& f,
                           const std::function<Vector(const Vector&)>& subgrad) {
  Vector best = w;
  double best_f = f(w);
  for (std::size_t k = 0; k < opts.subgradient_iterations; ++k) {
    Vector g = subgrad(w);
    g.array() -= g.mean();
    const double gn = g.norm();
    if (!(gn > 0.0)) break;
    w -= (opts.initial_step / std::sqrt(static_cast<double>(k) + 1.0)) * (g / gn);
    const double fw = f(w);
    if (fw < best_f) {
      best_f = fw;
      best = w;
    }
  }
  return best;
}

double final_step(const OracleOptions& opts) {
  return opts.initial_step / std::sqrt(static_cast<double>(opts.subgradient_iterations));
}

Candidate polish_separable(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                           const SeparableSpec& spec, const Vector& w_sg, const OracleOptions& opts) {
  const auto p = sigma.dim();
  const double tol = 1e-13 * (1.0 + sigma.max_variance());
  const double thr = 2.0 * final_step(opts);

  // Pattern from the subgradient point, then one exact solve on it.
  std::vector<Piece> pieces(p);
  for (std::size_t i = 0; i < p; ++i)
    pieces[i] = std::abs(w_sg(ix(i))) < thr ? Piece::Zero : spec.piece_for(w_sg(ix(i)));
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < p; ++i)
    if (pieces[i] != Piece::Zero) free.push_back(i);

  Vector start = Vector::Constant(ix(p), 1.0 / static_cast<double>(p));
  std::vector<Piece> start_pieces(p, spec.piece_for(1.0 / static_cast<double>(p)));
  if (!free.empty()) {
    const auto nf = ix(free.size());
    Matrix q(nf, nf);
    Vector c(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto i = free[static_cast<std::size_t>(a)];
      for (Eigen::Index b = 0; b < nf; ++b) q(a, b) = sigma(i, free[static_cast<std::size_t>(b)]);
      q(a, a) += spec.h(i, pieces[i]);
      c(a) = spec.c(i, pieces[i]);
    }
    const Eqp eqp = solve_eqp(q, c);
    bool consistent = eqp.x.allFinite();
    for (Eigen::Index a = 0; a < nf && consistent; ++a) {
      const auto i = free[static_cast<std::size_t>(a)];
      consistent = eqp.x(a) >= spec.lower(pieces[i]) && eqp.x(a) <= spec.upper(pieces[i]) &&
                   eqp.x(a) != 0.0;
    }
    if (consistent) {
      start.setZero();
      for (Eigen::Index a = 0; a < nf; ++a) start(ix(free[static_cast<std::size_t>(a)])) = eqp.x(a);
      start_pieces = pieces;
    }
  }
  const Walk walk = active_set_walk(sigma, spec, start, start_pieces, tol);
  Candidate cand;
  cand.w = walk.w;
  cand.gamma = walk.gamma;
  cand.objective = objective_value(sigma, penalty, walk.w);
  cand.violation = separable_violation(sigma, spec, walk.w, walk.gamma);
  return cand;
}

}  // namespace

Solution solve_generic(const CovarianceMatrix& sigma, const PenaltyConfig& penalty,
                       const OracleOptions& opts) {
  const auto p = sigma.dim();
  if (p > opts.max_dim)
    throw InvalidArgument("oracle supports at most " + std::to_string(opts.max_dim) + " assets");
  if (opts.starts < 1) throw InvalidArgument("oracle needs at least one start");
  validate(penalty, p);

  const bool group = std::holds_alternative<AdaptiveGroup>(penalty);
  const SeparableSpec sep = separable_spec(penalty, p);
  std::optional<GroupSpec> gspec;
  if (group) gspec = group_spec(sigma, std::get<AdaptiveGroup>(penalty));

  auto f = [&](const Vector& w) { return objective_value(sigma, penalty, w); };
  auto subgrad = [&](const Vector& w) -> Vector {
    if (group) return group_subgradient(sigma, *gspec, w);
    Vector g = 2.0 * (sigma.sigma() * w);
    for (std::size_t i = 0; i < p; ++i) g(ix(i)) += sep.subgradient(i, w(ix(i)));
    return g;
  };

  const Vector uniform = Vector::Constant(ix(p), 1.0 / static_cast<double>(p));
  Candidate best;
  best.w = uniform;
  best.objective = f(uniform);
  bool have_polished = false;

  std::mt19937_64 rng(opts.seed);
  for (std::size_t s = 0; s < opts.starts; ++s) {
    const Vector w0 = s == 0 ? uniform : random_feasible(p, rng);
    const Vector w_sg = subgradient_descent(w0, opts, f, subgrad);
    Candidate cand;
    if (group) {
      std::vector<bool> active(gspec->members.size(), false);
      const double thr = 2.0 * final_step(opts);
      for (std::size_t l = 0; l < active.size(); ++l)
        active[l] = block_of(w_sg, gspec->members[l]).cwiseAbs().maxCoeff() >= thr;
      GroupPolish gp = group_polish(sigma, *gspec, w_sg, active, 1e-13);
      if (gp.w.size() == 0) continue;
      cand.w = gp.w;
      cand.gamma = gp.gamma;
      cand.violation = gp.violation;
      cand.objective = f(gp.w);
    } else {
      cand = polish_separable(sigma, penalty, sep, w_sg, opts);
    }
    if (!cand.w.allFinite() || std::abs(cand.w.sum() - 1.0) > 1e-9) continue;
    if (!have_polished || cand.objective < best.objective) {
      if (cand.objective <= f(uniform) || !have_polished) {
        best = cand;
        have_polished = true;
      }
    }
  }

  Solution sol;
  sol.weights = best.w;
  sol.gamma = best.gamma;
  sol.iterations = opts.starts;
  sol.objective = best.objective;
  sol.kkt_residual = best.violation;
  const double scale = 1.0 + sigma.max_variance() + penalty_scale(penalty);
  sol.converged = have_polished && best.violation <= 1e-8 * scale;
  if (best.objective > f(uniform)) {
    sol.weights = uniform;
    sol.objective = f(uniform);
    sol.converged = false;
  }
  return sol;
}

Solution solve_no_shortsale(const CovarianceMatrix& sigma, const NoShortsaleOptions& opts) {
  const auto p = sigma.dim();
  Vector w = Vector::Constant(ix(p), 1.0 / static_cast<double>(p));
  std::vector<bool> clamped(p, false);
  double gamma = 0.0;
  std::size_t iterations = 0;
  const std::size_t max_iter = opts.iterations_per_asset * p;
  bool done = false;

  while (iterations < max_iter) {
    ++iterations;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < p; ++i)
      if (!clamped[i]) free.push_back(i);
    const auto nf = ix(free.size());
    Matrix q(nf, nf);
    for (Eigen::Index a = 0; a < nf; ++a)
      for (Eigen::Index b = 0; b < nf; ++b)
        q(a, b) = sigma(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    const Eqp eqp = solve_eqp(q, Vector::Zero(nf));
    gamma = eqp.gamma;

    // Step toward the working-set minimizer until a coordinate hits zero.
    double t = 1.0;
    std::optional<std::size_t> blocking;
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto i = free[static_cast<std::size_t>(a)];
      const double target = eqp.x(a);
      if (target < 0.0) {
        const double ti = w(ix(i)) / (w(ix(i)) - target);
        if (ti < t) {
          t = ti;
          blocking = i;
        }
      }
    }
    for (Eigen::Index a = 0; a < nf; ++a) {
      const auto i = free[static_cast<std::size_t>(a)];
      w(ix(i)) += t * (eqp.x(a) - w(ix(i)));
    }
    if (blocking) {
      w(ix(*blocking)) = 0.0;
      clamped[*blocking] = true;
      continue;
    }

    // Release the clamped coordinate with the most negative multiplier.
    const Vector grad = 2.0 * (sigma.sigma() * w);
    std::optional<std::size_t> release;
    double most_negative = -opts.kkt_tol;
    for (std::size_t i = 0; i < p; ++i) {
      if (!clamped[i]) continue;
      const double mult = grad(ix(i)) - gamma;
      if (mult < most_negative) {
        most_negative = mult;
        release = i;
      }
    }
    if (!release) {
      done = true;
      break;
    }
    clamped[*release] = false;
  }

  // Verification: stationarity on the support, feasibility, multiplier signs.
  const Vector grad = 2.0 * (sigma.sigma() * w);
  double stationarity = 0.0, infeasibility = 0.0, dual = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double wi = w(ix(i));
    const double mult = grad(ix(i)) - gamma;
    infeasibility = std::max(infeasibility, -wi);
    if (clamped[i]) {
      dual = std::max(dual, -mult);
    } else {
      stationarity = std::max(stationarity, std::abs(mult));
    }
  }
  infeasibility = std::max(infeasibility, std::abs(w.sum() - 1.0));

  Solution sol;
  sol.weights = std::move(w);
  sol.gamma = gamma;
  sol.iterations = iterations;
  sol.objective = quadratic_form(sigma, sol.weights);
  sol.kkt_residual = std::max({stationarity, infeasibility, dual});
  sol.converged = done && sol.kkt_residual <= opts.kkt_tol;
  return sol;
}

}  // namespace smvp
