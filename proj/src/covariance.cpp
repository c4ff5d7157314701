#include "smvp/covariance.hpp"

#include <string>

namespace smvp {

ReturnsPanel impute_missing(const ReturnsPanel& panel) {
  if (!panel.has_missing()) return panel;
  Matrix r = panel.returns();
  const auto& mask = panel.missing();
  for (Eigen::Index t = 0; t < r.rows(); ++t) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < r.cols(); ++i) {
      if (!mask(t, i)) {
        sum += r(t, i);
        ++count;
      }
    }
    if (count == r.cols()) continue;
    if (count == 0)
      throw DataError("cannot impute period " +
                      std::to_string(panel.dates()[static_cast<std::size_t>(t)]) +
                      ": every asset is missing");
    const double fill = sum / static_cast<double>(count);
    for (Eigen::Index i = 0; i < r.cols(); ++i)
      if (mask(t, i)) r(t, i) = fill;
  }
  return ReturnsPanel(panel.dates(), panel.asset_ids(), std::move(r));
}

CovarianceMatrix sample_covariance(const ReturnsPanel& panel, std::size_t start,
                                   std::size_t length, Divisor divisor) {
  if (length < 2) throw InvalidArgument("covariance window needs at least 2 periods");
  if (start + length > panel.periods()) throw InvalidArgument("covariance window out of bounds");
  if (panel.has_missing(start, length))
    throw DataError("covariance window contains missing values");

  const auto window = panel.returns().middleRows(static_cast<Eigen::Index>(start),
                                                 static_cast<Eigen::Index>(length));
  const Eigen::Index p = window.cols();
  const double n = static_cast<double>(length);
  // Plain sequential sums throughout so results do not depend on vectorization.
  Vector mean(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < window.rows(); ++t) acc += window(t, i);
    mean(i) = acc / n;
  }
  Matrix centered(window.rows(), p);
  for (Eigen::Index t = 0; t < window.rows(); ++t)
    for (Eigen::Index i = 0; i < p; ++i) centered(t, i) = window(t, i) - mean(i);
  const double d = divisor == Divisor::Unbiased ? n - 1.0 : n;

  // Upper triangle only; the constructor mirrors it so storage is exactly symmetric.
  Matrix sigma(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t < centered.rows(); ++t) acc += centered(t, i) * centered(t, j);
      sigma(i, j) = acc / d;
    }
  }
  return CovarianceMatrix::trusted(std::move(sigma), panel.asset_ids());
}

SampleMoments sample_moments(std::span<const double> values, Divisor divisor) {
  if (values.size() < 2) throw InvalidArgument("sample moments need at least two values");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double d = divisor == Divisor::Unbiased ? n - 1.0 : n;
  return {mean, ss / d};
}

}  // namespace smvp
