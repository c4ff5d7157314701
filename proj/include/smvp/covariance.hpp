#pragma once

// Sample covariance over rolling windows and the row-mean missing-data rule.

#include <span>

#include "smvp/model.hpp"

namespace smvp {

/// Denominator convention for sample moments.
enum class Divisor {
  Unbiased,    ///< n - 1
  Population,  ///< n
};

/// Replaces every missing cell (t, i) with the mean of the non-missing
/// returns in row t. Throws DataError if a row is entirely missing.
ReturnsPanel impute_missing(const ReturnsPanel& panel);

/// Sample covariance of rows [start, start + length). Entry (i, j) is
/// sum_t (r_it - mean_i)(r_jt - mean_j) / d with d = length - 1 (Unbiased)
/// or length (Population). Requires length >= 2 and no missing cells.
CovarianceMatrix sample_covariance(const ReturnsPanel& panel, std::size_t start,
                                   std::size_t length, Divisor divisor = Divisor::Unbiased);

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of a series, two-pass, same divisor convention as
/// sample_covariance. Needs at least two values.
SampleMoments sample_moments(std::span<const double> values, Divisor divisor = Divisor::Unbiased);

}  // namespace smvp
