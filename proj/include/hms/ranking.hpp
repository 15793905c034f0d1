#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "hms/error.hpp"

namespace hms {

// Midranks: tied values share the average of the 1-based ranks they occupy.
inline std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Pearson correlation of two midrank vectors. The midrank mean is always
// (n+1)/2 and every intermediate sum here is an exact multiple of 1/4 well
// below 2^53, so the result is reproducible bit-for-bit regardless of
// summation order.
inline double rank_pearson(std::span<const double> rx, std::span<const double> ry) {
  if (rx.size() != ry.size())
    throw length_mismatch("rank vectors differ in length");
  const std::size_t n = rx.size();
  const double mean = 0.5 * static_cast<double>(n + 1);
  double num = 0.0, dxx = 0.0, dyy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    num += dx * dy;
    dxx += dx * dx;
    dyy += dy * dy;
  }
  if (dxx == 0.0 || dyy == 0.0)
    throw degenerate_series("all values tied; rank correlation undefined");
  return std::clamp(num / std::sqrt(dxx * dyy), -1.0, 1.0);
}

// Spearman rho on raw series (midranks, then Pearson on the ranks).
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw length_mismatch("series differ in length");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  return rank_pearson(rx, ry);
}

}  // namespace hms
