#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <unordered_set>

#include "attnlab/errors.hpp"

namespace attnlab {

/// Central finite differences against a reverse-mode gradient, over up to
/// max_coords sampled coordinates of `params`. `f` must read the current
/// contents of `params` (which are perturbed in place and restored). Returns
/// the largest per-coordinate error, where the error is relative for
/// gradients of typical size and absolute-with-floor below the 1e-3 scale
/// floor so finite-difference noise on near-zero gradients cannot dominate.
inline double grad_check(const std::function<double()>& f, std::span<double> params,
                         std::span<const double> analytic, double h, int max_coords,
                         uint64_t seed) {
  if (!(h >= 1e-6 && h <= 1e-4)) {
    throw std::invalid_argument("grad_check: h must lie in [1e-6, 1e-4]");
  }
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("grad_check: gradient length mismatch");
  }
  const size_t n = params.size();
  std::vector<size_t> coords;
  if (max_coords <= 0 || static_cast<size_t>(max_coords) >= n) {
    coords.resize(n);
    for (size_t i = 0; i < n; ++i) coords[i] = i;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    std::unordered_set<size_t> seen;
    while (coords.size() < static_cast<size_t>(max_coords)) {
      size_t i = pick(rng);
      if (seen.insert(i).second) coords.push_back(i);
    }
  }
  double max_err = 0.0;
  for (size_t i : coords) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f();
    params[i] = saved - h;
    const double down = f();
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw numerical_error("grad_check: non-finite loss during finite differences");
    }
    const double fd = (up - down) / (2.0 * h);
    const double an = analytic[i];
    const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace attnlab
