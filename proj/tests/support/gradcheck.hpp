#pragma once

// Central-difference gradient oracle. Test-only; it never touches the
// backward rules it is checking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "avsd/rng.hpp"
#include "avsd/tensor.hpp"

namespace avsd::testing {

using TensorD = nc::Tensor<double>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// `loss` must rebuild the graph from the current leaf values each call.
// When `sample` is nonzero only that many randomly chosen coordinates (across
// all leaves) are checked.
inline GradCheckResult grad_check(const std::function<TensorD()>& loss, std::vector<TensorD> leaves,
                                  double h = 1e-5, std::size_t sample = 0, std::uint64_t seed = 1) {
  for (auto& l : leaves) l.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) analytic.emplace_back(l.grad().begin(), l.grad().end());

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    for (std::size_t i = 0; i < leaves[li].size(); ++i) coords.emplace_back(li, i);
  }
  if (sample && sample < coords.size()) {
    Rng rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> picked;
    for (std::size_t k = 0; k < sample; ++k) picked.push_back(coords[rng.below(coords.size())]);
    coords = std::move(picked);
  }

  GradCheckResult res;
  for (auto [li, i] : coords) {
    auto data = leaves[li].mutable_data();
    const double orig = data[i];
    data[i] = orig + h;
    const double up = loss().item();
    data[i] = orig - h;
    const double down = loss().item();
    data[i] = orig;
    const double numeric = (up - down) / (2 * h);
    res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic[li][i], numeric));
    ++res.checked;
  }
  return res;
}

inline TensorD random_tensor(nc::Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0,
                             bool requires_grad = true) {
  std::vector<double> v(nc::numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TensorD(std::move(shape), std::move(v), requires_grad);
}

}  // namespace avsd::testing
