#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace seld::nn {

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// derivative is ~0 from dominating through round-off.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Central differences of `loss` along each index in `indices`. `value(i)`
/// must return a mutable reference to coordinate i and `analytic(i)` the
/// gradient computed beforehand at the unperturbed point.
template <typename T>
GradCheckResult check_gradient(const std::function<double()>& loss, const std::function<T&(std::size_t)>& value,
                               const std::function<double(std::size_t)>& analytic,
                               const std::vector<std::size_t>& indices, double eps = 1e-6, double floor = 1e-7) {
  GradCheckResult r;
  for (std::size_t i : indices) {
    T& x = value(i);
    const T saved = x;
    x = static_cast<T>(saved + eps);
    const double up = loss();
    x = static_cast<T>(saved - eps);
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic(i);
    const double e = relative_error(a, numeric, floor);
    if (e > r.max_rel_error || r.checked == 0) {
      r.max_rel_error = e;
      r.worst_index = i;
      r.worst_analytic = a;
      r.worst_numeric = numeric;
    }
    ++r.checked;
  }
  return r;
}

}  // namespace seld::nn
