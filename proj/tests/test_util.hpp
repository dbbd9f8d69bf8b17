#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ddi/tensor.hpp"

namespace ddi::testutil {

// Central finite differences of a scalar forward with respect to one leaf.
// `forward` must rebuild the whole computation (fresh tape) on every call.
inline std::vector<double> fd_gradient(DiffArray leaf,
                                       const std::function<double()>& forward,
                                       double step = 1e-5) {
  std::vector<double> g(leaf.size());
  for (std::size_t i = 0; i < leaf.size(); ++i) {
    const double saved = leaf.values()[i];
    leaf.values()[i] = saved + step;
    const double up = forward();
    leaf.values()[i] = saved - step;
    const double down = forward();
    leaf.values()[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// Relative error with an absolute floor so near-zero pairs compare sanely.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b,
                            double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, rel_error(a[i], b[i], floor));
  }
  return worst;
}

inline DiffArray random_array(Shape shape, Rng& rng, double half_width = 1.0,
                              bool requires_grad = true) {
  DiffArray a = DiffArray::zeros(std::move(shape), requires_grad);
  for (auto& v : a.values()) v = rng.uniform_pm(half_width);
  return a;
}

}  // namespace ddi::testutil
