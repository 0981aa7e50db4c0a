#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace qwdn {

struct SimplexOptions {
  std::size_t max_evals = 2000;
  double target = -std::numeric_limits<double>::infinity();  // stop once f <= target
  double initial_step = 0.5;
  double collapse_tol = 1e-14;  // simplex is rebuilt around the best vertex when f spread falls below this
};

struct SimplexResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
};

// Derivative-free Nelder-Mead minimization. When the simplex collapses before
// the budget is spent, a fresh simplex is built around the best vertex.
template <typename F>
SimplexResult nelder_mead(F&& f, const Eigen::VectorXd& x0, const SimplexOptions& opts) {
  const Eigen::Index n = x0.size();
  SimplexResult best{x0, std::numeric_limits<double>::infinity(), 0};

  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    ++best.evals;
    if (v < best.f) {
      best.f = v;
      best.x = x;
    }
    return v;
  };

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1));
  std::vector<double> values(static_cast<std::size_t>(n + 1));
  std::vector<std::size_t> order(static_cast<std::size_t>(n + 1));
  double step = opts.initial_step;

  auto build = [&](const Eigen::VectorXd& center) {
    simplex[0] = center;
    values[0] = eval(center);
    for (Eigen::Index i = 0; i < n; ++i) {
      simplex[static_cast<std::size_t>(i + 1)] = center;
      simplex[static_cast<std::size_t>(i + 1)][i] += step;
      values[static_cast<std::size_t>(i + 1)] = eval(simplex[static_cast<std::size_t>(i + 1)]);
    }
  };

  build(x0);
  while (best.evals < opts.max_evals && best.f > opts.target) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t lo = order.front();
    const std::size_t hi = order.back();
    const std::size_t second = order[order.size() - 2];

    if (values[hi] - values[lo] <= opts.collapse_tol * (1.0 + std::abs(values[lo]))) {
      step = std::max(step * 0.5, 1e-3);
      build(best.x);
      continue;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i)
      if (i != hi) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[hi]);
    const double fr = eval(reflected);
    if (fr < values[lo]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[hi]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[hi] = expanded;
        values[hi] = fe;
      } else {
        simplex[hi] = reflected;
        values[hi] = fr;
      }
    } else if (fr < values[second]) {
      simplex[hi] = reflected;
      values[hi] = fr;
    } else {
      const bool outside = fr < values[hi];
      const Eigen::VectorXd contracted =
          outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid)) : Eigen::VectorXd(centroid + 0.5 * (simplex[hi] - centroid));
      const double fc = eval(contracted);
      if (fc < (outside ? fr : values[hi])) {
        simplex[hi] = contracted;
        values[hi] = fc;
      } else {
        for (std::size_t i = 0; i < simplex.size(); ++i) {
          if (i == lo) continue;
          simplex[i] = simplex[lo] + 0.5 * (simplex[i] - simplex[lo]);
          values[i] = eval(simplex[i]);
        }
      }
    }
  }
  return best;
}

}  // namespace qwdn
