#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace sskernel {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Downhill simplex minimization with a hard evaluation budget. The best
/// point ever evaluated is returned, so the result never regresses below the
/// starting point. Out-of-domain objectives may signal +inf.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& start, double step, int max_evaluations,
                                    double ftol = 1e-10) {
  const Eigen::Index dim = start.size();
  NelderMeadResult best;
  best.x = start;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    ++evals;
    if (v < best.value) {
      best.value = v;
      best.x = x;
    }
    return v;
  };

  std::vector<Eigen::VectorXd> xs(dim + 1, start);
  std::vector<double> fs(dim + 1);
  for (Eigen::Index i = 0; i < dim; ++i) xs[i + 1][i] += step;
  for (Eigen::Index i = 0; i <= dim && evals < max_evaluations; ++i) fs[i] = eval(xs[i]);

  std::vector<int> idx(dim + 1);
  std::iota(idx.begin(), idx.end(), 0);

  while (evals < max_evaluations) {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    const int lo = idx[0], hi = idx[dim], next_hi = idx[std::max<Eigen::Index>(dim - 1, 0)];
    if (std::isfinite(fs[hi]) && fs[hi] - fs[lo] < ftol) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index i = 0; i <= dim; ++i)
      if (idx[i] != hi) centroid += xs[idx[i]];
    centroid /= double(dim);

    const Eigen::VectorXd reflected = centroid + (centroid - xs[hi]);
    const double fr = eval(reflected);
    if (fr < fs[lo]) {
      if (evals >= max_evaluations) break;
      const Eigen::VectorXd expanded = centroid + 2.0 * (reflected - centroid);
      const double fe = eval(expanded);
      if (fe < fr) {
        xs[hi] = expanded;
        fs[hi] = fe;
      } else {
        xs[hi] = reflected;
        fs[hi] = fr;
      }
      continue;
    }
    if (fr < fs[next_hi]) {
      xs[hi] = reflected;
      fs[hi] = fr;
      continue;
    }
    if (evals >= max_evaluations) break;
    const Eigen::VectorXd contracted =
        fr < fs[hi] ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                    : Eigen::VectorXd(centroid + 0.5 * (xs[hi] - centroid));
    const double fc = eval(contracted);
    if (fc < std::min(fr, fs[hi])) {
      xs[hi] = contracted;
      fs[hi] = fc;
      continue;
    }
    // shrink toward the best vertex
    for (Eigen::Index i = 0; i <= dim && evals < max_evaluations; ++i) {
      if (idx[i] == lo) continue;
      xs[idx[i]] = xs[lo] + 0.5 * (xs[idx[i]] - xs[lo]);
      fs[idx[i]] = eval(xs[idx[i]]);
    }
  }
  best.evaluations = evals;
  return best;
}

}  // namespace sskernel
