#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace sskernel {

/// First-order stable spline (TC) kernel: the n x n covariance
///   K(i, j) = lambda * alpha^max(i, j),   i, j = 1..n,
/// with decay alpha in (0, 1) and scale lambda > 0. K is symmetric positive
/// definite for every valid parameter choice and is kept implicit; dense
/// materialization exists for inspection and small-scale checks.
template <typename Scalar = double>
struct StableSplineKernel {
  Eigen::Index n;
  Scalar alpha;
  Scalar lambda;

  StableSplineKernel(Eigen::Index order, Scalar alpha_in, Scalar lambda_in = Scalar(1))
      : n(order), alpha(alpha_in), lambda(lambda_in) {
    if (n < 1) throw std::invalid_argument("StableSplineKernel: n must be a positive integer");
    if (!(alpha > Scalar(0) && alpha < Scalar(1)))
      throw std::invalid_argument("StableSplineKernel: alpha must lie in the open interval (0, 1)");
    if (!(lambda > Scalar(0)))
      throw std::invalid_argument("StableSplineKernel: lambda must be positive");
  }
};

namespace detail {

// alpha^1 .. alpha^n, one std::pow per exponent so every module sees the
// same entry values for the same (alpha, n).
template <typename Scalar>
Eigen::VectorX<Scalar> power_table(Scalar alpha, Eigen::Index n) {
  Eigen::VectorX<Scalar> p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = std::pow(alpha, Scalar(i + 1));
  return p;
}

}  // namespace detail

template <typename Scalar>
Eigen::MatrixX<Scalar> build_kernel(const StableSplineKernel<Scalar>& k) {
  const Eigen::VectorX<Scalar> pow = detail::power_table(k.alpha, k.n);
  Eigen::MatrixX<Scalar> m(k.n, k.n);
  for (Eigen::Index j = 0; j < k.n; ++j)
    for (Eigen::Index i = 0; i < k.n; ++i) m(i, j) = k.lambda * pow[std::max(i, j)];
  return m;
}

template <typename Scalar>
Eigen::MatrixX<Scalar> build_kernel(Eigen::Index n, Scalar alpha, Scalar lambda = Scalar(1)) {
  return build_kernel(StableSplineKernel<Scalar>(n, alpha, lambda));
}

/// Factorization K = U W U^T where U is unit upper triangular with ones on
/// and above the diagonal and W = diag(w) is positive:
///   w_j = lambda (alpha - alpha^2) alpha^{j-1}   for j = 1..n-1,
///   w_n = lambda alpha^n.
/// U is the same for every (alpha, lambda), so the factor carries only w.
template <typename Scalar = double>
struct TriFactor {
  Eigen::Index n;
  Eigen::VectorX<Scalar> w;

  /// (U W U^T)(i, j) = sum of w_k over k >= max(i, j).
  Eigen::MatrixX<Scalar> reconstruct() const {
    Eigen::VectorX<Scalar> tail(n);
    Scalar acc = Scalar(0);
    for (Eigen::Index k = n - 1; k >= 0; --k) {
      acc += w[k];
      tail[k] = acc;
    }
    Eigen::MatrixX<Scalar> m(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) m(i, j) = tail[std::max(i, j)];
    return m;
  }
};

template <typename Scalar>
TriFactor<Scalar> factorize(const StableSplineKernel<Scalar>& k) {
  const Eigen::VectorX<Scalar> pow = detail::power_table(k.alpha, k.n);
  const Scalar gap = k.alpha - k.alpha * k.alpha;
  Eigen::VectorX<Scalar> w(k.n);
  for (Eigen::Index j = 0; j + 1 < k.n; ++j)
    w[j] = k.lambda * gap * (j == 0 ? Scalar(1) : pow[j - 1]);
  w[k.n - 1] = k.lambda * pow[k.n - 1];
  return {k.n, std::move(w)};
}

/// The shared factor U (ones on and above the diagonal), materialized.
template <typename Scalar = double>
Eigen::MatrixX<Scalar> allones_upper(Eigen::Index n) {
  Eigen::MatrixX<Scalar> u = Eigen::MatrixX<Scalar>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i <= j; ++i) u(i, j) = Scalar(1);
  return u;
}

/// g * U: column j of the product is the sum of the first j+1 columns of g.
template <typename Derived>
Eigen::MatrixX<typename Derived::Scalar> times_allones_upper(const Eigen::MatrixBase<Derived>& g) {
  Eigen::MatrixX<typename Derived::Scalar> out = g;
  for (Eigen::Index j = 1; j < out.cols(); ++j) out.col(j) += out.col(j - 1);
  return out;
}

/// U * a: suffix sums of a.
template <typename Derived>
Eigen::VectorX<typename Derived::Scalar> allones_upper_times(const Eigen::MatrixBase<Derived>& a) {
  Eigen::VectorX<typename Derived::Scalar> out = a;
  for (Eigen::Index i = out.size() - 2; i >= 0; --i) out[i] += out[i + 1];
  return out;
}

/// K^{-1} in its exact symmetric tridiagonal form. With v = w^{-1} from the
/// U W U^T factor: diag_j = v_{j-1} + v_j (empty terms dropped) and
/// offdiag_j = -v_j, so the diagonal is positive and the off-diagonal
/// strictly negative.
template <typename Scalar = double>
struct TridiagInverse {
  Eigen::Index n;
  Eigen::VectorX<Scalar> diag;     // length n
  Eigen::VectorX<Scalar> offdiag;  // length n-1

  Eigen::MatrixX<Scalar> dense() const {
    Eigen::MatrixX<Scalar> m = Eigen::MatrixX<Scalar>::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diag[i];
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      m(i, i + 1) = offdiag[i];
      m(i + 1, i) = offdiag[i];
    }
    return m;
  }

  /// K^{-1} x as a tridiagonal mat-vec, O(n).
  template <typename Derived>
  Eigen::VectorX<Scalar> apply(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != n) throw std::invalid_argument("TridiagInverse::apply: length mismatch");
    Eigen::VectorX<Scalar> out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar s = diag[i] * x[i];
      if (i > 0) s += offdiag[i - 1] * x[i - 1];
      if (i + 1 < n) s += offdiag[i] * x[i + 1];
      out[i] = s;
    }
    return out;
  }
};

template <typename Scalar>
TridiagInverse<Scalar> inverse_closed_form(const StableSplineKernel<Scalar>& k) {
  // Largest inverse entries grow like alpha^{-(n-1)} / lambda; refuse
  // configurations whose inverse cannot be represented.
  const Scalar log_max = std::log(std::numeric_limits<Scalar>::max());
  if (Scalar(k.n - 1) * -std::log(k.alpha) - std::log(k.lambda) > log_max)
    throw std::overflow_error("inverse_closed_form: alpha^-(n-1)/lambda exceeds the floating-point range");

  const Eigen::VectorX<Scalar> v = factorize(k).w.cwiseInverse();
  Eigen::VectorX<Scalar> diag(k.n);
  Eigen::VectorX<Scalar> offdiag(k.n - 1);
  diag[0] = v[0];
  for (Eigen::Index i = 1; i < k.n; ++i) diag[i] = v[i - 1] + v[i];
  for (Eigen::Index i = 0; i + 1 < k.n; ++i) offdiag[i] = -v[i];
  if (!diag.allFinite())
    throw std::overflow_error("inverse_closed_form: inverse entries exceed the floating-point range");
  return {k.n, std::move(diag), std::move(offdiag)};
}

/// log det K = n log lambda + (n-1) log(1-alpha) + n(n+1)/2 log alpha,
/// evaluated in the log domain only (the raw determinant underflows for
/// modest n).
template <typename Scalar>
Scalar log_det(const StableSplineKernel<Scalar>& k) {
  return Scalar(k.n) * std::log(k.lambda) + Scalar(k.n - 1) * std::log1p(-k.alpha) +
         Scalar(k.n * (k.n + 1) / 2) * std::log(k.alpha);
}

/// K^{-1} rhs in O(n) through the tridiagonal closed form.
template <typename Scalar, typename Derived>
Eigen::VectorX<Scalar> solve_inverse(const StableSplineKernel<Scalar>& k,
                                     const Eigen::MatrixBase<Derived>& rhs) {
  if (rhs.size() != k.n)
    throw std::invalid_argument("solve_inverse: rhs length must equal the kernel order");
  return inverse_closed_form(k).apply(rhs);
}

/// Each of the first n-1 columns of K^{-1} sums to zero: |sum| must stay
/// within 1e-9 of the column's largest magnitude.
template <typename Scalar>
bool columns_sum_check(const StableSplineKernel<Scalar>& k) {
  if (k.n == 1) return true;  // no columns checked
  const TridiagInverse<Scalar> inv = inverse_closed_form(k);
  for (Eigen::Index j = 0; j + 1 < k.n; ++j) {
    Scalar sum = inv.diag[j] + inv.offdiag[j];
    Scalar scale = std::max(std::abs(inv.diag[j]), std::abs(inv.offdiag[j]));
    if (j > 0) {
      sum += inv.offdiag[j - 1];
      scale = std::max(scale, std::abs(inv.offdiag[j - 1]));
    }
    if (std::abs(sum) > Scalar(1e-9) * scale) return false;
  }
  return true;
}

}  // namespace sskernel
