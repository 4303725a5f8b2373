#pragma once

#include "sskernel/stable_spline.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sskernel {

/// Raised when a partially specified band matrix admits no positive definite
/// completion. block_index is the 0-based index of the first failing
/// (m+1) x (m+1) contiguous band block.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(Eigen::Index block_index)
      : std::runtime_error("block " + std::to_string(block_index + 1) + " not positive definite"),
        block_index_(block_index) {}

  Eigen::Index block_index() const { return block_index_; }

 private:
  Eigen::Index block_index_;
};

/// Symmetric n x n matrix specified only on the band |i - j| <= m, stored as
/// m+1 diagonals so symmetry holds by construction. Indices are 0-based.
template <typename Scalar = double>
class PartialBandMatrix {
 public:
  PartialBandMatrix(Eigen::Index n, Eigen::Index m) : n_(n), m_(m) {
    if (n < 1) throw std::invalid_argument("PartialBandMatrix: n must be positive");
    if (m < 0 || m >= n)
      throw std::invalid_argument("PartialBandMatrix: bandwidth must satisfy 0 <= m < n");
    diagonals_.reserve(static_cast<std::size_t>(m) + 1);
    for (Eigen::Index d = 0; d <= m; ++d) diagonals_.push_back(Eigen::VectorX<Scalar>::Zero(n - d));
  }

  /// Band restriction of a dense matrix (symmetrized).
  template <typename Derived>
  static PartialBandMatrix band_of(const Eigen::MatrixBase<Derived>& a, Eigen::Index m) {
    if (a.rows() != a.cols())
      throw std::invalid_argument("PartialBandMatrix::band_of: matrix must be square");
    PartialBandMatrix p(a.rows(), m);
    for (Eigen::Index d = 0; d <= m; ++d)
      for (Eigen::Index i = 0; i + d < a.rows(); ++i)
        p.diagonals_[d][i] = (a(i, i + d) + a(i + d, i)) / Scalar(2);
    return p;
  }

  Eigen::Index order() const { return n_; }
  Eigen::Index bandwidth() const { return m_; }

  bool in_band(Eigen::Index i, Eigen::Index j) const {
    return i >= 0 && j >= 0 && i < n_ && j < n_ && std::abs(i - j) <= m_;
  }

  Scalar operator()(Eigen::Index i, Eigen::Index j) const {
    if (!in_band(i, j)) throw std::out_of_range("PartialBandMatrix: entry outside the specified band");
    return diagonals_[std::abs(i - j)][std::min(i, j)];
  }

  void set(Eigen::Index i, Eigen::Index j, Scalar value) {
    if (!in_band(i, j)) throw std::out_of_range("PartialBandMatrix: entry outside the specified band");
    diagonals_[std::abs(i - j)][std::min(i, j)] = value;
  }

  const std::vector<Eigen::VectorX<Scalar>>& diagonals() const { return diagonals_; }

  /// Dense contiguous principal submatrix {lo..hi} (inclusive); requires
  /// hi - lo <= m so every entry is specified.
  Eigen::MatrixX<Scalar> dense_block(Eigen::Index lo, Eigen::Index hi) const {
    if (lo < 0 || hi >= n_ || hi < lo || hi - lo > m_)
      throw std::out_of_range("PartialBandMatrix: block not fully inside the band");
    const Eigen::Index sz = hi - lo + 1;
    Eigen::MatrixX<Scalar> b(sz, sz);
    for (Eigen::Index j = 0; j < sz; ++j)
      for (Eigen::Index i = 0; i < sz; ++i) b(i, j) = (*this)(lo + i, lo + j);
    return b;
  }

  /// Dense matrix with every unspecified entry set to zero.
  Eigen::MatrixX<Scalar> zero_filled() const {
    Eigen::MatrixX<Scalar> a = Eigen::MatrixX<Scalar>::Zero(n_, n_);
    for (Eigen::Index d = 0; d <= m_; ++d)
      for (Eigen::Index i = 0; i + d < n_; ++i) {
        a(i, i + d) = diagonals_[d][i];
        a(i + d, i) = diagonals_[d][i];
      }
    return a;
  }

 private:
  Eigen::Index n_;
  Eigen::Index m_;
  std::vector<Eigen::VectorX<Scalar>> diagonals_;
};

namespace detail {

// Cholesky with a scale-relative pivot floor: succeeds iff every pivot stays
// above rel_tol * max diagonal of the block.
template <typename Scalar>
bool cholesky_pd(Eigen::MatrixX<Scalar> a, Scalar rel_tol) {
  const Eigen::Index n = a.rows();
  const Scalar floor = rel_tol * a.diagonal().maxCoeff();
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > floor)) return false;
    a(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      Scalar s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / a(j, j);
    }
  }
  return true;
}

template <typename Scalar>
bool is_pd(const Eigen::MatrixX<Scalar>& a) {
  return Eigen::LLT<Eigen::MatrixX<Scalar>>(a).info() == Eigen::Success;
}

// log det of a symmetric matrix via Cholesky; -inf when not positive definite.
template <typename Scalar>
Scalar log_det_pd(const Eigen::MatrixX<Scalar>& a) {
  Eigen::LLT<Eigen::MatrixX<Scalar>> llt(a);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<Scalar>::infinity();
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

// Golden-section maximization of a concave function on [lo, hi].
template <typename Scalar, typename F>
Scalar golden_max(F f, Scalar lo, Scalar hi, Scalar xtol) {
  const Scalar ratio = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar a = lo, b = hi;
  Scalar x1 = b - ratio * (b - a);
  Scalar x2 = a + ratio * (b - a);
  Scalar f1 = f(x1), f2 = f(x2);
  while (b - a > xtol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = f(x1);
    }
  }
  return (a + b) / Scalar(2);
}

// Boundary of {x : pred(x)} between a point satisfying pred and one that
// does not; returns the last satisfying point.
template <typename Scalar, typename P>
Scalar bisect_boundary(P pred, Scalar good, Scalar bad, int iters) {
  for (int it = 0; it < iters; ++it) {
    const Scalar mid = (good + bad) / Scalar(2);
    (pred(mid) ? good : bad) = mid;
  }
  return good;
}

}  // namespace detail

/// 0-based index of the first contiguous (m+1) x (m+1) band block that is not
/// positive definite; -1 when all blocks pass (the matrix then admits a
/// positive definite completion).
template <typename Scalar>
Eigen::Index first_infeasible_block(const PartialBandMatrix<Scalar>& p) {
  const Eigen::Index n = p.order(), m = p.bandwidth();
  for (Eigen::Index i = 0; i + m < n; ++i)
    if (!detail::cholesky_pd(p.dense_block(i, i + m), Scalar(1e-12))) return i;
  return -1;
}

template <typename Scalar>
bool feasible(const PartialBandMatrix<Scalar>& p) {
  return first_infeasible_block(p) < 0;
}

namespace detail {

template <typename Scalar>
void throw_if_infeasible(const PartialBandMatrix<Scalar>& p) {
  const Eigen::Index bad = first_infeasible_block(p);
  if (bad >= 0) throw InfeasibleError(bad);
}

}  // namespace detail

/// Value of the single free corner pair (1, n) of an (n-2)-band matrix that
/// maximizes the completion's log-determinant:
///   x = -(1/y_1) sum_{j=2..n-1} sigma_{n,j} y_j,     y = L^{-1} e_1,
/// with L the leading (n-1) x (n-1) specified block (solved by dense
/// Cholesky; this routine stays generic and never uses kernel closed forms).
template <typename Scalar>
Scalar one_step_extension(const PartialBandMatrix<Scalar>& p) {
  const Eigen::Index n = p.order();
  if (p.bandwidth() != n - 2)
    throw std::invalid_argument("one_step_extension: bandwidth must equal n - 2");
  detail::throw_if_infeasible(p);

  Eigen::LLT<Eigen::MatrixX<Scalar>> llt(p.dense_block(0, n - 2));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("one_step_extension: Cholesky of the leading block failed");
  const Eigen::VectorX<Scalar> y = llt.solve(Eigen::VectorX<Scalar>::Unit(n - 1, 0));
  Scalar acc = Scalar(0);
  for (Eigen::Index j = 1; j <= n - 2; ++j) acc += p(n - 1, j) * y[j];
  return -acc / y[0];
}

/// Unique positive definite completion maximizing log det (the central
/// extension); its inverse is banded with the input bandwidth. Unspecified
/// diagonals are filled outward (offset m+1, then m+2, ...), each corner by
/// the one-step rule applied to the contiguous submatrix it completes. The
/// fill order does not matter because the central extension is unique.
template <typename Scalar>
Eigen::MatrixX<Scalar> central_extension(const PartialBandMatrix<Scalar>& p) {
  detail::throw_if_infeasible(p);
  const Eigen::Index n = p.order(), m = p.bandwidth();
  Eigen::MatrixX<Scalar> c = p.zero_filled();
  for (Eigen::Index d = m + 1; d < n; ++d) {
    for (Eigen::Index s = 0; s + d < n; ++s) {
      const Eigen::Index t = s + d;
      Eigen::LLT<Eigen::MatrixX<Scalar>> llt(c.block(s, s, d, d));
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("central_extension: Cholesky failed during the recursion");
      const Eigen::VectorX<Scalar> y = llt.solve(Eigen::VectorX<Scalar>::Unit(d, 0));
      Scalar acc = Scalar(0);
      for (Eigen::Index j = 1; j < d; ++j) acc += c(t, s + j) * y[j];
      const Scalar x = -acc / y[0];
      c(s, t) = x;
      c(t, s) = x;
    }
  }
  return c;
}

/// Banded factorization of the central extension's inverse:
///   C^{-1} = L V L^T
/// with L unit lower triangular of bandwidth m and V positive diagonal, both
/// computed directly from the band data (no completion required).
template <typename Scalar = double>
struct BandFactorization {
  Eigen::Index n;
  Eigen::Index m;
  Eigen::MatrixX<Scalar> lower;  // unit diagonal, zero below the m-th subdiagonal
  Eigen::VectorX<Scalar> v;      // diagonal of V

  /// L V L^T, the inverse of the central extension.
  Eigen::MatrixX<Scalar> precision() const {
    return lower * v.asDiagonal() * lower.transpose();
  }
};

template <typename Scalar>
BandFactorization<Scalar> factored_extension(const PartialBandMatrix<Scalar>& p) {
  detail::throw_if_infeasible(p);
  const Eigen::Index n = p.order(), m = p.bandwidth();
  Eigen::MatrixX<Scalar> lower = Eigen::MatrixX<Scalar>::Identity(n, n);
  Eigen::VectorX<Scalar> v(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index hi = std::min(j + m, n - 1);
    if (hi >= j + 1) {
      // column j of L below the diagonal: -(band block {j+1..hi})^{-1} sigma(.,j)
      Eigen::LLT<Eigen::MatrixX<Scalar>> llt(p.dense_block(j + 1, hi));
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("factored_extension: Cholesky of a band block failed");
      Eigen::VectorX<Scalar> rhs(hi - j);
      for (Eigen::Index i = j + 1; i <= hi; ++i) rhs[i - j - 1] = p(i, j);
      lower.block(j + 1, j, hi - j, 1) = -llt.solve(rhs);
    }
    // v_j: leading entry of the inverse of the trailing band block {j..hi}
    Eigen::LLT<Eigen::MatrixX<Scalar>> llt(p.dense_block(j, hi));
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("factored_extension: Cholesky of a band block failed");
    v[j] = llt.solve(Eigen::VectorX<Scalar>::Unit(hi - j + 1, 0))[0];
  }
  return {n, m, std::move(lower), std::move(v)};
}

/// Differential entropy of a zero-mean Gaussian with covariance s:
///   H = 1/2 log det s + n/2 (1 + log 2 pi).
template <typename Derived>
typename Derived::Scalar gaussian_entropy(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  if (s.rows() != s.cols()) throw std::invalid_argument("gaussian_entropy: matrix must be square");
  Eigen::LLT<Eigen::MatrixX<Scalar>> llt(s);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gaussian_entropy: covariance must be positive definite");
  const Scalar half_logdet = llt.matrixLLT().diagonal().array().log().sum();
  return half_logdet +
         Scalar(s.rows()) / Scalar(2) * (Scalar(1) + std::log(Scalar(2) * std::numbers::pi_v<Scalar>));
}

/// log det s + trace(sbar s^{-1}).
template <typename DerivedS, typename DerivedB>
typename DerivedS::Scalar maxlik_objective(const Eigen::MatrixBase<DerivedS>& s,
                                           const Eigen::MatrixBase<DerivedB>& sbar) {
  using Scalar = typename DerivedS::Scalar;
  if (s.rows() != s.cols() || sbar.rows() != sbar.cols() || s.rows() != sbar.rows())
    throw std::invalid_argument("maxlik_objective: matrices must be square and the same size");
  Eigen::LLT<Eigen::MatrixX<Scalar>> llt(s);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("maxlik_objective: s must be positive definite");
  const Scalar logdet = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
  return logdet + llt.solve(sbar).trace();
}

/// Brute-force maximum entropy completion for verification: cyclic coordinate
/// ascent on log det over the free entries, each step a golden-section search
/// on that entry's feasible interval (located by bisecting the positive
/// definite predicate). Starts from a feasible completion built by maximizing
/// the smallest eigenvalue of each submatrix corner in turn, so the routine is
/// independent of the one-step recursion it cross-checks. Desk scale only
/// (n <= 12).
template <typename Scalar>
Eigen::MatrixX<Scalar> oracle_max_entropy(const PartialBandMatrix<Scalar>& p) {
  if (p.order() > 12) throw std::invalid_argument("oracle_max_entropy: supported only for n <= 12");
  detail::throw_if_infeasible(p);
  const Eigen::Index n = p.order(), m = p.bandwidth();

  std::vector<std::pair<Eigen::Index, Eigen::Index>> free_pairs;
  for (Eigen::Index d = m + 1; d < n; ++d)
    for (Eigen::Index s = 0; s + d < n; ++s) free_pairs.emplace_back(s, s + d);

  Eigen::MatrixX<Scalar> c = p.zero_filled();
  if (free_pairs.empty()) return c;

  // Feasible start: fill each corner at the maximizer of the smallest
  // eigenvalue of the submatrix it completes. |x| < sqrt(c_ss c_tt) bounds
  // the search for any positive definite completion.
  for (const auto& [s, t] : free_pairs) {
    const Eigen::Index d = t - s;
    const Scalar bound = std::sqrt(c(s, s) * c(t, t));
    const Scalar x = detail::golden_max(
        [&](Scalar value) {
          Eigen::MatrixX<Scalar> sub = c.block(s, s, d + 1, d + 1);
          sub(0, d) = value;
          sub(d, 0) = value;
          return Eigen::SelfAdjointEigenSolver<Eigen::MatrixX<Scalar>>(sub, Eigen::EigenvaluesOnly)
              .eigenvalues()[0];
        },
        -bound, bound, Scalar(1e-10) * bound + std::numeric_limits<Scalar>::min());
    c(s, t) = x;
    c(t, s) = x;
  }

  const Scalar grad_tol = Scalar(1e-9);
  const int max_sweeps = 500;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (const auto& [s, t] : free_pairs) {
      auto pd_at = [&](Scalar value) {
        Eigen::MatrixX<Scalar> a = c;
        a(s, t) = value;
        a(t, s) = value;
        return detail::is_pd(a);
      };
      const Scalar bound = std::sqrt(c(s, s) * c(t, t)) + Scalar(1);
      const Scalar cur = c(s, t);
      const Scalar lo = detail::bisect_boundary(pd_at, cur, -bound, 50);
      const Scalar hi = detail::bisect_boundary(pd_at, cur, bound, 50);
      Scalar x = detail::golden_max(
          [&](Scalar value) {
            Eigen::MatrixX<Scalar> a = c;
            a(s, t) = value;
            a(t, s) = value;
            return detail::log_det_pd(a);
          },
          lo, hi, Scalar(1e-12) * (hi - lo) + std::numeric_limits<Scalar>::min());
      // A comparison-based line search resolves the maximizer only to about
      // sqrt(eps), short of the gradient stop below. Polish by bisecting the
      // sign of d/dx log det = 2 (C^{-1})_{st}, which decreases strictly in x
      // and is positive (negative) at the lower (upper) feasibility boundary.
      auto grad_at = [&](Scalar value) {
        Eigen::MatrixX<Scalar> a = c;
        a(s, t) = value;
        a(t, s) = value;
        Eigen::LLT<Eigen::MatrixX<Scalar>> llt(a);
        if (llt.info() != Eigen::Success)  // boundary: slope points inward
          return value < x ? std::numeric_limits<Scalar>::max()
                           : std::numeric_limits<Scalar>::lowest();
        return llt.solve(Eigen::VectorX<Scalar>::Unit(n, t))[s];
      };
      if (grad_at(lo) > Scalar(0) && grad_at(hi) < Scalar(0)) {
        Scalar gl = lo, gh = hi;
        for (int it = 0; it < 70; ++it) {
          const Scalar mid = (gl + gh) / Scalar(2);
          (grad_at(mid) > Scalar(0) ? gl : gh) = mid;
        }
        x = (gl + gh) / Scalar(2);
      }
      c(s, t) = x;
      c(t, s) = x;
    }
    // Gradient of log det in the free entries is 2 (C^{-1})_{st}.
    Eigen::LLT<Eigen::MatrixX<Scalar>> llt(c);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("oracle_max_entropy: iterate lost positive definiteness");
    const Eigen::MatrixX<Scalar> cinv = llt.solve(Eigen::MatrixX<Scalar>::Identity(n, n));
    Scalar grad_sq = Scalar(0);
    for (const auto& [s, t] : free_pairs) {
      const Scalar g = Scalar(2) * cinv(s, t);
      grad_sq += g * g;
    }
    if (std::sqrt(grad_sq) < grad_tol) return c;
  }
  throw std::runtime_error("oracle_max_entropy: coordinate ascent did not converge");
}

/// 1-band moment data of the TC kernel: sigma_ij = lambda alpha^max(i,j) for
/// |i - j| <= 1 (the input whose central extension is the full kernel).
template <typename Scalar>
PartialBandMatrix<Scalar> tc_moment_band(Eigen::Index n, Scalar alpha, Scalar lambda = Scalar(1)) {
  StableSplineKernel<Scalar> k(n, alpha, lambda);  // validates the domain
  const Eigen::VectorX<Scalar> pow = detail::power_table(k.alpha, k.n);
  PartialBandMatrix<Scalar> p(n, std::min<Eigen::Index>(1, n - 1));
  for (Eigen::Index i = 0; i < n; ++i) p.set(i, i, lambda * pow[i]);
  if (n > 1)
    for (Eigen::Index i = 0; i + 1 < n; ++i) p.set(i, i + 1, lambda * pow[i + 1]);
  return p;
}

}  // namespace sskernel
