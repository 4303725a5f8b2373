#pragma once

#include "sskernel/nelder_mead.hpp"
#include "sskernel/stable_spline.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>

namespace sskernel {

/// Hyperparameters of the impulse-response prior and the measurement noise.
struct Hyperparams {
  double alpha;
  double lambda;
  double sigma2;

  Hyperparams(double alpha_in, double lambda_in, double sigma2_in)
      : alpha(alpha_in), lambda(lambda_in), sigma2(sigma2_in) {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("Hyperparams: alpha must lie in the open interval (0, 1)");
    if (!(lambda > 0.0)) throw std::invalid_argument("Hyperparams: lambda must be positive");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("Hyperparams: sigma2 must be positive");
  }
};

/// Input/output records of one identification experiment. u and y both hold
/// samples 1..N; input samples at t <= 0 are taken to be zero.
struct SysIdDataset {
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  std::optional<std::uint64_t> seed;  // present when the dataset was simulated
};

struct ImpulseEstimate {
  Eigen::VectorXd f_hat;
  Hyperparams hyperparams;
  double objective;  // attained marginal-likelihood objective
};

/// G(t, k) = u_{t-k} for t = 1..N, k = 1..n, with u_s = 0 for s <= 0, so that
/// y = G f is the convolution of the input with n impulse-response lags.
inline Eigen::MatrixXd build_convolution_operator(const Eigen::VectorXd& u, Eigen::Index N,
                                                  Eigen::Index n) {
  if (N < 1 || n < 1)
    throw std::invalid_argument("build_convolution_operator: N and n must be positive");
  if (u.size() < N - 1)
    throw std::invalid_argument("build_convolution_operator: input sequence too short");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(N, n);
  for (Eigen::Index t = 0; t < N; ++t)
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index s = t - k - 1;  // 0-based index of u_{t-k}
      if (s >= 0) g(t, k) = u[s];
    }
  return g;
}

/// Sigma_y = G K G^T + sigma2 I, assembled through the U W U^T factor as
/// (G U) W (G U)^T + sigma2 I so the result is symmetric by construction.
inline Eigen::MatrixXd output_covariance(const Hyperparams& h, const Eigen::MatrixXd& g) {
  const StableSplineKernel<double> k(g.cols(), h.alpha, h.lambda);
  const TriFactor<double> factor = factorize(k);
  const Eigen::MatrixXd gu = times_allones_upper(g);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(g.rows(), g.rows());
  acc.selfadjointView<Eigen::Lower>().rankUpdate(gu * factor.w.cwiseSqrt().asDiagonal());
  Eigen::MatrixXd out = acc.selfadjointView<Eigen::Lower>();
  out.diagonal().array() += h.sigma2;
  return out;
}

/// Marginal-likelihood objective (to be minimized):
///   J = log det Sigma_y + y^T Sigma_y^{-1} y,
/// evaluated by dense Cholesky of Sigma_y.
inline double marginal_likelihood(const Hyperparams& h, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& g) {
  if (y.size() != g.rows())
    throw std::invalid_argument("marginal_likelihood: y and G disagree on the sample count");
  Eigen::LLT<Eigen::MatrixXd> llt(output_covariance(h, g));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("marginal_likelihood: Cholesky of Sigma_y failed");
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return logdet + y.dot(llt.solve(y));
}

inline double marginal_likelihood(const Hyperparams& h, const SysIdDataset& data, Eigen::Index n) {
  return marginal_likelihood(h, data.y, build_convolution_operator(data.u, data.y.size(), n));
}

/// The same objective through the determinant lemma and the Woodbury
/// identity, built on the closed-form tridiagonal K^{-1}:
///   log det Sigma_y = N log sigma2 + log det K + log det(K^{-1} + G^T G / sigma2)
///   y^T Sigma_y^{-1} y = (y^T y - b^T M^{-1} b / sigma2) / sigma2,   b = G^T y.
/// O(N n^2 + n^3) instead of O(N^3).
inline double marginal_likelihood_weight_space(const Hyperparams& h, const Eigen::VectorXd& y,
                                               const Eigen::MatrixXd& g) {
  if (y.size() != g.rows())
    throw std::invalid_argument("marginal_likelihood_weight_space: y and G disagree on the sample count");
  const StableSplineKernel<double> k(g.cols(), h.alpha, h.lambda);
  Eigen::MatrixXd m = inverse_closed_form(k).dense();
  m.noalias() += g.transpose() * g / h.sigma2;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("marginal_likelihood_weight_space: Cholesky failed");
  const double logdet_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Eigen::VectorXd b = g.transpose() * y;
  const double quad = (y.squaredNorm() - b.dot(llt.solve(b)) / h.sigma2) / h.sigma2;
  return double(g.rows()) * std::log(h.sigma2) + log_det(k) + logdet_m + quad;
}

/// Settings of the marginal-likelihood search: a coarse grid (alpha uniform,
/// lambda and sigma2 log-uniform over multiples of var(y)) followed by
/// simplex refinement in log coordinates.
struct SearchConfig {
  double alpha_min = 0.05;
  double alpha_max = 0.95;
  int alpha_grid = 8;
  int lambda_grid = 8;
  int sigma2_grid = 8;
  double lambda_rel_min = 1e-3;  // grid bounds as multiples of var(y)
  double lambda_rel_max = 1e3;
  double sigma2_rel_min = 1e-3;
  double sigma2_rel_max = 1e3;
  std::optional<double> fixed_sigma2;
  int refine_budget = 200;  // objective evaluations granted to the simplex
};

namespace detail {

// Weight-space objective with the Gram matrices precomputed, so a grid of
// hyperparameter evaluations costs O(n^3) each instead of O(N n^2).
struct MarginalObjective {
  Eigen::MatrixXd gtg;
  Eigen::VectorXd gty;
  double yty;
  Eigen::Index samples;
  Eigen::Index order;

  MarginalObjective(const Eigen::VectorXd& y, const Eigen::MatrixXd& g)
      : gtg(g.transpose() * g),
        gty(g.transpose() * y),
        yty(y.squaredNorm()),
        samples(g.rows()),
        order(g.cols()) {}

  double operator()(const Hyperparams& h) const {
    const StableSplineKernel<double> k(order, h.alpha, h.lambda);
    Eigen::MatrixXd m = inverse_closed_form(k).dense();
    m.noalias() += gtg / h.sigma2;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const double logdet_m = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double quad = (yty - gty.dot(llt.solve(gty)) / h.sigma2) / h.sigma2;
    return double(samples) * std::log(h.sigma2) + log_det(k) + logdet_m + quad;
  }

  // Evaluation in log coordinates; +inf outside the hyperparameter domain
  // keeps the simplex inside it.
  double eval_log(double log_alpha, double log_lambda, double log_sigma2) const {
    const double alpha = std::exp(log_alpha);
    const double lambda = std::exp(log_lambda);
    const double sigma2 = std::exp(log_sigma2);
    if (!(alpha > 0.0 && alpha < 1.0) || !(lambda > 0.0) || !(sigma2 > 0.0))
      return std::numeric_limits<double>::infinity();
    try {
      const double v = (*this)(Hyperparams(alpha, lambda, sigma2));
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  }
};

inline Eigen::VectorXd log_spaced(double lo, double hi, int count) {
  Eigen::VectorXd out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < count; ++i)
    out[i] = std::exp(llo + (lhi - llo) * double(i) / double(count - 1));
  return out;
}

}  // namespace detail

/// Minimize the marginal-likelihood objective over (alpha, lambda, sigma2):
/// coarse grid scan (row-major, first-found minimum) followed by Nelder-Mead
/// refinement in log coordinates. The attained objective never exceeds the
/// objective at any grid point. Fully deterministic.
inline Hyperparams tune_hyperparameters(const SysIdDataset& data, Eigen::Index n,
                                        const SearchConfig& cfg = {}) {
  const Eigen::Index N = data.y.size();
  if (N < 2) throw std::invalid_argument("tune_hyperparameters: need at least two output samples");
  if (n < 1) throw std::invalid_argument("tune_hyperparameters: order must be positive");

  const Eigen::MatrixXd g = build_convolution_operator(data.u, N, n);
  const detail::MarginalObjective objective(data.y, g);

  const double var_y = (data.y.array() - data.y.mean()).square().mean();
  const double scale = var_y > 0.0 ? var_y : 1.0;

  Eigen::VectorXd alphas(cfg.alpha_grid);
  for (int i = 0; i < cfg.alpha_grid; ++i)
    alphas[i] = cfg.alpha_grid == 1
                    ? cfg.alpha_min
                    : cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * double(i) / double(cfg.alpha_grid - 1);
  const Eigen::VectorXd lambdas =
      detail::log_spaced(cfg.lambda_rel_min * scale, cfg.lambda_rel_max * scale, cfg.lambda_grid);
  const Eigen::VectorXd sigma2s =
      cfg.fixed_sigma2 ? Eigen::VectorXd::Constant(1, *cfg.fixed_sigma2)
                       : detail::log_spaced(cfg.sigma2_rel_min * scale, cfg.sigma2_rel_max * scale,
                                            cfg.sigma2_grid);

  double best_value = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best{alphas[0], lambdas[0], sigma2s[0]};
  for (Eigen::Index ia = 0; ia < alphas.size(); ++ia)
    for (Eigen::Index il = 0; il < lambdas.size(); ++il)
      for (Eigen::Index is = 0; is < sigma2s.size(); ++is) {
        const double v = objective(Hyperparams(alphas[ia], lambdas[il], sigma2s[is]));
        if (v < best_value) {
          best_value = v;
          best = {alphas[ia], lambdas[il], sigma2s[is]};
        }
      }

  if (cfg.refine_budget > 0) {
    if (cfg.fixed_sigma2) {
      const double ls2 = std::log(*cfg.fixed_sigma2);
      const auto r = nelder_mead(
          [&](const Eigen::VectorXd& x) { return objective.eval_log(x[0], x[1], ls2); },
          Eigen::Vector2d{std::log(best[0]), std::log(best[1])}, 0.3, cfg.refine_budget);
      if (r.value <= best_value) best.head<2>() = r.x.array().exp();
    } else {
      const auto r = nelder_mead(
          [&](const Eigen::VectorXd& x) { return objective.eval_log(x[0], x[1], x[2]); },
          Eigen::Vector3d{std::log(best[0]), std::log(best[1]), std::log(best[2])}, 0.3,
          cfg.refine_budget);
      if (r.value <= best_value) best = r.x.array().exp();
    }
  }
  return {best[0], best[1], best[2]};
}

/// Posterior mean of the impulse response given the data and hyperparameters,
///   f = K G^T (G K G^T + sigma2 I)^{-1} y,
/// evaluated through the U W U^T factor and a dense Cholesky of Sigma_y.
inline ImpulseEstimate estimate_impulse_response(const SysIdDataset& data, Eigen::Index n,
                                                 const Hyperparams& h) {
  const Eigen::Index N = data.y.size();
  const Eigen::MatrixXd g = build_convolution_operator(data.u, N, n);
  const StableSplineKernel<double> k(n, h.alpha, h.lambda);
  const TriFactor<double> factor = factorize(k);
  const Eigen::MatrixXd gu = times_allones_upper(g);

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(N, N);
  acc.selfadjointView<Eigen::Lower>().rankUpdate(gu * factor.w.cwiseSqrt().asDiagonal());
  Eigen::MatrixXd sigma_y = acc.selfadjointView<Eigen::Lower>();
  sigma_y.diagonal().array() += h.sigma2;

  Eigen::LLT<Eigen::MatrixXd> llt(sigma_y);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("estimate_impulse_response: Cholesky of Sigma_y failed");
  const Eigen::VectorXd z = llt.solve(data.y);
  // K G^T z = U W (G U)^T z
  const Eigen::VectorXd f_hat =
      allones_upper_times(Eigen::VectorXd(factor.w.cwiseProduct(gu.transpose() * z)));
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return {f_hat, h, logdet + data.y.dot(z)};
}

/// Algebraically equivalent weight-space form of the posterior mean,
///   f = (K^{-1} + G^T G / sigma2)^{-1} G^T y / sigma2,
/// built on the closed-form tridiagonal K^{-1}. Used as the independent
/// second route when cross-checking the estimator.
inline Eigen::VectorXd estimate_impulse_response_weight_space(const Eigen::VectorXd& y,
                                                              const Eigen::MatrixXd& g,
                                                              const Hyperparams& h) {
  if (y.size() != g.rows())
    throw std::invalid_argument("estimate_impulse_response_weight_space: y and G disagree on the sample count");
  const StableSplineKernel<double> k(g.cols(), h.alpha, h.lambda);
  Eigen::MatrixXd m = inverse_closed_form(k).dense();
  m.noalias() += g.transpose() * g / h.sigma2;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("estimate_impulse_response_weight_space: Cholesky failed");
  return llt.solve(g.transpose() * y) / h.sigma2;
}

/// y_t = sum_k f_k u_{t-k} + e_t with e i.i.d. N(0, sigma2); deterministic
/// for a fixed seed. sigma2 = 0 produces the noiseless convolution.
inline SysIdDataset simulate_dataset(const Eigen::VectorXd& f_true, const Eigen::VectorXd& u,
                                     Eigen::Index N, double sigma2, std::uint64_t seed) {
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("simulate_dataset: sigma2 must be nonnegative");
  if (u.size() < N) throw std::invalid_argument("simulate_dataset: input must provide N samples");
  const Eigen::MatrixXd g = build_convolution_operator(u, N, f_true.size());
  Eigen::VectorXd y = g * f_true;
  if (sigma2 > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, std::sqrt(sigma2));
    for (Eigen::Index t = 0; t < N; ++t) y[t] += noise(rng);
  }
  SysIdDataset out;
  out.u = u.head(N);
  out.y = std::move(y);
  out.seed = seed;
  return out;
}

/// White Gaussian sequence for simulation inputs.
inline Eigen::VectorXd gaussian_white_noise(Eigen::Index N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> draw(0.0, 1.0);
  Eigen::VectorXd out(N);
  for (Eigen::Index t = 0; t < N; ++t) out[t] = draw(rng);
  return out;
}

}  // namespace sskernel
