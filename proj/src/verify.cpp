#include "sskernel/verify.hpp"

#include "sskernel/band_completion.hpp"
#include "sskernel/stable_spline.hpp"
#include "sskernel/sysid.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <sstream>

namespace sskernel::verify {

namespace {

constexpr double kAlphaSweep[] = {0.1, 0.3, 0.5, 0.7, 0.9};
constexpr double kAlphaGrid[] = {0.2, 0.5, 0.8};
constexpr double kLambdaGrid[] = {0.5, 1.0, 10.0};

std::string format_exp(double v) {
  std::ostringstream ss;
  ss.precision(2);
  ss << std::scientific << v;
  return ss.str();
}

// Random band data that is feasible by construction: the band of a random
// dense positive definite matrix.
PartialBandMatrix<double> random_feasible_band(Eigen::Index n, Eigen::Index m,
                                               std::mt19937_64& rng) {
  std::normal_distribution<double> draw(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = draw(rng);
  Eigen::MatrixXd spd = a * a.transpose();
  spd.diagonal().array() += 0.5;
  return PartialBandMatrix<double>::band_of(spd, m);
}

double offband_ratio(const Eigen::MatrixXd& m, Eigen::Index bandwidth) {
  const double scale = m.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (std::abs(i - j) > bandwidth) worst = std::max(worst, std::abs(m(i, j)));
  return worst / scale;
}

// 1. Central extension of the TC 1-band moments reproduces the kernel.
SuiteResult suite_kernel_from_moments(const Scale& scale) {
  SuiteResult r{"kernel-from-moments", true, "", 0.0};
  double worst = 0.0;
  int cases = 0;
  for (int n = 3; n <= scale.completion_n_max; ++n)
    for (double alpha : kAlphaSweep) {
      const Eigen::MatrixXd completed = central_extension(tc_moment_band<double>(n, alpha));
      const Eigen::MatrixXd kernel = build_kernel<double>(n, alpha);
      worst = std::max(worst, (completed - kernel).cwiseAbs().maxCoeff());
      ++cases;
    }
  r.pass = worst < 1e-9;
  r.detail = "max |completion - kernel| = " + format_exp(worst) + " over " + std::to_string(cases) +
             " cases (tol 1e-9)";
  return r;
}

// 2. Closed-form inverse times the dense kernel is the identity.
SuiteResult suite_inverse_identity(const Scale& scale) {
  SuiteResult r{"inverse-identity", true, "", 0.0};
  double worst = 0.0;
  for (int n = 1; n <= scale.inverse_n_max; ++n)
    for (double alpha : kAlphaGrid)
      for (double lambda : kLambdaGrid) {
        const StableSplineKernel<double> k(n, alpha, lambda);
        const Eigen::MatrixXd residual =
            inverse_closed_form(k).dense() * build_kernel(k) - Eigen::MatrixXd::Identity(n, n);
        worst = std::max(worst, residual.cwiseAbs().maxCoeff());
      }
  r.pass = worst < 1e-8;
  r.detail = "max |K^-1 K - I| = " + format_exp(worst) + " for n <= " +
             std::to_string(scale.inverse_n_max) + " (tol 1e-8)";
  return r;
}

// 3. U W U^T reconstructs the kernel and W matches its closed form.
SuiteResult suite_factorization(const Scale& scale) {
  SuiteResult r{"factorization", true, "", 0.0};
  double worst_rel = 0.0, worst_w = 0.0;
  for (int n = 1; n <= scale.inverse_n_max; ++n)
    for (double alpha : kAlphaGrid)
      for (double lambda : kLambdaGrid) {
        const StableSplineKernel<double> k(n, alpha, lambda);
        const TriFactor<double> factor = factorize(k);
        const Eigen::MatrixXd kernel = build_kernel(k);
        const Eigen::MatrixXd rebuilt = factor.reconstruct();
        worst_rel = std::max(
            worst_rel, ((rebuilt - kernel).cwiseAbs().cwiseQuotient(kernel.cwiseAbs())).maxCoeff());
        // w_j = lambda (alpha - alpha^2) alpha^{j-1}, last entry lambda alpha^n
        for (int j = 1; j <= n; ++j) {
          const double expected = j < n
                                      ? lambda * (alpha - alpha * alpha) * std::pow(alpha, j - 1)
                                      : lambda * std::pow(alpha, n);
          worst_w = std::max(worst_w, std::abs(factor.w[j - 1] - expected) / expected);
        }
      }
  r.pass = worst_rel < 1e-12 && worst_w < 1e-12;
  r.detail = "max rel reconstruction error = " + format_exp(worst_rel) +
             ", max rel W deviation = " + format_exp(worst_w) + " (tol 1e-12)";
  return r;
}

// 4. Log-determinant: dense-LU cross-check for small n, closed-form
// consistency (including the lambda term) up to large n.
SuiteResult suite_log_det(const Scale& scale) {
  SuiteResult r{"log-det", true, "", 0.0};
  double worst_lu = 0.0, worst_formula = 0.0;
  for (int n = 1; n <= scale.logdet_lu_n_max; ++n)
    for (double alpha : kAlphaGrid)
      for (double lambda : kLambdaGrid) {
        const StableSplineKernel<double> k(n, alpha, lambda);
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(build_kernel(k));
        const double lu_logdet = lu.matrixLU().diagonal().array().abs().log().sum();
        worst_lu = std::max(worst_lu, std::abs(log_det(k) - lu_logdet));
      }
  for (int n = 1; n <= scale.logdet_formula_n_max; ++n)
    for (double alpha : kAlphaSweep)
      for (double lambda : kLambdaGrid) {
        const StableSplineKernel<double> k(n, alpha, lambda);
        const double formula = double(n) * std::log(lambda) +
                               double(n - 1) * std::log1p(-alpha) +
                               double(Eigen::Index(n) * (n + 1) / 2) * std::log(alpha);
        worst_formula =
            std::max(worst_formula, std::abs(log_det(k) - formula) / std::max(1.0, std::abs(formula)));
      }
  r.pass = worst_lu < 1e-8 && worst_formula < 1e-12;
  r.detail = "max |logdet - LU| = " + format_exp(worst_lu) + " (n <= " +
             std::to_string(scale.logdet_lu_n_max) + ", tol 1e-8); formula consistency " +
             format_exp(worst_formula) + " up to n = " + std::to_string(scale.logdet_formula_n_max);
  return r;
}

// 5. First n-1 columns of the closed-form inverse sum to zero.
SuiteResult suite_column_sums(const Scale& scale) {
  SuiteResult r{"inverse-column-sums", true, "", 0.0};
  double worst = 0.0;
  int cases = 0;
  for (int n = 1; n <= scale.inverse_n_max; ++n)
    for (double alpha : kAlphaGrid)
      for (double lambda : kLambdaGrid) {
        const StableSplineKernel<double> k(n, alpha, lambda);
        if (!columns_sum_check(k)) r.pass = false;
        const Eigen::MatrixXd inv = inverse_closed_form(k).dense();
        for (Eigen::Index j = 0; j + 1 < n; ++j) {
          const double ratio =
              std::abs(inv.col(j).sum()) / inv.col(j).cwiseAbs().maxCoeff();
          worst = std::max(worst, ratio);
        }
        ++cases;
      }
  r.pass = r.pass && worst < 1e-9;
  r.detail = "max |column sum| / ||column||_inf = " + format_exp(worst) + " over " +
             std::to_string(cases) + " kernels (tol 1e-9)";
  return r;
}

// 6. The inverse of every central extension is banded at the input bandwidth.
SuiteResult suite_banded_inverse(const Scale& scale) {
  SuiteResult r{"banded-inverse", true, "", 0.0};
  double worst = 0.0;
  for (int n = 3; n <= scale.completion_n_max; ++n)
    for (double alpha : kAlphaSweep) {
      const Eigen::MatrixXd c = central_extension(tc_moment_band<double>(n, alpha));
      const Eigen::MatrixXd cinv =
          Eigen::LLT<Eigen::MatrixXd>(c).solve(Eigen::MatrixXd::Identity(n, n));
      worst = std::max(worst, offband_ratio(cinv, 1));
    }
  std::mt19937_64 rng(scale.seed);
  for (int trial = 0; trial < scale.random_instances; ++trial) {
    const Eigen::Index n = 4 + Eigen::Index(rng() % 7);  // 4..10
    const Eigen::Index m = 1 + Eigen::Index(rng() % 2);  // 1..2
    const PartialBandMatrix<double> p = random_feasible_band(n, m, rng);
    const Eigen::MatrixXd c = central_extension(p);
    const Eigen::MatrixXd cinv =
        Eigen::LLT<Eigen::MatrixXd>(c).solve(Eigen::MatrixXd::Identity(n, n));
    worst = std::max(worst, offband_ratio(cinv, m));
  }
  r.pass = worst < 1e-9;
  r.detail = "max off-band |entry| / max |entry| = " + format_exp(worst) + " (tol 1e-9)";
  return r;
}

// 7. Coordinate-ascent log-det maximizer agrees with the recursion.
SuiteResult suite_oracle(const Scale& scale) {
  SuiteResult r{"oracle-equivalence", true, "", 0.0};
  double worst = 0.0;
  std::mt19937_64 rng(scale.seed + 1);
  for (int trial = 0; trial < scale.random_instances; ++trial) {
    const Eigen::Index n = 4 + Eigen::Index(rng() % 7);  // 4..10
    const Eigen::Index m = 1 + Eigen::Index(rng() % 2);  // 1..2
    const PartialBandMatrix<double> p = random_feasible_band(n, m, rng);
    const Eigen::MatrixXd fast = central_extension(p);
    const Eigen::MatrixXd brute = oracle_max_entropy(p);
    worst = std::max(worst, (fast - brute).cwiseAbs().maxCoeff());
  }
  r.pass = worst < 1e-6;
  r.detail = "max |recursion - coordinate ascent| = " + format_exp(worst) + " over " +
             std::to_string(scale.random_instances) + " instances (tol 1e-6)";
  return r;
}

// 8. At the central extension the likelihood objective is stationary under
// perturbations that keep the inverse banded.
SuiteResult suite_stationarity(const Scale& scale) {
  SuiteResult r{"ml-stationarity", true, "", 0.0};
  std::mt19937_64 rng(scale.seed + 2);
  std::normal_distribution<double> draw(0.0, 1.0);
  double worst_margin = 0.0;  // most negative objective increase seen
  for (int trial = 0; trial < scale.stationarity_trials; ++trial) {
    const Eigen::Index n = 4 + Eigen::Index(rng() % 5);  // 4..8
    const Eigen::Index m = 1 + Eigen::Index(rng() % 2);
    const PartialBandMatrix<double> p = random_feasible_band(n, m, rng);
    const Eigen::MatrixXd c = central_extension(p);
    const Eigen::MatrixXd sbar = p.zero_filled();  // off-band entries never touched
    const double at_center = maxlik_objective(c, sbar);

    // banded projection of the inverse, perturbed inside the band
    Eigen::MatrixXd b = Eigen::LLT<Eigen::MatrixXd>(c).solve(Eigen::MatrixXd::Identity(n, n));
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(i - j) > m) b(i, j) = 0.0;
    b = ((b + b.transpose()) / 2.0).eval();
    const double scale_b = b.cwiseAbs().maxCoeff();

    for (int k = 0; k < 5; ++k) {
      Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i)
          if (i - j <= m) {
            const double v = 1e-2 * scale_b * draw(rng);
            delta(i, j) = v;
            delta(j, i) = v;
          }
      Eigen::MatrixXd perturbed = b + delta;
      Eigen::LLT<Eigen::MatrixXd> llt(perturbed);
      if (llt.info() != Eigen::Success) continue;  // left the cone; draw again
      const Eigen::MatrixXd s = llt.solve(Eigen::MatrixXd::Identity(n, n));
      worst_margin = std::min(worst_margin, maxlik_objective(Eigen::MatrixXd(s), sbar) - at_center);
    }
  }
  r.pass = worst_margin >= -1e-10;
  r.detail = "min objective increase under banded perturbations = " + format_exp(worst_margin) +
             " (margin -1e-10)";
  return r;
}

// 9. Data-space and weight-space forms of the estimator agree.
SuiteResult suite_dual_forms(const Scale& scale) {
  SuiteResult r{"estimator-dual-forms", true, "", 0.0};
  std::mt19937_64 rng(scale.seed + 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < scale.dual_form_problems; ++trial) {
    const Eigen::Index n = 5 + Eigen::Index(rng() % 46);        // 5..50
    const Eigen::Index N = n + 10 + Eigen::Index(rng() % 146);  // <= 200
    const double alpha = 0.15 + 0.75 * unit(rng);
    const double lambda = std::exp(std::log(0.1) + std::log(100.0) * unit(rng));
    const double sigma2 = std::exp(std::log(1e-3) + std::log(1e3) * unit(rng));
    const Hyperparams h(alpha, lambda, sigma2);

    const Eigen::VectorXd u = gaussian_white_noise(N, rng());
    const TriFactor<double> factor = factorize(StableSplineKernel<double>(n, alpha, lambda));
    Eigen::VectorXd z(n);
    std::normal_distribution<double> draw(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = draw(rng);
    const Eigen::VectorXd f_true =
        allones_upper_times(Eigen::VectorXd(factor.w.cwiseSqrt().cwiseProduct(z)));
    const SysIdDataset data = simulate_dataset(f_true, u, N, sigma2, rng());

    const Eigen::MatrixXd g = build_convolution_operator(data.u, N, n);
    const Eigen::VectorXd data_space = estimate_impulse_response(data, n, h).f_hat;
    const Eigen::VectorXd weight_space = estimate_impulse_response_weight_space(data.y, g, h);
    worst = std::max(worst, (data_space - weight_space).norm() / data_space.norm());
  }
  r.pass = worst < 1e-6;
  r.detail = "max relative difference = " + format_exp(worst) + " over " +
             std::to_string(scale.dual_form_problems) + " problems (tol 1e-6)";
  return r;
}

// 10. End-to-end identification quality on a decaying impulse response.
SuiteResult suite_end_to_end(const Scale& scale) {
  SuiteResult r{"end-to-end-fit", true, "", 0.0};
  const Eigen::Index n = scale.e2e_order;
  const Eigen::Index N = scale.e2e_samples;
  Eigen::VectorXd f_true(n);
  for (Eigen::Index k = 0; k < n; ++k) f_true[k] = std::pow(0.8, double(k + 1));

  std::vector<double> fits, alphas;
  for (int s = 0; s < scale.e2e_seeds; ++s) {
    const std::uint64_t seed = scale.seed + 100 + std::uint64_t(s);
    const Eigen::VectorXd u = gaussian_white_noise(N, seed);
    const Eigen::MatrixXd g = build_convolution_operator(u, N, n);
    const Eigen::VectorXd noiseless = g * f_true;
    const double sigma2 = noiseless.squaredNorm() / double(N) / 10.0;  // SNR 10
    const SysIdDataset data = simulate_dataset(f_true, u, N, sigma2, seed + 7919);

    const Hyperparams h = tune_hyperparameters(data, n);
    const ImpulseEstimate est = estimate_impulse_response(data, n, h);
    fits.push_back(100.0 * (1.0 - (est.f_hat - f_true).norm() / f_true.norm()));
    alphas.push_back(h.alpha);
  }
  auto median_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v.size() % 2 == 1 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  std::sort(fits.begin(), fits.end());
  const double median = median_of(fits);
  const double median_alpha = median_of(alphas);
  r.pass = median >= 80.0 && std::abs(median_alpha - 0.8) <= 0.2;
  std::ostringstream ss;
  ss.precision(2);
  ss << std::fixed << "median fit " << median << " (min " << fits.front() << ", max " << fits.back()
     << ") over " << scale.e2e_seeds << " seeds (need >= 80); median alpha " << median_alpha
     << " (need 0.8 +- 0.2)";
  r.detail = ss.str();
  return r;
}

using SuiteFn = std::function<SuiteResult(const Scale&)>;

const std::vector<std::pair<std::string, SuiteFn>>& registry() {
  static const std::vector<std::pair<std::string, SuiteFn>> suites = {
      {"kernel-from-moments", suite_kernel_from_moments},
      {"inverse-identity", suite_inverse_identity},
      {"factorization", suite_factorization},
      {"log-det", suite_log_det},
      {"inverse-column-sums", suite_column_sums},
      {"banded-inverse", suite_banded_inverse},
      {"oracle-equivalence", suite_oracle},
      {"ml-stationarity", suite_stationarity},
      {"estimator-dual-forms", suite_dual_forms},
      {"end-to-end-fit", suite_end_to_end},
  };
  return suites;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

SuiteResult run_suite(const std::string& name, const Scale& scale) {
  for (const auto& [candidate, fn] : registry())
    if (candidate == name) {
      const auto start = std::chrono::steady_clock::now();
      SuiteResult r = fn(scale);
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return r;
    }
  throw std::invalid_argument("unknown suite '" + name + "'");
}

std::vector<SuiteResult> run_suites(const std::vector<std::string>& names, const Scale& scale) {
  std::vector<SuiteResult> out;
  out.reserve(names.size());
  for (const auto& name : names) out.push_back(run_suite(name, scale));
  return out;
}

std::vector<SuiteResult> run_all(const Scale& scale) { return run_suites(suite_names(), scale); }

}  // namespace sskernel::verify
