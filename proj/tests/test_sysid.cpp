#include "sskernel/sysid.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace sskernel;

namespace {

// prior draw f = U W^{1/2} z
Eigen::VectorXd sample_prior(Eigen::Index n, double alpha, double lambda, std::mt19937_64& rng) {
  std::normal_distribution<double> draw(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = draw(rng);
  const TriFactor<double> f = factorize(StableSplineKernel<double>(n, alpha, lambda));
  return allones_upper_times(Eigen::VectorXd(f.w.cwiseSqrt().cwiseProduct(z)));
}

}  // namespace

TEST_CASE("convolution operator lag table") {
  SUBCASE("unit impulse input shifts by one lag") {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
    u[0] = 1.0;
    const Eigen::MatrixXd g = build_convolution_operator(u, 3, 3);
    Eigen::MatrixXd expected(3, 3);
    expected << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    CHECK((g - expected).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero input gives a zero operator") {
    CHECK(build_convolution_operator(Eigen::VectorXd::Zero(5), 5, 3).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("constant input fills the lower lag triangle") {
    const Eigen::MatrixXd g = build_convolution_operator(Eigen::VectorXd::Ones(3), 3, 2);
    Eigen::MatrixXd expected(3, 2);
    expected << 0, 0, 1, 0, 1, 1;
    CHECK((g - expected).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("domain checks") {
    CHECK_THROWS_AS(build_convolution_operator(Eigen::VectorXd::Zero(5), 0, 3),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_convolution_operator(Eigen::VectorXd::Zero(2), 5, 3),
                    std::invalid_argument);
  }
}

TEST_CASE("output covariance") {
  const Hyperparams h(0.5, 1.0, 0.1);
  SUBCASE("zero operator leaves sigma2 I") {
    const Eigen::MatrixXd s = output_covariance(h, Eigen::MatrixXd::Zero(4, 3));
    CHECK((s - 0.1 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("identity operator gives K + sigma2 I") {
    const Eigen::MatrixXd s = output_covariance(h, Eigen::MatrixXd::Identity(3, 3));
    const Eigen::MatrixXd expected =
        build_kernel<double>(3, 0.5, 1.0) + 0.1 * Eigen::MatrixXd::Identity(3, 3);
    CHECK((s - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("impulse input: second diagonal entry is K11 + sigma2") {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
    u[0] = 1.0;
    const Eigen::MatrixXd s = output_covariance(h, build_convolution_operator(u, 3, 3));
    CHECK(s(1, 1) == doctest::Approx(0.5 + 0.1).epsilon(1e-14));
    CHECK(s(0, 0) == doctest::Approx(0.1).epsilon(1e-14));
  }
  SUBCASE("result is exactly symmetric and positive definite") {
    std::mt19937_64 rng(5);
    const Eigen::VectorXd u = gaussian_white_noise(40, rng());
    const Eigen::MatrixXd g = build_convolution_operator(u, 40, 10);
    const Eigen::MatrixXd s = output_covariance(h, g);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(s).info() == Eigen::Success);
  }
}

TEST_CASE("marginal likelihood objective") {
  SUBCASE("zero data and zero operator give N log sigma2") {
    const Hyperparams h(0.5, 1.0, 1.0);
    CHECK(marginal_likelihood(h, Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(4, 2)) ==
          doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
  SUBCASE("zero output leaves only the log-determinant term") {
    const Hyperparams h(0.4, 2.0, 0.3);
    const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd sy = output_covariance(h, g);
    const double logdet =
        2.0 * Eigen::LLT<Eigen::MatrixXd>(sy).matrixLLT().diagonal().array().log().sum();
    CHECK(marginal_likelihood(h, Eigen::VectorXd::Zero(3), g) ==
          doctest::Approx(logdet).epsilon(1e-12));
  }
  SUBCASE("dense 2x2 arithmetic oracle") {
    const Hyperparams h(0.5, 1.0, 0.5);
    const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::VectorXd y = Eigen::Vector2d{1.0, 0.0};
    Eigen::MatrixXd sy(2, 2);
    sy << 1.0, 0.25, 0.25, 0.75;  // K + 0.5 I
    const double expected = std::log(sy.determinant()) + y.dot(sy.inverse() * y);
    CHECK(marginal_likelihood(h, y, g) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("weight-space route agrees with the Cholesky route") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 12; ++trial) {
      const Eigen::Index n = 3 + Eigen::Index(rng() % 20);
      const Eigen::Index N = n + 5 + Eigen::Index(rng() % 60);
      const Hyperparams h(0.15 + 0.7 * unit(rng), 0.2 + 3.0 * unit(rng), 0.05 + unit(rng));
      const Eigen::VectorXd u = gaussian_white_noise(N, rng());
      const Eigen::VectorXd f = sample_prior(n, h.alpha, h.lambda, rng);
      const SysIdDataset data = simulate_dataset(f, u, N, h.sigma2, rng());
      const Eigen::MatrixXd g = build_convolution_operator(data.u, N, n);
      const double direct = marginal_likelihood(h, data.y, g);
      const double fast = marginal_likelihood_weight_space(h, data.y, g);
      CHECK(std::abs(direct - fast) / std::abs(direct) < 1e-6);
    }
  }
}

TEST_CASE("hyperparameter tuning") {
  SUBCASE("zero output drives lambda to the grid lower bound") {
    SysIdDataset data;
    data.u = gaussian_white_noise(40, 3);
    data.y = Eigen::VectorXd::Zero(40);
    SearchConfig cfg;
    cfg.fixed_sigma2 = 1.0;  // noise floor fixed, prior energy free
    cfg.refine_budget = 0;   // grid decision only
    const Hyperparams h = tune_hyperparameters(data, 5, cfg);
    CHECK(h.lambda == doctest::Approx(cfg.lambda_rel_min).epsilon(1e-12));
    CHECK(h.sigma2 == 1.0);
  }
  SUBCASE("refined objective dominates the generating hyperparameters when gridded") {
    std::mt19937_64 rng(13);
    const Eigen::Index n = 8, N = 120;
    const Hyperparams truth(0.6, 1.0, 0.1);
    const Eigen::VectorXd u = gaussian_white_noise(N, rng());
    const Eigen::VectorXd f = sample_prior(n, truth.alpha, truth.lambda, rng);
    const SysIdDataset data = simulate_dataset(f, u, N, truth.sigma2, rng());
    const Hyperparams tuned = tune_hyperparameters(data, n);
    const Eigen::MatrixXd g = build_convolution_operator(data.u, N, n);
    CHECK(marginal_likelihood(tuned, data.y, g) <=
          marginal_likelihood(truth, data.y, g) + 1e-9);
  }
  SUBCASE("degenerate data is rejected") {
    SysIdDataset data;
    data.u = Eigen::VectorXd::Zero(1);
    data.y = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(tune_hyperparameters(data, 3), std::invalid_argument);
  }
}

TEST_CASE("impulse response estimation") {
  SUBCASE("zero output estimates a zero response") {
    SysIdDataset data;
    data.u = gaussian_white_noise(30, 17);
    data.y = Eigen::VectorXd::Zero(30);
    const ImpulseEstimate est = estimate_impulse_response(data, 6, Hyperparams(0.5, 1.0, 0.2));
    CHECK(est.f_hat.cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("large noise variance shrinks the estimate") {
    std::mt19937_64 rng(19);
    const Eigen::Index n = 8, N = 80;
    const Eigen::VectorXd u = gaussian_white_noise(N, rng());
    const Eigen::VectorXd f = sample_prior(n, 0.6, 1.0, rng);
    const SysIdDataset data = simulate_dataset(f, u, N, 0.1, rng());
    const double small = estimate_impulse_response(data, n, Hyperparams(0.6, 1.0, 1.0)).f_hat.norm();
    const double large = estimate_impulse_response(data, n, Hyperparams(0.6, 1.0, 1e6)).f_hat.norm();
    CHECK(large / small < 1e-3);
  }
  SUBCASE("the norm is non-increasing along a sigma2 ladder") {
    std::mt19937_64 rng(29);
    const Eigen::Index n = 6, N = 60;
    const Eigen::VectorXd u = gaussian_white_noise(N, rng());
    const Eigen::VectorXd f = sample_prior(n, 0.5, 1.0, rng);
    const SysIdDataset data = simulate_dataset(f, u, N, 0.05, rng());
    double previous = std::numeric_limits<double>::infinity();
    for (double sigma2 : {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}) {
      const double norm =
          estimate_impulse_response(data, n, Hyperparams(0.5, 1.0, sigma2)).f_hat.norm();
      CHECK(norm <= previous * (1.0 + 1e-12));
      previous = norm;
    }
  }
  SUBCASE("dense 2x2 arithmetic oracle: f = K (K + sigma2 I)^{-1} y") {
    const Hyperparams h(0.5, 1.0, 0.5);
    SysIdDataset data;
    data.u = Eigen::Vector2d{0.0, 0.0};
    data.y = Eigen::Vector2d{1.0, 1.0};
    // G = I is not reachable through a convolution operator, so check the
    // algebra through output_covariance-free arithmetic instead.
    const Eigen::MatrixXd k = build_kernel<double>(2, 0.5, 1.0);
    const Eigen::VectorXd expected =
        k * (k + 0.5 * Eigen::MatrixXd::Identity(2, 2)).inverse() * data.y;
    const Eigen::VectorXd via_weight_space = estimate_impulse_response_weight_space(
        data.y, Eigen::MatrixXd::Identity(2, 2), h);
    CHECK((via_weight_space - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("data-space and weight-space forms agree on random problems") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index n = 4 + Eigen::Index(rng() % 30);
      const Eigen::Index N = n + 10 + Eigen::Index(rng() % 80);
      const Hyperparams h(0.2 + 0.6 * unit(rng), std::exp(2.0 * unit(rng) - 1.0),
                          std::exp(3.0 * unit(rng) - 4.0));
      const Eigen::VectorXd u = gaussian_white_noise(N, rng());
      const Eigen::VectorXd f = sample_prior(n, h.alpha, h.lambda, rng);
      const SysIdDataset data = simulate_dataset(f, u, N, h.sigma2, rng());
      const Eigen::MatrixXd g = build_convolution_operator(data.u, N, n);
      const Eigen::VectorXd a = estimate_impulse_response(data, n, h).f_hat;
      const Eigen::VectorXd b = estimate_impulse_response_weight_space(data.y, g, h);
      CHECK((a - b).norm() / a.norm() < 1e-6);
    }
  }
  SUBCASE("near-noiseless data recovers a prior draw") {
    std::mt19937_64 rng(41);
    const Eigen::Index n = 10, N = 4 * n + 20;
    const Eigen::VectorXd u = gaussian_white_noise(N, rng());
    const Eigen::VectorXd f = sample_prior(n, 0.7, 1.0, rng);
    const SysIdDataset data = simulate_dataset(f, u, N, 1e-8, rng());
    const Eigen::VectorXd f_hat =
        estimate_impulse_response(data, n, Hyperparams(0.7, 1.0, 1e-8)).f_hat;
    CHECK((f_hat - f).norm() / f.norm() < 0.05);
  }
}

TEST_CASE("dataset simulation") {
  SUBCASE("noiseless impulse input reproduces the shifted response") {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(5);
    u[0] = 1.0;
    const Eigen::VectorXd f = Eigen::Vector3d{0.8, 0.64, 0.512};
    const SysIdDataset data = simulate_dataset(f, u, 5, 0.0, 123);
    CHECK(data.y[0] == 0.0);
    CHECK(data.y[1] == 0.8);
    CHECK(data.y[2] == 0.64);
    CHECK(data.y[3] == 0.512);
    CHECK(data.y[4] == 0.0);
  }
  SUBCASE("zero response leaves pure noise with the requested variance") {
    const Eigen::Index N = 4000;
    const double sigma2 = 0.7;
    const SysIdDataset data =
        simulate_dataset(Eigen::VectorXd::Zero(3), gaussian_white_noise(N, 5), N, sigma2, 99);
    const double sample_var = (data.y.array() - data.y.mean()).square().sum() / double(N - 1);
    CHECK(std::abs(sample_var - sigma2) < 3.0 * std::sqrt(2.0 / double(N)) * sigma2);
  }
  SUBCASE("fixed seed reproduces the dataset exactly") {
    const Eigen::VectorXd u = gaussian_white_noise(50, 7);
    const Eigen::VectorXd f = Eigen::Vector2d{1.0, 0.5};
    const SysIdDataset a = simulate_dataset(f, u, 50, 0.3, 424242);
    const SysIdDataset b = simulate_dataset(f, u, 50, 0.3, 424242);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.seed == b.seed);
  }
}
