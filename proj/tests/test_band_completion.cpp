#include "sskernel/band_completion.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace sskernel;

namespace {

PartialBandMatrix<double> one_band(const Eigen::VectorXd& diag, const Eigen::VectorXd& off) {
  PartialBandMatrix<double> p(diag.size(), 1);
  for (Eigen::Index i = 0; i < diag.size(); ++i) p.set(i, i, diag[i]);
  for (Eigen::Index i = 0; i < off.size(); ++i) p.set(i, i + 1, off[i]);
  return p;
}

PartialBandMatrix<double> random_feasible(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> draw(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = draw(rng);
  Eigen::MatrixXd spd = a * a.transpose();
  spd.diagonal().array() += 0.5;
  return PartialBandMatrix<double>::band_of(spd, m);
}

double log_det_dense(const Eigen::MatrixXd& a) {
  return 2.0 * Eigen::LLT<Eigen::MatrixXd>(a).matrixLLT().diagonal().array().log().sum();
}

}  // namespace

TEST_CASE("band storage is symmetric by construction") {
  PartialBandMatrix<double> p(4, 2);
  p.set(0, 1, 3.5);
  CHECK(p(1, 0) == 3.5);
  p.set(3, 1, -1.25);
  CHECK(p(1, 3) == -1.25);
  CHECK(p.in_band(0, 2));
  CHECK(!p.in_band(0, 3));
  CHECK_THROWS_AS(p(0, 3), std::out_of_range);
  CHECK_THROWS_AS(p.set(0, 3, 1.0), std::out_of_range);
  CHECK_THROWS_AS(PartialBandMatrix<double>(3, 3), std::invalid_argument);
  CHECK_THROWS_AS(PartialBandMatrix<double>(0, 0), std::invalid_argument);
}

TEST_CASE("feasibility is the positive definiteness of the band blocks") {
  SUBCASE("TC moments are feasible") {
    CHECK(feasible(tc_moment_band<double>(3, 0.5)));
    CHECK(first_infeasible_block(tc_moment_band<double>(3, 0.5)) == -1);
  }
  SUBCASE("any positive diagonal is feasible at bandwidth zero") {
    PartialBandMatrix<double> p(4, 0);
    for (int i = 0; i < 4; ++i) p.set(i, i, 0.25 * (i + 1));
    CHECK(feasible(p));
  }
  SUBCASE("an indefinite 2x2 block is infeasible") {
    const PartialBandMatrix<double> p =
        one_band(Eigen::Vector2d{1.0, 1.0}, Eigen::VectorXd::Constant(1, 2.0));
    CHECK(!feasible(p));
    CHECK(first_infeasible_block(p) == 0);
  }
  SUBCASE("the failing block index is reported") {
    PartialBandMatrix<double> p =
        one_band(Eigen::Vector3d{1.0, 1.0, 1.0}, Eigen::Vector2d{0.0, 2.0});
    CHECK(first_infeasible_block(p) == 1);
    CHECK_THROWS_WITH_AS(central_extension(p), "block 2 not positive definite", InfeasibleError);
  }
}

TEST_CASE("one-step extension of an (n-2)-band matrix") {
  SUBCASE("TC moments complete to alpha^3") {
    CHECK(one_step_extension(tc_moment_band<double>(3, 0.5)) ==
          doctest::Approx(0.125).epsilon(1e-12));
  }
  SUBCASE("identity band completes with a zero corner") {
    const PartialBandMatrix<double> p =
        one_band(Eigen::Vector3d{1.0, 1.0, 1.0}, Eigen::Vector2d{0.0, 0.0});
    CHECK(one_step_extension(p) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  }
  SUBCASE("corner value maximizes the determinant (golden-section oracle)") {
    const PartialBandMatrix<double> p =
        one_band(Eigen::Vector3d{2.0, 2.0, 2.0}, Eigen::Vector2d{1.0, 1.0});
    // oracle: maximize log det over the corner by golden section
    auto logdet_at = [&](double x) {
      Eigen::MatrixXd a = p.zero_filled();
      a(0, 2) = x;
      a(2, 0) = x;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success) return -1e300;
      return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    };
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = -2.0, b = 2.0;
    double x1 = b - ratio * (b - a), x2 = a + ratio * (b - a);
    double f1 = logdet_at(x1), f2 = logdet_at(x2);
    while (b - a > 1e-12) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + ratio * (b - a);
        f2 = logdet_at(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - ratio * (b - a);
        f1 = logdet_at(x1);
      }
    }
    // comparison-based search resolves the maximizer to about sqrt(eps)
    const double oracle = (a + b) / 2.0;
    CHECK(oracle == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(one_step_extension(p) == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(one_step_extension(p) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("bandwidth must be n - 2") {
    CHECK_THROWS_AS(one_step_extension(tc_moment_band<double>(4, 0.5)), std::invalid_argument);
  }
  SUBCASE("infeasible input raises with the block index") {
    const PartialBandMatrix<double> p =
        one_band(Eigen::Vector3d{1.0, 1.0, 1.0}, Eigen::Vector2d{2.0, 0.0});
    CHECK_THROWS_AS(one_step_extension(p), InfeasibleError);
  }
}

TEST_CASE("central extension") {
  SUBCASE("TC moments complete to the full kernel") {
    for (int n : {3, 6, 11, 20})
      for (double alpha : {0.1, 0.5, 0.9}) {
        const Eigen::MatrixXd c = central_extension(tc_moment_band<double>(n, alpha));
        const Eigen::MatrixXd k = build_kernel<double>(n, alpha);
        CHECK((c - k).cwiseAbs().maxCoeff() < 1e-9);
      }
  }
  SUBCASE("a fully specified matrix is returned unchanged") {
    std::mt19937_64 rng(11);
    const PartialBandMatrix<double> p = random_feasible(5, 4, rng);
    CHECK((central_extension(p) - p.zero_filled()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("frozen corners of the diag-2 off-1 example") {
    const PartialBandMatrix<double> p =
        one_band(Eigen::Vector4d{2.0, 2.0, 2.0, 2.0}, Eigen::Vector3d{1.0, 1.0, 1.0});
    const Eigen::MatrixXd c = central_extension(p);
    CHECK(c(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c(1, 3) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c(0, 3) == doctest::Approx(0.25).epsilon(1e-12));
    // cross-check against the brute-force maximizer
    const Eigen::MatrixXd brute = oracle_max_entropy(p);
    CHECK((c - brute).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("the inverse is banded at the input bandwidth") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index n = 4 + Eigen::Index(rng() % 7);
      const Eigen::Index m = 1 + Eigen::Index(rng() % 2);
      const Eigen::MatrixXd c = central_extension(random_feasible(n, m, rng));
      const Eigen::MatrixXd cinv =
          Eigen::LLT<Eigen::MatrixXd>(c).solve(Eigen::MatrixXd::Identity(n, n));
      const double scale = cinv.cwiseAbs().maxCoeff();
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
          if (std::abs(i - j) > m) CHECK(std::abs(cinv(i, j)) < 1e-9 * scale);
    }
  }
  SUBCASE("log det dominates every nearby feasible completion") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> draw(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index n = 4 + Eigen::Index(rng() % 5);
      const Eigen::Index m = 1;
      const PartialBandMatrix<double> p = random_feasible(n, m, rng);
      const Eigen::MatrixXd c = central_extension(p);
      const double best = log_det_dense(c);
      for (int k = 0; k < 20; ++k) {
        Eigen::MatrixXd candidate = c;
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index i = j + m + 1; i < n; ++i) {
            const double v = candidate(i, j) + 0.05 * draw(rng);
            candidate(i, j) = v;
            candidate(j, i) = v;
          }
        if (Eigen::LLT<Eigen::MatrixXd>(candidate).info() != Eigen::Success) continue;
        CHECK(log_det_dense(candidate) <= best + 1e-12);
      }
    }
  }
  SUBCASE("contiguous principal submatrices are central extensions themselves") {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 8; ++trial) {
      const Eigen::Index n = 6 + Eigen::Index(rng() % 5);
      const Eigen::Index m = 1 + Eigen::Index(rng() % 2);
      const Eigen::MatrixXd c = central_extension(random_feasible(n, m, rng));
      const Eigen::Index s = Eigen::Index(rng() % 3);
      const Eigen::Index t = n - 1 - Eigen::Index(rng() % 2);
      const Eigen::Index size = t - s + 1;
      if (size <= m + 1) continue;
      const Eigen::MatrixXd sub = c.block(s, s, size, size);
      const Eigen::MatrixXd sub_completed =
          central_extension(PartialBandMatrix<double>::band_of(sub, m));
      CHECK((sub - sub_completed).cwiseAbs().maxCoeff() < 1e-9 * sub.cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("factored extension") {
  SUBCASE("TC moments give the bidiagonal factor and closed-form V") {
    const BandFactorization<double> f = factored_extension(tc_moment_band<double>(3, 0.5));
    CHECK(f.lower(1, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(f.lower(2, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(f.lower(2, 0) == 0.0);
    // V = (1/(alpha - alpha^2)) diag{1, 1/alpha, (1-alpha)/alpha^2} = {4, 8, 8}
    CHECK(f.v[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(f.v[1] == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(f.v[2] == doctest::Approx(8.0).epsilon(1e-12));
    // inverse of L V L^T reproduces the completed kernel
    const Eigen::MatrixXd rebuilt =
        f.precision().llt().solve(Eigen::MatrixXd::Identity(3, 3));
    CHECK((rebuilt - build_kernel<double>(3, 0.5, 1.0)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("bandwidth zero gives L = I, V = 1/diag") {
    PartialBandMatrix<double> p(3, 0);
    p.set(0, 0, 2.0);
    p.set(1, 1, 4.0);
    p.set(2, 2, 8.0);
    const BandFactorization<double> f = factored_extension(p);
    CHECK((f.lower - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.v[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(f.v[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(f.v[2] == doctest::Approx(0.125).epsilon(1e-15));
  }
  SUBCASE("a fully specified 2x2 factors to its dense inverse") {
    Eigen::MatrixXd a(2, 2);
    a << 3.0, 1.0, 1.0, 2.0;
    const BandFactorization<double> f =
        factored_extension(PartialBandMatrix<double>::band_of(a, 1));
    CHECK((f.precision() - a.inverse()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("inverse of L V L^T equals the central extension on random instances") {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index n = 4 + Eigen::Index(rng() % 10);
      const Eigen::Index m = 1 + Eigen::Index(rng() % 2);
      const PartialBandMatrix<double> p = random_feasible(n, m, rng);
      const BandFactorization<double> f = factored_extension(p);
      const Eigen::MatrixXd via_factors =
          f.precision().llt().solve(Eigen::MatrixXd::Identity(n, n));
      const Eigen::MatrixXd direct = central_extension(p);
      const double rel =
          (via_factors - direct).cwiseAbs().maxCoeff() / direct.cwiseAbs().maxCoeff();
      CHECK(rel < 1e-8);
      // L is unit lower triangular with bandwidth m
      for (Eigen::Index j = 0; j < n; ++j) {
        CHECK(f.lower(j, j) == 1.0);
        for (Eigen::Index i = 0; i < n; ++i)
          if (i < j || i - j > m) CHECK(f.lower(i, j) == 0.0);
      }
      CHECK(f.v.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("gaussian entropy") {
  const double two_pi_term = 1.0 + std::log(2.0 * std::numbers::pi);
  CHECK(gaussian_entropy(Eigen::MatrixXd(Eigen::MatrixXd::Identity(1, 1))) ==
        doctest::Approx(0.5 * two_pi_term).epsilon(1e-14));
  CHECK(gaussian_entropy(Eigen::MatrixXd(2.0 * Eigen::MatrixXd::Identity(2, 2))) ==
        doctest::Approx(std::log(2.0) + two_pi_term).epsilon(1e-14));
  CHECK(gaussian_entropy(build_kernel<double>(3, 0.5, 1.0)) ==
        doctest::Approx(0.5 * std::log(0.00390625) + 1.5 * two_pi_term).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_entropy(Eigen::MatrixXd(-Eigen::MatrixXd::Identity(2, 2))),
                  std::invalid_argument);
}

TEST_CASE("maximum-likelihood objective") {
  const Eigen::MatrixXd eye3 = Eigen::MatrixXd::Identity(3, 3);
  CHECK(maxlik_objective(eye3, eye3) == doctest::Approx(3.0).epsilon(1e-14));
  const Eigen::MatrixXd sbar = Eigen::Vector2d{2.0, 3.0}.asDiagonal();
  CHECK(maxlik_objective(Eigen::MatrixXd(Eigen::MatrixXd::Identity(2, 2)), sbar) ==
        doctest::Approx(5.0).epsilon(1e-14));
  const Eigen::MatrixXd k = build_kernel<double>(2, 0.5, 1.0);
  CHECK(maxlik_objective(k, k) == doctest::Approx(std::log(0.0625) + 2.0).epsilon(1e-12));
}

TEST_CASE("brute-force maximum entropy oracle") {
  SUBCASE("TC moments at n = 5") {
    const Eigen::MatrixXd brute = oracle_max_entropy(tc_moment_band<double>(5, 0.7));
    CHECK((brute - build_kernel<double>(5, 0.7, 1.0)).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("fully specified input is unchanged") {
    std::mt19937_64 rng(71);
    const PartialBandMatrix<double> p = random_feasible(4, 3, rng);
    CHECK((oracle_max_entropy(p) - p.zero_filled()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("identity band maximizes with zero corners") {
    const PartialBandMatrix<double> p =
        one_band(Eigen::Vector3d{1.0, 1.0, 1.0}, Eigen::Vector2d{0.0, 0.0});
    CHECK(oracle_max_entropy(p).cwiseAbs().maxCoeff() == doctest::Approx(1.0));  // diagonal ones
    CHECK(std::abs(oracle_max_entropy(p)(0, 2)) < 1e-7);
  }
  SUBCASE("agrees with the recursion on random instances") {
    std::mt19937_64 rng(83);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::Index n = 4 + Eigen::Index(rng() % 7);
      const Eigen::Index m = 1 + Eigen::Index(rng() % 2);
      const PartialBandMatrix<double> p = random_feasible(n, m, rng);
      CHECK((oracle_max_entropy(p) - central_extension(p)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("desk-scale cap") {
    CHECK_THROWS_AS(oracle_max_entropy(tc_moment_band<double>(13, 0.5)), std::invalid_argument);
  }
}
