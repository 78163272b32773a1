#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include <Eigen/Dense>

#include "prfmpc/errors.hpp"
#include "prfmpc/gauss.hpp"
#include "support/mc_oracle.hpp"

using namespace prfmpc;
using gauss::Gaussian;
using gauss::JointGaussianTrajectory;

namespace {

// Independent erf-based CDF oracle (local to the tests on purpose).
double cdf_oracle(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double quantile_by_bisection(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf_oracle(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Random-walk joint over steps tau+1..T: cov blocks min(i,j)*dt^2*Q.
JointGaussianTrajectory random_walk_joint(const Eigen::Vector2d& start,
                                          const Eigen::Vector2d& drift,
                                          const Eigen::Matrix2d& q, double dt,
                                          int tau, int horizon) {
  const int n = horizon - tau;
  const Eigen::Matrix2d step_cov = dt * dt * q;
  Eigen::VectorXd mean(2 * n);
  Eigen::MatrixXd cov(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    mean.segment<2>(2 * i) = start + (i + 1) * dt * drift;
    for (int j = 0; j < n; ++j) {
      cov.block<2, 2>(2 * i, 2 * j) = std::min(i + 1, j + 1) * step_cov;
    }
  }
  return JointGaussianTrajectory(tau, horizon, mean, cov);
}

JointGaussianTrajectory random_two_step_joint(std::mt19937_64& engine) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::MatrixXd a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = unit(engine);
  const Eigen::MatrixXd cov =
      a.transpose() * a + 0.3 * Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd mean(4);
  for (int i = 0; i < 4; ++i) mean[i] = 3.0 * unit(engine);
  return JointGaussianTrajectory(0, 2, mean, cov);
}

}  // namespace

TEST_SUITE("gauss") {

TEST_CASE("quantile at the median is zero") {
  CHECK(gauss::std_normal_quantile(0.5) == 0.0);
}

TEST_CASE("quantile matches the bisection oracle") {
  CHECK(std::abs(gauss::std_normal_quantile(0.975) -
                 quantile_by_bisection(0.975)) <= 1e-9);
  CHECK(std::abs(gauss::std_normal_quantile(0.975) - 1.959964) <= 1e-6);

  const double p_step = 1.0 - 0.05 / 9.0;
  CHECK(std::abs(gauss::std_normal_quantile(p_step) -
                 quantile_by_bisection(p_step)) <= 1e-9);
  CHECK(std::abs(gauss::std_normal_quantile(p_step) - 2.5393) <= 1e-3);
}

TEST_CASE("quantile-CDF round trip on a log-spaced grid") {
  std::vector<double> grid;
  for (double p = 1e-9; p < 0.4; p *= 3.7) {
    grid.push_back(p);
    grid.push_back(1.0 - p);
  }
  for (double p = 0.05; p < 1.0; p += 0.05) grid.push_back(p);
  for (const double p : grid) {
    const double z = gauss::std_normal_quantile(p);
    CHECK(std::abs(cdf_oracle(z) - p) <= 1e-9);
  }
}

TEST_CASE("quantile rejects arguments outside (0,1)") {
  CHECK_THROWS_AS(gauss::std_normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(gauss::std_normal_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(gauss::std_normal_quantile(-0.2), std::domain_error);
  CHECK_THROWS_AS(gauss::std_normal_quantile(1.7), std::domain_error);
}

TEST_CASE("Gaussian construction validates its invariants") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.2, -0.2, 1.0;
  CHECK_THROWS_AS(Gaussian(Eigen::Vector2d::Zero(), asym),
                  std::invalid_argument);

  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(Gaussian(Eigen::Vector2d::Zero(), indefinite),
                  std::invalid_argument);

  CHECK_THROWS_AS(Gaussian(Eigen::Vector3d::Zero(), Eigen::Matrix2d::Identity()),
                  std::invalid_argument);
}

TEST_CASE("joint trajectory exposes consistent blocks") {
  const JointGaussianTrajectory joint = random_walk_joint(
      {1.0, 2.0}, {15.0, 0.0},
      (Eigen::Matrix2d() << 1.0, 0.0, 0.0, 0.25).finished(), 0.5, 0, 5);
  for (int t = 1; t <= 5; ++t) {
    CHECK((joint.cross(t, t) - joint.cov(t)).cwiseAbs().maxCoeff() == 0.0);
  }
  const Eigen::Matrix2d c25 = joint.cross(2, 5);
  const Eigen::Matrix2d c52 = joint.cross(5, 2);
  CHECK((c25 - c52.transpose()).cwiseAbs().maxCoeff() <= 1e-15);

  // An indefinite stacked covariance must be rejected.
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(4, 4);
  bad(0, 2) = bad(2, 0) = 2.0;
  CHECK_THROWS_AS(
      JointGaussianTrajectory(0, 2, Eigen::VectorXd::Zero(4), bad),
      std::invalid_argument);
}

TEST_CASE("conditioning with zero cross-covariance returns the marginal") {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
  cov.topLeftCorner(2, 2) = 2.0 * Eigen::Matrix2d::Identity();
  cov.bottomRightCorner(2, 2) = 3.0 * Eigen::Matrix2d::Identity();
  Eigen::VectorXd mean(4);
  mean << 1.0, 2.0, 3.0, 4.0;
  const JointGaussianTrajectory joint(0, 2, mean, cov);

  const Gaussian g = gauss::condition(joint, 2, 1, {100.0, -50.0});
  CHECK((g.mean - joint.mean(2)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((g.cov - joint.cov(2)).cwiseAbs().maxCoeff() <= 1e-12);

  const Gaussian md = gauss::conditional_mean_distribution(joint, 2, 1);
  CHECK((md.mean - joint.mean(2)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(md.cov.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("scalar surrogate conditioning matches the sampling oracle") {
  // Unit variances, cross 0.5, conditioning offset +2: shift +1, var 0.75.
  // Stacked layout of the joint: step-1 block first, step-2 block second.
  Eigen::MatrixXd joint_cov(4, 4);
  joint_cov.topLeftCorner(2, 2) = Eigen::Matrix2d::Identity();      // step 1
  joint_cov.bottomRightCorner(2, 2) = Eigen::Matrix2d::Identity();  // step 2
  joint_cov.topRightCorner(2, 2) = 0.5 * Eigen::Matrix2d::Identity();
  joint_cov.bottomLeftCorner(2, 2) = 0.5 * Eigen::Matrix2d::Identity();
  const JointGaussianTrajectory joint(0, 2, Eigen::VectorXd::Zero(4),
                                      joint_cov);

  const Eigen::Vector2d value{2.0, 2.0};
  const Gaussian g = gauss::condition(joint, 2, 1, value);
  CHECK(std::abs(g.mean[0] - 1.0) <= 1e-12);
  CHECK(std::abs(g.mean[1] - 1.0) <= 1e-12);
  CHECK(std::abs(g.cov(0, 0) - 0.75) <= 1e-12);

  // Oracle layout: y (step 2) first, x (step 1) last.
  Eigen::MatrixXd oracle_cov(4, 4);
  oracle_cov.topLeftCorner(2, 2) = Eigen::Matrix2d::Identity();
  oracle_cov.bottomRightCorner(2, 2) = Eigen::Matrix2d::Identity();
  oracle_cov.topRightCorner(2, 2) = 0.5 * Eigen::Matrix2d::Identity();
  oracle_cov.bottomLeftCorner(2, 2) = 0.5 * Eigen::Matrix2d::Identity();
  const auto oracle = prfmpc_test::estimate_conditional_moments(
      Eigen::VectorXd::Zero(4), oracle_cov, 2, 2, 1000000, 0xC0FFEE);

  const Eigen::VectorXd oracle_mean = oracle.conditional_mean(value);
  CHECK((g.mean - oracle_mean).norm() <= 0.02 * std::max(1.0, oracle_mean.norm()));
  CHECK((g.cov - oracle.residual_cov).norm() <= 0.02 * oracle.residual_cov.norm());
}

TEST_CASE("random-walk closed forms for conditional covariances") {
  const Eigen::Matrix2d q =
      (Eigen::Matrix2d() << 1.0, 0.0, 0.0, 0.25).finished();
  const JointGaussianTrajectory joint =
      random_walk_joint({0.0, 0.0}, {15.0, 0.0}, q, 0.5, 0, 9);

  // t - tau = 4, conditioned one step ahead: 3 * dt^2 * Q remains.
  const Gaussian g = gauss::condition(joint, 4, 1, joint.mean(1));
  const Eigen::Matrix2d expected_cond = 3.0 * 0.25 * q;
  CHECK((g.cov - expected_cond).cwiseAbs().maxCoeff() <= 1e-12);

  // Conditional-mean covariance collapses to dt^2 * Q for a = 1.
  const Gaussian md = gauss::conditional_mean_distribution(joint, 4, 1);
  const Eigen::Matrix2d expected_mean_cov = 0.25 * q;
  CHECK((md.cov - expected_mean_cov).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((md.mean - joint.mean(4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conditioning on a deterministic block raises a named error") {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
  cov.bottomRightCorner(2, 2) = Eigen::Matrix2d::Identity();
  const JointGaussianTrajectory joint(0, 2, Eigen::VectorXd::Zero(4), cov);
  CHECK_THROWS_WITH_AS(gauss::condition(joint, 2, 1, {0.0, 0.0}),
                       doctest::Contains("step 1"), SingularCovarianceError);
}

TEST_CASE("condition validates step arguments") {
  const JointGaussianTrajectory joint = random_walk_joint(
      {0.0, 0.0}, {1.0, 0.0}, Eigen::Matrix2d::Identity(), 0.5, 0, 4);
  CHECK_THROWS_AS(gauss::condition(joint, 1, 1, {0.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(gauss::condition(joint, 5, 1, {0.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(gauss::condition(joint, 3, 0, {0.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("law of total covariance and Loewner ordering on random joints") {
  std::mt19937_64 engine(0xABCD);
  for (int instance = 0; instance < 25; ++instance) {
    const JointGaussianTrajectory joint = random_two_step_joint(engine);
    const Gaussian cond = gauss::condition(joint, 2, 1, joint.mean(1));
    const Gaussian mdist = gauss::conditional_mean_distribution(joint, 2, 1);

    const Eigen::Matrix2d total = cond.cov.topLeftCorner<2, 2>() +
                                  mdist.cov.topLeftCorner<2, 2>();
    CHECK((total - joint.cov(2)).cwiseAbs().maxCoeff() <= 1e-10);

    const Eigen::Matrix2d shrink =
        joint.cov(2) - cond.cov.topLeftCorner<2, 2>();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(shrink);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es_post(
        cond.cov.topLeftCorner<2, 2>());
    CHECK(es_post.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("law of total expectation holds empirically") {
  const Eigen::Matrix2d q =
      (Eigen::Matrix2d() << 1.0, 0.0, 0.0, 0.25).finished();
  const JointGaussianTrajectory joint =
      random_walk_joint({0.0, 0.0}, {15.0, 0.0}, q, 0.5, 0, 5);
  const Gaussian step1(joint.mean(1), joint.cov(1));

  RandomStream rng(42);
  const int n = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd o = gauss::sample(step1, rng);
    sum += gauss::condition(joint, 4, 1, o.head<2>()).mean.head<2>();
  }
  const Eigen::Vector2d avg = sum / n;
  const Gaussian mdist = gauss::conditional_mean_distribution(joint, 4, 1);
  for (int i = 0; i < 2; ++i) {
    const double se = std::sqrt(mdist.cov(i, i) / n);
    CHECK(std::abs(avg[i] - joint.mean(4)[i]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("binned empirical conditioning agrees with the formula") {
  // 1-D surrogate embedded in the first coordinate.
  Eigen::MatrixXd cov(4, 4);
  cov << 1.0, 0.0, 0.7, 0.0,
         0.0, 1e-6, 0.0, 0.0,
         0.7, 0.0, 1.2, 0.0,
         0.0, 0.0, 0.0, 1e-6;
  Eigen::VectorXd mean(4);
  mean << 0.0, 0.0, 0.0, 0.0;
  const JointGaussianTrajectory joint(0, 2, mean, cov);
  const Gaussian full(joint.stacked_mean(), joint.stacked_cov());

  RandomStream rng(7);
  const double v = 0.8;
  const double half_width = 0.05;
  double sum_y = 0.0;
  int count = 0;
  for (int i = 0; i < 400000; ++i) {
    const Eigen::VectorXd s = gauss::sample(full, rng);
    if (std::abs(s[0] - v) <= half_width) {
      sum_y += s[2];
      ++count;
    }
  }
  REQUIRE(count > 1000);
  const double empirical = sum_y / count;
  const double predicted =
      gauss::condition(joint, 2, 1, {v, 0.0}).mean[0];
  const double cond_sd = std::sqrt(1.2 - 0.7 * 0.7);
  CHECK(std::abs(empirical - predicted) <=
        3.0 * cond_sd / std::sqrt(static_cast<double>(count)) + 0.7 * half_width);
}

TEST_CASE("sampling a degenerate Gaussian returns the mean exactly") {
  const Gaussian g((Eigen::VectorXd(2) << 3.0, -4.0).finished(),
                   Eigen::MatrixXd::Zero(2, 2));
  RandomStream rng(1);
  const Eigen::VectorXd s = gauss::sample(g, rng);
  CHECK(s[0] == 3.0);
  CHECK(s[1] == -4.0);
}

TEST_CASE("sampling moments converge for the standard normal") {
  const Gaussian g(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  RandomStream rng(99);
  const int n = 1000000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sum_outer = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d s = gauss::sample(g, rng).head<2>();
    sum += s;
    sum_outer += s * s.transpose();
  }
  const Eigen::Vector2d m = sum / n;
  const Eigen::Matrix2d c = sum_outer / n - m * m.transpose();
  CHECK((c - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 0.01);
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  const Gaussian g(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  RandomStream a(2024), b(2024);
  for (int i = 0; i < 32; ++i) {
    const Eigen::VectorXd sa = gauss::sample(g, a);
    const Eigen::VectorXd sb = gauss::sample(g, b);
    CHECK(sa[0] == sb[0]);
    CHECK(sa[1] == sb[1]);
  }
}

TEST_CASE("derive_seed decorrelates consecutive indices") {
  const std::uint64_t a = derive_seed(123, 0);
  const std::uint64_t b = derive_seed(123, 1);
  CHECK(a != b);
  CHECK(derive_seed(123, 0) == a);
  CHECK(derive_seed(124, 0) != a);
}

}  // TEST_SUITE("gauss")
