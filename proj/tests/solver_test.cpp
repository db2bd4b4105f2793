#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "bitvo/solver.hpp"

using namespace bitvo;

namespace {

class QuadraticBowl : public LeastSquaresProblem {
 public:
  int residual_size() const override { return 1; }
  int ambient_size() const override { return 1; }
  void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd* r,
                Eigen::MatrixXd* J) const override {
    (*r)(0) = p(0);
    if (J) (*J)(0, 0) = 1.0;
  }
};

class Rosenbrock : public LeastSquaresProblem {
 public:
  int residual_size() const override { return 2; }
  int ambient_size() const override { return 2; }
  void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd* r,
                Eigen::MatrixXd* J) const override {
    const double x = p(0), y = p(1);
    (*r)(0) = 1.0 - x;
    (*r)(1) = 10.0 * (y - x * x);
    if (J) {
      (*J)(0, 0) = -1.0;
      (*J)(0, 1) = 0.0;
      (*J)(1, 0) = -20.0 * x;
      (*J)(1, 1) = 10.0;
    }
  }
};

class BrokenProblem : public LeastSquaresProblem {
 public:
  int residual_size() const override { return 1; }
  int ambient_size() const override { return 1; }
  void evaluate(const Eigen::VectorXd&, Eigen::VectorXd* r, Eigen::MatrixXd* J) const override {
    (*r)(0) = std::numeric_limits<double>::quiet_NaN();
    if (J) (*J)(0, 0) = 1.0;
  }
};

class RobustLine : public LeastSquaresProblem {
 public:
  // Fit a constant to samples, one of which is a gross outlier.
  int residual_size() const override { return 5; }
  int ambient_size() const override { return 1; }
  const HuberLoss* loss() const override { return &loss_; }
  void evaluate(const Eigen::VectorXd& p, Eigen::VectorXd* r,
                Eigen::MatrixXd* J) const override {
    const double samples[5] = {1.0, 1.1, 0.9, 1.05, 50.0};
    for (int i = 0; i < 5; ++i) {
      (*r)(i) = samples[i] - p(0);
      if (J) (*J)(i, 0) = -1.0;
    }
  }

 private:
  HuberLoss loss_{1.0};
};

}  // namespace

TEST_CASE("levenberg_marquardt on a quadratic bowl") {
  QuadraticBowl problem;
  Eigen::VectorXd x0(1);
  x0 << 3.0;
  const LMResult result = levenberg_marquardt(problem, x0);
  REQUIRE(result.converged);
  REQUIRE(std::abs(result.parameters(0)) < 1e-8);
  REQUIRE(result.iterations <= 10);
}

TEST_CASE("levenberg_marquardt at the optimum does nothing") {
  QuadraticBowl problem;
  Eigen::VectorXd x0(1);
  x0 << 0.0;
  const LMResult result = levenberg_marquardt(problem, x0);
  REQUIRE(result.converged);
  REQUIRE(result.iterations <= 1);
  REQUIRE(result.parameters(0) == 0.0);
}

TEST_CASE("levenberg_marquardt solves Rosenbrock") {
  Rosenbrock problem;
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LMOptions options;
  options.max_iterations = 200;
  const LMResult result = levenberg_marquardt(problem, x0, options);
  REQUIRE(result.converged);
  REQUIRE(std::abs(result.parameters(0) - 1.0) < 1e-6);
  REQUIRE(std::abs(result.parameters(1) - 1.0) < 1e-6);
}

TEST_CASE("levenberg_marquardt reports numerical failure") {
  BrokenProblem problem;
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  const LMResult result = levenberg_marquardt(problem, x0);
  REQUIRE(result.status == LMStatus::kNumericalFailure);
  REQUIRE_FALSE(result.converged);
}

TEST_CASE("robust cost never increases across accepted steps") {
  RobustLine problem;
  Eigen::VectorXd x0(1);
  x0 << 10.0;
  Eigen::VectorXd r0(5);
  problem.evaluate(x0, &r0, nullptr);
  const double initial_cost = detail::robust_cost(problem, r0);

  LMOptions options;
  options.max_iterations = 50;
  const LMResult result = levenberg_marquardt(problem, x0, options);
  REQUIRE(result.converged);
  REQUIRE(result.final_cost <= initial_cost);
  // Robust minimum: the outlier contributes a bounded slope of delta, so
  // p* = (sum of inliers + delta) / 4 = 1.2625 instead of the mean 10.81.
  REQUIRE(std::abs(result.parameters(0) - 1.2625) < 1e-6);
}

TEST_CASE("huber loss shape") {
  HuberLoss loss{2.0};
  REQUIRE(loss.rho(1.0) == 1.0);
  REQUIRE(loss.rho(4.0) == 4.0);
  REQUIRE(std::abs(loss.rho(9.0) - (2.0 * 2.0 * 3.0 - 4.0)) < 1e-12);
  REQUIRE(loss.weight(1.0) == 1.0);
  REQUIRE(std::abs(loss.weight(16.0) - 0.5) < 1e-12);
}
