#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace bitvo {

/// Huber loss on a squared residual norm s = ||r||^2:
///   rho(s) = s                      for s <= delta^2
///   rho(s) = 2*delta*sqrt(s) - delta^2  otherwise.
struct HuberLoss {
  double delta = 2.0;

  double rho(double s) const {
    const double d2 = delta * delta;
    if (s <= d2) return s;
    return 2.0 * delta * std::sqrt(s) - d2;
  }

  /// d rho / d s, used as the IRLS weight of a residual block.
  double weight(double s) const {
    const double d2 = delta * delta;
    if (s <= d2) return 1.0;
    return delta / std::sqrt(s);
  }
};

/// Nonlinear least-squares problem with residuals grouped into fixed-size
/// blocks. Parameters may live on a manifold: Evaluate() linearizes with
/// respect to the tangent, and plus() applies a tangent increment.
class LeastSquaresProblem {
 public:
  virtual ~LeastSquaresProblem() = default;

  virtual int residual_size() const = 0;
  virtual int ambient_size() const = 0;
  virtual int tangent_size() const { return ambient_size(); }
  virtual int residual_block_size() const { return 1; }

  /// Residual vector at params; when jacobian is non-null, also the
  /// (residual_size x tangent_size) Jacobian.
  virtual void evaluate(const Eigen::VectorXd& params, Eigen::VectorXd* residuals,
                        Eigen::MatrixXd* jacobian) const = 0;

  virtual Eigen::VectorXd plus(const Eigen::VectorXd& params,
                               const Eigen::VectorXd& delta) const {
    return params + delta;
  }

  /// Robust loss applied per residual block; null means plain least squares.
  virtual const HuberLoss* loss() const { return nullptr; }
};

enum class LMStatus { kConverged, kMaxIterations, kNumericalFailure };

struct LMResult {
  Eigen::VectorXd parameters;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  LMStatus status = LMStatus::kMaxIterations;
};

struct LMOptions {
  int max_iterations = 10;
  double initial_lambda = 1e-4;
  double relative_cost_tol = 1e-8;
  double step_norm_tol = 1e-10;
  double max_lambda = 1e16;
};

namespace detail {

inline double robust_cost(const LeastSquaresProblem& problem, const Eigen::VectorXd& residuals) {
  const int bs = problem.residual_block_size();
  const HuberLoss* loss = problem.loss();
  double cost = 0.0;
  for (int b = 0; b * bs < residuals.size(); ++b) {
    const double s = residuals.segment(b * bs, bs).squaredNorm();
    cost += loss ? loss->rho(s) : s;
  }
  return 0.5 * cost;
}

}  // namespace detail

/// Standard damped Gauss-Newton (Levenberg-Marquardt). Damping scales the
/// normal-equation diagonal; lambda shrinks by 10 on accepted steps and grows
/// by 10 on rejected ones. Stops on max_iterations, a relative cost decrease
/// below relative_cost_tol, or a step norm below step_norm_tol.
inline LMResult levenberg_marquardt(const LeastSquaresProblem& problem,
                                    const Eigen::VectorXd& initial,
                                    const LMOptions& options = {}) {
  LMResult result;
  result.parameters = initial;

  const int bs = problem.residual_block_size();
  const HuberLoss* loss = problem.loss();

  Eigen::VectorXd residuals(problem.residual_size());
  Eigen::MatrixXd jacobian(problem.residual_size(), problem.tangent_size());
  problem.evaluate(result.parameters, &residuals, &jacobian);
  if (!residuals.allFinite() || !jacobian.allFinite()) {
    result.status = LMStatus::kNumericalFailure;
    return result;
  }
  double cost = detail::robust_cost(problem, residuals);
  result.final_cost = cost;

  double lambda = options.initial_lambda;
  const int tangent = problem.tangent_size();

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    // Robust-weighted normal equations.
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(tangent, tangent);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(tangent);
    for (int b = 0; b * bs < residuals.size(); ++b) {
      const auto r = residuals.segment(b * bs, bs);
      const auto J = jacobian.middleRows(b * bs, bs);
      const double w = loss ? loss->weight(r.squaredNorm()) : 1.0;
      H.noalias() += w * J.transpose() * J;
      g.noalias() += w * J.transpose() * r;
    }

    result.iterations = iter + 1;

    bool stepped = false;
    while (true) {
      Eigen::VectorXd damped_diag = H.diagonal();
      for (int i = 0; i < tangent; ++i) damped_diag(i) = std::max(damped_diag(i), 1e-12);
      Eigen::MatrixXd A = H;
      A.diagonal() += lambda * damped_diag;

      const Eigen::VectorXd delta = A.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        if (lambda > options.max_lambda) {
          result.status = LMStatus::kNumericalFailure;
          return result;
        }
        continue;
      }

      if (delta.norm() < options.step_norm_tol) {
        result.converged = true;
        result.status = LMStatus::kConverged;
        result.final_cost = cost;
        return result;
      }

      const Eigen::VectorXd candidate = problem.plus(result.parameters, delta);
      Eigen::VectorXd candidate_residuals(problem.residual_size());
      problem.evaluate(candidate, &candidate_residuals, nullptr);
      const double candidate_cost = candidate_residuals.allFinite()
                                        ? detail::robust_cost(problem, candidate_residuals)
                                        : std::numeric_limits<double>::infinity();

      if (candidate_cost < cost) {
        result.parameters = candidate;
        lambda = std::max(lambda / 10.0, 1e-12);
        const double decrease = cost - candidate_cost;
        cost = candidate_cost;
        result.final_cost = cost;
        problem.evaluate(result.parameters, &residuals, &jacobian);
        if (!residuals.allFinite() || !jacobian.allFinite()) {
          result.status = LMStatus::kNumericalFailure;
          return result;
        }
        stepped = true;
        if (decrease < options.relative_cost_tol * std::max(cost + decrease, 1e-300)) {
          result.converged = true;
          result.status = LMStatus::kConverged;
          return result;
        }
        break;
      }

      lambda *= 10.0;
      if (lambda > options.max_lambda) {
        // No descent direction left at this linearization; the iterate is as
        // good as the model allows.
        result.converged = true;
        result.status = LMStatus::kConverged;
        result.final_cost = cost;
        return result;
      }
    }
    (void)stepped;
  }

  result.status = LMStatus::kMaxIterations;
  result.final_cost = cost;
  return result;
}

}  // namespace bitvo
