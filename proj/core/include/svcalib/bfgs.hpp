#pragma once

#include <functional>
#include <string_view>

#include <Eigen/Core>

namespace svcalib::optim {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct BfgsOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;  // on the infinity norm
  double c1 = 1e-4;                  // sufficient decrease
  double c2 = 0.9;                   // curvature
  int max_line_search_steps = 60;
  // Stop when f fell by less than stall_relative_decrease * f over the last
  // stall_window iterations. Zero disables the rule.
  int stall_window = 10;
  double stall_relative_decrease = 1e-7;
};

enum class BfgsStatus {
  kGradientTolerance,
  kMaxIterations,
  // No step along the search direction, nor along steepest descent, lowers
  // the objective, or the stall rule fired: x is a numerical minimizer of a
  // possibly nonsmooth f.
  kNoProgress,
};

[[nodiscard]] std::string_view to_string(BfgsStatus status) noexcept;

struct BfgsResult {
  Eigen::VectorXd x;
  double f_initial = 0.0;
  double f = 0.0;
  double gradient_inf_norm = 0.0;
  int iterations = 0;
  int function_evaluations = 0;
  BfgsStatus status = BfgsStatus::kMaxIterations;
};

/// Called once per accepted iterate (including the starting point).
using IterationObserver = std::function<void(int iteration, const Eigen::VectorXd& x, double f)>;

/// Quasi-Newton minimization with the BFGS inverse-Hessian update and a
/// bracketing weak-Wolfe line search. Accepted steps always satisfy the
/// Armijo condition, so f never increases.
///
/// Throws Error(kSolverFailure) if the objective returns a non-finite value.
[[nodiscard]] BfgsResult minimize_bfgs(const ObjectiveFn& f, const GradientFn& grad,
                                       const Eigen::VectorXd& x0, const BfgsOptions& options,
                                       const IterationObserver& observer = {});

/// Central differences with step relative_step * max(1, |x_i|).
[[nodiscard]] Eigen::VectorXd central_difference_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x,
                                                          double relative_step);

}  // namespace svcalib::optim
