#include "svcalib/bfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svcalib/error.hpp"

namespace svcalib::optim {
namespace {

struct LineSearchResult {
  bool found_decrease = false;
  double alpha = 0.0;
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd g;
};

double checked(double value, const char* where) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kSolverFailure, std::string("non-finite objective value during ") + where);
  }
  return value;
}

// Bracketing line search for the weak Wolfe conditions. Bisects while a
// bracket exists, doubles otherwise. If the curvature condition is never met
// but some trial satisfied sufficient decrease, that trial is returned.
LineSearchResult wolfe_line_search(const ObjectiveFn& f, const GradientFn& grad, const Eigen::VectorXd& x,
                                   double fx, const Eigen::VectorXd& g, const Eigen::VectorXd& p,
                                   double alpha0, const BfgsOptions& opt, int& evaluations) {
  const double slope = g.dot(p);
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double alpha = alpha0;
  LineSearchResult best;
  for (int k = 0; k < opt.max_line_search_steps; ++k) {
    Eigen::VectorXd xt = x + alpha * p;
    const double ft = checked(f(xt), "line search");
    ++evaluations;
    if (ft > fx + opt.c1 * alpha * slope || !(ft < fx)) {
      hi = alpha;
    } else {
      Eigen::VectorXd gt = grad(xt);
      best = {true, alpha, xt, ft, gt};
      if (gt.dot(p) < opt.c2 * slope) {
        lo = alpha;
      } else {
        return best;
      }
    }
    alpha = std::isinf(hi) ? 2.0 * lo : 0.5 * (lo + hi);
    if (!std::isinf(hi) && hi - lo <= 1e-16 * std::max(1.0, hi)) break;
  }
  return best;
}

}  // namespace

std::string_view to_string(BfgsStatus status) noexcept {
  switch (status) {
    case BfgsStatus::kGradientTolerance: return "gradient_tolerance";
    case BfgsStatus::kMaxIterations: return "max_iterations";
    case BfgsStatus::kNoProgress: return "no_progress";
  }
  return "unknown";
}

Eigen::VectorXd central_difference_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x, double relative_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xt = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = relative_step * std::max(1.0, std::abs(x[i]));
    xt[i] = x[i] + h;
    const double fp = f(xt);
    xt[i] = x[i] - h;
    const double fm = f(xt);
    xt[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

BfgsResult minimize_bfgs(const ObjectiveFn& f, const GradientFn& grad, const Eigen::VectorXd& x0,
                         const BfgsOptions& options, const IterationObserver& observer) {
  const Eigen::Index n = x0.size();
  BfgsResult result;
  result.x = x0;
  result.f = checked(f(x0), "initial evaluation");
  result.f_initial = result.f;
  result.function_evaluations = 1;
  Eigen::VectorXd g = grad(result.x);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool h_is_identity = true;
  if (observer) observer(0, result.x, result.f);
  std::vector<double> history{result.f};

  for (int it = 0;; ++it) {
    result.iterations = it;
    result.gradient_inf_norm = g.lpNorm<Eigen::Infinity>();
    if (result.gradient_inf_norm < options.gradient_tolerance) {
      result.status = BfgsStatus::kGradientTolerance;
      return result;
    }
    if (options.stall_window > 0 && static_cast<int>(history.size()) > options.stall_window) {
      const double earlier = history[history.size() - 1 - static_cast<std::size_t>(options.stall_window)];
      if (earlier - result.f <= options.stall_relative_decrease * result.f) {
        result.status = BfgsStatus::kNoProgress;
        return result;
      }
    }
    if (it >= options.max_iterations) {
      result.status = BfgsStatus::kMaxIterations;
      return result;
    }

    Eigen::VectorXd p = -(h * g);
    if (!(g.dot(p) < 0.0)) {
      h.setIdentity();
      h_is_identity = true;
      p = -g;
    }
    // Unscaled steepest descent can be wildly out of scale; cap the first trial.
    double alpha0 = h_is_identity ? std::min(1.0, 1.0 / p.lpNorm<Eigen::Infinity>()) : 1.0;
    LineSearchResult ls = wolfe_line_search(f, grad, result.x, result.f, g, p, alpha0, options,
                                            result.function_evaluations);
    if (!ls.found_decrease && !h_is_identity) {
      h.setIdentity();
      h_is_identity = true;
      p = -g;
      alpha0 = std::min(1.0, 1.0 / p.lpNorm<Eigen::Infinity>());
      ls = wolfe_line_search(f, grad, result.x, result.f, g, p, alpha0, options, result.function_evaluations);
    }
    if (!ls.found_decrease) {
      result.status = BfgsStatus::kNoProgress;
      return result;
    }

    const Eigen::VectorXd s = ls.x - result.x;
    const Eigen::VectorXd y = ls.g - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (h_is_identity) {
        h *= sy / y.dot(y);
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h * y;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded.
      h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      h_is_identity = false;
    }

    result.x = ls.x;
    result.f = ls.f;
    g = ls.g;
    history.push_back(result.f);
    if (observer) observer(it + 1, result.x, result.f);
  }
}

}  // namespace svcalib::optim
