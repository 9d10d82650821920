#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace attnreg::optim {

using Vector = Eigen::VectorXd;

struct LbfgsConfig {
  int memory = 10;
  int max_iterations = 1000;
  double grad_tol = 1e-8;  // infinity norm
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search_steps = 40;

  void validate() const;
};

enum class StopReason { gradient_tol, improvement_stall, max_iterations, line_search_failure };

std::string to_string(StopReason reason);

/// One accepted iterate. `step`, `slope_start` and `slope_end` describe the
/// line search that produced it (zero for the starting point), so the strong
/// Wolfe conditions can be re-checked after the fact.
struct IterationRecord {
  double value = 0.0;
  double grad_inf_norm = 0.0;
  double step = 0.0;
  double slope_start = 0.0;  // φ'(0)
  double slope_end = 0.0;    // φ'(step)
  double value_start = 0.0;  // φ(0)
};

struct MinimizeResult {
  Vector solution;
  double value = 0.0;
  int iterations = 0;
  StopReason stop_reason = StopReason::max_iterations;
  std::vector<IterationRecord> history;
};

/// Returns f(x) and writes ∇f(x) into `grad` (already sized).
using ValueAndGradient = std::function<double(const Vector& x, Vector& grad)>;

/// Limited-memory BFGS with a strong-Wolfe line search.
///
/// Stops when ‖∇f‖∞ ≤ grad_tol, when the relative decrease stays below
/// `stall_tol` for `patience` consecutive iterations (stall_tol <= 0 disables
/// this), after `max_iterations`, or when a line search fails. A line-search
/// failure on the very first iteration throws LineSearchFailure; later ones
/// return the best iterate so far.
MinimizeResult minimize(const ValueAndGradient& fg, const Vector& x0, const LbfgsConfig& config,
                        double stall_tol = 0.0, int patience = 1);

MinimizeResult minimize(const std::function<double(const Vector&)>& objective,
                        const std::function<Vector(const Vector&)>& gradient, const Vector& x0,
                        const LbfgsConfig& config, double stall_tol = 0.0, int patience = 1);

}  // namespace attnreg::optim
