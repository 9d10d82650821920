#include "attnreg/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "attnreg/error.hpp"

namespace attnreg::optim {

void LbfgsConfig::validate() const {
  if (memory < 1) throw Error(ErrorKind::InvalidArgument, "L-BFGS memory must be >= 1");
  if (max_iterations < 0) throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 0");
  if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "need 0 < c1 < c2 < 1");
  }
  if (max_line_search_steps < 1) {
    throw Error(ErrorKind::InvalidArgument, "max_line_search_steps must be >= 1");
  }
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::gradient_tol: return "gradient_tol";
    case StopReason::improvement_stall: return "improvement_stall";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

namespace {

struct Point {
  double step = 0.0;
  double value = 0.0;
  double slope = 0.0;
  Vector x;
  Vector grad;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db); NaN if none.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  return b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
}

class LineSearch {
 public:
  LineSearch(const ValueAndGradient& fg, const LbfgsConfig& cfg, const Vector& x, double f0,
             const Vector& d, double slope0)
      : fg_(fg), cfg_(cfg), x_(x), d_(d), f0_(f0), slope0_(slope0) {}

  // Returns true and fills `out` when a strong-Wolfe step is found.
  bool run(double initial_step, Point& out) {
    Point prev{0.0, f0_, slope0_, x_, Vector()};
    double step = initial_step;
    for (int i = 0; evals_ < cfg_.max_line_search_steps; ++i) {
      Point cur = eval(step);
      if (!std::isfinite(cur.value) || cur.value > f0_ + cfg_.wolfe_c1 * step * slope0_ ||
          (i > 0 && cur.value >= prev.value)) {
        return zoom(prev, cur, out);
      }
      if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out);
      prev = std::move(cur);
      step *= 2.0;
    }
    return false;
  }

 private:
  Point eval(double step) {
    ++evals_;
    Point p;
    p.step = step;
    p.x = x_ + step * d_;
    p.grad.resize(x_.size());
    p.value = fg_(p.x, p.grad);
    p.slope = std::isfinite(p.value) && p.grad.allFinite() ? p.grad.dot(d_)
                                                           : std::numeric_limits<double>::infinity();
    if (!std::isfinite(p.slope)) p.value = std::numeric_limits<double>::infinity();
    return p;
  }

  bool zoom(Point lo, Point hi, Point& out) {
    while (evals_ < cfg_.max_line_search_steps) {
      const double a = lo.step;
      const double b = hi.step;
      const double width = std::abs(b - a);
      if (width <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a))) break;
      double trial = std::numeric_limits<double>::quiet_NaN();
      if (std::isfinite(hi.value)) {
        trial = cubic_minimizer(a, lo.value, lo.slope, b, hi.value, hi.slope);
      }
      const double left = std::min(a, b) + 0.1 * width;
      const double right = std::max(a, b) - 0.1 * width;
      if (!std::isfinite(trial) || trial < left || trial > right) trial = 0.5 * (a + b);

      Point cur = eval(trial);
      if (!std::isfinite(cur.value) || cur.value > f0_ + cfg_.wolfe_c1 * trial * slope0_ ||
          cur.value >= lo.value) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -cfg_.wolfe_c2 * slope0_) {
          out = std::move(cur);
          return true;
        }
        if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    return false;
  }

  const ValueAndGradient& fg_;
  const LbfgsConfig& cfg_;
  const Vector& x_;
  const Vector& d_;
  double f0_;
  double slope0_;
  int evals_ = 0;
};

struct CurvaturePair {
  Vector s;
  Vector y;
  double rho;
};

Vector two_loop(const std::deque<CurvaturePair>& pairs, const Vector& grad) {
  Vector q = grad;
  std::vector<double> alpha(pairs.size());
  for (size_t k = pairs.size(); k-- > 0;) {
    alpha[k] = pairs[k].rho * pairs[k].s.dot(q);
    q -= alpha[k] * pairs[k].y;
  }
  if (!pairs.empty()) {
    const auto& last = pairs.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (size_t k = 0; k < pairs.size(); ++k) {
    const double beta = pairs[k].rho * pairs[k].y.dot(q);
    q += (alpha[k] - beta) * pairs[k].s;
  }
  return -q;
}

}  // namespace

MinimizeResult minimize(const ValueAndGradient& fg, const Vector& x0, const LbfgsConfig& config,
                        double stall_tol, int patience) {
  config.validate();
  const Eigen::Index n = x0.size();
  Vector x = x0;
  Vector grad(n);
  double value = fg(x, grad);
  if (!std::isfinite(value) || !grad.allFinite()) {
    throw Error(ErrorKind::NonFiniteObjective, "objective or gradient non-finite at x0");
  }

  MinimizeResult result;
  result.history.push_back({value, grad.lpNorm<Eigen::Infinity>(), 0.0, 0.0, 0.0, value});

  std::deque<CurvaturePair> pairs;
  int stalled = 0;
  auto finish = [&](StopReason reason) {
    result.solution = x;
    result.value = value;
    result.stop_reason = reason;
    return result;
  };

  for (int iter = 0;; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() <= config.grad_tol) return finish(StopReason::gradient_tol);
    if (iter >= config.max_iterations) return finish(StopReason::max_iterations);

    Vector direction = two_loop(pairs, grad);
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      pairs.clear();
      direction = -grad;
      slope = -grad.squaredNorm();
    }
    const double initial_step = pairs.empty() ? std::min(1.0, 1.0 / grad.norm()) : 1.0;

    LineSearch search(fg, config, x, value, direction, slope);
    Point accepted;
    if (!search.run(initial_step, accepted)) {
      if (result.iterations == 0) {
        throw Error(ErrorKind::LineSearchFailure, "no strong-Wolfe step on the first iteration");
      }
      return finish(StopReason::line_search_failure);
    }

    CurvaturePair pair{accepted.x - x, accepted.grad - grad, 0.0};
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-12 * pair.s.norm() * pair.y.norm()) {
      pair.rho = 1.0 / sy;
      pairs.push_back(std::move(pair));
      if (static_cast<int>(pairs.size()) > config.memory) pairs.pop_front();
    }

    const double previous = value;
    x = std::move(accepted.x);
    grad = std::move(accepted.grad);
    value = accepted.value;
    ++result.iterations;
    result.history.push_back({value, grad.lpNorm<Eigen::Infinity>(), accepted.step, slope,
                              accepted.slope, previous});

    if (stall_tol > 0.0) {
      const double rel = (previous - value) / std::max(std::abs(previous), 1e-300);
      stalled = rel < stall_tol ? stalled + 1 : 0;
      if (stalled >= patience) return finish(StopReason::improvement_stall);
    }
  }
}

MinimizeResult minimize(const std::function<double(const Vector&)>& objective,
                        const std::function<Vector(const Vector&)>& gradient, const Vector& x0,
                        const LbfgsConfig& config, double stall_tol, int patience) {
  ValueAndGradient fg = [&](const Vector& x, Vector& g) {
    g = gradient(x);
    return objective(x);
  };
  return minimize(fg, x0, config, stall_tol, patience);
}

}  // namespace attnreg::optim
