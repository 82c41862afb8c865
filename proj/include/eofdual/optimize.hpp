#pragma once

#include "eofdual/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <future>
#include <optional>
#include <thread>
#include <vector>

namespace eofdual {

// Objectives here are callables  double f(const RealVector& x, RealVector& grad)
// returning the value to be MINIMIZED and writing its gradient.

struct LbfgsOptions {
  int max_iterations = 5000;
  int memory = 12;
  double gradient_tolerance = 1e-10;  // on max |grad|, relative to max(1, |f|)
  double value_tolerance = 1e-15;     // relative decrease below which a step counts as stalled
  int stall_iterations = 4;
};

struct LbfgsResult {
  RealVector x;
  double value = 0.0;
  int iterations = 0;
  double last_improvement = 0.0;
  bool converged = false;
};

namespace detail {

struct LinePoint {
  double alpha, value, slope;
};

inline double cubic_minimizer(const LinePoint& a, const LinePoint& b) {
  const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.slope * b.slope;
  const double lo = std::min(a.alpha, b.alpha), hi = std::max(a.alpha, b.alpha);
  if (disc < 0.0 || !std::isfinite(disc)) return 0.5 * (lo + hi);
  const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
  const double t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
  if (!std::isfinite(t)) return 0.5 * (lo + hi);
  const double margin = 0.1 * (hi - lo);
  return std::clamp(t, lo + margin, hi - margin);
}

/// Strong Wolfe line search (bracket + zoom).  Returns the accepted step or
/// nullopt when no decrease was found.
template <class F>
std::optional<LinePoint> wolfe_search(F& f, const RealVector& x, double f0, double slope0, const RealVector& dir,
                                      double alpha0, RealVector& x_out, RealVector& g_out) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  constexpr int max_evals = 40;
  auto eval = [&](double alpha) {
    x_out = x + alpha * dir;
    const double v = f(x_out, g_out);
    return LinePoint{alpha, std::isfinite(v) ? v : std::numeric_limits<double>::infinity(), g_out.dot(dir)};
  };
  LinePoint prev{0.0, f0, slope0};
  LinePoint lo{}, hi{};
  double alpha = alpha0;
  int evals = 0;
  bool bracketed = false;
  while (evals < max_evals) {
    LinePoint cur = eval(alpha);
    ++evals;
    if (!std::isfinite(cur.value) || cur.value > f0 + c1 * alpha * slope0 ||
        (evals > 1 && cur.value >= prev.value)) {
      lo = prev;
      hi = cur;
      bracketed = true;
      break;
    }
    if (std::abs(cur.slope) <= -c2 * slope0) return cur;
    if (cur.slope >= 0.0) {
      lo = cur;
      hi = prev;
      bracketed = true;
      break;
    }
    prev = cur;
    alpha *= 2.5;
  }
  if (!bracketed) return prev.alpha > 0.0 ? std::optional<LinePoint>(eval(prev.alpha)) : std::nullopt;
  while (evals < max_evals) {
    double a;
    if (std::isfinite(hi.value) && std::isfinite(hi.slope)) {
      a = cubic_minimizer(lo, hi);
    } else {
      a = 0.5 * (lo.alpha + hi.alpha);
    }
    LinePoint cur = eval(a);
    ++evals;
    if (!std::isfinite(cur.value) || cur.value > f0 + c1 * a * slope0 || cur.value >= lo.value) {
      hi = cur;
    } else {
      if (std::abs(cur.slope) <= -c2 * slope0) return cur;
      if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = cur;
    }
    if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) break;
  }
  if (lo.alpha > 0.0 && lo.value < f0) return eval(lo.alpha);
  return std::nullopt;
}

}  // namespace detail

/// Limited-memory BFGS minimization.
template <class F>
LbfgsResult minimize_lbfgs(F&& f, RealVector x, const LbfgsOptions& opt = {}) {
  LbfgsResult res;
  RealVector g(x.size());
  double fx = f(x, g);
  std::deque<RealVector> s_hist, y_hist;
  std::deque<double> rho_hist;
  RealVector x_new(x.size()), g_new(x.size());
  int stalled = 0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    const double scale = std::max(1.0, std::abs(fx));
    if (g.size() == 0 || g.cwiseAbs().maxCoeff() <= opt.gradient_tolerance * scale) {
      res.converged = true;
      break;
    }
    // two-loop recursion
    RealVector q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    RealVector dir = -q;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      slope = g.dot(dir);
    }
    const double alpha0 = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    auto step = detail::wolfe_search(f, x, fx, slope, dir, alpha0, x_new, g_new);
    if (!step && !s_hist.empty()) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      slope = g.dot(dir);
      step = detail::wolfe_search(f, x, fx, slope, dir, std::min(1.0, 1.0 / g.norm()), x_new, g_new);
    }
    if (!step) {
      res.converged = true;  // no descent direction left at working precision
      break;
    }
    const RealVector s = x_new - x;
    const RealVector y = g_new - g;
    const double improvement = fx - step->value;
    res.last_improvement = improvement;
    x = x_new;
    g = g_new;
    fx = step->value;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (improvement <= opt.value_tolerance * std::max(1.0, std::abs(fx))) {
      if (++stalled >= opt.stall_iterations) {
        res.converged = true;
        break;
      }
    } else {
      stalled = 0;
    }
  }
  res.x = std::move(x);
  res.value = fx;
  return res;
}

/// Central-difference gradient, for objectives whose analytic gradient is not worth deriving.
template <class Value>
double numeric_gradient(Value&& value, const RealVector& x, RealVector& grad, double step = 1e-6) {
  const double f0 = value(x);
  grad.resize(x.size());
  RealVector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = value(xp);
    xp(i) = x(i) - h;
    const double fm = value(xp);
    xp(i) = x(i);
    grad(i) = (fp - fm) / (2.0 * h);
  }
  return f0;
}

// ---------------------------------------------------------------------------
// restarts

struct RestartOptions {
  int restarts = 32;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Runs fn(index, sub_seed) for every restart and keeps the best candidate.
/// better(a, b) decides whether a strictly improves on b; ties keep the
/// lower restart index, so the merge is independent of completion order.
template <class Fn, class Better>
auto best_of_restarts(const RestartOptions& opt, Fn&& fn, Better&& better) {
  using Candidate = std::invoke_result_t<Fn&, int, std::uint64_t>;
  const int n = std::max(1, opt.restarts);
  std::vector<std::optional<Candidate>> results(n);
  if (opt.threads <= 1) {
    for (int i = 0; i < n; ++i) results[i].emplace(fn(i, derive_seed(opt.seed, i)));
  } else {
    std::vector<std::future<void>> jobs;
    const int workers = std::min(opt.threads, n);
    for (int w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (int i = w; i < n; i += workers) results[i].emplace(fn(i, derive_seed(opt.seed, i)));
      }));
    }
    for (auto& j : jobs) j.get();
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (better(*results[i], *results[best])) best = i;
  }
  return std::move(*results[best]);
}

// ---------------------------------------------------------------------------
// complex <-> real packing

inline RealVector pack(const Vector& v) {
  RealVector x(2 * v.size());
  x.head(v.size()) = v.real();
  x.tail(v.size()) = v.imag();
  return x;
}

inline Vector unpack(const RealVector& x) {
  const auto n = x.size() / 2;
  Vector v(n);
  v.real() = x.head(n);
  v.imag() = x.tail(n);
  return v;
}

inline RealVector pack(const Matrix& m) {
  const Vector v = Eigen::Map<const Vector>(m.data(), m.size());
  return pack(v);
}

inline Matrix unpack(const RealVector& x, Eigen::Index rows, Eigen::Index cols) {
  const Vector v = unpack(x);
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// ---------------------------------------------------------------------------
// unit sphere

/// A local maximum found on the unit sphere.
struct SphereMaximum {
  Vector point;
  double value = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Local ascent of F over unit vectors, starting from `start`.
///
/// `objective(psi, grad)` returns F(psi) for unit psi and writes the complex
/// gradient gamma with dF = Re<gamma, dpsi>.  The parameterization is
/// psi = v/|v| with a penalty pinning |v| near 1.
template <class Objective>
SphereMaximum maximize_on_sphere(Objective& objective, const Vector& start, const LbfgsOptions& opt = {}) {
  Vector grad_psi(start.size());
  auto f = [&](const RealVector& x, RealVector& grad) {
    const Vector v = unpack(x);
    const double r = v.norm();
    const Vector psi = v / r;
    const double value = objective(psi, grad_psi);
    const Complex overlap = psi.dot(grad_psi);
    Vector gv = -(grad_psi - overlap.real() * psi) / r;
    const double r2m1 = r * r - 1.0;
    gv += 2.0 * r2m1 * v;
    grad = pack(gv);
    return -value + 0.5 * r2m1 * r2m1;
  };
  const LbfgsResult res = minimize_lbfgs(f, pack(Vector(start / start.norm())), opt);
  SphereMaximum out;
  out.point = unpack(res.x);
  out.point /= out.point.norm();
  out.value = objective(out.point, grad_psi);
  out.iterations = res.iterations;
  out.converged = res.converged;
  return out;
}

}  // namespace eofdual
