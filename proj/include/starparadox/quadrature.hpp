#pragma once

// Thin wrappers over Boost.Math quadrature that count evaluations, enforce the evaluation cap
// and turn non-convergence into Numerical_error carrying the achieved error estimate.

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <queue>
#include <sstream>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "starparadox/errors.hpp"

namespace starparadox::quad {

inline constexpr std::int64_t k_max_evaluations = 1'000'000;

struct Result {
  double value = 0.0;
  double error = 0.0;
  std::int64_t evaluations = 0;
};

namespace detail {

inline auto fail(const std::string& what, const Result& r) -> void {
  auto os = std::ostringstream{};
  os.precision(6);
  os << what << ": value " << r.value << ", achieved error estimate " << r.error << " after "
     << r.evaluations << " evaluations";
  throw Numerical_error{Numerical_error::Kind::quadrature, os.str()};
}

inline auto check(const char* name, const Result& r, double accept_abs, double accept_rel)
    -> Result {
  if (!std::isfinite(r.value)) {
    fail(std::string{name} + " produced a non-finite value", r);
  }
  if (r.evaluations > k_max_evaluations) {
    fail(std::string{name} + " exceeded the evaluation cap", r);
  }
  if (!(r.error <= accept_abs + accept_rel * std::abs(r.value))) {
    fail(std::string{name} + " did not converge", r);
  }
  return r;
}

}  // namespace detail

// Double-exponential rule on a finite interval; robust to integrable end point singularities.
template <typename F>
auto tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-13, double accept_rel = 1e-7)
    -> Result {
  auto r = Result{};
  if (a == b) {
    return r;
  }
  static thread_local auto integrator = boost::math::quadrature::tanh_sinh<double>{};
  auto counted = [&](double x) {
    ++r.evaluations;
    return f(x);
  };
  r.value = integrator.integrate(counted, a, b, rel_tol, &r.error);
  // Boost reports the error of the integral mapped onto [-1, 1]; scale it back.
  r.error *= 0.5 * std::abs(b - a);
  return detail::check("tanh-sinh quadrature", r, 1e-300, accept_rel);
}

// As tanh_sinh, for integrands f(x, xc) that also take the signed distance xc to the nearest
// end point (a - x near a, b - x near b), for singularities that need it.
template <typename F>
auto tanh_sinh_c(F&& f, double a, double b, double rel_tol = 1e-13, double accept_rel = 1e-7)
    -> Result {
  auto r = Result{};
  if (a == b) {
    return r;
  }
  static thread_local auto integrator = boost::math::quadrature::tanh_sinh<double>{};
  auto counted = [&](double x, double xc) {
    ++r.evaluations;
    return f(x, xc);
  };
  r.value = integrator.integrate(counted, a, b, rel_tol, &r.error);
  // Boost reports the error of the integral mapped onto [-1, 1]; scale it back.
  r.error *= 0.5 * std::abs(b - a);
  return detail::check("tanh-sinh quadrature", r, 1e-300, accept_rel);
}

// Globally adaptive Gauss-Kronrod (7/15): the subinterval with the largest error estimate is
// bisected until the summed estimate meets max(abs_tol, rel_tol |I|) or the evaluation cap hits.
template <typename F>
auto adaptive_gk(F&& f, double a, double b, double abs_tol = 1e-10, double rel_tol = 1e-12)
    -> Result {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  struct Piece {
    double a;
    double b;
    double value;
    double error;
    auto operator<(const Piece& o) const -> bool { return error < o.error; }
  };
  auto r = Result{};
  if (a == b) {
    return r;
  }
  auto counted = [&](double x) {
    ++r.evaluations;
    return f(x);
  };
  auto eval = [&](double lo, double hi) {
    auto p = Piece{lo, hi, 0.0, 0.0};
    p.value = Rule::integrate(counted, lo, hi, 0, 0.0, &p.error);
    return p;
  };
  auto heap = std::priority_queue<Piece>{};
  heap.push(eval(a, b));
  r.value = heap.top().value;
  r.error = heap.top().error;
  while (r.error > std::max(abs_tol, rel_tol * std::abs(r.value))) {
    if (r.evaluations + 30 > k_max_evaluations) {
      detail::fail("adaptive Gauss-Kronrod quadrature hit the evaluation cap", r);
    }
    auto worst = heap.top();
    heap.pop();
    auto mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      detail::fail("adaptive Gauss-Kronrod quadrature ran out of resolution", r);
    }
    auto left = eval(worst.a, mid);
    auto right = eval(mid, worst.b);
    r.value += left.value + right.value - worst.value;
    r.error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    if (heap.size() % 64 == 0) {
      // re-sum from scratch now and then to keep rounding out of the running totals
      auto copy = heap;
      r.value = 0.0;
      r.error = 0.0;
      while (!copy.empty()) {
        r.value += copy.top().value;
        r.error += copy.top().error;
        copy.pop();
      }
    }
  }
  return detail::check("adaptive Gauss-Kronrod quadrature", r, abs_tol, rel_tol);
}

// Integral over [0, infinity) of an integrand decaying at infinity.
template <typename F>
auto exp_sinh(F&& f, double rel_tol = 1e-13, double accept_rel = 1e-9) -> Result {
  auto r = Result{};
  static thread_local auto integrator = boost::math::quadrature::exp_sinh<double>{};
  auto counted = [&](double x) {
    ++r.evaluations;
    return f(x);
  };
  r.value = integrator.integrate(counted, rel_tol, &r.error);
  return detail::check("exp-sinh quadrature", r, 1e-300, accept_rel);
}

}  // namespace starparadox::quad
