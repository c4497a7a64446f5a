#include "starparadox/core_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "starparadox/errors.hpp"

namespace starparadox {

namespace {

auto saturating_exp_minus_4(double t) -> double {
  auto e = std::exp(-4.0 * t);
  return e < k_saturation_threshold ? 0.0 : e;
}

// Smallest root in [0, 1/2] of 3x^2 - 2x^3 = c, for c in [0, 1/2].
auto solve_cubic_branch(double c) -> double {
  if (c <= 0.0) {
    return 0.0;
  }
  auto w = std::sqrt(c);
  auto x = w / std::numbers::sqrt3 + w * w / 9.0 + 5.0 * w * w * w / (54.0 * std::numbers::sqrt3) +
           8.0 * w * w * w * w / 243.0;
  auto lo = 0.0;
  auto hi = 0.5;
  if (!(x > lo && x < hi)) {
    x = 0.25;
  }
  for (auto iter = 0; iter != 100; ++iter) {
    auto f = x * x * (3.0 - 2.0 * x) - c;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    auto df = 6.0 * x * (1.0 - x);
    auto next = df > 0.0 ? x - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * next) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace

auto validate(const Branch_lengths& bl) -> void {
  require(std::isfinite(bl.t_e) && std::isfinite(bl.t_i), "branch lengths must be finite");
  require(bl.t_e >= 0.0 && bl.t_i >= 0.0, "branch lengths must be nonnegative");
}

auto validate(const Pattern_counts& counts) -> void {
  for (auto x : counts.n) {
    require(x >= 0, "pattern counts must be nonnegative");
  }
  require(counts.total() >= 1, "pattern counts must have total >= 1");
}

auto pattern_probs(const Branch_lengths& bl) -> Pattern_probs {
  validate(bl);
  auto ee = saturating_exp_minus_4(bl.t_e);
  auto one_minus_ee = bl.t_e == 0.0 ? 0.0 : -std::expm1(-4.0 * bl.t_e);
  auto one_minus_ei = -std::expm1(-4.0 * bl.t_i);
  auto ei = std::exp(-4.0 * bl.t_i);

  auto p2 = 0.25 * one_minus_ee;
  auto p1 = 0.25 * one_minus_ee + 0.5 * ee * one_minus_ei;
  auto p0 = 0.25 * (1.0 + ee + 2.0 * ee * ei);
  return Pattern_probs{p0, p1, p2};
}

auto log_pattern_probs(const Branch_lengths& bl) -> Log_pattern_probs {
  auto p = pattern_probs(bl);
  auto lp0 = p.p0() > 0.5 ? std::log1p(-(p.p1() + 2.0 * p.p2())) : std::log(p.p0());
  auto lp2 = bl.t_e == 0.0 ? -std::numeric_limits<double>::infinity()
                           : std::log(-std::expm1(-4.0 * bl.t_e)) - 2.0 * std::numbers::ln2;
  auto lp1 = std::log(p.p1());
  return {lp0, lp1, lp2};
}

auto star_probs(double t) -> Pattern_probs {
  require(std::isfinite(t) && t > 0.0, "star branch length t must be positive and finite");
  return pattern_probs({.t_e = t, .t_i = 0.0});
}

auto band_half_width(double t) -> double {
  require(std::isfinite(t) && t > 0.0, "t must be positive and finite");
  auto e = std::exp(-4.0 * t);
  return 3.0 * e * -std::expm1(-4.0 * t);
}

auto band_interval(double t) -> Interval {
  require(std::isfinite(t) && t > 0.0, "t must be positive and finite");
  auto e = std::exp(-4.0 * t);
  // center 3e, half-width 3e(1-e): the end points simplify to 3e^2 and 3e(2-e).
  auto result = Interval{.lo = 3.0 * e * e, .hi = 3.0 * e * (2.0 - e)};
  if (!(result.lo > 0.0 && result.hi < 3.0)) {
    throw Numerical_error{Numerical_error::Kind::underflow,
                          "band interval degenerates for t = " + std::to_string(t)};
  }
  return result;
}

auto delta_stats(const Pattern_counts& counts, double t) -> Delta_stats {
  validate(counts);
  auto q0 = star_probs(t).p0();
  auto n = static_cast<double>(counts.total());
  auto root_n = std::sqrt(n);
  auto mean_off = static_cast<double>(counts.total() - counts[0]) / 3.0;
  return Delta_stats{
      .d0 = (static_cast<double>(counts[0]) - q0 * n) / root_n,
      .d1 = (static_cast<double>(counts[1]) - mean_off) / root_n,
      .d2 = (static_cast<double>(counts[2]) - mean_off) / root_n,
      .d3 = (static_cast<double>(counts[3]) - mean_off) / root_n,
  };
}

auto in_band_fc(const Pattern_counts& counts, double c, double t) -> bool {
  require(c > 1.0, "F_c requires c > 1");
  auto d = delta_stats(counts, t);
  auto inside = -2.0 * c <= d.d2 && d.d2 <= -c && -2.0 * c <= d.d3 && d.d3 <= -c && -c <= d.d0 &&
                d.d0 <= 0.0;
  if (inside) {
    auto slack = 1e-9 * c;
    if (!(2.0 * c - slack <= d.d1 && d.d1 <= 4.0 * c + slack)) {
      throw std::logic_error{"F_c member with d1 outside [2c, 4c]"};
    }
  }
  return inside;
}

auto make_fc_counts(std::int64_t n, double c, double t) -> Pattern_counts {
  require(n >= 1, "n must be >= 1");
  require(c > 1.0, "F_c requires c > 1");
  auto q0 = star_probs(t).p0();
  auto root_n = std::sqrt(static_cast<double>(n));
  auto n0 = std::llround(q0 * static_cast<double>(n) - 0.5 * c * root_n);
  auto mean_off = static_cast<double>(n - n0) / 3.0;
  auto n2 = std::llround(mean_off - 1.5 * c * root_n);
  auto counts = Pattern_counts{{n0, n - n0 - 2 * n2, n2, n2}};
  for (auto x : counts.n) {
    require(x >= 0, "cannot place counts inside F_c for n = " + std::to_string(n));
  }
  require(in_band_fc(counts, c, t), "rounded counts fall outside F_c for n = " + std::to_string(n));
  return counts;
}

auto zeta(double u) -> double {
  require(u >= 0.0 && u <= 1.0, "zeta is defined on [0, 1]");
  return (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
}

auto zeta_inv(double v) -> double {
  require(v >= 0.0 && v <= 1.0, "zeta_inv is defined on [0, 1]");
  // zeta(u) = phi(1 - u) and 1 - zeta(u) = phi(u) with phi(x) = 3x^2 - 2x^3; solve on the branch
  // where the unknown is small so that the result keeps full relative precision.
  if (v >= 0.5) {
    return solve_cubic_branch(1.0 - v);
  }
  return 1.0 - solve_cubic_branch(v);
}

auto zeta_inv_gap(double w) -> double {
  require(w >= 0.0 && w <= 1.0, "zeta_inv_gap is defined on [0, 1]");
  if (w <= 0.5) {
    return solve_cubic_branch(w);
  }
  return 1.0 - solve_cubic_branch(1.0 - w);
}

auto kl_divergence(std::span<const double> q, std::span<const double> p) -> double {
  require(q.size() == p.size() && !q.empty(), "kl_divergence needs vectors of equal length");
  auto sum_q = 0.0;
  auto sum_p = 0.0;
  for (auto i = std::size_t{0}; i != q.size(); ++i) {
    require(q[i] >= 0.0 && p[i] >= 0.0, "probabilities must be nonnegative");
    sum_q += q[i];
    sum_p += p[i];
  }
  require(std::abs(sum_q - 1.0) < 1e-9 && std::abs(sum_p - 1.0) < 1e-9,
          "kl_divergence needs probability vectors");
  auto d = 0.0;
  for (auto i = std::size_t{0}; i != q.size(); ++i) {
    if (q[i] == 0.0) {
      continue;
    }
    if (p[i] == 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    d += q[i] * std::log(q[i] / p[i]);
  }
  return d < 0.0 ? 0.0 : d;
}

auto kl_divergence(const Pattern_probs& q, const Pattern_probs& p) -> double {
  auto qa = q.as_array();
  auto pa = p.as_array();
  return kl_divergence(std::span<const double>{qa}, std::span<const double>{pa});
}

}  // namespace starparadox
