#include "starparadox/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "starparadox/core_model.hpp"
#include "starparadox/errors.hpp"
#include "starparadox/parallel.hpp"
#include "starparadox/priors.hpp"
#include "starparadox/quadrature.hpp"

namespace starparadox {

namespace {

constexpr double k_inf = std::numeric_limits<double>::infinity();

// Gap w = 1 - v at y for the moment of order t: v = e^{-y/t}.
auto gap_at(double y, double t) -> double {
  return t == 0.0 ? 1.0 : -std::expm1(-y / t);
}

// int_0^inf fn(y) dy, split at the given break points.
template <typename F>
auto split_integral(F&& fn, std::vector<double> breaks) -> double {
  std::sort(breaks.begin(), breaks.end());
  auto total = 0.0;
  auto lo = 0.0;
  for (auto b : breaks) {
    if (!(b > lo) || !std::isfinite(b)) {
      continue;
    }
    total += quad::tanh_sinh(fn, lo, b, 1e-13, 1e-10).value;
    lo = b;
  }
  total += quad::exp_sinh([&](double x) { return fn(lo + x); }, 1e-13, 1e-10).value;
  return total;
}

auto breaks_for(const V_dist& d, double t) -> std::vector<double> {
  auto out = std::vector<double>{};
  if (t == 0.0) {
    return out;
  }
  for (auto w : d.kinks) {
    if (w > 0.0 && w < 1.0) {
      out.push_back(-t * std::log1p(-w));
    }
  }
  return out;
}

auto require_t(double t) -> void {
  require(std::isfinite(t) && t >= 0.0, "t must be a nonnegative real");
}

// Gamma(a) / Gamma(a + delta).
auto gdr(double a, double delta) -> double {
  if (delta == 0.0) {
    return 1.0;
  }
  return boost::math::tgamma_delta_ratio(a, delta);
}

auto frac(double t) -> double { return t - std::floor(t); }

// t B(t, alpha + eps + 1) written with the factors of the closed form.
auto m_term_product(double t, double alpha, double eps) -> double {
  auto c = 1.0 / gdr(alpha + 1.0, eps);  // Gamma(alpha + eps + 1) / Gamma(alpha + 1)
  return c * lambda_fn(eps, t, alpha) * product_p(eps, t, alpha) * (t + alpha + eps + 1.0) /
         (t + alpha + 1.0);
}

auto trailing_threshold(const std::vector<double>& t, const std::vector<double>& v, double alpha)
    -> std::optional<double> {
  auto idx = v.size();
  while (idx > 0 && v[idx - 1] >= alpha) {
    --idx;
  }
  if (idx == v.size()) {
    return std::nullopt;
  }
  return t[idx];
}

auto validate_grid(const std::vector<double>& t_grid) -> void {
  require(t_grid.size() >= 2, "t_grid needs at least two points");
  require(t_grid.front() > 0.0, "t_grid must be positive");
  require(std::adjacent_find(t_grid.begin(), t_grid.end(),
                             [](double a, double b) { return !(a < b); }) == t_grid.end(),
          "t_grid must be strictly ascending");
  require(t_grid.back() / t_grid.front() >= 1e3 * (1.0 - 1e-12),
          "t_grid must span at least three decades");
}

}  // namespace

auto uniform01() -> V_dist {
  return {"uniform01", [](double w) { return w; }, {}};
}

auto point_mass_one() -> V_dist {
  return {"one", [](double) { return 1.0; }, {}};
}

auto beta_tail(double a) -> V_dist {
  require(std::isfinite(a) && a > 0.0, "beta tail exponent must be positive");
  return {"beta:" + std::to_string(a), [a](double w) { return std::pow(w, a); }, {}};
}

auto linear_density() -> V_dist {
  return {"linear", [](double w) { return w * (2.0 - w); }, {}};
}

auto zeta_u_dist(const Prior_spec& spec, double z) -> V_dist {
  validate(spec);
  require(z > 0.0 && z < 3.0, "z must lie in (0, 3)");
  auto half = 0.5 * (3.0 - z);
  auto tail = [spec, z, half](double w) {
    if (w <= 0.0) {
      return 0.0;
    }
    return g_function(spec, z, half * zeta_inv_gap(std::min(w, 1.0)));
  };
  auto kinks = std::vector<double>{};
  auto u_sat = s_saturation(spec, z) / half;
  if (u_sat < 1.0) {
    kinks.push_back(1.0 - zeta(u_sat));
  }
  return {"zeta_u(" + kind_name(spec) + ", z=" + std::to_string(z) + ")", tail, kinks};
}

auto v_dist_from_name(const std::string& name) -> V_dist {
  if (name == "uniform01") {
    return uniform01();
  }
  if (name == "one") {
    return point_mass_one();
  }
  if (name == "linear") {
    return linear_density();
  }
  if (name.rfind("beta:", 0) == 0) {
    auto a = 0.0;
    try {
      a = std::stod(name.substr(5));
    } catch (const std::exception&) {
      throw Validation_error{"bad beta exponent in '" + name + "'"};
    }
    return beta_tail(a);
  }
  throw Validation_error{"unknown distribution '" + name +
                         "' (expected uniform01, one, linear or beta:<a>)"};
}

auto moment_mt(const V_dist& dist, double t) -> double {
  require_t(t);
  if (t == 0.0) {
    return 1.0;
  }
  auto fn = [&](double y) { return std::exp(-y) * dist.tail(gap_at(y, t)); };
  return split_integral(fn, breaks_for(dist, t));
}

auto moment_gap(const V_dist& dist, double t) -> double {
  require_t(t);
  auto fn = [&](double y) {
    return std::exp(-y) * (dist.tail(gap_at(y, t)) - dist.tail(gap_at(y, t + 1.0)));
  };
  auto breaks = breaks_for(dist, t);
  auto more = breaks_for(dist, t + 1.0);
  breaks.insert(breaks.end(), more.begin(), more.end());
  return split_integral(fn, breaks);
}

auto ratio_rt(const V_dist& dist, double t) -> double {
  auto m = moment_mt(dist, t);
  if (!(m > 1e-300)) {
    throw Numerical_error{Numerical_error::Kind::underflow,
                          "M_t underflows at t = " + std::to_string(t)};
  }
  return std::clamp(moment_gap(dist, t) / m, 0.0, 1.0);
}

auto moment_curve(const V_dist& dist, const std::vector<double>& t_grid, int jobs)
    -> std::vector<Moment_row> {
  auto rows = std::vector<Moment_row>(t_grid.size());
  parallel_for(static_cast<std::int64_t>(t_grid.size()), jobs, [&](std::int64_t k) {
    auto t = t_grid[static_cast<std::size_t>(k)];
    auto& r = rows[static_cast<std::size_t>(k)];
    r.t = t;
    r.m_t = moment_mt(dist, t);
    r.m_t1 = moment_mt(dist, t + 1.0);
    r.r_t = ratio_rt(dist, t);
    r.two_t_r_t = 2.0 * t * r.r_t;
  });
  return rows;
}

auto geometric_t_grid(double lo, double hi, int per_decade) -> std::vector<double> {
  require(lo > 0.0 && hi > lo, "need 0 < lo < hi");
  require(per_decade >= 1, "per_decade must be >= 1");
  auto steps = static_cast<int>(std::ceil(per_decade * std::log10(hi / lo) - 1e-9));
  auto out = std::vector<double>{};
  for (auto k = 0; k <= steps; ++k) {
    out.push_back(std::min(hi, lo * std::pow(10.0, static_cast<double>(k) / per_decade)));
  }
  out.back() = hi;
  return out;
}

auto Sm_params::gamma_sum() const -> double {
  auto s = 0.0;
  for (auto g : gamma) {
    s += std::abs(g);
  }
  return s;
}

auto validate(const Sm_params& p) -> void {
  require(std::isfinite(p.alpha) && p.alpha > 0.0, "alpha must be positive");
  require(p.eps.size() >= 2, "need eps_0 and at least eps_1");
  require(p.gamma.size() == p.eps.size(), "gamma and eps must have the same length");
  require(p.eps.front() == 0.0, "eps_0 must be 0");
  for (auto i = std::size_t{1}; i < p.eps.size(); ++i) {
    require(p.eps[i] > p.eps[i - 1], "eps must be strictly increasing");
  }
  auto n = p.eps.size() - 1;
  require(p.eps[n] > 1.0, "eps_n must exceed 1");
  require(n < 2 || p.eps[n - 1] <= 1.0, "eps_{n-1} must not exceed 1");
  require(p.gamma.back() >= 0.0, "gamma_n must be nonnegative");
  for (auto g : p.gamma) {
    require(std::isfinite(g), "gamma must be finite");
  }
  require(p.v0 >= 0.0 && p.v0 < 1.0, "v0 must lie in [0, 1)");
}

auto lambda_fn(double eps, double t, double alpha) -> double {
  require(alpha > 0.0 && eps >= 0.0, "need alpha > 0 and eps >= 0");
  require_t(t);
  return gdr(frac(t) + alpha + 1.0, eps);
}

auto product_p(double eps, double t, double alpha) -> double {
  require(alpha > 0.0 && eps >= 0.0, "need alpha > 0 and eps >= 0");
  require_t(t);
  return gdr(t + alpha + 2.0, eps) / gdr(frac(t) + alpha + 1.0, eps);
}

auto q_alpha(double t, double alpha) -> double {
  require(alpha > 0.0, "alpha must be positive");
  require_t(t);
  auto fa = frac(alpha);
  auto first = t + fa;
  if (first == 0.0) {
    return 0.0;
  }
  // Gamma(t + alpha + 1) / Gamma(t + {alpha}) / Gamma(alpha + 1)
  return 1.0 / (gdr(first, std::floor(alpha) + 1.0) * std::tgamma(alpha + 1.0));
}

auto beta_fn(double x, double y) -> double {
  require(x > 0.0 && y > 0.0, "beta needs positive arguments");
  return boost::math::beta(x, y);
}

auto t_beta(double t, double alpha) -> double {
  require(alpha > 0.0, "alpha must be positive");
  require_t(t);
  return std::exp(std::lgamma(alpha + 1.0)) * gdr(t + 1.0, alpha);
}

auto chi_pm(const Sm_params& p, double t, int sign) -> double {
  validate(p);
  require(sign == 1 || sign == -1, "sign must be +1 or -1");
  auto n = p.n();
  auto s = 0.0;
  for (auto i = 0; i < n; ++i) {
    s += p.gamma[i] * lambda_fn(p.eps[i], t, p.alpha) * product_p(p.eps[i], t, p.alpha);
  }
  s += sign * p.gamma[n] * lambda_fn(p.eps[n], t, p.alpha) * product_p(p.eps[n], t, p.alpha);
  return s;
}

auto m_pm_quadrature(const Sm_params& p, double t, int sign) -> double {
  validate(p);
  require(sign == 1 || sign == -1, "sign must be +1 or -1");
  require(t > 0.0, "t must be positive");
  auto n = p.n();
  auto f = [&](double w) {
    auto s = 0.0;
    for (auto i = 0; i < n; ++i) {
      s += p.gamma[i] * std::pow(w, p.alpha + p.eps[i]);
    }
    return s + sign * p.gamma[n] * std::pow(w, p.alpha + p.eps[n]);
  };
  auto fn = [&](double y) { return std::exp(-y) * f(gap_at(y, t)); };
  return split_integral(fn, {});
}

auto m_pm_product(const Sm_params& p, double t, int sign) -> double {
  validate(p);
  require(sign == 1 || sign == -1, "sign must be +1 or -1");
  require(t > 0.0, "t must be positive");
  auto n = p.n();
  auto s = 0.0;
  for (auto i = 0; i < n; ++i) {
    s += p.gamma[i] * m_term_product(t, p.alpha, p.eps[i]);
  }
  s += sign * p.gamma[n] * m_term_product(t, p.alpha, p.eps[n]);
  return t_beta(t, p.alpha) * s;
}

auto kappa_t(const Sm_params& p, double t) -> double {
  validate(p);
  return p.v0 * q_alpha(t + 1.0, p.alpha) + p.gamma_sum() * q_alpha(t, p.alpha);
}

auto s_sum(double eps, double t, double alpha) -> double {
  require_t(t);
  auto top = static_cast<std::int64_t>(std::floor(t)) + 1;
  auto ft = frac(t);
  auto s = 0.0;
  for (auto l = top; l >= 1; --l) {
    s += eps / (alpha + eps + ft + static_cast<double>(l));
  }
  return s;
}

auto t_sum(double eps, double t, double alpha) -> double {
  require_t(t);
  auto top = static_cast<std::int64_t>(std::floor(t)) + 1;
  auto ft = frac(t);
  auto s = 0.0;
  for (auto l = top; l >= 1; --l) {
    auto x = eps / (alpha + eps + ft + static_cast<double>(l));
    s += x * x;
  }
  return s;
}

auto c_plus(double eps, double alpha) -> double {
  return std::pow(alpha + eps + 3.0, eps);
}

auto c_minus(double eps, double alpha) -> double {
  return std::pow((alpha + eps) / (alpha + eps + 2.0), eps) * std::exp(-eps * eps / (alpha + eps));
}

auto lemma_chi_check(const Sm_params& p, const std::vector<double>& t_grid) -> Chi_check {
  validate(p);
  auto n = p.n();
  auto r = Chi_check{};
  for (auto i = 1; i <= n; ++i) {
    r.c = std::max(r.c, c_plus(p.eps[i], p.alpha));
  }
  r.beta = std::min(p.eps[n], 1.0 + p.eps[1]);
  r.max_upper_violation = -k_inf;
  r.max_lower_violation = -k_inf;
  auto g = p.gamma_sum();
  for (auto t : t_grid) {
    require(t >= 1.0, "the bounds are stated for t >= 1");
    auto up = chi_pm(p, t + 1.0, 1);
    auto lo = chi_pm(p, t, -1);
    auto bound = (2.0 * p.gamma[n] + p.eps[n] * g) * r.c * std::pow(t, -r.beta);
    r.max_upper_violation = std::max(r.max_upper_violation, up - lo - bound);
    r.max_lower_violation =
        std::max(r.max_lower_violation, -r.c * g * std::pow(t, -p.eps[1]) - lo);
  }
  return r;
}

auto r_lower_bound(const Sm_params& p, double t) -> double {
  validate(p);
  auto g = p.gamma_sum();
  auto num = m_pm_product(p, t + 1.0, 1) + (1.0 + g) * std::pow(p.v0, t + 1.0);
  auto den = m_pm_product(p, t, -1) - g * std::pow(p.v0, t);
  if (!(den > 0.0)) {
    return -k_inf;
  }
  return 1.0 - num / den;
}

auto sm_threshold_scan(const V_dist& dist, double alpha, const std::vector<double>& t_grid,
                       int jobs) -> Threshold_result {
  require(alpha > 0.0, "alpha must be positive");
  validate_grid(t_grid);
  auto rows = moment_curve(dist, t_grid, jobs);
  auto r = Threshold_result{};
  for (const auto& row : rows) {
    r.t.push_back(row.t);
    r.two_t_r.push_back(row.two_t_r_t);
  }
  r.t_star = trailing_threshold(r.t, r.two_t_r, alpha);
  return r;
}

auto sm_threshold_scan(const Sm_params& params, double alpha, const std::vector<double>& t_grid)
    -> Threshold_result {
  validate(params);
  require(alpha > 0.0, "alpha must be positive");
  validate_grid(t_grid);
  auto r = Threshold_result{};
  for (auto t : t_grid) {
    r.t.push_back(t);
    r.two_t_r.push_back(2.0 * t * r_lower_bound(params, t));
  }
  r.t_star = trailing_threshold(r.t, r.two_t_r, alpha);
  return r;
}

}  // namespace starparadox
