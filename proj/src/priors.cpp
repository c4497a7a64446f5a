#include "starparadox/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "starparadox/errors.hpp"
#include "starparadox/quadrature.hpp"

namespace starparadox {

namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr auto k_inf = std::numeric_limits<double>::infinity();

// Past this index the discrete series is summed by Euler-Maclaurin instead of term by term.
constexpr auto k_direct_limit = 1048576.0;  // 2^20

auto check_zs(double z, double s) -> void {
  require(z > 0.0 && z < 3.0, "z must lie in (0, 3)");
  require(s >= 0.0 && !std::isnan(s), "s must be nonnegative");
}

// Density of T_i for the kinds with exponential T_e of rate 4 (upper end of support in tmax).
struct Ti_density {
  double scale = 1.0;
  double tmax = k_inf;
  std::function<double(double)> f;
};

auto ti_density(const Prior_spec& spec) -> std::optional<Ti_density> {
  return std::visit(
      Overloaded{
          [](const Tame_smooth&) -> std::optional<Ti_density> { return std::nullopt; },
          [](const Discrete_ti&) -> std::optional<Ti_density> { return std::nullopt; },
          [](const Uniform_ti& p) -> std::optional<Ti_density> {
            auto theta = p.theta;
            return Ti_density{4.0 * theta, theta,
                              [theta](double t) { return t <= theta ? 1.0 / theta : 0.0; }};
          },
          [](const Power_ti& p) -> std::optional<Ti_density> {
            auto theta = p.theta;
            return Ti_density{4.0 / theta, 1.0, [theta](double t) {
                                return t <= 1.0 ? theta * std::pow(t, theta - 1.0) : 0.0;
                              }};
          },
          [](const Log_ti&) -> std::optional<Ti_density> {
            return Ti_density{4.0, 1.0, [](double t) { return t < 1.0 ? -std::log(t) : 0.0; }};
          },
          [](const Tlog_ti&) -> std::optional<Ti_density> {
            return Ti_density{4.0, 1.0,
                              [](double t) { return t < 1.0 ? -4.0 * t * std::log(t) : 0.0; }};
          },
      },
      spec.kind);
}

// Joint density of (T_e, T_i).
auto joint_density(const Prior_spec& spec, double te, double ti) -> double {
  if (auto* p = std::get_if<Tame_smooth>(&spec.kind)) {
    return p->rate_e * std::exp(-p->rate_e * te) * p->rate_i * std::exp(-p->rate_i * ti);
  }
  auto dens = ti_density(spec);
  require(dens.has_value(), "joint density unavailable for " + kind_name(spec));
  return 4.0 * std::exp(-4.0 * te) * dens->f(ti);
}

// sigma where T_i reaches tmax: z (1 - e^{-4 tmax}) / (1 + 2 e^{-4 tmax}).
auto sigma_of_ti(double z, double tmax) -> double {
  if (std::isinf(tmax)) {
    return z;
  }
  auto e = std::exp(-4.0 * tmax);
  return z * -std::expm1(-4.0 * tmax) / (1.0 + 2.0 * e);
}

auto discrete_delta(double b, double m) -> double {
  // m^{-b} - (m+1)^{-b} without cancellation.
  return std::pow(m, -b) * -std::expm1(-b * std::log1p(1.0 / m));
}

// phi(m) = exp(-4 m^{-a}) (m^{-b} - (m+1)^{-b}).
auto discrete_phi(const Discrete_ti& d, double m) -> double {
  return std::exp(-4.0 * std::pow(m, -d.a)) * discrete_delta(d.b, m);
}

// Sum over integers m >= first of phi(m), first >= 2^20, by Euler-Maclaurin.
auto discrete_phi_tail_em(const Discrete_ti& d, double first) -> double {
  auto integral = quad::exp_sinh([&](double y) {
                    auto x = first * std::exp(y);
                    return std::isfinite(x) ? discrete_phi(d, x) * x : 0.0;
                  }).value;
  auto h = first * 1e-3;
  auto dphi = (discrete_phi(d, first + h) - discrete_phi(d, first - h)) / (2.0 * h);
  return integral + 0.5 * discrete_phi(d, first) - dphi / 12.0;
}

auto discrete_phi_tail(const Discrete_ti& d, double first) -> double {
  if (first >= k_direct_limit) {
    return discrete_phi_tail_em(d, first);
  }
  auto sum = discrete_phi_tail_em(d, k_direct_limit);
  // smallest terms first
  for (auto m = k_direct_limit - 1.0; m >= first; m -= 1.0) {
    sum += discrete_phi(d, m);
  }
  return sum;
}

auto linear_slope(const std::vector<double>& x, const std::vector<double>& y) -> double {
  auto n = static_cast<double>(x.size());
  auto mx = 0.0;
  auto my = 0.0;
  for (auto i = std::size_t{0}; i != x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  auto sxy = 0.0;
  auto sxx = 0.0;
  for (auto i = std::size_t{0}; i != x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

auto draw_prior(const Prior_spec& spec, Rng& rng) -> Branch_lengths {
  auto exp4 = [&] { return -std::log(rng.uniform()) / 4.0; };
  return std::visit(
      Overloaded{
          [&](const Tame_smooth& p) {
            auto te = -std::log(rng.uniform()) / p.rate_e;
            auto ti = -std::log(rng.uniform()) / p.rate_i;
            return Branch_lengths{te, ti};
          },
          [&](const Discrete_ti& p) {
            auto te = exp4();
            // N with P(N = n) = n^{-b} - (n+1)^{-b}, kept with probability y_N / 3.
            for (;;) {
              auto n = std::floor(std::pow(rng.uniform(), -1.0 / p.b));
              if (3.0 * rng.uniform() < discrete_y(p, n)) {
                return Branch_lengths{te, std::pow(n, -p.a)};
              }
            }
          },
          [&](const Uniform_ti& p) {
            auto te = exp4();
            return Branch_lengths{te, p.theta * rng.uniform()};
          },
          [&](const Power_ti& p) {
            auto te = exp4();
            return Branch_lengths{te, std::pow(rng.uniform(), 1.0 / p.theta)};
          },
          [&](const Log_ti&) {
            auto te = exp4();
            auto u1 = rng.uniform();
            return Branch_lengths{te, u1 * rng.uniform()};
          },
          [&](const Tlog_ti&) {
            auto te = exp4();
            auto u1 = rng.uniform();
            return Branch_lengths{te, std::sqrt(u1 * rng.uniform())};
          },
      },
      spec.kind);
}

auto sample_prior(const Prior_spec& spec, std::uint64_t seed, std::int64_t count)
    -> std::vector<Branch_lengths> {
  validate(spec);
  require(count >= 1, "sample_prior: count must be >= 1");
  auto rng = Rng{substream_seed(seed, {0x5a17})};
  auto out = std::vector<Branch_lengths>{};
  out.reserve(static_cast<std::size_t>(count));
  for (auto k = std::int64_t{0}; k != count; ++k) {
    out.push_back(draw_prior(spec, rng));
  }
  return out;
}

auto h_aux(double u) -> double {
  require(u >= 0.0 && u <= 1.0, "h_aux: u must lie in [0, 1)");
  if (u == 1.0) {
    return k_inf;
  }
  return 0.25 * (std::log1p(2.0 * u) - std::log1p(-u));
}

auto h_normalization(const Prior_spec& spec) -> double {
  if (std::holds_alternative<Tame_smooth>(spec.kind) ||
      std::holds_alternative<Discrete_ti>(spec.kind)) {
    return 1.0;
  }
  return ti_density(spec)->scale;
}

auto s_saturation(const Prior_spec& spec, double z) -> double {
  validate(spec);
  check_zs(z, 0.0);
  auto x_limit = 0.5 * (3.0 - z);
  if (auto* d = std::get_if<Discrete_ti>(&spec.kind)) {
    auto n0 = discrete_index(*d, z, k_inf);
    auto y = discrete_y(*d, n0);
    return std::min(x_limit, z * (3.0 - y) / (2.0 * y));
  }
  if (std::holds_alternative<Tame_smooth>(spec.kind)) {
    return std::min(x_limit, z);
  }
  return std::min(x_limit, sigma_of_ti(z, ti_density(spec)->tmax));
}

auto h_function(const Prior_spec& spec, double z, double s) -> double {
  validate(spec);
  check_zs(z, s);
  if (auto* d = std::get_if<Discrete_ti>(&spec.kind)) {
    auto n = discrete_index(*d, z, s);
    return std::isinf(n) ? 0.0 : std::pow(n, -d->b);
  }
  auto m = std::min(s, s_saturation(spec, z));
  if (m <= 0.0) {
    return 0.0;
  }
  if (std::holds_alternative<Uniform_ti>(spec.kind)) {
    return -std::log1p(-m / z);
  }
  // z - sigma, measured from the upper end point when that end point is sigma = z
  auto gap = [&](double sigma, double sigma_c) {
    return m == z && sigma_c > 0.0 ? sigma_c : z - sigma;
  };
  if (auto* p = std::get_if<Tame_smooth>(&spec.kind)) {
    auto le = p->rate_e;
    auto li = p->rate_i;
    return quad::tanh_sinh_c(
               [&](double sigma, double sigma_c) {
                 auto d = gap(sigma, sigma_c);
                 if (d <= 0.0) {
                   return 0.0;
                 }
                 auto x = (z + 2.0 * sigma) / 3.0;
                 auto ratio = d / (z + 2.0 * sigma);  // e^{-4 t_i}
                 auto omega = le * std::pow(x, le / 4.0) * li * std::pow(ratio, li / 4.0);
                 return 3.0 * omega / (16.0 * d * (z + 2.0 * sigma));
               },
               0.0, m)
        .value;
  }
  auto dens = *ti_density(spec);
  return quad::tanh_sinh_c(
             [&](double sigma, double sigma_c) {
               auto d = gap(sigma, sigma_c);
               if (d <= 0.0) {
                 return 0.0;
               }
               auto ti = 0.25 * std::log1p(3.0 * sigma / d);
               if (ti <= 0.0) {
                 return 0.0;  // integrable singularity of the T_i density, measure zero
               }
               return dens.scale * dens.f(ti) / (4.0 * d);
             },
             0.0, m)
      .value;
}

auto h_function_generic(const Prior_spec& spec, double z, double s) -> double {
  validate(spec);
  check_zs(z, s);
  require(!std::holds_alternative<Discrete_ti>(spec.kind),
          "h_function_generic: discrete_ti has no density");
  auto m = std::min(s, s_saturation(spec, z));
  if (m <= 0.0) {
    return 0.0;
  }
  auto kappa = h_normalization(spec);
  // kappa * varpi(x, z/x) / x with varpi = omega / (16 x (y - 1)); e^{-4 t_i} = (y - 1) / 2 is
  // passed in precomputed form to keep accuracy at both ends.
  auto integrand = [&](double x, double ti, double x_y_minus_1) {
    auto te = -0.25 * std::log(x);
    return kappa * joint_density(spec, te, ti) / (16.0 * x_y_minus_1) / x;
  };
  auto lower = [&](double tau) {
    auto tau2 = tau * tau;
    if (!(tau2 < 2.0 * z / 3.0)) {
      return 0.0;
    }
    auto x = z / 3.0 + tau2;
    auto ti = 0.25 * (std::log1p(3.0 * tau2 / z) - std::log1p(-1.5 * tau2 / z));
    return integrand(x, ti, 2.0 * z / 3.0 - tau2) * 2.0 * tau;
  };

  auto x_end = (z + 2.0 * m) / 3.0;
  if (x_end < z) {
    return quad::adaptive_gk(lower, 0.0, std::sqrt(x_end - z / 3.0)).value;
  }
  // T_i unbounded and z <= 1: the density of S_i vanishes algebraically at x = z, so the upper
  // half is mapped by x = z - w^4.
  auto x_mid = 2.0 * z / 3.0;
  auto upper = [&](double w) {
    auto w4 = w * w * w * w;
    if (w4 == 0.0) {
      return 0.0;
    }
    auto x = z - w4;
    auto ti = -0.25 * std::log(w4 / (2.0 * x));
    return integrand(x, ti, w4) * 4.0 * w * w * w;
  };
  return quad::adaptive_gk(lower, 0.0, std::sqrt(x_mid - z / 3.0)).value +
         quad::adaptive_gk(upper, 0.0, std::pow(z - x_mid, 0.25)).value;
}

auto g_function(const Prior_spec& spec, double z, double s) -> double {
  auto s_sat = s_saturation(spec, z);
  if (s >= s_sat) {
    check_zs(z, s);
    return 1.0;
  }
  auto total = h_function(spec, z, s_sat);
  if (!(total > 0.0)) {
    throw Numerical_error{Numerical_error::Kind::underflow,
                          "g_function: H(z, s_sat) vanishes at z = " + std::to_string(z)};
  }
  return std::clamp(h_function(spec, z, s) / total, 0.0, 1.0);
}

auto discrete_y(const Discrete_ti& d, double n) -> double {
  return 1.0 + 2.0 * std::exp(-4.0 * std::pow(n, -d.a));
}

auto discrete_index(const Discrete_ti& d, double z, double s) -> double {
  check_zs(z, s);
  constexpr auto exact_limit = 9007199254740992.0;  // 2^53

  // n0: first n with z <= y_n.
  auto n0 = 1.0;
  if (z > discrete_y(d, 1.0)) {
    n0 = std::ceil(std::pow(-0.25 * std::log(0.5 * (z - 1.0)), -1.0 / d.a));
    if (n0 < exact_limit) {
      while (z > discrete_y(d, n0)) {
        n0 += 1.0;
      }
      while (n0 > 1.0 && z <= discrete_y(d, n0 - 1.0)) {
        n0 -= 1.0;
      }
    }
  }

  // n1: first n with 3z <= (2s + z) y_n.
  auto n1 = 1.0;
  if (s < z) {
    auto h = h_aux(s / z);
    if (h == 0.0) {
      return k_inf;
    }
    n1 = std::ceil(std::pow(h, -1.0 / d.a));
    if (n1 < exact_limit) {
      auto ok = [&](double n) { return 3.0 * z <= (2.0 * s + z) * discrete_y(d, n); };
      while (!ok(n1)) {
        n1 += 1.0;
      }
      while (n1 > 1.0 && ok(n1 - 1.0)) {
        n1 -= 1.0;
      }
    }
  }
  return std::max(n0, n1);
}

auto discrete_tail(const Discrete_ti& d, double first) -> double {
  require(first >= 1.0, "discrete_tail: first index must be >= 1");
  if (std::isinf(first)) {
    return 0.0;
  }
  first = std::ceil(first);
  return std::pow(first, -d.b) + 2.0 * discrete_phi_tail(d, first);
}

auto discrete_r(const Discrete_ti& d) -> double {
  // The direct part of the sum costs ~10^6 terms; remember the last parameters seen.
  struct Cached {
    double a = -1.0;
    double b = -1.0;
    double r = 0.0;
  };
  thread_local auto cache = Cached{};
  if (cache.a != d.a || cache.b != d.b) {
    cache = Cached{d.a, d.b, discrete_tail(d, 1.0)};
  }
  return cache.r;
}

auto discrete_atom_probability(const Discrete_ti& d, std::int64_t n) -> double {
  require(n >= 1, "discrete_atom_probability: n must be >= 1");
  auto m = static_cast<double>(n);
  return discrete_y(d, m) * discrete_delta(d.b, m) / discrete_r(d);
}

auto log_ti_cdf(const Prior_spec& spec, double x) -> double {
  require(x >= 0.0, "log_ti_cdf: x must be nonnegative");
  if (x == 0.0) {
    return -k_inf;
  }
  return std::visit(Overloaded{
                        [&](const Tame_smooth& p) { return std::log(-std::expm1(-p.rate_i * x)); },
                        [&](const Discrete_ti& p) {
                          auto first = std::ceil(std::pow(x, -1.0 / p.a));
                          return std::log(discrete_tail(p, first)) - std::log(discrete_r(p));
                        },
                        [&](const Uniform_ti& p) {
                          return x >= p.theta ? 0.0 : std::log(x / p.theta);
                        },
                        [&](const Power_ti& p) { return x >= 1.0 ? 0.0 : p.theta * std::log(x); },
                        [&](const Log_ti&) {
                          return x >= 1.0 ? 0.0 : std::log(x) + std::log1p(-std::log(x));
                        },
                        [&](const Tlog_ti&) {
                          return x >= 1.0 ? 0.0
                                          : 2.0 * std::log(x) + std::log1p(-2.0 * std::log(x));
                        },
                    },
                    spec.kind);
}

auto log_q_n(const Prior_spec& spec, double t, std::int64_t n) -> double {
  validate(spec);
  require(t > 0.0 && std::isfinite(t), "Q_n: t must be positive");
  require(n >= 1, "Q_n: n must be >= 1");
  auto rate_e = 4.0;
  if (auto* p = std::get_if<Tame_smooth>(&spec.kind)) {
    rate_e = p->rate_e;
  }
  auto inv_n = 1.0 / static_cast<double>(n);
  auto log_te = -rate_e * t + std::log(-std::expm1(-rate_e * inv_n));
  return log_ti_cdf(spec, inv_n) + log_te;
}

auto q_n_probability(const Prior_spec& spec, double t, std::int64_t n) -> double {
  return std::exp(log_q_n(spec, t, n));
}

auto to_string(Condition_status s) -> const char* {
  switch (s) {
    case Condition_status::satisfied:
      return "satisfied";
    case Condition_status::violated:
      return "violated";
    case Condition_status::inconclusive:
      return "inconclusive";
  }
  return "?";
}

auto power_of_two_grid(int lo, int hi) -> std::vector<std::int64_t> {
  auto out = std::vector<std::int64_t>{};
  for (auto k = lo; k <= hi; ++k) {
    out.push_back(std::int64_t{1} << k);
  }
  return out;
}

auto check_condition2(const std::function<double(std::int64_t)>& log_q,
                      const std::vector<std::int64_t>& n_grid) -> Condition2_result {
  require(n_grid.size() >= 4, "condition 2: need at least 4 grid points");
  require(std::is_sorted(n_grid.begin(), n_grid.end()) && n_grid.front() >= 1,
          "condition 2: n grid must be ascending and positive");
  require(n_grid.back() >= (std::int64_t{1} << 16), "condition 2: grid must reach 2^16");

  auto result = Condition2_result{};
  result.n_grid = n_grid;
  auto log_n = std::vector<double>{};
  for (auto n : n_grid) {
    auto lq = log_q(n);
    result.log_q.push_back(lq);
    log_n.push_back(std::log(static_cast<double>(n)));
    if (!std::isfinite(lq)) {
      return result;  // underflow before the end of the grid
    }
  }
  result.decay_exponent = -linear_slope(log_n, result.log_q);

  auto half = n_grid.size() / 2;
  auto tail_x = std::vector<double>(log_n.begin() + static_cast<std::ptrdiff_t>(half), log_n.end());
  auto tail_y = std::vector<double>{};
  for (auto i = half; i != n_grid.size(); ++i) {
    auto rate = std::abs(result.log_q[i]) / static_cast<double>(n_grid[i]);
    if (rate == 0.0) {
      rate = std::numeric_limits<double>::min();
    }
    tail_y.push_back(std::log(rate));
  }
  result.rate_slope = linear_slope(tail_x, tail_y);
  result.status =
      result.rate_slope < -0.25 ? Condition_status::satisfied : Condition_status::violated;
  return result;
}

auto check_condition2(const Prior_spec& spec, double t, const std::vector<std::int64_t>& n_grid)
    -> Condition2_result {
  return check_condition2([&](std::int64_t n) { return log_q_n(spec, t, n); }, n_grid);
}

}  // namespace starparadox
