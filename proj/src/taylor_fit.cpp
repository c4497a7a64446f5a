#include "starparadox/taylor_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "starparadox/core_model.hpp"
#include "starparadox/errors.hpp"

namespace starparadox {

namespace {

struct Lsq {
  Eigen::VectorXd coeffs;
  Eigen::VectorXd residual;
  Eigen::VectorXd stderr_;
  double rel_rms = 0.0;
};

// Least squares for A c ~ 1 where row k of A is basis_j(x_k) / g_k, i.e. relative residuals.
auto weighted_lsq(const Eigen::MatrixXd& a) -> Lsq {
  auto ones = Eigen::VectorXd::Ones(a.rows());
  // Scale columns to unit norm so the SVD sees a well balanced matrix.
  auto norms = a.colwise().norm().eval();
  auto scaled = a.array().rowwise() / norms.array();
  auto svd = Eigen::JacobiSVD<Eigen::MatrixXd>{scaled.matrix(), Eigen::ComputeThinU | Eigen::ComputeThinV};
  auto y = svd.solve(ones).eval();
  auto out = Lsq{};
  out.coeffs = (y.array() / norms.transpose().array()).matrix();
  out.residual = a * out.coeffs - ones;
  out.rel_rms = std::sqrt(out.residual.squaredNorm() / static_cast<double>(a.rows()));

  auto dof = std::max<Eigen::Index>(1, a.rows() - a.cols());
  auto sigma2 = out.residual.squaredNorm() / static_cast<double>(dof);
  auto v = svd.matrixV();
  auto sv = svd.singularValues();
  out.stderr_ = Eigen::VectorXd::Zero(a.cols());
  for (auto i = Eigen::Index{0}; i != a.cols(); ++i) {
    auto var = 0.0;
    for (auto j = Eigen::Index{0}; j != sv.size(); ++j) {
      if (sv(j) > 0.0) {
        var += (v(i, j) / sv(j)) * (v(i, j) / sv(j));
      }
    }
    out.stderr_(i) = std::sqrt(sigma2 * var) / norms(i);
  }
  return out;
}

struct Scaled_data {
  std::vector<double> x;  // s / s_max
  std::vector<double> g;
  double s_max = 1.0;
};

auto scale_data(const std::vector<double>& s, const std::vector<double>& g) -> Scaled_data {
  require(s.size() == g.size(), "fit: s and g must have the same length");
  require(s.size() >= 16, "fit: need at least 16 grid points");
  require(std::is_sorted(s.begin(), s.end()) && s.front() > 0.0, "fit: s grid must be ascending");
  require(s.back() / s.front() >= 1e4 * (1.0 - 1e-9), "fit: s grid must span at least 4 decades");
  auto out = Scaled_data{};
  out.s_max = s.back();
  for (auto i = std::size_t{0}; i != s.size(); ++i) {
    if (!(g[i] > 0.0) || !std::isfinite(g[i])) {
      throw Numerical_error{Numerical_error::Kind::degenerate_estimate,
                            "fit: G must be positive on the s grid"};
    }
    out.x.push_back(s[i] / out.s_max);
    out.g.push_back(g[i]);
  }
  return out;
}

auto power_lsq(const Scaled_data& d, double alpha, const std::vector<double>& eps) -> Lsq {
  auto a = Eigen::MatrixXd(static_cast<Eigen::Index>(d.x.size()), static_cast<Eigen::Index>(eps.size()));
  for (auto k = std::size_t{0}; k != d.x.size(); ++k) {
    for (auto j = std::size_t{0}; j != eps.size(); ++j) {
      a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
          std::pow(d.x[k], alpha + eps[j]) / d.g[k];
    }
  }
  return weighted_lsq(a);
}

struct Alpha_opt {
  double alpha = 0.0;
  double rel_rms = 0.0;
};

auto best_alpha(const Scaled_data& d, const std::vector<double>& eps, double alpha0) -> Alpha_opt {
  auto objective = [&](double alpha) {
    return std::log(power_lsq(d, alpha, eps).rel_rms + 1e-300);
  };
  auto lo = std::max(1e-6, alpha0 - 0.35);
  auto hi = alpha0 + 0.35;
  auto [alpha, value] = boost::math::tools::brent_find_minima(objective, lo, hi, 48);

  // Brent only locates the minimum to ~sqrt(eps); polish with Gauss-Newton on (c, alpha).
  auto rows = static_cast<Eigen::Index>(d.x.size());
  auto cols = static_cast<Eigen::Index>(eps.size());
  auto best = Alpha_opt{alpha, std::exp(value)};
  for (auto iter = 0; iter != 8; ++iter) {
    auto fit = power_lsq(d, alpha, eps);
    auto jac = Eigen::MatrixXd(rows, cols + 1);
    for (auto k = Eigen::Index{0}; k != rows; ++k) {
      auto xk = d.x[static_cast<std::size_t>(k)];
      auto gk = d.g[static_cast<std::size_t>(k)];
      auto deriv = 0.0;
      for (auto j = Eigen::Index{0}; j != cols; ++j) {
        auto basis = std::pow(xk, alpha + eps[static_cast<std::size_t>(j)]) / gk;
        jac(k, j) = basis;
        deriv += fit.coeffs(j) * basis * std::log(xk);
      }
      jac(k, cols) = deriv;
    }
    // jac [c; 0] = A c, so fitting jac v ~ 1 leaves the alpha update in the last entry
    auto step = weighted_lsq(jac).coeffs;
    auto next = alpha + step(cols);
    if (!(next > 0.0) || !std::isfinite(next)) {
      break;
    }
    auto rms = power_lsq(d, next, eps).rel_rms;
    if (!(rms < best.rel_rms)) {
      break;
    }
    best = Alpha_opt{next, rms};
    alpha = next;
  }
  return best;
}

auto make_ladder(double delta, int count) -> std::vector<double> {
  auto eps = std::vector<double>{};
  for (auto j = 0; j != count; ++j) {
    eps.push_back(delta * j);
  }
  return eps;
}

// Smallest number of terms whose ladder reaches beyond 2.
auto min_terms(double delta) -> int {
  return static_cast<int>(std::floor(2.0 / delta + 1e-12)) + 2;
}

auto to_series(const Scaled_data& d, double alpha, const std::vector<double>& eps, const Lsq& fit,
               std::string ladder, bool ok) -> Series_fit {
  auto out = Series_fit{};
  out.ok = ok;
  out.ladder = std::move(ladder);
  out.alpha = alpha;
  out.eps = eps;
  out.rel_rms = fit.rel_rms;
  for (auto j = std::size_t{0}; j != eps.size(); ++j) {
    out.coeffs.push_back(fit.coeffs(static_cast<Eigen::Index>(j)) /
                         std::pow(d.s_max, alpha + eps[j]));
  }
  return out;
}

auto try_ladder(const Scaled_data& d, double delta, int max_terms, double alpha0,
                const std::string& name, Series_fit& best) -> bool {
  for (auto count = min_terms(delta); count <= max_terms; ++count) {
    auto eps = make_ladder(delta, count);
    auto opt = best_alpha(d, eps, alpha0);
    if (!best.ok && (best.eps.empty() || opt.rel_rms < best.rel_rms)) {
      best = to_series(d, opt.alpha, eps, power_lsq(d, opt.alpha, eps), name,
                       opt.rel_rms <= k_series_tolerance);
    }
    if (opt.rel_rms <= k_series_tolerance) {
      best = to_series(d, opt.alpha, eps, power_lsq(d, opt.alpha, eps), name, true);
      return true;
    }
  }
  return false;
}

auto power_label(int p) -> std::string {
  return p == 1 ? std::string{"s"} : "s^" + std::to_string(p);
}

}  // namespace

auto local_exponent(const std::vector<double>& s, const std::vector<double>& g) -> double {
  require(s.size() >= 2 && s.size() == g.size(), "local_exponent: need matching grids");
  auto limit = s.front() * 10.0 * (1.0 + 1e-9);
  auto xs = std::vector<double>{};
  auto ys = std::vector<double>{};
  for (auto i = std::size_t{0}; i != s.size() && (s[i] <= limit || xs.size() < 2); ++i) {
    xs.push_back(std::log(s[i]));
    ys.push_back(std::log(g[i]));
  }
  auto n = static_cast<double>(xs.size());
  auto mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  auto my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  auto sxy = 0.0;
  auto sxx = 0.0;
  for (auto i = std::size_t{0}; i != xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

auto fit_series_with_ladder(const std::vector<double>& s, const std::vector<double>& g,
                            const std::vector<double>& eps, std::optional<double> alpha)
    -> Series_fit {
  require(!eps.empty() && eps.front() == 0.0, "fit: ladder must start at 0");
  auto d = scale_data(s, g);
  auto a = alpha ? *alpha : best_alpha(d, eps, local_exponent(s, g)).alpha;
  auto fit = power_lsq(d, a, eps);
  return to_series(d, a, eps, fit, "prescribed", fit.rel_rms <= k_series_tolerance);
}

auto fit_generalized_series(const std::vector<double>& s, const std::vector<double>& g)
    -> Series_fit {
  auto d = scale_data(s, g);
  auto alpha0 = local_exponent(s, g);
  auto best = Series_fit{};
  if (try_ladder(d, 1.0, 10, alpha0, "integer", best)) {
    return best;
  }
  if (try_ladder(d, 0.5, 12, alpha0, "half-integer", best)) {
    return best;
  }
  // Free spacing: Brent over delta for each number of terms.
  for (auto count = 3; count <= 8; ++count) {
    auto objective = [&](double delta) {
      if (make_ladder(delta, count).back() <= 2.0) {
        return 1e3;  // ladder must reach beyond 2
      }
      return std::log(best_alpha(d, make_ladder(delta, count), alpha0).rel_rms + 1e-300);
    };
    auto [delta, value] = boost::math::tools::brent_find_minima(objective, 0.25, 2.0, 30);
    if (value < 1e2) {
      auto eps = make_ladder(delta, count);
      auto opt = best_alpha(d, eps, alpha0);
      if (opt.rel_rms < best.rel_rms || best.eps.empty()) {
        best = to_series(d, opt.alpha, eps, power_lsq(d, opt.alpha, eps),
                         "free(" + std::to_string(delta) + ")", opt.rel_rms <= k_series_tolerance);
      }
      if (best.ok) {
        return best;
      }
    }
  }
  return best;
}

auto fit_log_term(const std::vector<double>& s, const std::vector<double>& g) -> Log_term_fit {
  auto d = scale_data(s, g);
  auto p = static_cast<int>(std::lround(local_exponent(s, g)));
  p = std::max(p, 0);
  auto out = Log_term_fit{};
  out.power = p;
  for (auto pairs = 2; pairs <= 5; ++pairs) {
    auto a = Eigen::MatrixXd(static_cast<Eigen::Index>(d.x.size()), 2 * pairs);
    for (auto k = std::size_t{0}; k != d.x.size(); ++k) {
      auto lx = std::log(d.x[k]);
      for (auto j = 0; j != pairs; ++j) {
        auto base = std::pow(d.x[k], p + j) / d.g[k];
        a(static_cast<Eigen::Index>(k), 2 * j) = base;
        a(static_cast<Eigen::Index>(k), 2 * j + 1) = base * lx;
      }
    }
    auto fit = weighted_lsq(a);
    // coefficient of x^p log x, expressed in s units: s^p log s appears with coefficient c / s_max^p
    out.log_coeff = fit.coeffs(1) / std::pow(d.s_max, p);
    out.t_stat = fit.stderr_(1) > 0.0 ? fit.coeffs(1) / fit.stderr_(1)
                                      : std::copysign(std::numeric_limits<double>::infinity(),
                                                      fit.coeffs(1));
    out.rel_rms = fit.rel_rms;
    if (fit.rel_rms <= k_series_tolerance) {
      break;
    }
  }
  return out;
}

auto default_s0(double t) -> double {
  return 0.05 * band_interval(t).lo;
}

auto geometric_s_grid(double s0, int decades, int per_decade) -> std::vector<double> {
  require(s0 > 0.0 && decades >= 1 && per_decade >= 1, "geometric_s_grid: bad arguments");
  auto out = std::vector<double>{};
  auto steps = decades * per_decade;
  for (auto k = 0; k <= steps; ++k) {
    out.push_back(s0 * std::pow(10.0, -static_cast<double>(steps - k) / per_decade));
  }
  out.back() = s0;
  return out;
}

auto default_z_grid(double t, int count) -> std::vector<double> {
  require(count >= 1, "default_z_grid: count must be >= 1");
  auto band = band_interval(t);
  auto out = std::vector<double>{};
  for (auto k = 0; k != count; ++k) {
    out.push_back(band.lo + (k + 0.5) / count * band.width());
  }
  return out;
}

auto fit_taylor(const Prior_spec& spec, const std::vector<double>& z_grid,
                const std::vector<double>& s_grid) -> Condition1_result {
  validate(spec);
  require(!z_grid.empty(), "fit_taylor: empty z grid");
  auto result = Condition1_result{};

  auto fits = std::vector<Series_fit>{};
  auto data = std::vector<std::vector<double>>{};
  for (auto z : z_grid) {
    require(s_grid.back() < s_saturation(spec, z), "fit_taylor: s grid reaches saturation");
    auto g = std::vector<double>{};
    for (auto s : s_grid) {
      g.push_back(g_function(spec, z, s));
    }
    auto fit = fit_generalized_series(s_grid, g);
    if (!fit.ok) {
      auto log_fit = fit_log_term(s_grid, g);
      result.log_t_stat = log_fit.t_stat;
      if (std::abs(log_fit.t_stat) > 3.0 && log_fit.rel_rms < fit.rel_rms) {
        result.status = Condition_status::violated;
        result.diagnostic = power_label(log_fit.power) + "·log s";
      } else {
        result.status = Condition_status::inconclusive;
        result.diagnostic = "no generalized power series fits (relative rms " +
                            std::to_string(fit.rel_rms) + ")";
      }
      return result;
    }
    fits.push_back(fit);
    data.push_back(std::move(g));
  }

  // One alpha and one ladder for the whole z grid.
  auto alpha = 0.0;
  for (const auto& f : fits) {
    alpha += f.alpha / static_cast<double>(fits.size());
  }
  auto widest = std::max_element(fits.begin(), fits.end(), [](const auto& a, const auto& b) {
    return a.eps.size() < b.eps.size();
  });
  for (const auto& f : fits) {
    if (f.ladder != widest->ladder || std::abs(f.alpha - alpha) > 1e-4 * std::max(1.0, alpha)) {
      result.status = Condition_status::inconclusive;
      result.diagnostic = "exponent ladder or alpha varies with z";
      return result;
    }
  }

  auto model = Taylor_model{};
  model.alpha = alpha;
  model.eps = widest->eps;
  model.ladder = widest->ladder;
  model.z_grid = z_grid;
  model.s0 = s_grid.back();
  model.k = static_cast<int>(std::count_if(model.eps.begin(), model.eps.end(),
                                           [](double e) { return e <= 2.0 + 1e-12; }));
  auto eps_k = model.eps[static_cast<std::size_t>(model.k)];
  model.eps.resize(static_cast<std::size_t>(model.k) + 1);
  model.coeffs.assign(static_cast<std::size_t>(model.k), {});
  model.h_coeffs.assign(static_cast<std::size_t>(model.k), {});

  for (auto zi = std::size_t{0}; zi != z_grid.size(); ++zi) {
    auto refit = fit_series_with_ladder(s_grid, data[zi], widest->eps, alpha);
    model.max_rel_rms = std::max(model.max_rel_rms, refit.rel_rms);
    auto h_total = h_function(spec, z_grid[zi], s_saturation(spec, z_grid[zi]));
    for (auto i = 0; i != model.k; ++i) {
      auto c = refit.coeffs[static_cast<std::size_t>(i)];
      model.coeffs[static_cast<std::size_t>(i)].push_back(c);
      model.h_coeffs[static_cast<std::size_t>(i)].push_back(c * h_total);
    }
    // Remainder after k terms, from the fitted higher-order terms (the raw residual of the full
    // fit is already below the series tolerance).
    for (auto s : s_grid) {
      auto remainder = 0.0;
      for (auto i = static_cast<std::size_t>(model.k); i != widest->eps.size(); ++i) {
        remainder += refit.coeffs[i] * std::pow(s, alpha + widest->eps[i]);
      }
      model.kappa = std::max(model.kappa, std::abs(remainder) / std::pow(s, alpha + eps_k));
    }
  }
  if (model.max_rel_rms > 10.0 * k_series_tolerance) {
    result.status = Condition_status::inconclusive;
    result.diagnostic = "common alpha does not fit every z";
    return result;
  }
  result.status = Condition_status::satisfied;
  result.model = std::move(model);
  return result;
}

auto check_tempered(const Prior_spec& spec, double t) -> Temper_verdict {
  auto verdict = Temper_verdict{};
  verdict.condition1 = fit_taylor(spec, default_z_grid(t), geometric_s_grid(default_s0(t)));
  verdict.condition2 = check_condition2(spec, t, power_of_two_grid(6, 16));
  verdict.tempered = verdict.condition1.status == Condition_status::satisfied &&
                     verdict.condition2.status == Condition_status::satisfied;
  return verdict;
}

}  // namespace starparadox
