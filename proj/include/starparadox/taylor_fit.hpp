#pragma once

// Condition (1) of temperedness: G(z, s) = s^alpha (F_0(z) + F_1(z) s^{eps_1} + ...
// + F_{k-1}(z) s^{eps_{k-1}}) + O(s^{alpha + eps_k}) near s = 0 with eps_{k-1} <= 2 < eps_k,
// fitted numerically from G on a geometric s grid.

#include <optional>
#include <string>
#include <vector>

#include "starparadox/prior_spec.hpp"
#include "starparadox/priors.hpp"

namespace starparadox {

// Generalized power series fitted at one z: g(s) ~ sum_j coeffs[j] s^{alpha + eps[j]}.
struct Series_fit {
  bool ok = false;
  std::string ladder;        // "integer", "half-integer" or "free(delta)"
  double alpha = 0.0;
  std::vector<double> eps;   // offsets, eps[0] = 0
  std::vector<double> coeffs;
  double rel_rms = 0.0;      // relative RMS residual over the grid
};

// Fit with a leading s^p and s^p log s pair and higher powers; reports the t statistic of the
// leading log coefficient.
struct Log_term_fit {
  int power = 0;
  double log_coeff = 0.0;
  double t_stat = 0.0;
  double rel_rms = 0.0;
};

// Accept threshold on the relative RMS residual of a power-series fit.
inline constexpr double k_series_tolerance = 1e-9;

// Searches alpha and the exponent ladder (integer, then half-integer, then a free spacing delta
// in [1/4, 2]) by variable projection: alpha by Brent minimization, coefficients by linear
// least squares with relative weights.
auto fit_generalized_series(const std::vector<double>& s, const std::vector<double>& g)
    -> Series_fit;

// Same with the ladder and the number of terms prescribed (alpha still fitted unless given).
auto fit_series_with_ladder(const std::vector<double>& s, const std::vector<double>& g,
                            const std::vector<double>& eps, std::optional<double> alpha = {})
    -> Series_fit;

auto fit_log_term(const std::vector<double>& s, const std::vector<double>& g) -> Log_term_fit;

// Slope of log g against log s over the lowest decade of the grid.
auto local_exponent(const std::vector<double>& s, const std::vector<double>& g) -> double;

struct Taylor_model {
  double alpha = 0.0;
  int k = 0;
  std::vector<double> eps;               // eps_0 .. eps_k (last one beyond 2)
  std::string ladder;
  std::vector<double> z_grid;
  std::vector<std::vector<double>> coeffs;    // coeffs[i][zi] = F_i(z) for G, i < k
  std::vector<std::vector<double>> h_coeffs;  // same for H = G * H(z, s_sat)
  double kappa = 0.0;                    // max |G - truncated series| / s^{alpha + eps_k}
  double s0 = 0.0;
  double max_rel_rms = 0.0;
};

struct Condition1_result {
  Condition_status status = Condition_status::inconclusive;
  std::optional<Taylor_model> model;
  std::string diagnostic;   // e.g. "s·log s" when violated
  double log_t_stat = 0.0;
};

struct Temper_verdict {
  Condition1_result condition1;
  Condition2_result condition2;
  bool tempered = false;
};

// s0 = 0.05 inf I_t.
auto default_s0(double t) -> double;

// Geometric grid over [s0 10^{-decades}, s0], `per_decade` points per decade.
auto geometric_s_grid(double s0, int decades = 5, int per_decade = 8) -> std::vector<double>;

// `count` interior points of I_t.
auto default_z_grid(double t, int count = 5) -> std::vector<double>;

auto fit_taylor(const Prior_spec& spec, const std::vector<double>& z_grid,
                const std::vector<double>& s_grid) -> Condition1_result;

auto check_tempered(const Prior_spec& spec, double t) -> Temper_verdict;

}  // namespace starparadox
