#pragma once

// Moments M_t = E[V^t] of [0, 1]-valued variables, the ratio R_t = 1 - M_{t+1} / M_t, the
// threshold scan for 2 t R_t >= alpha, and the special functions behind the bound on R_t for
// tails P(V >= v) ~ sum_i gamma_i (1 - v)^{alpha + eps_i}.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "starparadox/prior_spec.hpp"

namespace starparadox {

// Distribution of V given by its tail near 1: tail(w) = P(V >= 1 - w) for w in [0, 1].
// Passing the gap w = 1 - v keeps full precision where it matters.  `kinks` lists gaps where
// the tail is not smooth; quadrature splits there.
struct V_dist {
  std::string name;
  std::function<double(double)> tail;
  std::vector<double> kinks;
};

auto uniform01() -> V_dist;               // P(V >= v) = 1 - v
auto point_mass_one() -> V_dist;          // V = 1
auto beta_tail(double a) -> V_dist;       // P(V >= v) = (1 - v)^a
auto linear_density() -> V_dist;          // density 2v
// V = zeta(U), U = (P1 - P2) / (1 - P0), given 4 P0 - 1 = z: P(V >= v) = G(z, (3 - z) u / 2)
// with u = zeta^{-1}(v).
auto zeta_u_dist(const Prior_spec& spec, double z) -> V_dist;

// Named distributions for the CLI: uniform01, one, beta:<a>, linear.
auto v_dist_from_name(const std::string& name) -> V_dist;

// M_t = int_0^1 t v^{t-1} P(V >= v) dv, evaluated as int_0^inf e^{-y} tail(1 - e^{-y/t}) dy.
auto moment_mt(const V_dist& dist, double t) -> double;

// M_t - M_{t+1} as a single integral, so R_t keeps its digits for large t.
auto moment_gap(const V_dist& dist, double t) -> double;

auto ratio_rt(const V_dist& dist, double t) -> double;

struct Moment_row {
  double t = 0.0;
  double m_t = 0.0;
  double m_t1 = 0.0;
  double r_t = 0.0;
  double two_t_r_t = 0.0;
};

auto moment_curve(const V_dist& dist, const std::vector<double>& t_grid, int jobs = 1)
    -> std::vector<Moment_row>;

// Geometric grid [lo, hi] with `per_decade` points per decade (both ends included).
auto geometric_t_grid(double lo, double hi, int per_decade = 64) -> std::vector<double>;

// --- Hypothesis of the moment proposition --------------------------------------------------------

struct Sm_params {
  double alpha = 1.0;
  std::vector<double> eps;    // 0 = eps_0 < ... < eps_{n-1} <= 1 < eps_n
  std::vector<double> gamma;  // gamma_0 .. gamma_n, gamma_n >= 0
  double v0 = 0.0;

  auto n() const -> int { return static_cast<int>(eps.size()) - 1; }
  auto gamma_sum() const -> double;  // sum |gamma_i|
};

auto validate(const Sm_params& p) -> void;

// Lambda(eps, t) = Gamma({t} + alpha + 1) / Gamma({t} + alpha + eps + 1).
auto lambda_fn(double eps, double t, double alpha) -> double;
// P(eps, t) = prod_{l=1}^{[t]+1} (1 - eps / (alpha + eps + {t} + l)).
auto product_p(double eps, double t, double alpha) -> double;
// Q_alpha(t) = (t + alpha)(t + alpha - 1) ... (t + {alpha}) / Gamma(alpha + 1).
auto q_alpha(double t, double alpha) -> double;
auto beta_fn(double x, double y) -> double;
// t B(t, alpha + 1).
auto t_beta(double t, double alpha) -> double;

// chi_{+-}(t) = sum_{i<n} gamma_i Lambda(eps_i, t) P(eps_i, t) +- gamma_n Lambda(eps_n, t) P(eps_n, t).
auto chi_pm(const Sm_params& p, double t, int sign) -> double;

// M^{+-}_t = int_0^1 t v^{t-1} F_{+-}(v) dv with F_{+-} = sum_{i<n} gamma_i (1-v)^{alpha+eps_i}
// +- gamma_n (1-v)^{alpha+eps_n}: by quadrature, and in closed form through t B(t, alpha + 1),
// Lambda and P (with the normalizing factors that the closed form needs).
auto m_pm_quadrature(const Sm_params& p, double t, int sign) -> double;
auto m_pm_product(const Sm_params& p, double t, int sign) -> double;

// kappa(t) = v0 Q_alpha(t + 1) + gamma Q_alpha(t) (diagnostic only).
auto kappa_t(const Sm_params& p, double t) -> double;

// S(eps, t) and T(eps, t) of the sandwich exp(-S - T) <= P(eps, t) <= exp(-S).
auto s_sum(double eps, double t, double alpha) -> double;
auto t_sum(double eps, double t, double alpha) -> double;

// C_i^+ = (alpha + eps + 3)^eps and C_i^- = ((alpha + eps) / (alpha + eps + 2))^eps
// exp(-eps^2 / (alpha + eps)): t^eps P(eps, t) lies in [C^-, C^+] for t >= 1.
auto c_plus(double eps, double alpha) -> double;
auto c_minus(double eps, double alpha) -> double;

struct Chi_check {
  double c = 0.0;       // max_i C_i^+
  double beta = 0.0;    // min(eps_n, 1 + eps_1)
  double max_upper_violation = 0.0;  // max of chi_+(t+1) - chi_-(t) - [2 gamma_n + eps_n gamma] C t^-beta
  double max_lower_violation = 0.0;  // max of -C gamma t^-eps_1 - chi_-(t)
};

auto lemma_chi_check(const Sm_params& p, const std::vector<double>& t_grid) -> Chi_check;

// Lower bound on R_t valid for every V satisfying the hypothesis:
// 1 - (M^+_{t+1} + (1 + gamma) v0^{t+1}) / (M^-_t - gamma v0^t); -infinity when the
// denominator is not positive.
auto r_lower_bound(const Sm_params& p, double t) -> double;

struct Threshold_result {
  std::optional<double> t_star;  // empty: not reached on the grid
  std::vector<double> t;
  std::vector<double> two_t_r;
};

// Smallest grid t after which 2 t R_t >= alpha on the rest of the grid.
auto sm_threshold_scan(const V_dist& dist, double alpha, const std::vector<double>& t_grid,
                       int jobs = 1) -> Threshold_result;
// Same with R_t replaced by r_lower_bound(params, t).
auto sm_threshold_scan(const Sm_params& params, double alpha, const std::vector<double>& t_grid)
    -> Threshold_result;

}  // namespace starparadox
