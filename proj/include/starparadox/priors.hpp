#pragma once

// Sampling, the conditional distribution function G(z, s) of S_e (3 - S_i) / 2 given
// S_e S_i = z (with S_e = e^{-4 T_e}, S_i = 1 + 2 e^{-4 T_i}), and the small-ball probe
// Q_n(t) = P(T_i <= 1/n, t <= T_e <= t + 1/n).
//
// H(z, s) is the unnormalized version of G.  It is reported in the normalization used for the
// catalog closed forms (constant factors of the density dropped), so that
// H(z, s) = kappa * integral of w(x, z/x) dx / x, w being the density of (S_e, S_i).

#include <cstdint>
#include <functional>
#include <vector>

#include "starparadox/core_model.hpp"
#include "starparadox/prior_spec.hpp"
#include "starparadox/rng.hpp"

namespace starparadox {

// One draw of (T_e, T_i).
auto draw_prior(const Prior_spec& spec, Rng& rng) -> Branch_lengths;

// `count` i.i.d. draws, deterministic in (spec, seed, count).
auto sample_prior(const Prior_spec& spec, std::uint64_t seed, std::int64_t count)
    -> std::vector<Branch_lengths>;

// h(u) = -1/4 log(1 - 3u / (1 + 2u)) on [0, 1); +infinity at u = 1.
auto h_aux(double u) -> double;

// The normalization constant relating H to the exact conditional integral (see above).
auto h_normalization(const Prior_spec& spec) -> double;

// Smallest s from which H(z, s) stops growing: s_sat <= (3 - z) / 2, and s_sat < z when the
// support of T_i is bounded.
auto s_saturation(const Prior_spec& spec, double z) -> double;

// H(z, s): closed forms for Uniform_ti and Discrete_ti, tanh-sinh quadrature of the integral in
// the variable sigma = S_e (3 - S_i) / 2 otherwise.
auto h_function(const Prior_spec& spec, double z, double s) -> double;

// Same quantity by the generic route: adaptive Gauss-Kronrod on the integral over x = S_e with
// x = z/3 + tau^2.  Not available for Discrete_ti (no density).
auto h_function_generic(const Prior_spec& spec, double z, double s) -> double;

// G(z, s) = H(z, s) / H(z, s_sat).
auto g_function(const Prior_spec& spec, double z, double s) -> double;

// --- Discrete_ti series -------------------------------------------------------------------------

// y_n = 1 + 2 exp(-4 n^{-a}).
auto discrete_y(const Discrete_ti& d, double n) -> double;

// n(z, s) = inf{n >= 1 : z <= y_n, 3z <= (2s + z) y_n}, as a double (it overflows integers for
// small s).
auto discrete_index(const Discrete_ti& d, double z, double s) -> double;

// Sum over m >= first of r_m, with r_m = y_m (m^{-b} - (m+1)^{-b}).
auto discrete_tail(const Discrete_ti& d, double first) -> double;

// r = sum over all m >= 1 of r_m.
auto discrete_r(const Discrete_ti& d) -> double;

// P(T_i = t_n) = r_n / r.
auto discrete_atom_probability(const Discrete_ti& d, std::int64_t n) -> double;

// --- Q_n(t) and condition (2) ------------------------------------------------------------------

// log P(T_i <= x).
auto log_ti_cdf(const Prior_spec& spec, double x) -> double;

// log Q_n(t) (kept in log scale: Q_n is tiny for Discrete_ti).
auto log_q_n(const Prior_spec& spec, double t, std::int64_t n) -> double;
auto q_n_probability(const Prior_spec& spec, double t, std::int64_t n) -> double;

enum class Condition_status { satisfied, violated, inconclusive };

auto to_string(Condition_status s) -> const char*;

struct Condition2_result {
  Condition_status status = Condition_status::inconclusive;
  double decay_exponent = 0.0;     // -(slope of log Q_n against log n)
  double rate_slope = 0.0;         // slope of log(|log Q_n| / n) against log n
  std::vector<std::int64_t> n_grid;
  std::vector<double> log_q;
};

// Powers of two from 2^lo to 2^hi.
auto power_of_two_grid(int lo, int hi) -> std::vector<std::int64_t>;

// Decides whether n^{-1} log Q_n(t) -> 0 on the given grid (last element >= 2^16).  Polynomial
// decay gives |log Q_n| / n ~ log(n) / n, i.e. a rate slope near -1; exponential decay gives a
// slope near 0.  The verdict threshold is a rate slope of -1/4.
auto check_condition2(const Prior_spec& spec, double t, const std::vector<std::int64_t>& n_grid)
    -> Condition2_result;

// Same test for an arbitrary log Q_n sequence.
auto check_condition2(const std::function<double(std::int64_t)>& log_q,
                      const std::vector<std::int64_t>& n_grid) -> Condition2_result;

}  // namespace starparadox
