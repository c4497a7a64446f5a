#pragma once

// Star-tree simulation, Monte Carlo marginal likelihoods E[Pi_i(n)], posterior probabilities of
// the three resolved trees, the paradox scan and numerical checks of the claims behind it.
//
// Everything is in log scale.  Prior draws are generated in fixed chunks of k_chunk_size, chunk
// c seeded from (seed, c), so every result is independent of the number of worker threads.

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "starparadox/core_model.hpp"
#include "starparadox/prior_spec.hpp"

namespace starparadox {

inline constexpr std::int64_t k_chunk_size = 4096;

// Cached prior draws: branch lengths and log pattern probabilities, reused across trees and
// trials (common random numbers).
struct Prior_draws {
  std::vector<double> t_e;
  std::vector<double> t_i;
  std::vector<double> lp0;
  std::vector<double> lp1;
  std::vector<double> lp2;
  std::vector<double> z;  // 4 P0 - 1

  auto size() const -> std::int64_t { return static_cast<std::int64_t>(lp0.size()); }
};

auto make_prior_draws(const Prior_spec& spec, std::int64_t n_samples, std::uint64_t seed,
                      int jobs = 1) -> Prior_draws;

// Draws given directly as branch lengths (tests and custom strata).
auto make_prior_draws(const std::vector<Branch_lengths>& branches) -> Prior_draws;

// Multinomial(n; star_probs(t)) sample.
auto simulate_counts(double t, std::int64_t n, std::uint64_t seed) -> Pattern_counts;

// log Pi_i = n0 log p0 + n_i log p1 + (n - n0 - n_i) log p2, with 0 log 0 = 0; i in {1, 2, 3}.
auto log_pi(const Pattern_counts& counts, const Pattern_probs& probs, int i) -> double;
auto log_pi(const Pattern_counts& counts, const Log_pattern_probs& lp, int i) -> double;

// log of a Monte Carlo mean of exp(values), with delta-method standard error (log scale).
struct Log_mean {
  double log_mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t count = 0;
};

// Streaming log-sum-exp over the draws selected by `mask` (all when empty).
auto expected_pi(const Prior_draws& draws, const Pattern_counts& counts, int i,
                 const std::vector<char>& mask = {}) -> Log_mean;
auto expected_pi(const Prior_spec& spec, const Pattern_counts& counts, int i,
                 std::int64_t n_samples, std::uint64_t seed, int jobs = 1) -> Log_mean;

struct Posterior_estimate {
  std::array<double, 3> log_epi{};
  std::array<double, 3> stderr_{};
  std::array<double, 3> posterior{};
  std::int64_t n_samples = 0;
};

auto posterior_probs(const Prior_draws& draws, const Pattern_counts& counts,
                     const std::array<double, 3>& tree_weights) -> Posterior_estimate;
auto posterior_probs(const Prior_spec& spec, const Pattern_counts& counts,
                     const std::array<double, 3>& tree_weights, std::int64_t n_samples,
                     std::uint64_t seed, int jobs = 1) -> Posterior_estimate;

// 95% Wilson score interval.
struct Proportion_ci {
  double lo = 0.0;
  double hi = 1.0;
};
auto wilson_interval(std::int64_t successes, std::int64_t trials, double z = 1.959963984540054)
    -> Proportion_ci;

struct Paradox_result {
  std::int64_t n = 0;
  double epsilon = 0.0;
  double delta_hat = 0.0;
  Proportion_ci ci;
  std::int64_t trials = 0;
  std::int64_t successes = 0;
};

struct Scan_config {
  double t = 0.1;
  double epsilon = 0.05;
  std::vector<std::int64_t> n_list;
  std::int64_t trials = 100;
  std::int64_t n_samples = 100000;
  std::uint64_t seed = 1;
  int jobs = 1;
};

// For each n: `trials` star-tree data sets, fraction with P(R_1 | data) >= 1 - epsilon.
// `on_row` (optional) is called after each n, in order, for incremental output.
auto paradox_scan(const Prior_spec& spec, const Scan_config& config,
                  const std::function<void(const Paradox_result&)>& on_row = {})
    -> std::vector<Paradox_result>;

// log mu_t = q0 log q0 + 3 q1 log q1.
auto log_mu(double t) -> double;

// log W_j(n) for tree j in {2, 3} at pattern probabilities p.
auto log_w(const Pattern_counts& counts, double t, const Log_pattern_probs& lp, int j) -> double;

// log U_t = sum_i q_i log(P_i / q_i) = -KL(q, P).
auto log_u(double t, const Log_pattern_probs& lp) -> double;

struct Claim1_report {
  Log_mean inside;    // E[Pi_j | 4 P0 - 1 in I_t]
  Log_mean outside;   // E[Pi_j | 4 P0 - 1 not in I_t]
  double log_ratio = 0.0;
  double log_ratio_stderr = 0.0;
  double envelope_outside = 0.0;  // n log mu_t - n l_t^2 / 32
  double lower_diagnostic = 0.0;  // n log mu_t + log Q_n(t) (the e^{-O(sqrt n)} factor dropped)
  bool envelope_ok = false;
};

auto claim1_check(const Prior_draws& draws, const Prior_spec& spec, double t,
                  const Pattern_counts& counts, int j) -> Claim1_report;
auto claim1_check(const Prior_spec& spec, double t, const Pattern_counts& counts, int j,
                  std::int64_t n_samples, std::uint64_t seed, int jobs = 1) -> Claim1_report;

struct Claim2_band {
  double z = 0.0;
  std::int64_t draws = 0;
  double log_ratio = 0.0;  // log E[Pi_1 | z] - log E[Pi_j | z]
  double log_ratio_stderr = 0.0;
};

struct Claim2_report {
  double c = 0.0;
  double delta_z = 0.0;
  std::vector<Claim2_band> bands;
  double min_log_ratio = 0.0;          // inf over z of the log ratio
  double min_log_ratio_stderr = 0.0;
  double log_inf_over_4c2 = 0.0;       // log(inf ratio / (4 c^2))
  double log_inf_over_3c2 = 0.0;       // log(inf ratio / (3 c^2))
};

auto claim2_check(const Prior_draws& draws, double t, const Pattern_counts& counts, double c,
                  const std::vector<double>& z_grid, int j) -> Claim2_report;
auto claim2_check(const Prior_spec& spec, double t, const Pattern_counts& counts, double c,
                  const std::vector<double>& z_grid, int j, std::int64_t n_samples,
                  std::uint64_t seed, int jobs = 1) -> Claim2_report;

// Bounds on the small box Gamma_t(n) = [0, 1/n] (T_i) x [t, t + 1/n] (T_e), sampled
// uniformly, for counts in F_c^(n).  For small n there may be no count vector in F_c^(n); the
// W_j fields are then NaN and only the U_t bound is checked.
struct Gamma_check {
  bool has_fc_counts = false;
  double min_log_w_minus_c_log_q1 = 0.0;  // >= 0 expected: W_j >= q1^c
  double max_log_w = 0.0;                 // <= 0 expected: W_j <= 1
  double min_n_log_u_minus_bound = 0.0;   // >= 0 expected: U^n >= exp(-5 e^{-4t} / q0)
};

auto gamma_box_check(double t, std::int64_t n, double c, int j, std::int64_t samples,
                     std::uint64_t seed) -> Gamma_check;

// Per-draw rewrites of Pi_i, as maximum absolute differences in log scale.
struct Identity_check {
  double decomposition = 0.0;  // log Pi_j vs n log mu + n log U + sqrt(n) log W_j
  double rewrite = 0.0;      // log Pi_i vs n0 log P0 + s log(P1 P2^2) + Delta_i sqrt(n) log(P1/P2)
  double product = 0.0;      // log(P1 P2^2) vs log(V (1 - P0)^3 / 27)
  double ratio = 0.0;        // log(P1 / P2) vs log((1 + 2U) / (1 - U))
  std::int64_t draws = 0;
};

auto identity_check(const Prior_spec& spec, double t, const Pattern_counts& counts, int j,
                    std::int64_t n_draws, std::uint64_t seed) -> Identity_check;

}  // namespace starparadox
