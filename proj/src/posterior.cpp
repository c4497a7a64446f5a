#include "starparadox/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "starparadox/errors.hpp"
#include "starparadox/parallel.hpp"
#include "starparadox/priors.hpp"
#include "starparadox/rng.hpp"

namespace starparadox {

namespace {

constexpr double k_neg_inf = -std::numeric_limits<double>::infinity();

// n * log p with 0 * (-inf) = 0.
auto term(std::int64_t n, double lp) -> double {
  return n == 0 ? 0.0 : static_cast<double>(n) * lp;
}

auto validate_tree(int i) -> void {
  require(i >= 1 && i <= 3, "tree index must be 1, 2 or 3");
}

// Streaming log-sum-exp of exp(l) and exp(2 l).
struct Lse {
  double max = k_neg_inf;
  double s1 = 0.0;
  double s2 = 0.0;
  std::int64_t count = 0;

  auto add(double l) -> void {
    ++count;
    if (l == k_neg_inf) {
      return;
    }
    if (l > max) {
      auto r = std::exp(max - l);
      s1 *= r;
      s2 *= r * r;
      max = l;
    }
    auto e = std::exp(l - max);
    s1 += e;
    s2 += e * e;
  }

  auto result() const -> Log_mean {
    if (count == 0) {
      throw Numerical_error{Numerical_error::Kind::empty_stratum, "no draws to average"};
    }
    if (max == k_neg_inf) {
      throw Numerical_error{Numerical_error::Kind::degenerate_estimate,
                            "every draw has zero likelihood"};
    }
    auto n = static_cast<double>(count);
    auto m1 = s1 / n;
    auto var = std::max(0.0, s2 / n - m1 * m1);
    auto se = count > 1 ? std::sqrt(var / (n - 1.0)) / m1 : 0.0;
    return Log_mean{max + std::log(m1), se, count};
  }
};

auto log_pi_raw(const Pattern_counts& c, double lp0, double lp1, double lp2, int i) -> double {
  auto n = c.total();
  auto ni = c[i];
  return term(c[0], lp0) + term(ni, lp1) + term(n - c[0] - ni, lp2);
}

auto append_draw(Prior_draws& d, const Branch_lengths& bl, std::size_t at) -> void {
  auto lp = log_pattern_probs(bl);
  d.t_e[at] = bl.t_e;
  d.t_i[at] = bl.t_i;
  d.lp0[at] = lp.lp0;
  d.lp1[at] = lp.lp1;
  d.lp2[at] = lp.lp2;
  d.z[at] = std::exp(-4.0 * bl.t_e) * (1.0 + 2.0 * std::exp(-4.0 * bl.t_i));
}

auto resize(Prior_draws& d, std::size_t n) -> void {
  d.t_e.resize(n);
  d.t_i.resize(n);
  d.lp0.resize(n);
  d.lp1.resize(n);
  d.lp2.resize(n);
  d.z.resize(n);
}

auto normalized_weights(const std::array<double, 3>& w) -> std::array<double, 3> {
  for (auto x : w) {
    require(std::isfinite(x) && x > 0.0, "tree weights must be strictly positive");
  }
  auto sum = w[0] + w[1] + w[2];
  return {w[0] / sum, w[1] / sum, w[2] / sum};
}

auto posterior_from_logs(const std::array<double, 3>& log_epi, const std::array<double, 3>& w)
    -> std::array<double, 3> {
  auto a = std::array<double, 3>{};
  auto m = k_neg_inf;
  for (auto i = 0; i != 3; ++i) {
    a[i] = std::log(w[i]) + log_epi[i];
    m = std::max(m, a[i]);
  }
  auto sum = 0.0;
  for (auto& x : a) {
    x = std::exp(x - m);
    sum += x;
  }
  for (auto& x : a) {
    x /= sum;
  }
  return a;
}

// log E[Pi_i] for i = 1, 2, 3 at once, two passes, for the scan's inner loop.
auto log_epi_fast(const Prior_draws& d, const Pattern_counts& c) -> std::array<double, 3> {
  auto n = d.size();
  auto m = std::array<double, 3>{k_neg_inf, k_neg_inf, k_neg_inf};
  for (auto k = std::int64_t{0}; k != n; ++k) {
    for (auto i = 0; i != 3; ++i) {
      m[i] = std::max(m[i], log_pi_raw(c, d.lp0[k], d.lp1[k], d.lp2[k], i + 1));
    }
  }
  for (auto x : m) {
    if (x == k_neg_inf) {
      throw Numerical_error{Numerical_error::Kind::degenerate_estimate,
                            "every draw has zero likelihood"};
    }
  }
  auto s = std::array<double, 3>{};
  for (auto k = std::int64_t{0}; k != n; ++k) {
    for (auto i = 0; i != 3; ++i) {
      auto x = log_pi_raw(c, d.lp0[k], d.lp1[k], d.lp2[k], i + 1) - m[i];
      if (x > -50.0) {
        s[i] += std::exp(x);
      }
    }
  }
  auto out = std::array<double, 3>{};
  for (auto i = 0; i != 3; ++i) {
    out[i] = m[i] + std::log(s[i] / static_cast<double>(n));
  }
  return out;
}

}  // namespace

auto make_prior_draws(const Prior_spec& spec, std::int64_t n_samples, std::uint64_t seed,
                      int jobs) -> Prior_draws {
  validate(spec);
  require(n_samples >= 1, "n_samples must be >= 1");
  auto d = Prior_draws{};
  resize(d, static_cast<std::size_t>(n_samples));
  auto chunks = (n_samples + k_chunk_size - 1) / k_chunk_size;
  parallel_for(chunks, jobs, [&](std::int64_t c) {
    auto rng = Rng{substream_seed(seed, {1, static_cast<std::uint64_t>(c)})};
    auto lo = c * k_chunk_size;
    auto hi = std::min(n_samples, lo + k_chunk_size);
    for (auto k = lo; k != hi; ++k) {
      append_draw(d, draw_prior(spec, rng), static_cast<std::size_t>(k));
    }
  });
  return d;
}

auto make_prior_draws(const std::vector<Branch_lengths>& branches) -> Prior_draws {
  auto d = Prior_draws{};
  resize(d, branches.size());
  for (auto k = std::size_t{0}; k != branches.size(); ++k) {
    validate(branches[k]);
    append_draw(d, branches[k], k);
  }
  return d;
}

auto simulate_counts(double t, std::int64_t n, std::uint64_t seed) -> Pattern_counts {
  require(std::isfinite(t) && t > 0.0, "t must be positive");
  require(n >= 1, "n must be >= 1");
  auto q = star_probs(t);
  auto rng = Rng{substream_seed(seed, {2})};
  auto c = Pattern_counts{};
  c.n[0] = rng.binomial(n, q.p0());
  auto rest = n - c.n[0];
  c.n[1] = rng.binomial(rest, 1.0 / 3.0);
  rest -= c.n[1];
  c.n[2] = rng.binomial(rest, 0.5);
  c.n[3] = rest - c.n[2];
  return c;
}

auto log_pi(const Pattern_counts& counts, const Pattern_probs& probs, int i) -> double {
  validate(counts);
  validate_tree(i);
  auto lg = [](double p) { return p > 0.0 ? std::log(p) : k_neg_inf; };
  return log_pi_raw(counts, lg(probs.p0()), lg(probs.p1()), lg(probs.p2()), i);
}

auto log_pi(const Pattern_counts& counts, const Log_pattern_probs& lp, int i) -> double {
  validate(counts);
  validate_tree(i);
  return log_pi_raw(counts, lp.lp0, lp.lp1, lp.lp2, i);
}

auto expected_pi(const Prior_draws& draws, const Pattern_counts& counts, int i,
                 const std::vector<char>& mask) -> Log_mean {
  validate(counts);
  validate_tree(i);
  require(counts.total() >= 1, "counts must contain at least one site");
  require(mask.empty() || static_cast<std::int64_t>(mask.size()) == draws.size(),
          "mask size must match the number of draws");
  auto acc = Lse{};
  for (auto k = std::int64_t{0}; k != draws.size(); ++k) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(k)]) {
      continue;
    }
    acc.add(log_pi_raw(counts, draws.lp0[k], draws.lp1[k], draws.lp2[k], i));
  }
  return acc.result();
}

auto expected_pi(const Prior_spec& spec, const Pattern_counts& counts, int i,
                 std::int64_t n_samples, std::uint64_t seed, int jobs) -> Log_mean {
  require(n_samples >= 1000, "n_samples must be >= 1000");
  validate(counts);
  validate_tree(i);
  return expected_pi(make_prior_draws(spec, n_samples, seed, jobs), counts, i);
}

auto posterior_probs(const Prior_draws& draws, const Pattern_counts& counts,
                     const std::array<double, 3>& tree_weights) -> Posterior_estimate {
  auto w = normalized_weights(tree_weights);
  auto est = Posterior_estimate{};
  for (auto i = 0; i != 3; ++i) {
    auto lm = expected_pi(draws, counts, i + 1);
    est.log_epi[i] = lm.log_mean;
    est.stderr_[i] = lm.stderr_;
  }
  est.posterior = posterior_from_logs(est.log_epi, w);
  est.n_samples = draws.size();
  return est;
}

auto posterior_probs(const Prior_spec& spec, const Pattern_counts& counts,
                     const std::array<double, 3>& tree_weights, std::int64_t n_samples,
                     std::uint64_t seed, int jobs) -> Posterior_estimate {
  require(n_samples >= 1000, "n_samples must be >= 1000");
  validate(counts);
  normalized_weights(tree_weights);
  return posterior_probs(make_prior_draws(spec, n_samples, seed, jobs), counts, tree_weights);
}

auto wilson_interval(std::int64_t successes, std::int64_t trials, double z) -> Proportion_ci {
  require(trials >= 1 && successes >= 0 && successes <= trials, "invalid proportion");
  auto n = static_cast<double>(trials);
  auto p = static_cast<double>(successes) / n;
  auto z2 = z * z;
  auto denom = 1.0 + z2 / n;
  auto centre = (p + z2 / (2.0 * n)) / denom;
  auto half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  auto lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  auto hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

auto paradox_scan(const Prior_spec& spec, const Scan_config& config,
                  const std::function<void(const Paradox_result&)>& on_row)
    -> std::vector<Paradox_result> {
  validate(spec);
  require(std::isfinite(config.t) && config.t > 0.0, "t must be positive");
  require(config.epsilon > 0.0 && config.epsilon < 1.0, "epsilon must lie in (0, 1)");
  require(!config.n_list.empty(), "n_list must not be empty");
  require(config.n_list.front() >= 1, "every n must be >= 1");
  require(std::is_sorted(config.n_list.begin(), config.n_list.end()) &&
              std::adjacent_find(config.n_list.begin(), config.n_list.end()) ==
                  config.n_list.end(),
          "n_list must be strictly ascending");
  require(config.trials >= 1, "trials must be >= 1");
  require(config.n_samples >= 1000, "n_samples must be >= 1000");

  auto draws = make_prior_draws(spec, config.n_samples, substream_seed(config.seed, {4}),
                                config.jobs);
  auto out = std::vector<Paradox_result>{};
  for (auto ni = std::size_t{0}; ni != config.n_list.size(); ++ni) {
    auto n = config.n_list[ni];
    auto hit = std::vector<char>(static_cast<std::size_t>(config.trials), 0);
    parallel_for(config.trials, config.jobs, [&](std::int64_t tr) {
      auto seed = substream_seed(config.seed, {3, ni, static_cast<std::uint64_t>(tr)});
      auto counts = simulate_counts(config.t, n, seed);
      auto post = posterior_from_logs(log_epi_fast(draws, counts), {1.0 / 3, 1.0 / 3, 1.0 / 3});
      hit[static_cast<std::size_t>(tr)] = post[0] >= 1.0 - config.epsilon ? 1 : 0;
    });
    auto successes = std::int64_t{0};
    for (auto h : hit) {
      successes += h;
    }
    auto row = Paradox_result{
        .n = n,
        .epsilon = config.epsilon,
        .delta_hat = static_cast<double>(successes) / static_cast<double>(config.trials),
        .ci = wilson_interval(successes, config.trials),
        .trials = config.trials,
        .successes = successes,
    };
    out.push_back(row);
    if (on_row) {
      on_row(row);
    }
  }
  return out;
}

auto log_mu(double t) -> double {
  auto q = star_probs(t);
  return q.p0() * std::log(q.p0()) + 3.0 * q.p1() * std::log(q.p1());
}

auto log_w(const Pattern_counts& counts, double t, const Log_pattern_probs& lp, int j) -> double {
  require(j == 2 || j == 3, "W_j is defined for j = 2, 3");
  auto d = delta_stats(counts, t);
  auto k = j == 2 ? 3 : 2;
  return d.d0 * lp.lp0 + (d[j] - d.d0 / 3.0) * lp.lp1 + (d.d1 + d[k] - 2.0 * d.d0 / 3.0) * lp.lp2;
}

auto log_u(double t, const Log_pattern_probs& lp) -> double {
  auto q = star_probs(t);
  return q.p0() * (lp.lp0 - std::log(q.p0())) + q.p1() * (lp.lp1 - std::log(q.p1())) +
         2.0 * q.p1() * (lp.lp2 - std::log(q.p1()));
}

auto claim1_check(const Prior_draws& draws, const Prior_spec& spec, double t,
                  const Pattern_counts& counts, int j) -> Claim1_report {
  require(j == 2 || j == 3, "claim checks compare against j = 2 or 3");
  validate(counts);
  auto band = band_interval(t);
  auto in = std::vector<char>(static_cast<std::size_t>(draws.size()));
  auto n_in = std::int64_t{0};
  for (auto k = std::size_t{0}; k != in.size(); ++k) {
    in[k] = band.contains(draws.z[k]) ? 1 : 0;
    n_in += in[k];
  }
  if (n_in == 0 || n_in == draws.size()) {
    throw Numerical_error{Numerical_error::Kind::empty_stratum,
                          n_in == 0 ? "no prior draw has 4 P0 - 1 inside I_t"
                                    : "no prior draw has 4 P0 - 1 outside I_t"};
  }
  auto out = in;
  for (auto& x : out) {
    x = x ? 0 : 1;
  }
  auto r = Claim1_report{};
  r.inside = expected_pi(draws, counts, j, in);
  r.outside = expected_pi(draws, counts, j, out);
  r.log_ratio = r.inside.log_mean - r.outside.log_mean;
  r.log_ratio_stderr = std::hypot(r.inside.stderr_, r.outside.stderr_);
  auto n = static_cast<double>(counts.total());
  auto ell = band_half_width(t);
  r.envelope_outside = n * log_mu(t) - n * ell * ell / 32.0;
  r.lower_diagnostic = n * log_mu(t) + log_q_n(spec, t, counts.total());
  r.envelope_ok = r.outside.log_mean <= r.envelope_outside + 1e-9 * std::abs(r.envelope_outside);
  return r;
}

auto claim1_check(const Prior_spec& spec, double t, const Pattern_counts& counts, int j,
                  std::int64_t n_samples, std::uint64_t seed, int jobs) -> Claim1_report {
  require(n_samples >= 1000, "n_samples must be >= 1000");
  return claim1_check(make_prior_draws(spec, n_samples, seed, jobs), spec, t, counts, j);
}

auto claim2_check(const Prior_draws& draws, double t, const Pattern_counts& counts, double c,
                  const std::vector<double>& z_grid, int j) -> Claim2_report {
  require(j == 2 || j == 3, "claim checks compare against j = 2 or 3");
  require(c > 1.0, "c must exceed 1");
  require(!z_grid.empty(), "z_grid must not be empty");
  validate(counts);
  auto band = band_interval(t);
  for (auto z : z_grid) {
    require(band.contains(z), "z_grid must lie inside I_t");
  }
  auto r = Claim2_report{};
  r.c = c;
  r.delta_z = band.width() / (2.0 * static_cast<double>(z_grid.size()));
  auto best = std::numeric_limits<double>::infinity();
  for (auto z : z_grid) {
    auto mask = std::vector<char>(static_cast<std::size_t>(draws.size()));
    auto hits = std::int64_t{0};
    for (auto k = std::size_t{0}; k != mask.size(); ++k) {
      mask[k] = std::abs(draws.z[k] - z) <= r.delta_z ? 1 : 0;
      hits += mask[k];
    }
    if (hits == 0) {
      throw Numerical_error{Numerical_error::Kind::empty_stratum,
                            "no prior draw in the band around z = " + std::to_string(z)};
    }
    auto e1 = expected_pi(draws, counts, 1, mask);
    auto ej = expected_pi(draws, counts, j, mask);
    auto b = Claim2_band{z, hits, e1.log_mean - ej.log_mean, std::hypot(e1.stderr_, ej.stderr_)};
    r.bands.push_back(b);
    if (b.log_ratio < best) {
      best = b.log_ratio;
      r.min_log_ratio_stderr = b.log_ratio_stderr;
    }
  }
  r.min_log_ratio = best;
  r.log_inf_over_4c2 = best - std::log(4.0 * c * c);
  r.log_inf_over_3c2 = best - std::log(3.0 * c * c);
  return r;
}

auto claim2_check(const Prior_spec& spec, double t, const Pattern_counts& counts, double c,
                  const std::vector<double>& z_grid, int j, std::int64_t n_samples,
                  std::uint64_t seed, int jobs) -> Claim2_report {
  require(n_samples >= 1000, "n_samples must be >= 1000");
  return claim2_check(make_prior_draws(spec, n_samples, seed, jobs), t, counts, c, z_grid, j);
}

auto gamma_box_check(double t, std::int64_t n, double c, int j, std::int64_t samples,
                     std::uint64_t seed) -> Gamma_check {
  require(std::isfinite(t) && t > 0.0, "t must be positive");
  require(j == 2 || j == 3, "W_j is defined for j = 2, 3");
  require(samples >= 1, "samples must be >= 1");
  require(n >= 1, "n must be >= 1");
  auto counts = Pattern_counts{};
  auto r = Gamma_check{};
  try {
    counts = make_fc_counts(n, c, t);
    r.has_fc_counts = true;
    r.min_log_w_minus_c_log_q1 = std::numeric_limits<double>::infinity();
    r.max_log_w = k_neg_inf;
  } catch (const Validation_error&) {
    r.min_log_w_minus_c_log_q1 = std::numeric_limits<double>::quiet_NaN();
    r.max_log_w = std::numeric_limits<double>::quiet_NaN();
  }
  r.min_n_log_u_minus_bound = std::numeric_limits<double>::infinity();
  auto q = star_probs(t);
  auto inv_n = 1.0 / static_cast<double>(n);
  auto bound = -5.0 * std::exp(-4.0 * t) / q.p0();
  auto rng = Rng{substream_seed(seed, {5})};
  for (auto k = std::int64_t{0}; k != samples; ++k) {
    // corners first, then uniform points
    auto a = k < 4 ? static_cast<double>(k >> 1) : rng.uniform();
    auto b = k < 4 ? static_cast<double>(k & 1) : rng.uniform();
    auto lp = log_pattern_probs(Branch_lengths{t + inv_n * a, inv_n * b});
    if (r.has_fc_counts) {
      auto lw = log_w(counts, t, lp, j);
      r.min_log_w_minus_c_log_q1 =
          std::min(r.min_log_w_minus_c_log_q1, lw - c * std::log(q.p1()));
      r.max_log_w = std::max(r.max_log_w, lw);
    }
    r.min_n_log_u_minus_bound =
        std::min(r.min_n_log_u_minus_bound, static_cast<double>(n) * log_u(t, lp) - bound);
  }
  return r;
}

auto identity_check(const Prior_spec& spec, double t, const Pattern_counts& counts, int j,
                    std::int64_t n_draws, std::uint64_t seed) -> Identity_check {
  require(j == 2 || j == 3, "W_j is defined for j = 2, 3");
  require(n_draws >= 1, "n_draws must be >= 1");
  validate(counts);
  auto draws = sample_prior(spec, seed, n_draws);
  auto n = static_cast<double>(counts.total());
  auto root_n = std::sqrt(n);
  auto s = static_cast<double>(counts.total() - counts[0]) / 3.0;
  auto d = delta_stats(counts, t);
  auto lmu = log_mu(t);
  auto r = Identity_check{};
  r.draws = n_draws;
  for (const auto& bl : draws) {
    auto lp = log_pattern_probs(bl);
    auto scale = std::max(1.0, std::abs(log_pi(counts, lp, j)));

    auto direct_j = log_pi(counts, lp, j);
    auto via_decomposition = n * lmu + n * log_u(t, lp) + root_n * log_w(counts, t, lp, j);
    r.decomposition = std::max(r.decomposition, std::abs(direct_j - via_decomposition) / scale);

    for (auto i = 1; i <= 3; ++i) {
      auto direct = log_pi(counts, lp, i);
      auto rewritten = term(counts[0], lp.lp0) + s * (lp.lp1 + 2.0 * lp.lp2) +
                       d[i] * root_n * (lp.lp1 - lp.lp2);
      r.rewrite = std::max(r.rewrite, std::abs(direct - rewritten) / scale);
    }

    // U = S_e (3 - S_i) / (3 - z), V = zeta(U); all differences formed without cancellation.
    auto se = std::exp(-4.0 * bl.t_e);
    auto one_minus_se = -std::expm1(-4.0 * bl.t_e);
    auto three_minus_si = -2.0 * std::expm1(-4.0 * bl.t_i);
    auto three_minus_z = 3.0 * one_minus_se + se * three_minus_si;
    auto u = se * three_minus_si / three_minus_z;
    auto one_minus_u = 1.0 - u;
    auto log_v = std::log1p(2.0 * u) + 2.0 * std::log(one_minus_u);
    auto lhs_prod = lp.lp1 + 2.0 * lp.lp2;
    auto rhs_prod = log_v + 3.0 * std::log(three_minus_z / 4.0) - std::log(27.0);
    r.product = std::max(r.product, std::abs(lhs_prod - rhs_prod) / std::max(1.0, std::abs(lhs_prod)));
    auto lhs_ratio = lp.lp1 - lp.lp2;
    auto rhs_ratio = std::log1p(2.0 * u) - std::log(one_minus_u);
    r.ratio = std::max(r.ratio, std::abs(lhs_ratio - rhs_ratio) / std::max(1.0, std::abs(lhs_ratio)));
  }
  return r;
}

}  // namespace starparadox
