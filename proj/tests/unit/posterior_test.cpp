#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "starparadox/errors.hpp"
#include "starparadox/posterior.hpp"
#include "starparadox/priors.hpp"
#include "starparadox/rng.hpp"

namespace starparadox {
namespace {

auto uniform1 = parse_prior_spec("uniform:1");

// E[Pi_1] under uniform:1 by nested Gauss-Kronrod in x = e^{-4 T_e} (uniform) and T_i.
auto quadrature_epi(const Pattern_counts& c, int i) -> double {
  using boost::math::quadrature::gauss_kronrod;
  auto n0 = static_cast<double>(c.n[0]);
  auto ni = static_cast<double>(c.n[static_cast<std::size_t>(i)]);
  auto rest = static_cast<double>(c.total()) - n0 - ni;
  auto inner = [&](double x) {
    return gauss_kronrod<double, 61>::integrate(
        [&](double ti) {
          auto e = x * std::exp(-4.0 * ti);
          auto p0 = (1.0 + x + 2.0 * e) / 4.0;
          auto p1 = (1.0 + x - 2.0 * e) / 4.0;
          auto p2 = (1.0 - x) / 4.0;
          return std::pow(p0, n0) * std::pow(p1, ni) * std::pow(p2, rest);
        },
        0.0, 1.0, 15, 1e-12);
  };
  return gauss_kronrod<double, 61>::integrate(inner, 0.0, 1.0, 15, 1e-11);
}

TEST(LogPi, DirectProduct) {
  auto p = pattern_probs({0.2, 0.05});
  auto c = Pattern_counts{{10, 4, 3, 2}};
  auto direct = 10 * std::log(p.p0()) + 4 * std::log(p.p1()) + 5 * std::log(p.p2());
  EXPECT_NEAR(log_pi(c, p, 1), direct, 1e-12);
  EXPECT_NEAR(log_pi(c, log_pattern_probs({0.2, 0.05}), 1), direct, 1e-12);
  EXPECT_NEAR(log_pi(c, p, 2), 10 * std::log(p.p0()) + 3 * std::log(p.p1()) + 6 * std::log(p.p2()),
              1e-12);
  // 0 log 0 = 0
  auto star = pattern_probs({0.2, 0.0});
  EXPECT_TRUE(std::isfinite(log_pi(Pattern_counts{{5, 0, 0, 0}}, pattern_probs({0.0, 0.3}), 1)));
  EXPECT_NEAR(log_pi(c, star, 1), 10 * std::log(star.p0()) + 9 * std::log(star.p1()), 1e-12);
  EXPECT_THROW(log_pi(c, p, 0), Validation_error);
}

TEST(ExpectedPi, ExactOnGivenDraws) {
  auto branches = std::vector<Branch_lengths>{{0.1, 0.0}, {0.05, 0.2}, {1.0, 0.01}, {0.3, 3.0}};
  auto d = make_prior_draws(branches);
  auto c = Pattern_counts{{30, 8, 6, 6}};
  auto sum = 0.0L;
  for (const auto& b : branches) {
    sum += std::exp(static_cast<long double>(log_pi(c, pattern_probs(b), 1)));
  }
  auto m = expected_pi(d, c, 1);
  EXPECT_NEAR(m.log_mean, static_cast<double>(std::log(sum / 4.0L)), 1e-12);
  EXPECT_EQ(m.count, 4);
  auto mask = std::vector<char>{1, 0, 0, 0};
  EXPECT_NEAR(expected_pi(d, c, 1, mask).log_mean, log_pi(c, pattern_probs(branches[0]), 1), 1e-12);
  EXPECT_THROW(expected_pi(d, c, 1, std::vector<char>{0, 0, 0, 0}), Numerical_error);
}

TEST(ExpectedPi, AgreesWithQuadrature) {
  auto c = Pattern_counts{{14, 3, 2, 1}};
  for (auto i : {1, 2, 3}) {
    auto m = expected_pi(uniform1, c, i, 200000, 9);
    auto ref = std::log(quadrature_epi(c, i));
    EXPECT_NEAR(m.log_mean, ref, 5.0 * m.stderr_) << i;
    EXPECT_LT(m.stderr_, 0.01);
  }
}

TEST(ExpectedPi, RejectsSmallSample) {
  EXPECT_THROW(expected_pi(uniform1, Pattern_counts{{5, 1, 1, 1}}, 1, 999, 1), Validation_error);
}

TEST(PriorDraws, IndependentOfJobs) {
  auto a = make_prior_draws(uniform1, 3 * k_chunk_size + 17, 5, 1);
  auto b = make_prior_draws(uniform1, 3 * k_chunk_size + 17, 5, 3);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.t_e, b.t_e);
  EXPECT_EQ(a.lp1, b.lp1);
  for (auto k = 0; k != 100; ++k) {
    EXPECT_NEAR(a.z[k], std::exp(-4.0 * a.t_e[k]) * (1.0 + 2.0 * std::exp(-4.0 * a.t_i[k])), 1e-14);
  }
}

TEST(Posterior, SumsToOneAndRespectsSymmetry) {
  auto d = make_prior_draws(uniform1, 20000, 3);
  auto sym = posterior_probs(d, Pattern_counts{{700, 100, 100, 100}}, {1, 1, 1});
  for (auto p : sym.posterior) {
    EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
  }
  auto tilt = posterior_probs(d, Pattern_counts{{700, 130, 90, 80}}, {1, 1, 1});
  EXPECT_NEAR(tilt.posterior[0] + tilt.posterior[1] + tilt.posterior[2], 1.0, 1e-12);
  EXPECT_GT(tilt.posterior[0], tilt.posterior[1]);
  EXPECT_GT(tilt.posterior[1], tilt.posterior[2]);
  // prior tree weights multiply the evidence
  auto w = posterior_probs(d, Pattern_counts{{700, 100, 100, 100}}, {2, 1, 1});
  EXPECT_NEAR(w.posterior[0], 0.5, 1e-12);
  EXPECT_THROW(posterior_probs(d, Pattern_counts{{7, 1, 1, 1}}, {1, 0, 1}), Validation_error);
}

TEST(Simulate, CountsHaveStarMeans) {
  auto q = star_probs(0.1);
  auto sum = std::array<double, 4>{};
  auto reps = 400;
  auto n = 1000;
  for (auto r = 0; r != reps; ++r) {
    auto c = simulate_counts(0.1, n, static_cast<std::uint64_t>(r));
    EXPECT_EQ(c.total(), n);
    for (auto k = 0; k != 4; ++k) {
      sum[k] += static_cast<double>(c.n[k]);
    }
  }
  auto qa = q.as_array();
  for (auto k = 0; k != 4; ++k) {
    auto sd = std::sqrt(n * qa[k] * (1 - qa[k]) / reps);
    EXPECT_NEAR(sum[k] / reps, n * qa[k], 5.0 * sd) << k;
  }
  EXPECT_EQ(simulate_counts(0.1, n, 7).n, simulate_counts(0.1, n, 7).n);
}

TEST(Wilson, ReferenceValues) {
  auto a = wilson_interval(5, 10);
  EXPECT_NEAR(a.lo, 0.2366, 1e-4);
  EXPECT_NEAR(a.hi, 0.7634, 1e-4);
  auto zero = wilson_interval(0, 10);
  EXPECT_EQ(zero.lo, 0.0);
  auto z2 = 1.959963984540054 * 1.959963984540054;
  EXPECT_NEAR(zero.hi, z2 / (10.0 + z2), 1e-15);
  EXPECT_EQ(wilson_interval(10, 10).hi, 1.0);
  EXPECT_THROW(wilson_interval(11, 10), Validation_error);
}

TEST(Scan, MatchesTrialByTrialRecomputation) {
  auto cfg = Scan_config{.t = 0.1, .epsilon = 0.05, .n_list = {50, 400}, .trials = 40,
                         .n_samples = 5000, .seed = 21, .jobs = 1};
  auto rows_seen = std::vector<std::int64_t>{};
  auto rows = paradox_scan(uniform1, cfg, [&](const Paradox_result& r) { rows_seen.push_back(r.n); });
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows_seen, (std::vector<std::int64_t>{50, 400}));

  auto draws = make_prior_draws(uniform1, cfg.n_samples, substream_seed(cfg.seed, {4}));
  for (auto ni = std::size_t{0}; ni != cfg.n_list.size(); ++ni) {
    auto hits = std::int64_t{0};
    for (auto tr = std::uint64_t{0}; tr != 40; ++tr) {
      auto counts = simulate_counts(cfg.t, cfg.n_list[ni], substream_seed(cfg.seed, {3, ni, tr}));
      hits += posterior_probs(draws, counts, {1, 1, 1}).posterior[0] >= 0.95 ? 1 : 0;
    }
    EXPECT_EQ(rows[ni].successes, hits);
    EXPECT_DOUBLE_EQ(rows[ni].delta_hat, hits / 40.0);
    EXPECT_LE(rows[ni].ci.lo, rows[ni].delta_hat);
    EXPECT_GE(rows[ni].ci.hi, rows[ni].delta_hat);
  }

  cfg.jobs = 3;
  auto again = paradox_scan(uniform1, cfg);
  EXPECT_EQ(again[0].successes, rows[0].successes);
  EXPECT_EQ(again[1].successes, rows[1].successes);
}

TEST(Scan, RejectsBadConfig) {
  auto cfg = Scan_config{.n_list = {100, 100}};
  EXPECT_THROW(paradox_scan(uniform1, cfg), Validation_error);
  cfg.n_list = {100};
  cfg.epsilon = 1.0;
  EXPECT_THROW(paradox_scan(uniform1, cfg), Validation_error);
}

TEST(Decomposition, MuAndU) {
  auto t = 0.1;
  auto q = star_probs(t);
  EXPECT_NEAR(log_mu(t), q.p0() * std::log(q.p0()) + 3 * q.p1() * std::log(q.p1()), 1e-15);
  auto b = Branch_lengths{0.13, 0.02};
  EXPECT_NEAR(log_u(t, log_pattern_probs(b)), -kl_divergence(q, pattern_probs(b)), 1e-14);
  EXPECT_NEAR(log_u(t, log_pattern_probs({t, 0.0})), 0.0, 1e-15);
}

TEST(Decomposition, IdentitiesHoldPerDraw) {
  for (auto text : {"uniform:1", "power:0.5", "tame:4,1"}) {
    auto counts = make_fc_counts(10000, 3.0, 0.1);
    for (auto j : {2, 3}) {
      auto r = identity_check(parse_prior_spec(text), 0.1, counts, j, 5000, 8);
      EXPECT_LT(r.decomposition, 1e-9) << text;
      EXPECT_LT(r.rewrite, 1e-9) << text;
      EXPECT_LT(r.product, 1e-9) << text;
      EXPECT_LT(r.ratio, 1e-9) << text;
    }
  }
}

TEST(Decomposition, GammaBoxBounds) {
  struct Case {
    std::int64_t n;
    double c;
  };
  for (auto [n, c] : {Case{1000, 1.5}, Case{10000, 1.5}, Case{10000, 3.0}, Case{100000, 3.0},
                      Case{100000, 6.0}}) {
    for (auto j : {2, 3}) {
      auto g = gamma_box_check(0.1, n, c, j, 2000, 4);
      ASSERT_TRUE(g.has_fc_counts) << n;
      EXPECT_GE(g.min_log_w_minus_c_log_q1, 0.0);
      EXPECT_LE(g.max_log_w, 0.0);
      EXPECT_GE(g.min_n_log_u_minus_bound, 0.0);
    }
  }
  auto small = gamma_box_check(0.1, 10, 1.5, 2, 500, 4);
  EXPECT_FALSE(small.has_fc_counts);
  EXPECT_TRUE(std::isnan(small.max_log_w));
  EXPECT_GE(small.min_n_log_u_minus_bound, 0.0);
}

TEST(Claims, EnvelopeAndPositiveRatio) {
  auto counts = make_fc_counts(2000, 1.5, 0.1);
  auto r = claim1_check(uniform1, 0.1, counts, 2, 40000, 2);
  EXPECT_TRUE(r.envelope_ok);
  EXPECT_LE(r.outside.log_mean, r.envelope_outside);
  EXPECT_GT(r.log_ratio, 0.0);
  EXPECT_GT(r.inside.count + r.outside.count, 39999);

  auto band = band_interval(0.1);
  auto z = std::vector<double>{band.lo + 0.3 * band.width(), band.center()};
  auto c2 = claim2_check(uniform1, 0.1, counts, 1.5, z, 2, 40000, 2);
  ASSERT_EQ(c2.bands.size(), 2u);
  EXPECT_GT(c2.min_log_ratio, 0.0);
  EXPECT_NEAR(c2.log_inf_over_4c2, c2.min_log_ratio - std::log(4.0 * 1.5 * 1.5), 1e-12);
  EXPECT_THROW(claim2_check(uniform1, 0.1, counts, 1.5, {band.hi + 0.01}, 2, 40000, 2),
               Validation_error);
}

}  // namespace
}  // namespace starparadox
