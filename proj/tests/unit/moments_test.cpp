#include <cmath>
#include <fstream>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "starparadox/core_model.hpp"
#include "starparadox/errors.hpp"
#include "starparadox/moments.hpp"
#include "starparadox/priors.hpp"

namespace starparadox {
namespace {

auto sample_params() -> Sm_params {
  return {.alpha = 0.7, .eps = {0.0, 0.5, 1.3}, .gamma = {1.0, -0.2, 0.4}, .v0 = 0.2};
}

TEST(Moments, UniformClosedForm) {
  auto d = uniform01();
  for (auto t : {0.01, 0.5, 1.0, 7.3, 120.0, 1e4}) {
    EXPECT_NEAR(moment_mt(d, t), 1.0 / (t + 1.0), 1e-13 / (t + 1.0)) << t;
    EXPECT_NEAR(ratio_rt(d, t), 1.0 / (t + 2.0), 1e-11 / (t + 2.0)) << t;
  }
  auto t = 1e6;
  EXPECT_NEAR(moment_gap(d, t), 1.0 / ((t + 1.0) * (t + 2.0)), 1e-10 / (t * t));
}

TEST(Moments, BetaTailClosedForm) {
  for (auto a : {0.5, 2.0, 3.7}) {
    auto d = beta_tail(a);
    for (auto t : {0.3, 2.0, 50.0, 3000.0}) {
      // t B(t, a + 1)
      auto ref = t * boost::math::beta(t, a + 1.0);
      EXPECT_NEAR(moment_mt(d, t), ref, 1e-12 * ref) << a << " " << t;
    }
  }
  auto d = beta_tail(2.0);
  for (auto t : {1.0, 10.0, 1e5}) {
    EXPECT_NEAR(moment_mt(d, t), 2.0 / ((t + 1.0) * (t + 2.0)), 1e-12 * moment_mt(d, t));
    EXPECT_NEAR(2.0 * t * ratio_rt(d, t), 4.0 * t / (t + 3.0), 1e-9);
  }
}

TEST(Moments, LinearAndPointMass) {
  auto lin = linear_density();
  for (auto t : {0.5, 3.0, 40.0}) {
    EXPECT_NEAR(moment_mt(lin, t), 2.0 / (t + 2.0), 1e-13);
    EXPECT_NEAR(ratio_rt(lin, t), 1.0 / (t + 3.0), 1e-12);
  }
  auto one = point_mass_one();
  EXPECT_NEAR(moment_mt(one, 5.0), 1.0, 1e-15);
  EXPECT_NEAR(ratio_rt(one, 5.0), 0.0, 1e-15);
}

TEST(Moments, NamedDistributions) {
  EXPECT_EQ(v_dist_from_name("uniform01").name, uniform01().name);
  EXPECT_NEAR(moment_mt(v_dist_from_name("beta:2"), 1.0), 1.0 / 3.0, 1e-14);
  EXPECT_THROW(v_dist_from_name("gamma"), Validation_error);
  EXPECT_THROW(v_dist_from_name("beta:-1"), Validation_error);
}

TEST(Moments, ZetaDistributionAgainstDirectIntegral) {
  auto spec = parse_prior_spec("uniform:1");
  auto band = band_interval(0.1);
  for (auto z : {band.lo + 0.1 * band.width(), band.center()}) {
    auto d = zeta_u_dist(spec, z);
    auto ts = boost::math::quadrature::tanh_sinh<double>{};
    for (auto t : {0.5, 3.0, 20.0}) {
      auto ref = ts.integrate(
          [&](double v) {
            auto s = (3.0 - z) * zeta_inv(v) / 2.0;
            return t * std::pow(v, t - 1.0) * g_function(spec, z, s);
          },
          0.0, 1.0, 1e-11);
      EXPECT_NEAR(moment_mt(d, t), ref, 1e-8 * ref) << z << " " << t;
    }
  }
}

TEST(Moments, CurveAndGrid) {
  auto grid = geometric_t_grid(0.1, 1000.0, 8);
  ASSERT_EQ(grid.size(), 33u);
  EXPECT_DOUBLE_EQ(grid.front(), 0.1);
  EXPECT_NEAR(grid.back(), 1000.0, 1e-9);
  auto rows = moment_curve(uniform01(), grid, 2);
  ASSERT_EQ(rows.size(), grid.size());
  for (const auto& r : rows) {
    EXPECT_NEAR(r.two_t_r_t, 2.0 * r.t / (r.t + 2.0), 1e-10);
    EXPECT_NEAR(r.m_t1, 1.0 / (r.t + 2.0), 1e-13);
  }
}

TEST(Threshold, UniformAndLinear) {
  auto grid = geometric_t_grid(0.01, 1e4, 64);
  auto first_at_least = [&](double x) {
    for (auto t : grid) {
      if (t >= x * (1 - 1e-12)) {
        return t;
      }
    }
    return grid.back();
  };
  auto u = sm_threshold_scan(uniform01(), 1.0, grid);
  ASSERT_TRUE(u.t_star);
  EXPECT_DOUBLE_EQ(*u.t_star, first_at_least(2.0));
  auto lin = sm_threshold_scan(linear_density(), 1.0, grid);
  ASSERT_TRUE(lin.t_star);
  EXPECT_DOUBLE_EQ(*lin.t_star, first_at_least(3.0));
  // 2 t R_t -> 0 for a point mass: never reached
  EXPECT_FALSE(sm_threshold_scan(point_mass_one(), 1.0, grid).t_star);
  EXPECT_THROW(sm_threshold_scan(uniform01(), 1.0, geometric_t_grid(1.0, 10.0)), Validation_error);
}

TEST(SpecialFunctions, AgainstDefinitions) {
  auto alpha = 0.7;
  for (auto t : {1.0, 2.4, 9.9, 31.0}) {
    auto frac = t - std::floor(t);
    for (auto eps : {0.5, 1.3}) {
      EXPECT_NEAR(lambda_fn(eps, t, alpha),
                  std::tgamma(frac + alpha + 1) / std::tgamma(frac + alpha + eps + 1), 1e-13);
      auto prod = 1.0L;
      for (auto l = 1; l <= static_cast<int>(std::floor(t)) + 1; ++l) {
        prod *= 1.0L - eps / (alpha + eps + frac + l);
      }
      EXPECT_NEAR(product_p(eps, t, alpha), static_cast<double>(prod), 1e-13) << t;
      auto s = s_sum(eps, t, alpha);
      auto tt = t_sum(eps, t, alpha);
      EXPECT_LE(std::exp(-s - tt), product_p(eps, t, alpha) * (1 + 1e-13));
      EXPECT_GE(std::exp(-s), product_p(eps, t, alpha) * (1 - 1e-13));
      auto scaled = std::pow(t, eps) * product_p(eps, t, alpha);
      EXPECT_LE(c_minus(eps, alpha), scaled);
      EXPECT_GE(c_plus(eps, alpha), scaled);
    }
    // (t + alpha)(t + alpha - 1) ... (t + {alpha}) / Gamma(alpha + 1)
    auto a = 2.3;
    auto q = (t + 2.3) * (t + 1.3) * (t + 0.3) / std::tgamma(3.3);
    EXPECT_NEAR(q_alpha(t, a), q, 1e-12 * q);
    EXPECT_NEAR(t_beta(t, alpha), t * boost::math::beta(t, alpha + 1.0), 1e-14);
  }
  EXPECT_NEAR(beta_fn(2.0, 3.0), 1.0 / 12.0, 1e-16);
}

TEST(SmParams, ProductFormMatchesQuadrature) {
  auto p = sample_params();
  for (auto sign : {1, -1}) {
    for (auto t : {0.4, 1.0, 3.5, 40.0, 900.0}) {
      auto quad = m_pm_quadrature(p, t, sign);
      EXPECT_NEAR(m_pm_product(p, t, sign), quad, 1e-10 * std::abs(quad)) << sign << " " << t;
    }
  }
}

TEST(SmParams, ChiLemmaHolds) {
  auto p = sample_params();
  auto r = lemma_chi_check(p, geometric_t_grid(1.0, 1e5, 16));
  EXPECT_LE(r.max_upper_violation, 0.0);
  EXPECT_LE(r.max_lower_violation, 0.0);
  EXPECT_DOUBLE_EQ(r.beta, std::min(1.3, 1.5));
  EXPECT_THROW(lemma_chi_check(p, {0.5, 2.0}), Validation_error);
}

TEST(SmParams, LowerBoundExactForPureBeta) {
  auto p = Sm_params{.alpha = 2.0, .eps = {0.0, 1.5}, .gamma = {1.0, 0.0}, .v0 = 0.0};
  auto d = beta_tail(2.0);
  for (auto t : {0.5, 4.0, 100.0}) {
    EXPECT_NEAR(r_lower_bound(p, t), ratio_rt(d, t), 1e-10);
  }
}

TEST(SmParams, LowerBoundBelowTrueRatio) {
  // P(V >= v) = w - 0.3 w^{5/2}, w = 1 - v: inside the band gamma_0 w^1 +- 0.3 w^{2.5}
  auto d = V_dist{"mixed", [](double w) { return w - 0.3 * std::pow(w, 2.5); }, {}};
  auto p = Sm_params{.alpha = 1.0, .eps = {0.0, 1.5}, .gamma = {1.0, 0.3}, .v0 = 0.0};
  auto reached_positive = false;
  for (auto t : geometric_t_grid(0.5, 1e4, 8)) {
    auto bound = r_lower_bound(p, t);
    EXPECT_LE(bound, ratio_rt(d, t) + 1e-12) << t;
    reached_positive = reached_positive || bound > 0.0;
  }
  EXPECT_TRUE(reached_positive);
  auto lower = sm_threshold_scan(p, 1.0, geometric_t_grid(0.1, 1e4, 32));
  auto actual = sm_threshold_scan(d, 1.0, geometric_t_grid(0.1, 1e4, 32));
  ASSERT_TRUE(lower.t_star);
  ASSERT_TRUE(actual.t_star);
  EXPECT_GE(*lower.t_star, *actual.t_star);
}

TEST(SmParams, Validation) {
  auto bad = sample_params();
  bad.eps = {0.1, 0.5, 1.3};
  EXPECT_THROW(validate(bad), Validation_error);
  bad = sample_params();
  bad.eps = {0.0, 1.2, 1.3};
  EXPECT_THROW(validate(bad), Validation_error);
  bad = sample_params();
  bad.gamma.back() = -0.1;
  EXPECT_THROW(validate(bad), Validation_error);
  bad = sample_params();
  bad.v0 = 1.0;
  EXPECT_THROW(validate(bad), Validation_error);
  EXPECT_NO_THROW(validate(sample_params()));
  EXPECT_DOUBLE_EQ(sample_params().gamma_sum(), 1.6);
}

TEST(SpecialFunctions, LambdaRecurrence) {
  // Gamma(x + 1) = x Gamma(x): Lambda(1, t) = 1 / ({t} + alpha + 1)
  for (auto t : {1.0, 2.25, 17.5}) {
    for (auto alpha : {0.3, 2.0}) {
      EXPECT_NEAR(lambda_fn(1.0, t, alpha), 1.0 / (t - std::floor(t) + alpha + 1.0), 1e-14);
    }
  }
  // t B(t, alpha + 1) = Gamma(t + 1) Gamma(alpha + 1) / Gamma(t + alpha + 1) at (5, 1.5)
  EXPECT_NEAR(moment_mt(beta_tail(1.5), 5.0),
              boost::math::tgamma(6.0) * boost::math::tgamma(2.5) / boost::math::tgamma(7.5), 1e-13);
}

TEST(SmParams, ChiExampleAndTrivialCase) {
  auto p = Sm_params{.alpha = 1.0, .eps = {0.0, 1.0, 3.0}, .gamma = {1.0, 0.5, 0.2}, .v0 = 0.0};
  auto r = lemma_chi_check(p, geometric_t_grid(1.0, 1e4, 32));
  EXPECT_LE(r.max_upper_violation, 1e-12);
  EXPECT_LE(r.max_lower_violation, 1e-12);
  EXPECT_GT(r.beta, 1.0);
  EXPECT_LE(r.beta, 2.0);
  auto trivial = Sm_params{.alpha = 1.0, .eps = {0.0, 1.0, 3.0}, .gamma = {1.0, 0.0, 0.0}};
  for (auto t : {1.0, 10.0, 1000.0}) {
    EXPECT_EQ(chi_pm(trivial, t, 1), chi_pm(trivial, t, -1));
  }
  EXPECT_LE(lemma_chi_check(trivial, geometric_t_grid(1.0, 1e4, 8)).max_upper_violation, 1e-12);
}

TEST(Threshold, MonotoneInRemainderAndContinuousInGamma) {
  auto grid = geometric_t_grid(0.1, 1e4, 64);
  auto base = Sm_params{.alpha = 1.0, .eps = {0.0, 0.5, 1.5}, .gamma = {1.0, 0.3, 0.1}};
  auto previous = 0.0;
  for (auto g : {0.0, 0.05, 0.1, 0.2, 0.4}) {
    auto p = base;
    p.gamma.back() = g;
    auto r = sm_threshold_scan(p, 1.0, grid);
    ASSERT_TRUE(r.t_star) << g;
    EXPECT_GE(*r.t_star, previous) << g;
    previous = *r.t_star;
  }
  // a +-10% perturbation of gamma moves t* smoothly: neighbouring perturbations differ by at
  // most a couple of grid steps
  auto step = std::pow(10.0, 1.0 / 64.0);
  auto last = std::optional<double>{};
  for (auto k = -10; k <= 10; ++k) {
    auto p = base;
    p.gamma[1] *= 1.0 + 0.01 * k;
    auto r = sm_threshold_scan(p, 1.0, grid);
    ASSERT_TRUE(r.t_star);
    if (last) {
      EXPECT_LE(std::max(*r.t_star / *last, *last / *r.t_star), step * step * (1 + 1e-12)) << k;
    }
    last = r.t_star;
  }
}

TEST(Threshold, ZetaDistributionMatchesFixture) {
  auto in = std::ifstream{std::string{STARPARADOX_FIXTURE_DIR} + "/tstar_z2.011.json"};
  ASSERT_TRUE(in);
  auto j = nlohmann::json::parse(in);
  auto d = zeta_u_dist(parse_prior_spec("uniform:1.0"), 2.011);
  auto r = sm_threshold_scan(d, 0.5, geometric_t_grid(0.01, 1e4, 64));
  ASSERT_TRUE(r.t_star);
  EXPECT_DOUBLE_EQ(*r.t_star, j.at("t_star").get<double>());
}

TEST(Moments, CurveInvariants) {
  auto d = zeta_u_dist(parse_prior_spec("power:0.5"), 1.9);
  auto rows = moment_curve(d, geometric_t_grid(0.1, 1e3, 8));
  auto prev = 1.0;
  for (const auto& r : rows) {
    EXPECT_GT(r.m_t, 0.0);
    EXPECT_LE(r.m_t, prev * (1 + 1e-12));
    EXPECT_LE(r.m_t1, r.m_t);
    EXPECT_GE(r.r_t, 0.0);
    EXPECT_LE(r.r_t, 1.0);
    prev = r.m_t;
  }
}

}  // namespace
}  // namespace starparadox
