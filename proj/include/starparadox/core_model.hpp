#pragma once

// Exact formulas of the three-taxon, two-state symmetric substitution model.
//
// Site patterns are indexed 0..3: pattern 0 means all three taxa agree, pattern i (i = 1, 2, 3)
// means taxon i is the odd one out.  Probabilities are given for the resolved tree R_1, whose
// external branch length is t_e and internal branch length is t_i; the other two resolved trees
// follow by permuting pattern labels.

#include <array>
#include <cstdint>
#include <span>

namespace starparadox {

struct Branch_lengths {
  double t_e = 0.0;  // external branch
  double t_i = 0.0;  // internal branch
};

auto validate(const Branch_lengths& bl) -> void;

// Pattern probabilities (p0, p1, p2, p3) with p2 == p3 stored once.
class Pattern_probs {
 public:
  Pattern_probs() = default;
  Pattern_probs(double p0, double p1, double p2) : p0_{p0}, p1_{p1}, p2_{p2} {}

  auto p0() const -> double { return p0_; }
  auto p1() const -> double { return p1_; }
  auto p2() const -> double { return p2_; }
  auto p3() const -> double { return p2_; }

  auto operator[](int i) const -> double { return i == 0 ? p0_ : i == 1 ? p1_ : p2_; }
  auto as_array() const -> std::array<double, 4> { return {p0_, p1_, p2_, p2_}; }

 private:
  double p0_ = 1.0;
  double p1_ = 0.0;
  double p2_ = 0.0;
};

// Natural logarithms of the pattern probabilities, evaluated in cancellation-free form.
// Entries are -infinity where the probability is exactly zero.
struct Log_pattern_probs {
  double lp0 = 0.0;
  double lp1 = 0.0;
  double lp2 = 0.0;
};

struct Pattern_counts {
  std::array<std::int64_t, 4> n{};

  auto total() const -> std::int64_t { return n[0] + n[1] + n[2] + n[3]; }
  auto operator[](int i) const -> std::int64_t { return n[i]; }
};

auto validate(const Pattern_counts& counts) -> void;

// Scaled, centred pattern counts.  d1 + d2 + d3 == 0 up to rounding.
struct Delta_stats {
  double d0 = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;

  auto operator[](int i) const -> double { return i == 0 ? d0 : i == 1 ? d1 : i == 2 ? d2 : d3; }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  auto center() const -> double { return 0.5 * (lo + hi); }
  auto width() const -> double { return hi - lo; }
  auto contains(double x) const -> bool { return lo <= x && x <= hi; }
};

// exp(-4 t_e) below this is treated as exactly zero (saturated external branch).
inline constexpr double k_saturation_threshold = 1e-300;

auto pattern_probs(const Branch_lengths& bl) -> Pattern_probs;
auto log_pattern_probs(const Branch_lengths& bl) -> Log_pattern_probs;

// Star tree with common branch length t: (q0, q1, q1, q1).  Same as pattern_probs({t, 0}).
auto star_probs(double t) -> Pattern_probs;

// Half-width l_t = 3 e^{-4t} (1 - e^{-4t}) of the band around 4 q0 - 1.
auto band_half_width(double t) -> double;

// I_t = [4 q0 - 1 - l_t, 4 q0 - 1 + l_t].
auto band_interval(double t) -> Interval;

auto delta_stats(const Pattern_counts& counts, double t) -> Delta_stats;

// Membership in F_c^{(n)}: -2c <= d2, d3 <= -c and -c <= d0 <= 0.
auto in_band_fc(const Pattern_counts& counts, double c, double t) -> bool;

// Builds a count vector of total n whose statistics sit near d0 = -c/2, d2 = d3 = -3c/2,
// i.e. inside F_c^{(n)}.  Throws Validation_error when rounding cannot land inside.
auto make_fc_counts(std::int64_t n, double c, double t) -> Pattern_counts;

// zeta(u) = (1 + 2u)(1 - u)^2 on [0, 1], decreasing from 1 to 0.
auto zeta(double u) -> double;

// Inverse of zeta on [0, 1]; accurate to a few ulps, including near v = 1.
auto zeta_inv(double v) -> double;

// u in [0, 1] with 1 - zeta(u) = w, for w in [0, 1]; full relative precision for small w.
auto zeta_inv_gap(double w) -> double;

// sum_i q_i log(q_i / p_i); +infinity when p_i == 0 < q_i.
auto kl_divergence(std::span<const double> q, std::span<const double> p) -> double;
auto kl_divergence(const Pattern_probs& q, const Pattern_probs& p) -> double;

}  // namespace starparadox
