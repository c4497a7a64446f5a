#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "starparadox/core_model.hpp"
#include "starparadox/errors.hpp"
#include "starparadox/moments.hpp"
#include "starparadox/posterior.hpp"
#include "starparadox/prior_spec.hpp"
#include "starparadox/priors.hpp"
#include "starparadox/taylor_fit.hpp"

namespace py = pybind11;
using namespace starparadox;

namespace {

auto counts_from(const std::array<std::int64_t, 4>& n) -> Pattern_counts {
  auto c = Pattern_counts{n};
  validate(c);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Star-tree paradox: exact model, priors, posterior Monte Carlo and moment bounds";
  m.attr("__version__") = STARPARADOX_VERSION;

  py::register_exception<Validation_error>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<Numerical_error>(m, "NumericalError", PyExc_RuntimeError);

  // model
  m.def("pattern_probs", [](double t_e, double t_i) {
    return pattern_probs({t_e, t_i}).as_array();
  }, py::arg("t_e"), py::arg("t_i"));
  m.def("log_pattern_probs", [](double t_e, double t_i) {
    auto lp = log_pattern_probs({t_e, t_i});
    return std::array<double, 3>{lp.lp0, lp.lp1, lp.lp2};
  }, py::arg("t_e"), py::arg("t_i"));
  m.def("star_probs", [](double t) { return star_probs(t).as_array(); }, py::arg("t"));
  m.def("band_interval", [](double t) {
    auto b = band_interval(t);
    return std::pair{b.lo, b.hi};
  }, py::arg("t"));
  m.def("band_half_width", &band_half_width, py::arg("t"));
  m.def("delta_stats", [](const std::array<std::int64_t, 4>& n, double t) {
    auto d = delta_stats(counts_from(n), t);
    return std::array<double, 4>{d.d0, d.d1, d.d2, d.d3};
  }, py::arg("counts"), py::arg("t"));
  m.def("in_band_fc", [](const std::array<std::int64_t, 4>& n, double c, double t) {
    return in_band_fc(counts_from(n), c, t);
  }, py::arg("counts"), py::arg("c"), py::arg("t"));
  m.def("make_fc_counts", [](std::int64_t n, double c, double t) {
    return make_fc_counts(n, c, t).n;
  }, py::arg("n"), py::arg("c"), py::arg("t"));
  m.def("zeta", &zeta, py::arg("u"));
  m.def("zeta_inv", &zeta_inv, py::arg("v"));
  m.def("kl_divergence", [](const std::vector<double>& q, const std::vector<double>& p) {
    return kl_divergence(q, p);
  }, py::arg("q"), py::arg("p"));

  // priors
  m.def("normalize_prior", [](const std::string& text) {
    return to_shorthand(parse_prior_spec(text));
  }, py::arg("spec"), "Parse a prior spec and return its canonical shorthand.");
  m.def("prior_json", [](const std::string& text) {
    return to_json(parse_prior_spec(text)).dump();
  }, py::arg("spec"));
  m.def("sample_prior", [](const std::string& spec, std::uint64_t seed, std::int64_t count) {
    auto draws = sample_prior(parse_prior_spec(spec), seed, count);
    auto out = std::vector<std::pair<double, double>>{};
    out.reserve(draws.size());
    for (const auto& b : draws) {
      out.emplace_back(b.t_e, b.t_i);
    }
    return out;
  }, py::arg("spec"), py::arg("seed"), py::arg("count"));
  m.def("g_function", [](const std::string& spec, double z, double s) {
    return g_function(parse_prior_spec(spec), z, s);
  }, py::arg("spec"), py::arg("z"), py::arg("s"));
  m.def("h_function", [](const std::string& spec, double z, double s) {
    return h_function(parse_prior_spec(spec), z, s);
  }, py::arg("spec"), py::arg("z"), py::arg("s"));
  m.def("s_saturation", [](const std::string& spec, double z) {
    return s_saturation(parse_prior_spec(spec), z);
  }, py::arg("spec"), py::arg("z"));
  m.def("check_tempered", [](const std::string& spec, double t) {
    auto v = check_tempered(parse_prior_spec(spec), t);
    auto d = py::dict{};
    d["tempered"] = v.tempered;
    d["condition1"] = std::string{to_string(v.condition1.status)};
    d["condition2"] = std::string{to_string(v.condition2.status)};
    d["diagnostic"] = v.condition1.diagnostic;
    if (v.condition1.model) {
      d["alpha"] = v.condition1.model->alpha;
      d["eps"] = v.condition1.model->eps;
    }
    return d;
  }, py::arg("spec"), py::arg("t") = 0.1);

  // posterior
  m.def("simulate_counts", [](double t, std::int64_t n, std::uint64_t seed) {
    return simulate_counts(t, n, seed).n;
  }, py::arg("t"), py::arg("n"), py::arg("seed"));
  m.def("posterior_probs", [](const std::string& spec, const std::array<std::int64_t, 4>& n,
                              std::int64_t samples, std::uint64_t seed, int jobs) {
    auto est = py::gil_scoped_release{};
    auto r = posterior_probs(parse_prior_spec(spec), counts_from(n), {1.0 / 3, 1.0 / 3, 1.0 / 3},
                             samples, seed, jobs);
    return std::pair{r.posterior, r.log_epi};
  }, py::arg("spec"), py::arg("counts"), py::arg("samples") = 100000, py::arg("seed") = 1,
     py::arg("jobs") = 1, "Posterior of the three resolved trees under equal weights, and log E[Pi_i].");
  m.def("wilson_interval", [](std::int64_t k, std::int64_t n) {
    auto ci = wilson_interval(k, n);
    return std::pair{ci.lo, ci.hi};
  }, py::arg("successes"), py::arg("trials"));

  // moments
  m.def("moment_curve", [](const std::string& dist, const std::vector<double>& t_grid) {
    auto rows = moment_curve(v_dist_from_name(dist), t_grid);
    auto out = std::vector<std::array<double, 4>>{};
    for (const auto& r : rows) {
      out.push_back({r.t, r.m_t, r.m_t1, r.r_t});
    }
    return out;
  }, py::arg("dist"), py::arg("t_grid"), "Rows (t, M_t, M_{t+1}, R_t).");
  m.def("geometric_t_grid", &geometric_t_grid, py::arg("lo"), py::arg("hi"),
        py::arg("per_decade") = 64);
  m.def("t_beta", &t_beta, py::arg("t"), py::arg("alpha"));
}
