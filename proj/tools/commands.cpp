#include "commands.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "manifest.hpp"
#include "starparadox/errors.hpp"
#include "starparadox/moments.hpp"
#include "starparadox/posterior.hpp"
#include "starparadox/prior_spec.hpp"
#include "starparadox/rng.hpp"
#include "starparadox/taylor_fit.hpp"

namespace starparadox::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Shortest representation that round-trips; locale independent.
auto num(double x) -> std::string {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

auto default_seed() -> std::uint64_t {
  if (const auto* s = std::getenv(k_seed_env); s != nullptr && *s != '\0') {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw Validation_error{std::string{k_seed_env} + " must be a nonnegative integer"};
    }
  }
  return 1;
}

// Where a command writes: a file (flushed per write) or the caller's stream; keeps the bytes
// for the manifest digest.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_{path.empty() ? "-" : path} {
    if (path_ == "-") {
      os_ = &fallback;
    } else {
      file_.open(path_, std::ios::binary);
      require(static_cast<bool>(file_), "cannot open output file '" + path_ + "'");
      os_ = &file_;
    }
  }

  auto write(const std::string& s) -> void {
    *os_ << s;
    os_->flush();
    bytes_ += s;
  }

  auto digest() const -> Output_digest {
    return {path_, sha256_hex(bytes_), static_cast<std::uint64_t>(bytes_.size())};
  }

 private:
  std::string path_;
  std::ofstream file_;
  std::ostream* os_ = nullptr;
  std::string bytes_;
};

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  std::string manifest;
};

struct Prior_arg {
  std::string spec;
  std::string spec_file;

  auto load() const -> Prior_spec {
    require(spec.empty() != spec_file.empty(), "exactly one of --spec or --spec-file is required");
    if (!spec.empty()) {
      return parse_prior_spec(spec);
    }
    auto in = std::ifstream{spec_file};
    require(static_cast<bool>(in), "cannot read --spec-file '" + spec_file + "'");
    auto ss = std::ostringstream{};
    ss << in.rdbuf();
    return parse_prior_spec(ss.str());
  }
};

auto add_common(CLI::App* sub, Common& c) -> void {
  sub->add_option("--seed", c.seed, "Master seed (default: $STARPARADOX_SEED or 1)");
  sub->add_option("--jobs", c.jobs, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "Output file ('-' or omitted: standard output)");
  sub->add_option("--manifest", c.manifest, "Write a JSON run manifest here");
}

auto add_prior(CLI::App* sub, Prior_arg& p) -> void {
  auto* a = sub->add_option("--spec", p.spec, "Prior, shorthand (uniform:1.0) or inline JSON");
  auto* b = sub->add_option("--spec-file", p.spec_file, "Prior as a JSON file");
  a->excludes(b);
}

auto parse_list(const std::string& text, const std::string& flag) -> std::vector<std::string> {
  auto out = std::vector<std::string>{};
  auto ss = std::stringstream{text};
  auto item = std::string{};
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    auto e = item.find_last_not_of(" \t");
    require(b != std::string::npos, flag + ": empty list entry");
    out.push_back(item.substr(b, e - b + 1));
  }
  require(!out.empty(), flag + ": empty list");
  return out;
}

auto parse_doubles(const std::string& text, const std::string& flag) -> std::vector<double> {
  auto out = std::vector<double>{};
  for (const auto& s : parse_list(text, flag)) {
    auto pos = std::size_t{0};
    auto v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    require(pos == s.size() && std::isfinite(v), flag + ": '" + s + "' is not a number");
    out.push_back(v);
  }
  return out;
}

auto parse_ints(const std::string& text, const std::string& flag) -> std::vector<std::int64_t> {
  auto out = std::vector<std::int64_t>{};
  for (const auto& s : parse_list(text, flag)) {
    auto pos = std::size_t{0};
    auto v = std::int64_t{0};
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    require(pos == s.size(), flag + ": '" + s + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

auto log_mean_json(const Log_mean& m) -> json {
  return {{"log_mean", m.log_mean}, {"stderr", m.stderr_}, {"draws", m.count}};
}

// --- commands ---------------------------------------------------------------------------------

struct Simulate {
  double t = 0.0;
  std::int64_t n = 0;
  std::int64_t trials = 1;

  auto run(const Common& c, std::vector<Sink*> sinks, json& params) const -> void {
    require(t > 0.0, "--t must be positive");
    require(n >= 1, "--n must be >= 1");
    require(trials >= 1, "--trials must be >= 1");
    params = {{"t", t}, {"n", n}, {"trials", trials}};
    auto& out = *sinks[0];
    out.write("trial,n0,n1,n2,n3\n");
    for (auto k = std::int64_t{0}; k != trials; ++k) {
      auto counts = simulate_counts(t, n, substream_seed(c.seed, {6, static_cast<std::uint64_t>(k)}));
      out.write(std::to_string(k) + "," + std::to_string(counts[0]) + "," +
                std::to_string(counts[1]) + "," + std::to_string(counts[2]) + "," +
                std::to_string(counts[3]) + "\n");
    }
  }
};

struct Posterior {
  Prior_arg prior;
  std::string counts;
  std::string weights = "1,1,1";
  std::int64_t n_samples = 100000;

  auto run(const Common& c, std::vector<Sink*> sinks, json& params, const Prior_spec& spec) const
      -> void {
    auto cv = parse_ints(counts, "--counts");
    require(cv.size() == 4, "--counts: expected four values n0,n1,n2,n3");
    auto pc = Pattern_counts{{cv[0], cv[1], cv[2], cv[3]}};
    auto wv = parse_doubles(weights, "--weights");
    require(wv.size() == 3, "--weights: expected three values");
    require(n_samples >= 1000, "--n-samples must be >= 1000");
    params = {{"counts", cv}, {"weights", wv}, {"n_samples", n_samples}};
    auto est = posterior_probs(spec, pc, {wv[0], wv[1], wv[2]}, n_samples, c.seed, c.jobs);
    auto j = json{{"prior", to_json(spec)},          {"counts", cv},
                  {"weights", wv},                   {"n_samples", est.n_samples},
                  {"log_epi", est.log_epi},          {"stderr", est.stderr_},
                  {"posterior", est.posterior}};
    sinks[0]->write(j.dump(2) + "\n");
  }
};

struct Scan {
  Prior_arg prior;
  double t = 0.1;
  double epsilon = 0.05;
  std::string n_list = "100,1000,10000";
  std::int64_t trials = 2000;
  std::int64_t n_samples = 100000;

  auto run(const Common& c, std::vector<Sink*> sinks, json& params, const Prior_spec& spec) const
      -> void {
    require(epsilon > 0.0 && epsilon < 1.0, "--epsilon must lie in (0, 1)");
    auto config = Scan_config{};
    config.t = t;
    config.epsilon = epsilon;
    config.n_list = parse_ints(n_list, "--n-list");
    config.trials = trials;
    config.n_samples = n_samples;
    config.seed = c.seed;
    config.jobs = c.jobs;
    params = {{"t", t}, {"epsilon", epsilon}, {"n_list", config.n_list}, {"trials", trials},
              {"n_samples", n_samples}};
    auto& out = *sinks[0];
    out.write("n,epsilon,delta_hat,ci_lo,ci_hi,trials,successes,seed\n");
    paradox_scan(spec, config, [&](const Paradox_result& r) {
      out.write(std::to_string(r.n) + "," + num(r.epsilon) + "," + num(r.delta_hat) + "," +
                num(r.ci.lo) + "," + num(r.ci.hi) + "," + std::to_string(r.trials) + "," +
                std::to_string(r.successes) + "," + std::to_string(c.seed) + "\n");
    });
  }
};

struct Prior_check {
  Prior_arg prior;
  double t = 0.1;

  auto run(const Common&, std::vector<Sink*> sinks, json& params, const Prior_spec& spec) const
      -> void {
    require(t > 0.0, "--t must be positive");
    params = {{"t", t}};
    auto v = check_tempered(spec, t);
    auto c1 = json{{"status", to_string(v.condition1.status)},
                   {"diagnostic", v.condition1.diagnostic},
                   {"log_t_stat", v.condition1.log_t_stat}};
    if (v.condition1.model) {
      const auto& m = *v.condition1.model;
      c1["alpha_def1"] = m.alpha;
      c1["alpha_propZ"] = m.alpha / 2.0;
      c1["k"] = m.k;
      c1["eps"] = m.eps;
      c1["ladder"] = m.ladder;
      c1["kappa"] = m.kappa;
      c1["s0"] = m.s0;
      c1["max_rel_rms"] = m.max_rel_rms;
      c1["z_grid"] = m.z_grid;
      c1["h_coeffs"] = m.h_coeffs;
    }
    auto c2 = json{{"status", to_string(v.condition2.status)},
                   {"decay_exponent", v.condition2.decay_exponent},
                   {"rate_slope", v.condition2.rate_slope}};
    auto j = json{{"prior", to_json(spec)}, {"t", t},           {"tempered", v.tempered},
                  {"condition1", c1},       {"condition2", c2}};
    sinks[0]->write(j.dump(2) + "\n");
  }
};

struct Moments {
  std::string dist = "uniform01";
  Prior_arg prior;
  double z = 0.0;
  double alpha = 0.0;
  double t_min = 0.1;
  double t_max = 1e4;
  int per_decade = 64;
  std::string summary;

  auto run(const Common& c, std::vector<Sink*> sinks, json& params, json& prior_json,
           std::ostream& err) const -> void {
    require(alpha > 0.0, "--alpha must be positive");
    auto d = V_dist{};
    if (!prior.spec.empty() || !prior.spec_file.empty()) {
      auto spec = prior.load();
      prior_json = to_json(spec);
      d = zeta_u_dist(spec, z);
    } else {
      d = v_dist_from_name(dist);
    }
    params = {{"dist", d.name}, {"z", z}, {"alpha", alpha}, {"t_min", t_min}, {"t_max", t_max},
              {"per_decade", per_decade}};
    auto grid = geometric_t_grid(t_min, t_max, per_decade);
    auto scan = sm_threshold_scan(d, alpha, grid, c.jobs);
    auto rows = moment_curve(d, grid, c.jobs);
    auto& out = *sinks[0];
    out.write("t,M_t,R_t,two_t_R_t\n");
    for (const auto& r : rows) {
      out.write(num(r.t) + "," + num(r.m_t) + "," + num(r.r_t) + "," + num(r.two_t_r_t) + "\n");
    }
    auto t_star = scan.t_star ? json(*scan.t_star) : json(nullptr);
    err << "t_star: " << (scan.t_star ? num(*scan.t_star) : std::string{"not reached"}) << "\n";
    if (sinks.size() > 1) {
      sinks[1]->write(json{{"dist", d.name}, {"alpha", alpha}, {"t_star", t_star}}.dump(2) + "\n");
    }
  }
};

struct Claims {
  Prior_arg prior;
  double t = 0.1;
  std::int64_t n = 10000;
  std::string c_list = "1.5,3,6";
  int j = 2;
  std::int64_t n_samples = 1000000;
  int z_count = 5;

  auto run(const Common& c, std::vector<Sink*> sinks, json& params, const Prior_spec& spec) const
      -> void {
    auto cs = parse_doubles(c_list, "--c");
    require(j == 2 || j == 3, "--j must be 2 or 3");
    require(n_samples >= 1000, "--n-samples must be >= 1000");
    require(z_count >= 1, "--z-count must be >= 1");
    params = {{"t", t}, {"n", n}, {"c", cs}, {"j", j}, {"n_samples", n_samples},
              {"z_count", z_count}};
    auto draws = make_prior_draws(spec, n_samples, c.seed, c.jobs);
    auto counts0 = make_fc_counts(n, cs.front(), t);
    auto c1 = claim1_check(draws, spec, t, counts0, j);
    auto claim1 = json{{"c", cs.front()},
                       {"counts", counts0.n},
                       {"inside", log_mean_json(c1.inside)},
                       {"outside", log_mean_json(c1.outside)},
                       {"log_ratio", c1.log_ratio},
                       {"log_ratio_stderr", c1.log_ratio_stderr},
                       {"envelope_outside", c1.envelope_outside},
                       {"lower_diagnostic", c1.lower_diagnostic},
                       {"envelope_ok", c1.envelope_ok}};
    auto claim2 = json::array();
    auto z_grid = default_z_grid(t, z_count);
    for (auto cv : cs) {
      auto counts = make_fc_counts(n, cv, t);
      auto r = claim2_check(draws, t, counts, cv, z_grid, j);
      auto bands = json::array();
      for (const auto& b : r.bands) {
        bands.push_back({{"z", b.z}, {"draws", b.draws}, {"log_ratio", b.log_ratio},
                         {"log_ratio_stderr", b.log_ratio_stderr}});
      }
      claim2.push_back({{"c", cv},
                        {"counts", counts.n},
                        {"delta_z", r.delta_z},
                        {"min_log_ratio", r.min_log_ratio},
                        {"min_log_ratio_stderr", r.min_log_ratio_stderr},
                        {"log_inf_over_4c2", r.log_inf_over_4c2},
                        {"log_inf_over_3c2", r.log_inf_over_3c2},
                        {"bands", bands}});
    }
    auto out = json{{"prior", to_json(spec)}, {"t", t},           {"n", n},
                    {"j", j},                 {"claim1", claim1}, {"claim2", claim2}};
    sinks[0]->write(out.dump(2) + "\n");
  }
};

// Argument vector with the value of `flag` replaced (or appended when absent); an empty
// replacement removes the flag.
auto with_flag(std::vector<std::string> args, const std::string& flag, const std::string& value)
    -> std::vector<std::string> {
  auto out = std::vector<std::string>{};
  auto found = false;
  for (auto i = std::size_t{0}; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == flag || a.rfind(flag + "=", 0) == 0) {
      found = true;
      if (a == flag) {
        ++i;
      }
      if (!value.empty()) {
        out.push_back(flag);
        out.push_back(value);
      }
      continue;
    }
    out.push_back(a);
  }
  if (!found && !value.empty()) {
    out.push_back(flag);
    out.push_back(value);
  }
  return out;
}

auto flag_value(const std::vector<std::string>& args, const std::string& flag) -> std::string {
  for (auto i = std::size_t{0}; i < args.size(); ++i) {
    if (args[i] == flag && i + 1 < args.size()) {
      return args[i + 1];
    }
    if (args[i].rfind(flag + "=", 0) == 0) {
      return args[i].substr(flag.size() + 1);
    }
  }
  return {};
}

struct Replay {
  std::string from;
  std::string out_dir;
  int jobs = 0;

  auto run(std::ostream& out, std::ostream& err) const -> int {
    auto m = read_manifest(from);
    auto dir = out_dir.empty() ? fs::path{from + ".replay"} : fs::path{out_dir};
    fs::create_directories(dir);
    auto args = with_flag(m.argv, "--manifest", "");
    for (const auto* flag : {"--out", "--summary"}) {
      auto v = flag_value(args, flag);
      if (!v.empty() && v != "-") {
        args = with_flag(args, flag, (dir / fs::path{v}.filename()).string());
      }
    }
    if (jobs > 0) {
      args = with_flag(args, "--jobs", std::to_string(jobs));
    }
    auto captured = std::ostringstream{};
    auto code = cli::run(args, captured, err);
    if (code != k_exit_ok) {
      return code;
    }
    auto report = json::array();
    auto identical = true;
    for (const auto& o : m.outputs) {
      auto actual = std::string{};
      auto path = std::string{"-"};
      if (o.path == "-") {
        actual = sha256_hex(captured.str());
      } else {
        path = (dir / fs::path{o.path}.filename()).string();
        actual = sha256_file(path);
      }
      identical = identical && actual == o.sha256;
      report.push_back({{"recorded", o.path}, {"replayed", path}, {"expected", o.sha256},
                        {"actual", actual}, {"match", actual == o.sha256}});
    }
    out << json{{"identical", identical}, {"outputs", report}}.dump(2) << "\n";
    return identical ? k_exit_ok : k_exit_runtime;
  }
};

}  // namespace

auto run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) -> int {
  auto app = CLI::App{"Numerical experiments on the Bayesian star-tree paradox", "starparadox"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string{STARPARADOX_VERSION});

  auto common = Common{};
  auto sim = Simulate{};
  auto post = Posterior{};
  auto scan = Scan{};
  auto check = Prior_check{};
  auto mom = Moments{};
  auto claims = Claims{};
  auto replay = Replay{};

  auto* s_sim = app.add_subcommand("simulate", "Pattern counts simulated on the star tree (CSV)");
  add_common(s_sim, common);
  s_sim->add_option("--t", sim.t, "Star-tree branch length")->required()->check(CLI::PositiveNumber);
  s_sim->add_option("--n", sim.n, "Sequence length")->required()->check(CLI::PositiveNumber);
  s_sim->add_option("--trials", sim.trials, "Number of data sets")->check(CLI::PositiveNumber);

  auto* s_post = app.add_subcommand("posterior", "Posterior probabilities of R_1, R_2, R_3 (JSON)");
  add_common(s_post, common);
  add_prior(s_post, post.prior);
  s_post->add_option("--counts", post.counts, "Pattern counts n0,n1,n2,n3")->required();
  s_post->add_option("--weights", post.weights, "Tree prior weights w1,w2,w3");
  s_post->add_option("--n-samples", post.n_samples, "Prior draws");

  auto* s_scan = app.add_subcommand("scan", "Paradox scan over sequence lengths (CSV)");
  add_common(s_scan, common);
  add_prior(s_scan, scan.prior);
  s_scan->add_option("--t", scan.t, "Star-tree branch length")->check(CLI::PositiveNumber);
  s_scan->add_option("--epsilon", scan.epsilon, "Posterior threshold 1 - epsilon");
  s_scan->add_option("--n-list", scan.n_list, "Ascending sequence lengths, comma separated");
  s_scan->add_option("--trials", scan.trials, "Data sets per n")->check(CLI::PositiveNumber);
  s_scan->add_option("--n-samples", scan.n_samples, "Prior draws");

  auto* s_check = app.add_subcommand("prior-check", "Temperedness verdict for a prior (JSON)");
  add_common(s_check, common);
  add_prior(s_check, check.prior);
  s_check->add_option("--t", check.t, "Star-tree branch length")->check(CLI::PositiveNumber);

  auto* s_mom = app.add_subcommand("moments", "Moment curve and threshold t* (CSV)");
  add_common(s_mom, common);
  add_prior(s_mom, mom.prior);
  s_mom->add_option("--dist", mom.dist, "uniform01, one, linear or beta:<a>");
  s_mom->add_option("--z", mom.z, "Value of 4 P0 - 1 for V = zeta(U) under --spec");
  s_mom->add_option("--alpha", mom.alpha, "Threshold in 2 t R_t >= alpha")->required();
  s_mom->add_option("--t-min", mom.t_min, "Smallest t of the grid");
  s_mom->add_option("--t-max", mom.t_max, "Largest t of the grid");
  s_mom->add_option("--per-decade", mom.per_decade, "Grid points per decade");
  s_mom->add_option("--summary", mom.summary, "Write {t_star, ...} as JSON here");

  auto* s_claims = app.add_subcommand("claims", "Conditional-expectation checks (JSON)");
  add_common(s_claims, common);
  add_prior(s_claims, claims.prior);
  s_claims->add_option("--t", claims.t, "Star-tree branch length")->check(CLI::PositiveNumber);
  s_claims->add_option("--n", claims.n, "Sequence length")->check(CLI::PositiveNumber);
  s_claims->add_option("--c", claims.c_list, "Values of c, comma separated");
  s_claims->add_option("--j", claims.j, "Competing tree, 2 or 3");
  s_claims->add_option("--n-samples", claims.n_samples, "Prior draws");
  s_claims->add_option("--z-count", claims.z_count, "Points of the z grid inside I_t");

  auto* s_replay = app.add_subcommand("replay", "Rerun a manifest and compare output digests");
  s_replay->add_option("--from", replay.from, "Manifest to replay")->required();
  s_replay->add_option("--out-dir", replay.out_dir, "Directory for replayed outputs");
  s_replay->add_option("--jobs", replay.jobs, "Override the worker count")
      ->check(CLI::PositiveNumber);

  auto argv = std::vector<const char*>{"starparadox"};
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      auto code = app.exit(e, out, err);
      return code == 0 ? k_exit_ok : k_exit_validation;
    }
    if (s_replay->parsed()) {
      return replay.run(out, err);
    }

    auto explicit_seed = false;
    for (auto* sub : app.get_subcommands()) {
      explicit_seed = sub->count("--seed") > 0;
    }
    if (!explicit_seed) {
      common.seed = default_seed();
    }

    auto m = Run_manifest{};
    m.argv = with_flag(args, "--seed", std::to_string(common.seed));
    m.seed = common.seed;
    m.version = STARPARADOX_VERSION;
    m.started = utc_timestamp();

    auto main_sink = Sink{common.out, out};
    auto sinks = std::vector<Sink*>{&main_sink};
    auto summary_sink = std::optional<Sink>{};

    if (s_sim->parsed()) {
      m.command = "simulate";
      sim.run(common, sinks, m.parameters);
    } else if (s_post->parsed()) {
      m.command = "posterior";
      auto spec = post.prior.load();
      m.prior_spec = to_json(spec);
      post.run(common, sinks, m.parameters, spec);
    } else if (s_scan->parsed()) {
      m.command = "scan";
      auto spec = scan.prior.load();
      m.prior_spec = to_json(spec);
      scan.run(common, sinks, m.parameters, spec);
    } else if (s_check->parsed()) {
      m.command = "prior-check";
      auto spec = check.prior.load();
      m.prior_spec = to_json(spec);
      check.run(common, sinks, m.parameters, spec);
    } else if (s_mom->parsed()) {
      m.command = "moments";
      if (!mom.summary.empty()) {
        summary_sink.emplace(mom.summary, out);
        sinks.push_back(&*summary_sink);
      }
      mom.run(common, sinks, m.parameters, m.prior_spec, err);
    } else if (s_claims->parsed()) {
      m.command = "claims";
      auto spec = claims.prior.load();
      m.prior_spec = to_json(spec);
      claims.run(common, sinks, m.parameters, spec);
    }

    m.finished = utc_timestamp();
    for (auto* s : sinks) {
      m.outputs.push_back(s->digest());
    }
    if (!common.manifest.empty()) {
      write_manifest(m, common.manifest);
    }
    return k_exit_ok;
  } catch (const Validation_error& e) {
    err << "error: " << e.what() << "\n";
    return k_exit_validation;
  } catch (const Numerical_error& e) {
    err << "numerical error: " << e.what() << "\n";
    return k_exit_runtime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return k_exit_runtime;
  }
}

}  // namespace starparadox::cli
