#include "starparadox/prior_spec.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "starparadox/errors.hpp"

namespace starparadox {

namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

auto parse_number(const std::string& text, const std::string& what) -> double {
  auto pos = std::size_t{0};
  auto value = 0.0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw Validation_error{"prior spec: cannot parse " + what + " from '" + text + "'"};
  }
  require(pos == text.size(), "prior spec: trailing characters in " + what + " '" + text + "'");
  return value;
}

auto split_commas(const std::string& text) -> std::vector<std::string> {
  auto out = std::vector<std::string>{};
  auto is = std::istringstream{text};
  auto item = std::string{};
  while (std::getline(is, item, ',')) {
    out.push_back(item);
  }
  return out;
}

auto param(const nlohmann::json& params, const char* key) -> double {
  require(params.contains(key) && params.at(key).is_number(),
          std::string{"prior spec: missing numeric parameter '"} + key + "'");
  return params.at(key).get<double>();
}

// Shortest text that reads back to the same double.
auto fmt_double(double x) -> std::string {
  auto buf = std::array<char, 32>{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), end);
}

}  // namespace

auto validate(const Prior_spec& spec) -> void {
  std::visit(Overloaded{
                 [](const Tame_smooth& p) {
                   require(std::isfinite(p.rate_e) && p.rate_e > 0.0 && std::isfinite(p.rate_i) &&
                               p.rate_i > 0.0,
                           "tame_smooth: rates must be positive and finite");
                 },
                 [](const Discrete_ti& p) {
                   require(std::isfinite(p.a) && std::isfinite(p.b) && p.a > 0.0 && p.b > 0.0,
                           "discrete_ti: a and b must be positive");
                   require(3.0 * p.a < std::min(1.0, p.b), "discrete_ti: requires 3a < min(1, b)");
                 },
                 [](const Uniform_ti& p) {
                   require(std::isfinite(p.theta) && p.theta > 0.0,
                           "uniform_ti: theta must be positive");
                 },
                 [](const Power_ti& p) {
                   require(p.theta > 0.0 && p.theta < 1.0, "power_ti: theta must lie in (0, 1)");
                 },
                 [](const Log_ti&) {},
                 [](const Tlog_ti&) {},
             },
             spec.kind);
}

auto kind_name(const Prior_spec& spec) -> std::string {
  return std::visit(Overloaded{
                        [](const Tame_smooth&) { return std::string{"tame_smooth"}; },
                        [](const Discrete_ti&) { return std::string{"discrete_ti"}; },
                        [](const Uniform_ti&) { return std::string{"uniform_ti"}; },
                        [](const Power_ti&) { return std::string{"power_ti"}; },
                        [](const Log_ti&) { return std::string{"log_ti"}; },
                        [](const Tlog_ti&) { return std::string{"tlog_ti"}; },
                    },
                    spec.kind);
}

auto declared_temper(const Prior_spec& spec) -> std::optional<Declared_temper> {
  auto ladder = std::vector<double>{0.0, 1.0, 2.0, 3.0};
  return std::visit(
      Overloaded{
          [&](const Tame_smooth&) -> std::optional<Declared_temper> {
            return Declared_temper{3, 1.0, ladder};
          },
          [&](const Discrete_ti& p) -> std::optional<Declared_temper> {
            return Declared_temper{3, p.b / p.a, ladder};
          },
          [&](const Uniform_ti&) -> std::optional<Declared_temper> {
            return Declared_temper{3, 1.0, ladder};
          },
          [&](const Power_ti& p) -> std::optional<Declared_temper> {
            return Declared_temper{3, p.theta, ladder};
          },
          [](const Log_ti&) -> std::optional<Declared_temper> { return std::nullopt; },
          [](const Tlog_ti&) -> std::optional<Declared_temper> { return std::nullopt; },
      },
      spec.kind);
}

auto to_json(const Prior_spec& spec) -> nlohmann::json {
  auto params = std::visit(Overloaded{
                               [](const Tame_smooth& p) {
                                 return nlohmann::json{{"rate_e", p.rate_e}, {"rate_i", p.rate_i}};
                               },
                               [](const Discrete_ti& p) {
                                 return nlohmann::json{{"a", p.a}, {"b", p.b}};
                               },
                               [](const Uniform_ti& p) { return nlohmann::json{{"theta", p.theta}}; },
                               [](const Power_ti& p) { return nlohmann::json{{"theta", p.theta}}; },
                               [](const Log_ti&) { return nlohmann::json::object(); },
                               [](const Tlog_ti&) { return nlohmann::json::object(); },
                           },
                           spec.kind);
  return nlohmann::json{{"kind", kind_name(spec)}, {"params", params}};
}

auto prior_from_json(const nlohmann::json& j) -> Prior_spec {
  require(j.is_object() && j.contains("kind") && j.at("kind").is_string(),
          "prior spec: expected an object with a string 'kind'");
  auto kind = j.at("kind").get<std::string>();
  auto params = j.contains("params") ? j.at("params") : nlohmann::json::object();
  require(params.is_object(), "prior spec: 'params' must be an object");

  auto spec = Prior_spec{};
  if (kind == "tame_smooth") {
    spec.kind = Tame_smooth{param(params, "rate_e"), param(params, "rate_i")};
  } else if (kind == "discrete_ti") {
    spec.kind = Discrete_ti{param(params, "a"), param(params, "b")};
  } else if (kind == "uniform_ti") {
    spec.kind = Uniform_ti{param(params, "theta")};
  } else if (kind == "power_ti") {
    spec.kind = Power_ti{param(params, "theta")};
  } else if (kind == "log_ti") {
    spec.kind = Log_ti{};
  } else if (kind == "tlog_ti") {
    spec.kind = Tlog_ti{};
  } else {
    throw Validation_error{"prior spec: unknown kind '" + kind + "'"};
  }
  validate(spec);
  return spec;
}

auto parse_prior_spec(const std::string& text) -> Prior_spec {
  auto first = text.find_first_not_of(" \t\n");
  require(first != std::string::npos, "prior spec: empty");
  if (text[first] == '{') {
    auto j = nlohmann::json{};
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Validation_error{std::string{"prior spec: malformed JSON: "} + e.what()};
    }
    return prior_from_json(j);
  }

  auto colon = text.find(':');
  auto name = text.substr(0, colon);
  auto args = colon == std::string::npos ? std::vector<std::string>{}
                                         : split_commas(text.substr(colon + 1));
  auto nargs = [&](std::size_t n) {
    require(args.size() == n, "prior spec '" + text + "': expected " + std::to_string(n) +
                                  " parameter(s)");
  };

  auto spec = Prior_spec{};
  if (name == "tame" || name == "tame_smooth") {
    nargs(2);
    spec.kind = Tame_smooth{parse_number(args[0], "rate_e"), parse_number(args[1], "rate_i")};
  } else if (name == "discrete" || name == "discrete_ti") {
    nargs(2);
    spec.kind = Discrete_ti{parse_number(args[0], "a"), parse_number(args[1], "b")};
  } else if (name == "uniform" || name == "uniform_ti") {
    nargs(1);
    spec.kind = Uniform_ti{parse_number(args[0], "theta")};
  } else if (name == "power" || name == "power_ti") {
    nargs(1);
    spec.kind = Power_ti{parse_number(args[0], "theta")};
  } else if (name == "logti" || name == "log_ti" || name == "log") {
    nargs(0);
    spec.kind = Log_ti{};
  } else if (name == "tlogti" || name == "tlog_ti" || name == "tlog") {
    nargs(0);
    spec.kind = Tlog_ti{};
  } else {
    throw Validation_error{"prior spec: unknown kind '" + name + "'"};
  }
  validate(spec);
  return spec;
}

auto to_shorthand(const Prior_spec& spec) -> std::string {
  return std::visit(
      Overloaded{
          [](const Tame_smooth& p) { return "tame:" + fmt_double(p.rate_e) + "," + fmt_double(p.rate_i); },
          [](const Discrete_ti& p) { return "discrete:" + fmt_double(p.a) + "," + fmt_double(p.b); },
          [](const Uniform_ti& p) { return "uniform:" + fmt_double(p.theta); },
          [](const Power_ti& p) { return "power:" + fmt_double(p.theta); },
          [](const Log_ti&) { return std::string{"logti"}; },
          [](const Tlog_ti&) { return std::string{"tlogti"}; },
      },
      spec.kind);
}

}  // namespace starparadox
