#include "manifest.hpp"

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "starparadox/errors.hpp"

namespace starparadox::cli {

namespace {

auto hex(const unsigned char* p, unsigned n) -> std::string {
  auto os = std::ostringstream{};
  os << std::hex << std::setfill('0');
  for (auto i = 0u; i != n; ++i) {
    os << std::setw(2) << static_cast<int>(p[i]);
  }
  return os.str();
}

}  // namespace

auto sha256_hex(const std::string& bytes) -> std::string {
  auto md = std::array<unsigned char, EVP_MAX_MD_SIZE>{};
  auto len = 0u;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error{"SHA-256 digest failed"};
  }
  return hex(md.data(), len);
}

auto sha256_file(const std::string& path) -> std::string {
  auto in = std::ifstream{path, std::ios::binary};
  require(static_cast<bool>(in), "cannot read '" + path + "'");
  auto ss = std::ostringstream{};
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

auto utc_timestamp() -> std::string {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  auto tm = std::tm{};
  gmtime_r(&now, &tm);
  auto os = std::ostringstream{};
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

auto to_json(const Run_manifest& m) -> nlohmann::json {
  auto outputs = nlohmann::json::array();
  for (const auto& o : m.outputs) {
    outputs.push_back({{"path", o.path}, {"sha256", o.sha256}, {"bytes", o.bytes}});
  }
  return {
      {"command", m.command},   {"argv", m.argv},       {"parameters", m.parameters},
      {"prior_spec", m.prior_spec}, {"seed", m.seed},   {"version", m.version},
      {"started", m.started},   {"finished", m.finished}, {"outputs", outputs},
  };
}

auto manifest_from_json(const nlohmann::json& j) -> Run_manifest {
  try {
    auto m = Run_manifest{};
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.parameters = j.value("parameters", nlohmann::json::object());
    m.prior_spec = j.value("prior_spec", nlohmann::json{});
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.value("version", "");
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    for (const auto& o : j.value("outputs", nlohmann::json::array())) {
      m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>(),
                           o.value("bytes", std::uint64_t{0})});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Validation_error{std::string{"malformed manifest: "} + e.what()};
  }
}

auto write_manifest(const Run_manifest& m, const std::string& path) -> void {
  auto out = std::ofstream{path};
  require(static_cast<bool>(out), "cannot write manifest '" + path + "'");
  out << to_json(m).dump(2) << '\n';
}

auto read_manifest(const std::string& path) -> Run_manifest {
  auto in = std::ifstream{path};
  require(static_cast<bool>(in), "cannot read manifest '" + path + "'");
  auto j = nlohmann::json{};
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Validation_error{std::string{"malformed manifest: "} + e.what()};
  }
  return manifest_from_json(j);
}

}  // namespace starparadox::cli
