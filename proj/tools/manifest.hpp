#pragma once

// Run manifests: what was run, with which parameters and seed, and SHA-256 digests of what it
// wrote.  A manifest is enough to rerun the command and compare outputs byte for byte.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace starparadox::cli {

struct Output_digest {
  std::string path;  // "-" for standard output
  std::string sha256;
  std::uint64_t bytes = 0;
};

struct Run_manifest {
  std::string command;
  std::vector<std::string> argv;  // arguments after the program name, as given
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json prior_spec;      // null when the command takes no prior
  std::uint64_t seed = 0;
  std::string version;
  std::string started;
  std::string finished;
  std::vector<Output_digest> outputs;
};

auto sha256_hex(const std::string& bytes) -> std::string;
auto sha256_file(const std::string& path) -> std::string;

// UTC, ISO 8601, seconds resolution.
auto utc_timestamp() -> std::string;

auto to_json(const Run_manifest& m) -> nlohmann::json;
auto manifest_from_json(const nlohmann::json& j) -> Run_manifest;

auto write_manifest(const Run_manifest& m, const std::string& path) -> void;
auto read_manifest(const std::string& path) -> Run_manifest;

}  // namespace starparadox::cli
