#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace segsample::cli {

// Everything needed to re-run one invocation: the subcommand, every flag
// with its resolved value, the RNG seed and digests of the input files.
struct RunManifest {
  std::string tool_version;
  std::string subcommand;
  std::map<std::string, std::string> flags;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> input_sha256;  // path -> hex digest
};

std::string sha256_file(const std::string& path);

std::string to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

// argv (without program name) that reproduces the run.
std::vector<std::string> replay_arguments(const RunManifest& m);

}  // namespace segsample::cli
