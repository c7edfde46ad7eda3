#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tshint {

// Every CLI command records what it ran with and what it produced so a run
// is reproducible from the manifest alone: command, full config snapshot,
// seeds, and content hashes of every input and output file. Wall time is
// telemetry and excluded from determinism comparisons.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed);

  void set_config(nlohmann::ordered_json config) { config_ = std::move(config); }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void add_metric(const std::string& name, double value);
  void add_note(const std::string& key, const std::string& value);

  // Writes <out_dir>/manifest.json, hashing all registered files.
  void write(const std::filesystem::path& out_dir) const;

 private:
  std::string command_;
  std::uint64_t seed_;
  nlohmann::ordered_json config_;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  nlohmann::ordered_json metrics_;
  nlohmann::ordered_json notes_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace tshint
