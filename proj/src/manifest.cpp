#include "tshint/manifest.hpp"

#include <chrono>

#include "tshint/util.hpp"

namespace tshint {

RunManifest::RunManifest(std::string command, std::uint64_t seed)
    : command_(std::move(command)),
      seed_(seed),
      config_(nlohmann::ordered_json::object()),
      metrics_(nlohmann::ordered_json::object()),
      notes_(nlohmann::ordered_json::object()),
      start_(std::chrono::steady_clock::now()) {}

void RunManifest::add_input(const std::filesystem::path& path) { inputs_.push_back(path); }
void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

void RunManifest::add_metric(const std::string& name, double value) { metrics_[name] = value; }

void RunManifest::add_note(const std::string& key, const std::string& value) {
  notes_[key] = value;
}

void RunManifest::write(const std::filesystem::path& out_dir) const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["seed"] = seed_;
  j["config"] = config_;
  auto file_entry = [](const std::filesystem::path& p) {
    nlohmann::ordered_json e;
    e["path"] = p.string();
    e["fnv1a64"] = file_fnv1a64_hex(p);
    return e;
  };
  j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& p : inputs_) j["inputs"].push_back(file_entry(p));
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& p : outputs_) j["outputs"].push_back(file_entry(p));
  j["metrics"] = metrics_;
  j["notes"] = notes_;
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  j["wall_time_s"] = wall;
  write_file_atomic(out_dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace tshint
