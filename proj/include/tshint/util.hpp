#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tshint {

// Library-wide error type. CLI maps these to one-line diagnostics.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a 64-bit. Used for content addressing (checkpoints, transcripts,
// manifests), not for anything adversarial.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);
std::uint64_t file_fnv1a64(const std::filesystem::path& path);
std::string file_fnv1a64_hex(const std::filesystem::path& path);

// Shortest decimal form that round-trips the exact double.
std::string format_double(double v);
double parse_double(std::string_view s, const std::string& context);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
// Write-temp-then-rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split_csv_line(const std::string& line);
std::string join(const std::vector<std::string>& parts, const std::string& sep);
std::string to_lower(std::string s);

}  // namespace tshint
