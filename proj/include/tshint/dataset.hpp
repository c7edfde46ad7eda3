#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tshint/tensor.hpp"

namespace tshint {

enum class Mode { LowSpeed, HighSpeed };

const char* mode_name(Mode m);
Mode mode_from_chamber(int chamber);  // 4,5,6 -> LowSpeed; 1,2,3 -> HighSpeed
int canonical_chamber(Mode m);

inline constexpr std::size_t kNumChannels = 19;
// Channel roles used by the synthetic generator and the Preston baseline.
inline constexpr std::size_t kPressureChannel = 6;   // main_outer_air_bag_pressure
inline constexpr std::size_t kSlurryChannel = 11;    // slurry_flow_line_a
inline constexpr std::size_t kRotationChannel = 15;  // stage_rotation
inline constexpr std::size_t kDressingChannel = 17;  // dressing_water_status
const std::vector<std::string>& default_channel_names();

// One polishing run: 19 equal-length sensor series plus the scalar target.
struct WaferRun {
  std::string run_id;
  Mode mode = Mode::LowSpeed;
  std::vector<std::vector<double>> channels;  // kNumChannels x L
  double target_mrr = 0.0;                    // nm/min
  double polishing_time = 0.0;                // seconds

  std::size_t length() const { return channels.empty() ? 0 : channels[0].size(); }
  double channel_mean(std::size_t c) const;
  bool operator==(const WaferRun&) const = default;
};

struct NormStats {
  double mean = 0.0;
  double std = 0.0;
};

// Fixed-shape normalized model input with provenance back to its run.
struct SampleTensor {
  Tensor values;  // C x T, per-channel z-scored
  double target = 0.0;
  std::string run_id;
  Mode mode = Mode::LowSpeed;
  std::vector<NormStats> norm_stats;
};

struct SynthConfig {
  std::size_t n_low = 0;
  std::size_t n_high = 0;
  std::size_t min_length = 200;
  std::size_t max_length = 400;
  double preston_k = 1.0;
  double noise_std = 0.0;  // nm/min
  // Weight of a target component carried by the slurry channel's duty
  // cycle; invisible to the Preston P*V baseline. Zero keeps the
  // generator law purely Prestonian.
  double nonpreston_coeff = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<WaferRun> load_runs(const std::filesystem::path& csv_path,
                                const std::vector<std::string>& schema = default_channel_names(),
                                const std::optional<std::filesystem::path>& targets_sidecar = {});
void save_runs(const std::vector<WaferRun>& runs, const std::filesystem::path& csv_path,
               const std::vector<std::string>& schema = default_channel_names());

std::vector<double> resample_linear(const std::vector<double>& series, std::size_t t_len);

// Per-sample z-score of the resampled C x T matrix; constant channels map
// to zeros. Population std, eps 1e-8 in the denominator.
SampleTensor normalize(const Tensor& resampled, std::string run_id = {},
                       Mode mode = Mode::LowSpeed, double target = 0.0);

SampleTensor make_sample(const WaferRun& run, std::size_t t_len);
std::vector<SampleTensor> make_samples(const std::vector<WaferRun>& runs, std::size_t t_len);

std::vector<WaferRun> synthesize(const SynthConfig& cfg);

struct SplitResult {
  std::vector<WaferRun> pretrain;
  std::vector<WaferRun> shot_pool;
  std::vector<WaferRun> test;
};

// Mode-stratified, seed-deterministic partition. Within each mode,
// floor(n * train_frac) runs go to train; floor(train * pretrain_frac) of
// those to pretrain, remainder to shot_pool.
SplitResult split(const std::vector<WaferRun>& runs, double train_frac, double pretrain_frac,
                  std::uint64_t seed);

}  // namespace tshint
