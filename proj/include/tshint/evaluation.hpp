#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tshint/dataset.hpp"

namespace tshint {

// Preston's law MRR = k * P * V with per-run scalar proxies taken as the
// time-series means of the configured pressure and rotation channels.
struct PrestonModel {
  double k = 0.0;
  std::size_t pressure_channel = kPressureChannel;
  std::size_t velocity_channel = kRotationChannel;

  double predict(const WaferRun& run) const;
};

// Least-squares fit of k: k = sum(mrr * pv) / sum(pv^2).
PrestonModel preston_fit(const std::vector<WaferRun>& runs,
                         std::size_t pressure_channel = kPressureChannel,
                         std::size_t velocity_channel = kRotationChannel);

double rmse(const std::vector<double>& y_true, const std::vector<double>& y_pred);
// Coefficient of determination against the mean of y_true.
double r2(const std::vector<double>& y_true, const std::vector<double>& y_pred);

// A named predictor evaluated by bench. Implementations may look at the
// raw run, the normalized sample, or both.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string name() const = 0;
  virtual double predict(const WaferRun& run, const SampleTensor& sample) const = 0;
};

struct EvalRow {
  std::string model;
  std::string mode;  // "all", "low_speed", "high_speed"
  double rmse = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::map<std::string, std::string> config_hashes;
};

EvalReport bench(const std::vector<const Predictor*>& models, const std::vector<WaferRun>& runs,
                 const std::vector<SampleTensor>& samples);

std::string report_to_csv(const EvalReport& report);
std::string report_to_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace tshint
