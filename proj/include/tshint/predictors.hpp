#pragma once

#include <string>

#include "tshint/evaluation.hpp"
#include "tshint/model.hpp"

namespace tshint {

class ModelPredictor final : public Predictor {
 public:
  explicit ModelPredictor(const Model& model, std::string name = "ts_hint")
      : model_(model), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  double predict(const WaferRun&, const SampleTensor& sample) const override {
    return model_.predict_sample(sample);
  }

 private:
  const Model& model_;
  std::string name_;
};

class PrestonPredictor final : public Predictor {
 public:
  explicit PrestonPredictor(PrestonModel model) : model_(model) {}
  std::string name() const override { return "preston"; }
  double predict(const WaferRun& run, const SampleTensor&) const override {
    return model_.predict(run);
  }

 private:
  PrestonModel model_;
};

// Predicts the mean target of its fit set; the standard R^2 = 0 reference.
class MeanPredictor final : public Predictor {
 public:
  explicit MeanPredictor(const std::vector<WaferRun>& fit_set) {
    for (const auto& run : fit_set) mean_ += run.target_mrr;
    mean_ /= static_cast<double>(fit_set.size());
  }
  std::string name() const override { return "mean"; }
  double predict(const WaferRun&, const SampleTensor&) const override { return mean_; }

 private:
  double mean_ = 0.0;
};

}  // namespace tshint
