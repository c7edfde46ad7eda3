#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tshint/model.hpp"

namespace tshint {

struct TrainConfig {
  double lr_pretrain = 1e-3;
  double lr_finetune = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 60;
  std::size_t early_stop_patience = 10;
  double val_fraction = 0.2;  // held-out slice of the pretrain set
  std::size_t finetune_steps = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

// Standard Adam with bias correction, state keyed by parameter name.
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  struct Update {
    std::string name;
    Tensor* weight;
    const Tensor* grad;
  };
  // One optimizer step over the given tensors. Throws if any gradient or
  // updated weight is non-finite.
  void step(const std::vector<Update>& updates);
  // Convenience: update a model from the gradients recorded for lg.params.
  void step(Model& model, const Model::LossGraph& lg, const GradientMap& grads);

  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> state_;  // m, v
};

struct PretrainResult {
  std::vector<double> train_loss;  // per epoch, z-space MSE
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
};

// Supervised MSE pretraining with shuffled mini-batches and early stopping
// on a held-out slice. Sets the model's target normalization stats from
// the given set. Deterministic in (seed, data, config).
PretrainResult pretrain(Model& model, const std::vector<SampleTensor>& pretrain_set,
                        const TrainConfig& cfg);

struct ShotRecord {
  std::size_t shot_index = 0;
  std::string sample_id;  // empty for the 0-shot record
  std::optional<double> loss_before;
  std::optional<double> loss_after;
  std::optional<double> test_rmse;  // nm/min
  std::optional<double> test_r2;
  std::optional<AttentionHint> hint_used;
  std::string hint_provenance = "none";
};

// A fixed number of gradient steps on one sample at the fine-tuning
// learning rate, with the hint active in every forward pass. Losses are
// the sample's hinted z-space squared error before and after.
ShotRecord finetune_step(Model& model, const SampleTensor& sample, const AttentionHint* hint,
                         const TrainConfig& cfg);

enum class ShotSelection { HighestError, SeededRandom };

struct FewShotConfig {
  std::size_t n_shots = 5;
  ShotSelection selection = ShotSelection::HighestError;
  std::uint64_t seed = 0;
};

// Provider callback: given the shot sample and its pretrained-model
// prediction, produce a hint (or none). Provenance travels with the hint.
struct HintOutcome {
  std::optional<AttentionHint> hint;
  std::string provenance = "none";
};
using HintProviderFn = std::function<HintOutcome(const SampleTensor&, double prediction)>;

struct EvalMetrics {
  double rmse = 0.0;
  double r2 = 0.0;
};
EvalMetrics evaluate(const Model& model, const std::vector<SampleTensor>& samples);

// Fig. 1(b,c) protocol: record 0-shot test metrics, then fine-tune one
// sample per shot (cumulative), re-evaluating on the test set after each.
// Shot samples are ranked once against the pretrained model.
std::vector<ShotRecord> run_few_shot(Model& model, const std::vector<SampleTensor>& shot_pool,
                                     const std::vector<SampleTensor>& test_set,
                                     const HintProviderFn& provider, const TrainConfig& train_cfg,
                                     const FewShotConfig& few_cfg);

std::string shots_to_csv(const std::vector<ShotRecord>& records);

}  // namespace tshint
