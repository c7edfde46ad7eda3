#pragma once

#include <string>
#include <vector>

#include "tshint/model.hpp"

namespace tshint {

// Elementwise |d prediction / d input| on the normalized C x T input.
struct SaliencyMap {
  Tensor values;  // C x T, nonnegative
  std::string sample_id;
  std::string checkpoint_hash;
};

SaliencyMap saliency(const InputGradModel& model, const SampleTensor& sample);

// Ids of the k samples with the smallest |prediction - target|, ties
// broken by lexicographic sample id.
std::vector<std::string> top_k_best(const InputGradModel& model,
                                    const std::vector<SampleTensor>& dataset, std::size_t k);

// Aggregated views over the k best samples under the current model:
// last-layer attention averaged over heads and channels, mean saliency,
// and the rankings derived from them.
struct InsightBundle {
  Tensor attention_insight;               // N_p x N_p
  Tensor saliency_insight;                // C x T
  std::vector<std::size_t> top_features;  // channels by mean saliency, descending
  std::vector<std::size_t> top_timesteps;
  std::vector<std::size_t> top_patches;  // key patches by attention column mass
  std::vector<std::string> sample_ids;
};

InsightBundle insight(const Model& model, const std::vector<SampleTensor>& dataset,
                      std::size_t k);

// Last-layer attention averaged over heads and channels for one sample.
Tensor last_layer_attention(const Model& model, const SampleTensor& sample);

// Entrywise |after - before|; shapes must match.
Tensor diff_maps(const Tensor& before, const Tensor& after);

}  // namespace tshint
