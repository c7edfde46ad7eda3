#include "tshint/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tshint/util.hpp"

namespace tshint {

SaliencyMap saliency(const InputGradModel& model, const SampleTensor& sample) {
  Tensor grad = model.prediction_input_gradient(sample);
  if (!grad.all_finite()) throw Error("saliency: non-finite gradient");
  for (double& v : grad.vec()) v = std::abs(v);
  SaliencyMap m;
  m.values = std::move(grad);
  m.sample_id = sample.run_id;
  return m;
}

std::vector<std::string> top_k_best(const InputGradModel& model,
                                    const std::vector<SampleTensor>& dataset, std::size_t k) {
  if (k > dataset.size()) throw Error("top_k_best: k exceeds dataset size");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> errors(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    errors[i] = std::abs(model.predict_sample(dataset[i]) - dataset[i].target);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (errors[a] != errors[b]) return errors[a] < errors[b];
    return dataset[a].run_id < dataset[b].run_id;
  });
  std::vector<std::string> ids;
  ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ids.push_back(dataset[order[i]].run_id);
  return ids;
}

namespace {

template <class Score>
std::vector<std::size_t> ranked_desc(std::size_t n, Score&& score) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
  return order;
}

}  // namespace

InsightBundle insight(const Model& model, const std::vector<SampleTensor>& dataset,
                      std::size_t k) {
  if (k == 0) throw Error("insight: k must be positive");
  std::vector<std::string> best = top_k_best(model, dataset, k);

  const ModelConfig& cfg = model.config();
  std::size_t n_p = cfg.n_patches();
  InsightBundle bundle;
  bundle.sample_ids = best;
  bundle.attention_insight = Tensor::zeros({n_p, n_p});
  bundle.saliency_insight = Tensor::zeros({cfg.n_channels, cfg.t_len});

  for (const std::string& id : best) {
    auto it = std::find_if(dataset.begin(), dataset.end(),
                           [&](const SampleTensor& s) { return s.run_id == id; });
    const SampleTensor& sample = *it;

    Tensor attn = last_layer_attention(model, sample);
    for (std::size_t i = 0; i < attn.size(); ++i) bundle.attention_insight[i] += attn[i];

    SaliencyMap sal = saliency(model, sample);
    for (std::size_t i = 0; i < sal.values.size(); ++i) {
      bundle.saliency_insight[i] += sal.values[i];
    }
  }
  double inv_k = 1.0 / static_cast<double>(k);
  for (double& v : bundle.attention_insight.vec()) v *= inv_k;
  for (double& v : bundle.saliency_insight.vec()) v *= inv_k;

  bundle.top_features = ranked_desc(cfg.n_channels, [&](std::size_t c) {
    double acc = 0.0;
    for (std::size_t t = 0; t < cfg.t_len; ++t) acc += bundle.saliency_insight.at(c, t);
    return acc;
  });
  bundle.top_timesteps = ranked_desc(cfg.t_len, [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cfg.n_channels; ++c) acc += bundle.saliency_insight.at(c, t);
    return acc;
  });
  bundle.top_patches = ranked_desc(n_p, [&](std::size_t q) {
    double acc = 0.0;
    for (std::size_t p = 0; p < n_p; ++p) acc += bundle.attention_insight.at(p, q);
    return acc;
  });
  return bundle;
}

Tensor last_layer_attention(const Model& model, const SampleTensor& sample) {
  const ModelConfig& cfg = model.config();
  std::size_t n_p = cfg.n_patches();
  Model::ForwardResult fwd = model.forward(sample, nullptr, /*want_maps=*/true);
  Tensor attn = Tensor::zeros({n_p, n_p});
  std::size_t count = 0;
  for (const AttentionMap& m : fwd.maps) {
    if (m.layer != cfg.n_layers - 1) continue;
    for (std::size_t i = 0; i < attn.size(); ++i) attn[i] += m.scores[i];
    ++count;
  }
  for (double& v : attn.vec()) v /= static_cast<double>(count);
  return attn;
}

Tensor diff_maps(const Tensor& before, const Tensor& after) {
  if (!before.same_shape(after)) {
    throw Error("diff_maps: shape mismatch " + before.shape_str() + " vs " + after.shape_str());
  }
  Tensor out = after;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(after[i] - before[i]);
  return out;
}

}  // namespace tshint
