#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tshint/dataset.hpp"
#include "tshint/graph.hpp"

namespace tshint {

struct ModelConfig {
  std::size_t n_channels = kNumChannels;
  std::size_t t_len = 128;  // resampled series length T
  std::size_t patch_len = 16;
  std::size_t stride = 8;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 3;
  std::size_t ffn_dim = 128;
  // regression head hidden widths; the default six follow the paper
  std::vector<std::size_t> head_dims = {1024, 512, 256, 128, 64, 32};
  bool hint_all_layers = true;
  std::vector<std::size_t> hint_layers;  // used when hint_all_layers is false
  enum class Activation { Relu, Gelu };
  Activation activation = Activation::Relu;
  std::uint64_t seed = 0;

  std::size_t n_patches() const { return (t_len - patch_len) / stride + 1; }
  std::size_t d_k() const { return d_model / n_heads; }
  std::size_t flat_dim() const { return n_channels * n_patches() * d_model; }
  bool layer_hinted(std::size_t layer) const;
  void validate() const;
};

// Nonnegative hint matrix added to post-softmax attention scores during
// fine-tuning (entries in [0,1], max entry 1 unless all-zero). lambda = 0
// makes the hint inert.
struct AttentionHint {
  Tensor h;  // N_p x N_p
  double lambda = 0.1;
};

struct AttentionMap {
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t channel = 0;
  Tensor scores;  // pre-hint, row-stochastic
  Tensor hinted;  // empty unless a hint was applied at this site
};

// Anything that can predict from a SampleTensor and expose the gradient of
// its prediction with respect to the input. Saliency runs against this
// surface.
class InputGradModel {
 public:
  virtual ~InputGradModel() = default;
  virtual double predict_sample(const SampleTensor& s) const = 0;
  virtual Tensor prediction_input_gradient(const SampleTensor& s) const = 0;
};

// Channel-independent patch transformer encoder with an MLP regression
// head. Weights are immutable during inference; training mutates them on a
// single logical thread.
class Model : public InputGradModel {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  // Override which encoder layers accept hints (checkpoint keeps its own).
  void set_hint_layers(bool all, std::vector<std::size_t> layers);

  const std::vector<std::string>& parameter_names() const { return param_names_; }
  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);

  void set_target_stats(double mean, double std);
  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }
  double to_nm(double z) const { return target_mean_ + target_std_ * z; }
  double to_z(double nm) const { return (nm - target_mean_) / target_std_; }

  struct ForwardResult {
    double prediction = 0.0;    // nm/min
    double z_prediction = 0.0;  // model space
    std::vector<AttentionMap> maps;
  };
  ForwardResult forward(const SampleTensor& s, const AttentionHint* hint = nullptr,
                        bool want_maps = false) const;

  double predict_sample(const SampleTensor& s) const override;
  Tensor prediction_input_gradient(const SampleTensor& s) const override;
  std::vector<double> predict_batch(const std::vector<SampleTensor>& samples,
                                    std::size_t chunk = 32) const;

  struct LossGraph {
    Graph graph;
    NodeId loss = 0;
    std::map<std::string, NodeId> params;
  };
  // MSE over the batch in z-scored target space; hint (if any) applies to
  // every sample in the batch.
  LossGraph build_loss(const std::vector<const SampleTensor*>& batch,
                       const std::vector<double>& z_targets,
                       const AttentionHint* hint = nullptr) const;
  double sample_loss(const SampleTensor& s, const AttentionHint* hint = nullptr) const;

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);
  std::string serialize() const;
  static Model deserialize(const std::string& bytes);
  std::string content_hash() const;  // fnv-1a of the serialized form

 private:
  struct BuildOut {
    NodeId pred_z = 0;  // [B x 1]
    std::vector<NodeId> input_nodes;
    std::vector<AttentionMap> maps;
    std::map<std::string, NodeId> params;
  };
  BuildOut build_forward(Graph& g, const std::vector<const SampleTensor*>& batch,
                         const AttentionHint* hint, bool inputs_as_leaves,
                         bool params_as_leaves, bool record_maps) const;
  NodeId param_node(Graph& g, std::map<std::string, NodeId>& cache, const std::string& name,
                    bool as_leaf) const;
  void init_weights();
  void add_param(const std::string& name, Tensor t);

  ModelConfig cfg_;
  std::vector<std::string> param_names_;
  std::map<std::string, Tensor> params_;
  double target_mean_ = 0.0;
  double target_std_ = 1.0;
};

}  // namespace tshint
