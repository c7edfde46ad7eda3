#include "tshint/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "tshint/rng.hpp"
#include "tshint/util.hpp"

namespace tshint {

namespace {
constexpr char kMagic[8] = {'T', 'S', 'H', 'I', 'N', 'T', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

bool ModelConfig::layer_hinted(std::size_t layer) const {
  if (hint_all_layers) return true;
  return std::find(hint_layers.begin(), hint_layers.end(), layer) != hint_layers.end();
}

void ModelConfig::validate() const {
  if (n_channels == 0) throw Error("model config: n_channels must be positive");
  if (patch_len == 0 || patch_len > t_len) throw Error("model config: need 0 < patch_len <= T");
  if (stride == 0) throw Error("model config: stride must be positive");
  if ((t_len - patch_len) % stride != 0) {
    throw Error("model config: stride must divide T - patch_len");
  }
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw Error("model config: d_model must be divisible by n_heads");
  }
  if (n_layers == 0) throw Error("model config: need at least one encoder layer");
  if (ffn_dim == 0) throw Error("model config: ffn_dim must be positive");
  for (std::size_t l : hint_layers) {
    if (l >= n_layers) throw Error("model config: hint layer index out of range");
  }
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  init_weights();
}

void Model::add_param(const std::string& name, Tensor t) {
  param_names_.push_back(name);
  params_.emplace(name, std::move(t));
}

void Model::init_weights() {
  Rng rng(cfg_.seed);
  auto fan_in_uniform = [&](std::size_t rows, std::size_t cols) {
    double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    Tensor t({rows, cols});
    for (double& v : t.vec()) v = rng.uniform(-bound, bound);
    return t;
  };

  add_param("embed.w", fan_in_uniform(cfg_.patch_len, cfg_.d_model));
  add_param("embed.b", Tensor::zeros({1, cfg_.d_model}));
  {
    Tensor pos({cfg_.n_patches(), cfg_.d_model});
    for (double& v : pos.vec()) v = rng.uniform(-0.02, 0.02);
    add_param("pos", std::move(pos));
  }
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    std::string p = "enc" + std::to_string(l) + ".";
    add_param(p + "ln1.g", Tensor::full({1, cfg_.d_model}, 1.0));
    add_param(p + "ln1.b", Tensor::zeros({1, cfg_.d_model}));
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
      std::string hp = p + "h" + std::to_string(h) + ".";
      add_param(hp + "wq", fan_in_uniform(cfg_.d_model, cfg_.d_k()));
      add_param(hp + "bq", Tensor::zeros({1, cfg_.d_k()}));
      add_param(hp + "wk", fan_in_uniform(cfg_.d_model, cfg_.d_k()));
      add_param(hp + "bk", Tensor::zeros({1, cfg_.d_k()}));
      add_param(hp + "wv", fan_in_uniform(cfg_.d_model, cfg_.d_k()));
      add_param(hp + "bv", Tensor::zeros({1, cfg_.d_k()}));
      add_param(hp + "wo", fan_in_uniform(cfg_.d_k(), cfg_.d_model));
    }
    add_param(p + "bo", Tensor::zeros({1, cfg_.d_model}));
    add_param(p + "ln2.g", Tensor::full({1, cfg_.d_model}, 1.0));
    add_param(p + "ln2.b", Tensor::zeros({1, cfg_.d_model}));
    add_param(p + "ffn.w1", fan_in_uniform(cfg_.d_model, cfg_.ffn_dim));
    add_param(p + "ffn.b1", Tensor::zeros({1, cfg_.ffn_dim}));
    add_param(p + "ffn.w2", fan_in_uniform(cfg_.ffn_dim, cfg_.d_model));
    add_param(p + "ffn.b2", Tensor::zeros({1, cfg_.d_model}));
  }
  add_param("final_ln.g", Tensor::full({1, cfg_.d_model}, 1.0));
  add_param("final_ln.b", Tensor::zeros({1, cfg_.d_model}));

  std::size_t in_dim = cfg_.flat_dim();
  for (std::size_t i = 0; i < cfg_.head_dims.size(); ++i) {
    std::string hp = "head" + std::to_string(i) + ".";
    add_param(hp + "w", fan_in_uniform(in_dim, cfg_.head_dims[i]));
    add_param(hp + "b", Tensor::zeros({1, cfg_.head_dims[i]}));
    in_dim = cfg_.head_dims[i];
  }
  add_param("head_out.w", fan_in_uniform(in_dim, 1));
  add_param("head_out.b", Tensor::zeros({1, 1}));
}

void Model::set_hint_layers(bool all, std::vector<std::size_t> layers) {
  ModelConfig next = cfg_;
  next.hint_all_layers = all;
  next.hint_layers = std::move(layers);
  next.validate();
  cfg_ = std::move(next);
}

const Tensor& Model::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& Model::param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

void Model::set_target_stats(double mean, double std) {
  if (!std::isfinite(mean) || !std::isfinite(std) || std <= 0) {
    throw Error("target stats: std must be positive and finite");
  }
  target_mean_ = mean;
  target_std_ = std;
}

NodeId Model::param_node(Graph& g, std::map<std::string, NodeId>& cache,
                         const std::string& name, bool as_leaf) const {
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  NodeId id = as_leaf ? g.parameter(param(name)) : g.constant(param(name));
  cache.emplace(name, id);
  return id;
}

Model::BuildOut Model::build_forward(Graph& g, const std::vector<const SampleTensor*>& batch,
                                     const AttentionHint* hint, bool inputs_as_leaves,
                                     bool params_as_leaves, bool record_maps) const {
  if (batch.empty()) throw Error("model forward: empty batch");
  std::size_t n_p = cfg_.n_patches();
  bool apply_hint = hint != nullptr && hint->lambda != 0.0;
  if (hint != nullptr) {
    if (hint->h.rank() != 2 || hint->h.rows() != n_p || hint->h.cols() != n_p) {
      throw Error("hint shape " + hint->h.shape_str() + " does not match N_p=" +
                  std::to_string(n_p));
    }
  }

  BuildOut out;
  auto P = [&](const std::string& name) { return param_node(g, out.params, name, params_as_leaves); };

  NodeId lam_h = 0;
  if (apply_hint) {
    Tensor scaled = hint->h;
    for (double& v : scaled.vec()) v *= hint->lambda;
    lam_h = g.constant(std::move(scaled));
  }

  double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.d_k()));
  std::vector<NodeId> sample_rows;
  sample_rows.reserve(batch.size());

  for (const SampleTensor* sample : batch) {
    const Tensor& values = sample->values;
    if (values.rank() != 2 || values.rows() != cfg_.n_channels || values.cols() != cfg_.t_len) {
      throw Error("sample '" + sample->run_id + "' shape " + values.shape_str() +
                  " does not match model config");
    }
    NodeId x = inputs_as_leaves ? g.input(values) : g.constant(values);
    out.input_nodes.push_back(x);

    std::vector<NodeId> channel_flat;
    channel_flat.reserve(cfg_.n_channels);
    for (std::size_t c = 0; c < cfg_.n_channels; ++c) {
      NodeId patches = g.patchify(x, c, cfg_.patch_len, cfg_.stride);
      NodeId e = g.add(g.add_row(g.matmul(patches, P("embed.w")), P("embed.b")), P("pos"));
      for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        std::string lp = "enc" + std::to_string(l) + ".";
        bool hint_here = apply_hint && cfg_.layer_hinted(l);
        NodeId y = g.layernorm(e, P(lp + "ln1.g"), P(lp + "ln1.b"));
        NodeId attn_sum = 0;
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
          std::string hp = lp + "h" + std::to_string(h) + ".";
          NodeId q = g.add_row(g.matmul(y, P(hp + "wq")), P(hp + "bq"));
          NodeId k = g.add_row(g.matmul(y, P(hp + "wk")), P(hp + "bk"));
          NodeId v = g.add_row(g.matmul(y, P(hp + "wv")), P(hp + "bv"));
          NodeId scores = g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_dk);
          NodeId a = g.softmax_rows(scores);
          NodeId a_used = hint_here ? g.add(a, lam_h) : a;
          if (record_maps) {
            AttentionMap m;
            m.layer = l;
            m.head = h;
            m.channel = c;
            m.scores = g.value(a);
            if (hint_here) m.hinted = g.value(a_used);
            out.maps.push_back(std::move(m));
          }
          NodeId contrib = g.matmul(g.matmul(a_used, v), P(hp + "wo"));
          attn_sum = (h == 0) ? contrib : g.add(attn_sum, contrib);
        }
        e = g.add(e, g.add_row(attn_sum, P(lp + "bo")));
        NodeId y2 = g.layernorm(e, P(lp + "ln2.g"), P(lp + "ln2.b"));
        NodeId f1 = g.add_row(g.matmul(y2, P(lp + "ffn.w1")), P(lp + "ffn.b1"));
        NodeId f1a = cfg_.activation == ModelConfig::Activation::Gelu ? g.gelu(f1) : g.relu(f1);
        NodeId f2 = g.add_row(g.matmul(f1a, P(lp + "ffn.w2")), P(lp + "ffn.b2"));
        e = g.add(e, f2);
      }
      e = g.layernorm(e, P("final_ln.g"), P("final_ln.b"));
      channel_flat.push_back(g.reshape(e, {1, n_p * cfg_.d_model}));
    }
    sample_rows.push_back(g.concat_cols(channel_flat));
  }

  NodeId z = sample_rows.size() == 1 ? sample_rows[0] : g.concat_rows(sample_rows);
  for (std::size_t i = 0; i < cfg_.head_dims.size(); ++i) {
    std::string hp = "head" + std::to_string(i) + ".";
    z = g.relu(g.add_row(g.matmul(z, P(hp + "w")), P(hp + "b")));
  }
  out.pred_z = g.add_row(g.matmul(z, P("head_out.w")), P("head_out.b"));
  return out;
}

Model::ForwardResult Model::forward(const SampleTensor& s, const AttentionHint* hint,
                                    bool want_maps) const {
  Graph g;
  BuildOut b = build_forward(g, {&s}, hint, /*inputs_as_leaves=*/false,
                             /*params_as_leaves=*/false, want_maps);
  ForwardResult r;
  r.z_prediction = g.value(b.pred_z).scalar_value();
  r.prediction = to_nm(r.z_prediction);
  r.maps = std::move(b.maps);
  return r;
}

double Model::predict_sample(const SampleTensor& s) const { return forward(s).prediction; }

Tensor Model::prediction_input_gradient(const SampleTensor& s) const {
  Graph g;
  BuildOut b = build_forward(g, {&s}, nullptr, /*inputs_as_leaves=*/true,
                             /*params_as_leaves=*/false, false);
  GradientMap grads = g.backward(b.pred_z);
  Tensor grad = grads.at(b.input_nodes[0]);
  // prediction in nm/min is an affine map of the z-space output
  for (double& v : grad.vec()) v *= target_std_;
  if (!grad.all_finite()) throw Error("non-finite input gradient");
  return grad;
}

std::vector<double> Model::predict_batch(const std::vector<SampleTensor>& samples,
                                         std::size_t chunk) const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    std::size_t end = std::min(samples.size(), start + chunk);
    std::vector<const SampleTensor*> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    Graph g;
    BuildOut b = build_forward(g, batch, nullptr, false, false, false);
    const Tensor& pred = g.value(b.pred_z);
    for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(to_nm(pred[i]));
  }
  return out;
}

Model::LossGraph Model::build_loss(const std::vector<const SampleTensor*>& batch,
                                   const std::vector<double>& z_targets,
                                   const AttentionHint* hint) const {
  if (batch.size() != z_targets.size()) {
    throw Error("build_loss: batch/target size mismatch");
  }
  LossGraph lg;
  BuildOut b = build_forward(lg.graph, batch, hint, false, /*params_as_leaves=*/true, false);
  Tensor target({batch.size(), 1}, z_targets);
  NodeId t = lg.graph.constant(std::move(target));
  lg.loss = lg.graph.mse_loss(b.pred_z, t);
  lg.params = std::move(b.params);
  return lg;
}

double Model::sample_loss(const SampleTensor& s, const AttentionHint* hint) const {
  Graph g;
  BuildOut b = build_forward(g, {&s}, hint, false, false, false);
  double z = g.value(b.pred_z).scalar_value();
  double d = z - to_z(s.target);
  return d * d;
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, u64 header length, JSON header, raw
// little-endian doubles. Byte-stable given identical weights.

namespace {

nlohmann::ordered_json config_to_json(const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["n_channels"] = cfg.n_channels;
  j["t_len"] = cfg.t_len;
  j["patch_len"] = cfg.patch_len;
  j["stride"] = cfg.stride;
  j["d_model"] = cfg.d_model;
  j["n_heads"] = cfg.n_heads;
  j["n_layers"] = cfg.n_layers;
  j["ffn_dim"] = cfg.ffn_dim;
  j["head_dims"] = cfg.head_dims;
  j["hint_all_layers"] = cfg.hint_all_layers;
  j["hint_layers"] = cfg.hint_layers;
  j["activation"] = cfg.activation == ModelConfig::Activation::Gelu ? "gelu" : "relu";
  j["seed"] = cfg.seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.n_channels = j.at("n_channels").get<std::size_t>();
  cfg.t_len = j.at("t_len").get<std::size_t>();
  cfg.patch_len = j.at("patch_len").get<std::size_t>();
  cfg.stride = j.at("stride").get<std::size_t>();
  cfg.d_model = j.at("d_model").get<std::size_t>();
  cfg.n_heads = j.at("n_heads").get<std::size_t>();
  cfg.n_layers = j.at("n_layers").get<std::size_t>();
  cfg.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  cfg.head_dims = j.at("head_dims").get<std::vector<std::size_t>>();
  cfg.hint_all_layers = j.at("hint_all_layers").get<bool>();
  cfg.hint_layers = j.at("hint_layers").get<std::vector<std::size_t>>();
  cfg.activation = j.at("activation").get<std::string>() == "gelu"
                       ? ModelConfig::Activation::Gelu
                       : ModelConfig::Activation::Relu;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

std::string Model::serialize() const {
  nlohmann::ordered_json header;
  header["format"] = "tshint-checkpoint";
  header["version"] = kFormatVersion;
  header["config"] = config_to_json(cfg_);
  header["target_mean"] = target_mean_;
  header["target_std"] = target_std_;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const std::string& name : param_names_) {
    const Tensor& t = param(name);
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    entry["size"] = t.size();
    tensors.push_back(std::move(entry));
    offset += t.size();
  }
  header["tensors"] = std::move(tensors);

  std::string head = header.dump();
  std::string out;
  out.reserve(sizeof(kMagic) + 8 + head.size() + offset * sizeof(double));
  out.append(kMagic, sizeof(kMagic));
  std::uint64_t head_len = head.size();
  out.append(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.append(head);
  for (const std::string& name : param_names_) {
    const Tensor& t = param(name);
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  return out;
}

Model Model::deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error("not a tshint checkpoint");
  }
  std::uint64_t head_len = 0;
  std::memcpy(&head_len, bytes.data() + sizeof(kMagic), sizeof(head_len));
  std::size_t body_start = sizeof(kMagic) + 8 + head_len;
  if (bytes.size() < body_start) throw Error("truncated checkpoint header");
  nlohmann::json header = nlohmann::json::parse(bytes.substr(sizeof(kMagic) + 8, head_len));
  if (header.at("version").get<std::uint32_t>() != kFormatVersion) {
    throw Error("unsupported checkpoint version");
  }
  Model m(config_from_json(header.at("config")));
  m.set_target_stats(header.at("target_mean").get<double>(),
                     header.at("target_std").get<double>());
  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t offset = entry.at("offset").get<std::size_t>();
    std::size_t size = entry.at("size").get<std::size_t>();
    std::size_t byte_off = body_start + offset * sizeof(double);
    if (bytes.size() < byte_off + size * sizeof(double)) {
      throw Error("truncated checkpoint tensor data");
    }
    Tensor& dst = m.param(name);
    if (dst.shape() != shape || dst.size() != size) {
      throw Error("checkpoint tensor '" + name + "' shape mismatch");
    }
    std::memcpy(dst.data(), bytes.data() + byte_off, size * sizeof(double));
    if (!dst.all_finite()) throw Error("checkpoint tensor '" + name + "' has non-finite values");
  }
  return m;
}

void Model::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

Model Model::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::string Model::content_hash() const { return fnv1a64_hex(serialize()); }

}  // namespace tshint
