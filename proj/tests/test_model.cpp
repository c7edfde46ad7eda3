#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "tshint/model.hpp"
#include "tshint/rng.hpp"
#include "tshint/util.hpp"

using namespace tshint;

namespace {

ModelConfig tiny_config(std::size_t n_channels = 3, std::size_t t_len = 32,
                        std::size_t patch_len = 8, std::size_t stride = 8,
                        std::size_t d_model = 8, std::size_t n_layers = 1) {
  ModelConfig cfg;
  cfg.n_channels = n_channels;
  cfg.t_len = t_len;
  cfg.patch_len = patch_len;
  cfg.stride = stride;
  cfg.d_model = d_model;
  cfg.n_heads = 2;
  cfg.n_layers = n_layers;
  cfg.ffn_dim = 16;
  cfg.head_dims = {8, 4};
  cfg.seed = 5;
  return cfg;
}

SampleTensor random_sample(const ModelConfig& cfg, std::uint64_t seed, double target = 80.0) {
  Rng rng(seed);
  Tensor raw({cfg.n_channels, cfg.t_len});
  for (double& v : raw.vec()) v = rng.uniform(-2, 2);
  SampleTensor s = normalize(raw, "sample_" + std::to_string(seed), Mode::LowSpeed, target);
  return s;
}

void zero_params(Model& m) {
  for (const auto& name : m.parameter_names()) {
    for (double& v : m.param(name).vec()) v = 0.0;
  }
}

}  // namespace

TEST_CASE("patch geometry from config") {
  ModelConfig cfg;
  CHECK(cfg.n_patches() == 15);  // (128-16)/8+1
  CHECK(cfg.flat_dim() == 18240);

  ModelConfig disjoint = tiny_config(1, 32, 8, 8);
  CHECK(disjoint.n_patches() == 4);  // stride == patch_len

  ModelConfig single = tiny_config(1, 8, 8, 8);
  CHECK(single.n_patches() == 1);  // T == patch_len

  ModelConfig bad = tiny_config();
  bad.stride = 7;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = tiny_config();
  bad.d_model = 9;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("attention is uniform for zero projections and accepts hand-checked hints") {
  // N_p = 2 so the 2x2 case is exact
  ModelConfig cfg = tiny_config(1, 16, 8, 8);
  Model model(cfg);
  zero_params(model);
  model.set_target_stats(0.0, 1.0);
  SampleTensor s = random_sample(cfg, 1);

  Model::ForwardResult plain = model.forward(s, nullptr, true);
  REQUIRE(!plain.maps.empty());
  for (const AttentionMap& m : plain.maps) {
    for (std::size_t i = 0; i < m.scores.size(); ++i) CHECK(m.scores[i] == 0.5);
    CHECK(m.hinted.size() == 0);
  }

  AttentionHint hint;
  hint.h = Tensor::identity(2);
  hint.lambda = 0.5;
  Model::ForwardResult hinted = model.forward(s, &hint, true);
  for (const AttentionMap& m : hinted.maps) {
    REQUIRE(m.hinted.size() == 4);
    CHECK(m.hinted.at(0, 0) == 1.0);
    CHECK(m.hinted.at(0, 1) == 0.5);
    CHECK(m.hinted.at(1, 0) == 0.5);
    CHECK(m.hinted.at(1, 1) == 1.0);
  }
}

TEST_CASE("lambda = 0 hints are inert") {
  ModelConfig cfg = tiny_config();
  Model model(cfg);
  model.set_target_stats(70.0, 12.0);
  SampleTensor s = random_sample(cfg, 2);

  AttentionHint hint;
  hint.h = Tensor::full({cfg.n_patches(), cfg.n_patches()}, 1.0);
  hint.lambda = 0.0;
  Model::ForwardResult with = model.forward(s, &hint);
  Model::ForwardResult without = model.forward(s);
  CHECK(with.prediction == without.prediction);

  // wrong hint shape is rejected
  AttentionHint bad;
  bad.h = Tensor::full({2, 2}, 1.0);
  bad.lambda = 0.1;
  CHECK_THROWS_WITH_AS(model.forward(s, &bad), doctest::Contains("hint shape"), Error);
}

TEST_CASE("hint addition is linear in lambda") {
  ModelConfig cfg = tiny_config();  // single layer so layer-0 maps share their input
  Model model(cfg);
  model.set_target_stats(0.0, 1.0);
  SampleTensor s = random_sample(cfg, 3);

  Rng rng(9);
  AttentionHint h1;
  h1.h = Tensor({cfg.n_patches(), cfg.n_patches()});
  for (double& v : h1.h.vec()) v = rng.uniform(0, 1);
  AttentionHint h2 = h1, h12 = h1;
  h1.lambda = 0.07;
  h2.lambda = 0.21;
  h12.lambda = 0.28;

  Model::ForwardResult base = model.forward(s, nullptr, true);
  Model::ForwardResult r1 = model.forward(s, &h1, true);
  Model::ForwardResult r2 = model.forward(s, &h2, true);
  Model::ForwardResult r12 = model.forward(s, &h12, true);
  for (std::size_t m = 0; m < base.maps.size(); ++m) {
    const Tensor& a = base.maps[m].scores;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double lhs = r12.maps[m].hinted[i] - a[i];
      double rhs = (r1.maps[m].hinted[i] - a[i]) + (r2.maps[m].hinted[i] - a[i]);
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }
  }
}

TEST_CASE("channel independence") {
  ModelConfig cfg = tiny_config(3, 32, 8, 8);
  Model model(cfg);
  model.set_target_stats(0.0, 1.0);
  SampleTensor s = random_sample(cfg, 4);

  // permuting two channels permutes the per-channel attention maps
  SampleTensor swapped = s;
  for (std::size_t t = 0; t < cfg.t_len; ++t) {
    std::swap(swapped.values.at(0, t), swapped.values.at(2, t));
  }
  Model::ForwardResult a = model.forward(s, nullptr, true);
  Model::ForwardResult b = model.forward(swapped, nullptr, true);
  auto find_map = [&](const Model::ForwardResult& r, std::size_t layer, std::size_t head,
                      std::size_t channel) -> const Tensor& {
    for (const AttentionMap& m : r.maps) {
      if (m.layer == layer && m.head == head && m.channel == channel) return m.scores;
    }
    throw Error("map not found");
  };
  for (std::size_t head = 0; head < cfg.n_heads; ++head) {
    CHECK(find_map(a, 0, head, 0) == find_map(b, 0, head, 2));
    CHECK(find_map(a, 0, head, 2) == find_map(b, 0, head, 0));
    CHECK(find_map(a, 0, head, 1) == find_map(b, 0, head, 1));
  }

  // editing one channel leaves the other channels' maps untouched
  SampleTensor edited = s;
  for (std::size_t t = 0; t < cfg.t_len; ++t) edited.values.at(1, t) += 0.25;
  Model::ForwardResult c = model.forward(edited, nullptr, true);
  for (std::size_t head = 0; head < cfg.n_heads; ++head) {
    CHECK(find_map(a, 0, head, 0) == find_map(c, 0, head, 0));
    CHECK(find_map(a, 0, head, 2) == find_map(c, 0, head, 2));
    CHECK(find_map(a, 0, head, 1) != find_map(c, 0, head, 1));
  }
}

TEST_CASE("empty hint layer set disables injection") {
  ModelConfig cfg = tiny_config();
  Model model(cfg);
  model.set_target_stats(0.0, 1.0);
  model.set_hint_layers(false, {});
  SampleTensor s = random_sample(cfg, 6);
  AttentionHint hint;
  hint.h = Tensor::full({cfg.n_patches(), cfg.n_patches()}, 1.0);
  hint.lambda = 0.4;
  CHECK(model.forward(s, &hint).prediction == model.forward(s).prediction);
}

TEST_CASE("forward determinism and row-stochastic pre-hint maps") {
  ModelConfig cfg = tiny_config(3, 32, 8, 4, 8, 2);
  Model m1(cfg);
  Model m2(cfg);
  for (const auto& name : m1.parameter_names()) CHECK(m1.param(name) == m2.param(name));
  m1.set_target_stats(80.0, 9.0);
  m2.set_target_stats(80.0, 9.0);
  SampleTensor s = random_sample(cfg, 8);
  Model::ForwardResult a = m1.forward(s, nullptr, true);
  Model::ForwardResult b = m2.forward(s, nullptr, true);
  CHECK(a.prediction == b.prediction);
  CHECK(std::isfinite(a.prediction));
  REQUIRE(a.maps.size() == b.maps.size());
  REQUIRE(a.maps.size() == cfg.n_layers * cfg.n_heads * cfg.n_channels);
  for (std::size_t i = 0; i < a.maps.size(); ++i) {
    CHECK(a.maps[i].scores == b.maps[i].scores);
    for (std::size_t r = 0; r < cfg.n_patches(); ++r) {
      double sum = 0;
      for (std::size_t c = 0; c < cfg.n_patches(); ++c) sum += a.maps[i].scores.at(r, c);
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("regression head") {
  // all-zero weights predict zero (in model space)
  {
    ModelConfig cfg = tiny_config();
    Model model(cfg);
    zero_params(model);
    model.set_target_stats(0.0, 1.0);
    CHECK(model.forward(random_sample(cfg, 10)).prediction == 0.0);
  }
  // single linear layer on a pinned encoding is a hand-computable dot product
  {
    ModelConfig cfg = tiny_config(2, 16, 8, 8);
    cfg.head_dims = {};  // head reduces to one linear map
    Model model(cfg);
    zero_params(model);
    model.set_target_stats(0.0, 1.0);
    // final layernorm with zero gain pins every encoding entry to its bias
    std::vector<double> bias = {0.5, -1.0, 2.0, 0.25, 1.5, -0.75, 3.0, 0.125};
    for (std::size_t j = 0; j < 8; ++j) model.param("final_ln.b")[j] = bias[j];
    Tensor& w = model.param("head_out.w");  // flat_dim x 1, flat = C * N_p * d_model
    double expected = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = 0.01 * static_cast<double>(i % 7) - 0.02;
      expected += bias[i % 8] * w[i];
    }
    double got = model.forward(random_sample(cfg, 11)).prediction;
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("full model forward+MSE gradient check on the shrunken config") {
  ModelConfig cfg = tiny_config();  // C=3, T=32, d_model=8, 1 layer, head [8,4]
  Model model(cfg);
  model.set_target_stats(0.0, 1.0);
  SampleTensor s = random_sample(cfg, 12, 0.6);
  double z_target = model.to_z(s.target);

  // every parameter, finite-differenced through the loss
  Model::LossGraph lg = model.build_loss({&s}, {z_target});
  GradientMap grads = lg.graph.backward(lg.loss);
  double worst = 0.0;
  for (const auto& [name, node] : lg.params) {
    const Tensor& x = model.param(name);
    double err = max_rel_err_vs_fd(
        [&](const Tensor& probe) {
          Model probed = model;
          probed.param(name) = probe;
          return probed.sample_loss(s);
        },
        x, grads.at(node), 1e-5);
    worst = std::max(worst, err);
  }
  CHECK(worst < 1e-4);

  // input gradient against finite differences of the prediction
  Tensor analytic = model.prediction_input_gradient(s);
  double input_err = max_rel_err_vs_fd(
      [&](const Tensor& probe) {
        SampleTensor probed = s;
        probed.values = probe;
        return model.predict_sample(probed);
      },
      s.values, analytic, 1e-5);
  CHECK(input_err < 1e-4);
}

TEST_CASE("checkpoint round-trip is exact and byte-stable") {
  ModelConfig cfg = tiny_config();
  Model model(cfg);
  model.set_target_stats(81.25, 14.5);
  SampleTensor s = random_sample(cfg, 13);
  double before = model.forward(s).prediction;

  std::string bytes_a = model.serialize();
  std::string bytes_b = model.serialize();
  CHECK(bytes_a == bytes_b);

  auto path = std::filesystem::temp_directory_path() / "tshint_model_test.ckpt";
  model.save(path);
  Model loaded = Model::load(path);
  CHECK(loaded.forward(s).prediction == before);
  CHECK(loaded.target_mean() == model.target_mean());
  CHECK(loaded.content_hash() == model.content_hash());

  CHECK_THROWS_AS(Model::deserialize("not a checkpoint"), Error);
}
