#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "tshint/attribution.hpp"
#include "tshint/dataset.hpp"
#include "tshint/evaluation.hpp"
#include "tshint/heatmap.hpp"
#include "tshint/hinting.hpp"
#include "tshint/manifest.hpp"
#include "tshint/model.hpp"
#include "tshint/predictors.hpp"
#include "tshint/training.hpp"
#include "tshint/util.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct DataOpts {
  std::string data;
  std::string targets;
  double train_frac = 0.8;
  double pretrain_frac = 0.15;
};

struct ModelOpts {
  std::size_t t_len = 128;
  std::size_t patch_len = 16;
  std::size_t stride = 8;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 3;
  std::size_t ffn_dim = 128;
  std::vector<std::size_t> head_dims = {1024, 512, 256, 128, 64, 32};
  std::string activation = "relu";
};

struct TrainOpts {
  double lr = 1e-3;
  double lr_finetune = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 60;
  std::size_t patience = 10;
  std::size_t finetune_steps = 10;
};

struct HintOpts {
  std::string provider = "heuristic";
  double lambda = 0.1;
  std::string hint_layers = "all";  // "all" or comma-separated indices
  std::size_t n_hints = 3;
  std::size_t smooth_kernel = 3;
  std::size_t insight_k = 5;
  std::string llm_cache;
  double llm_timeout = 30.0;
  std::size_t llm_retries = 1;
};

void add_data_opts(CLI::App* cmd, DataOpts& o) {
  cmd->add_option("--data", o.data, "dataset CSV")->required();
  cmd->add_option("--targets", o.targets, "optional targets sidecar CSV");
  cmd->add_option("--train-frac", o.train_frac, "train fraction of the dataset");
  cmd->add_option("--pretrain-frac", o.pretrain_frac, "pretrain fraction of train");
}

void add_model_opts(CLI::App* cmd, ModelOpts& o) {
  cmd->add_option("--t-len", o.t_len, "resampled series length");
  cmd->add_option("--patch-len", o.patch_len, "patch length");
  cmd->add_option("--model-stride", o.stride, "patch stride");
  cmd->add_option("--d-model", o.d_model, "embedding width");
  cmd->add_option("--n-heads", o.n_heads, "attention heads");
  cmd->add_option("--n-layers", o.n_layers, "encoder layers");
  cmd->add_option("--ffn-dim", o.ffn_dim, "feed-forward width");
  cmd->add_option("--head-dims", o.head_dims, "regression head hidden widths")
      ->delimiter(',');
  cmd->add_option("--activation", o.activation, "relu|gelu");
}

void add_train_opts(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--lr", o.lr, "pretraining learning rate");
  cmd->add_option("--lr-finetune", o.lr_finetune, "fine-tuning learning rate");
  cmd->add_option("--batch-size", o.batch_size, "mini-batch size");
  cmd->add_option("--max-epochs", o.max_epochs, "epoch cap");
  cmd->add_option("--patience", o.patience, "early stopping patience");
  cmd->add_option("--finetune-steps", o.finetune_steps, "gradient steps per shot");
}

void add_hint_opts(CLI::App* cmd, HintOpts& o) {
  cmd->add_option("--provider", o.provider, "none|heuristic|llm|replay:<dir>");
  cmd->add_option("--lambda", o.lambda, "hint weight");
  cmd->add_option("--hint-layers", o.hint_layers, "'all' or comma-separated layer indices");
  cmd->add_option("--n-hints", o.n_hints, "top features/ranges kept");
  cmd->add_option("--smooth-kernel", o.smooth_kernel, "odd box kernel along key axis");
  cmd->add_option("--insight-k", o.insight_k, "top-k best samples for insight");
  cmd->add_option("--llm-cache", o.llm_cache, "transcript cache directory");
  cmd->add_option("--llm-timeout", o.llm_timeout, "llm request timeout, seconds");
  cmd->add_option("--llm-retries", o.llm_retries, "llm request retries");
}

tshint::ModelConfig to_model_config(const ModelOpts& o, std::uint64_t seed) {
  tshint::ModelConfig cfg;
  cfg.t_len = o.t_len;
  cfg.patch_len = o.patch_len;
  cfg.stride = o.stride;
  cfg.d_model = o.d_model;
  cfg.n_heads = o.n_heads;
  cfg.n_layers = o.n_layers;
  cfg.ffn_dim = o.ffn_dim;
  cfg.head_dims = o.head_dims;
  if (o.activation == "gelu") {
    cfg.activation = tshint::ModelConfig::Activation::Gelu;
  } else if (o.activation != "relu") {
    throw tshint::Error("unknown activation '" + o.activation + "'");
  }
  cfg.seed = seed;
  return cfg;
}

tshint::TrainConfig to_train_config(const TrainOpts& o, std::uint64_t seed) {
  tshint::TrainConfig cfg;
  cfg.lr_pretrain = o.lr;
  cfg.lr_finetune = o.lr_finetune;
  cfg.batch_size = o.batch_size;
  cfg.max_epochs = o.max_epochs;
  cfg.early_stop_patience = o.patience;
  cfg.finetune_steps = o.finetune_steps;
  cfg.seed = seed;
  return cfg;
}

tshint::HintParams to_hint_params(const HintOpts& o) {
  tshint::HintParams p;
  p.lambda = o.lambda;
  p.n_hints = o.n_hints;
  p.smooth_kernel = o.smooth_kernel;
  p.insight_k = o.insight_k;
  p.validate();
  return p;
}

tshint::LLMEndpointConfig to_endpoint(const HintOpts& o) {
  tshint::LLMEndpointConfig cfg;
  cfg.timeout_seconds = o.llm_timeout;
  cfg.max_retries = o.llm_retries;
  cfg.cache_dir = o.llm_cache;
  return cfg;
}

void apply_hint_layers(tshint::Model& model, const std::string& spec) {
  if (spec == "all") {
    model.set_hint_layers(true, {});
    return;
  }
  std::vector<std::size_t> layers;
  for (const std::string& part : tshint::split_csv_line(spec)) {
    layers.push_back(static_cast<std::size_t>(tshint::parse_double(part, "--hint-layers")));
  }
  model.set_hint_layers(false, std::move(layers));
}

std::optional<fs::path> sidecar_path(const DataOpts& o) {
  if (o.targets.empty()) return std::nullopt;
  return fs::path(o.targets);
}

struct LoadedData {
  std::vector<tshint::WaferRun> runs;
  tshint::SplitResult split;
};

LoadedData load_and_split(const DataOpts& o, std::uint64_t seed) {
  LoadedData d;
  d.runs = tshint::load_runs(o.data, tshint::default_channel_names(), sidecar_path(o));
  d.split = tshint::split(d.runs, o.train_frac, o.pretrain_frac, seed);
  return d;
}

ordered_json data_config_json(const DataOpts& o) {
  ordered_json j;
  j["data"] = o.data;
  j["targets"] = o.targets;
  j["train_frac"] = o.train_frac;
  j["pretrain_frac"] = o.pretrain_frac;
  return j;
}

ordered_json model_config_json(const tshint::ModelConfig& cfg) {
  ordered_json j;
  j["t_len"] = cfg.t_len;
  j["patch_len"] = cfg.patch_len;
  j["stride"] = cfg.stride;
  j["d_model"] = cfg.d_model;
  j["n_heads"] = cfg.n_heads;
  j["n_layers"] = cfg.n_layers;
  j["ffn_dim"] = cfg.ffn_dim;
  j["head_dims"] = cfg.head_dims;
  j["activation"] = cfg.activation == tshint::ModelConfig::Activation::Gelu ? "gelu" : "relu";
  return j;
}

ordered_json train_config_json(const tshint::TrainConfig& cfg) {
  ordered_json j;
  j["lr_pretrain"] = cfg.lr_pretrain;
  j["lr_finetune"] = cfg.lr_finetune;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["early_stop_patience"] = cfg.early_stop_patience;
  j["finetune_steps"] = cfg.finetune_steps;
  return j;
}

ordered_json hint_config_json(const HintOpts& o) {
  ordered_json j;
  j["provider"] = o.provider;
  j["lambda"] = o.lambda;
  j["hint_layers"] = o.hint_layers;
  j["n_hints"] = o.n_hints;
  j["smooth_kernel"] = o.smooth_kernel;
  j["insight_k"] = o.insight_k;
  j["llm_cache"] = o.llm_cache;
  return j;
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& out_dir, std::uint64_t seed, const tshint::SynthConfig& cfg) {
  tshint::RunManifest manifest("synth", seed);
  ordered_json config;
  config["n_low"] = cfg.n_low;
  config["n_high"] = cfg.n_high;
  config["min_length"] = cfg.min_length;
  config["max_length"] = cfg.max_length;
  config["preston_k"] = cfg.preston_k;
  config["noise_std"] = cfg.noise_std;
  config["nonpreston_coeff"] = cfg.nonpreston_coeff;
  manifest.set_config(std::move(config));

  std::vector<tshint::WaferRun> runs = tshint::synthesize(cfg);
  fs::create_directories(out_dir);
  fs::path csv = fs::path(out_dir) / "data.csv";
  tshint::save_runs(runs, csv);
  manifest.add_output(csv);
  manifest.write(out_dir);
  std::printf("synth: wrote %zu runs to %s\n", runs.size(), csv.string().c_str());
  return 0;
}

int cmd_pretrain(const DataOpts& data_opts, const ModelOpts& model_opts,
                 const TrainOpts& train_opts, const std::string& out_dir, std::uint64_t seed) {
  tshint::RunManifest manifest("pretrain", seed);
  tshint::ModelConfig model_cfg = to_model_config(model_opts, seed);
  tshint::TrainConfig train_cfg = to_train_config(train_opts, seed);
  ordered_json config;
  config["data"] = data_config_json(data_opts);
  config["model"] = model_config_json(model_cfg);
  config["train"] = train_config_json(train_cfg);
  manifest.set_config(std::move(config));
  manifest.add_input(data_opts.data);
  if (!data_opts.targets.empty()) manifest.add_input(data_opts.targets);

  LoadedData d = load_and_split(data_opts, seed);
  std::vector<tshint::SampleTensor> pretrain_samples =
      tshint::make_samples(d.split.pretrain, model_cfg.t_len);

  tshint::Model model(model_cfg);
  tshint::PretrainResult result = tshint::pretrain(model, pretrain_samples, train_cfg);

  fs::create_directories(out_dir);
  fs::path ckpt = fs::path(out_dir) / "model.ckpt";
  model.save(ckpt);
  std::string history = "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
    history += std::to_string(e) + "," + tshint::format_double(result.train_loss[e]) + "," +
               tshint::format_double(result.val_loss[e]) + "\n";
  }
  fs::path history_path = fs::path(out_dir) / "loss_history.csv";
  tshint::write_file_atomic(history_path, history);

  std::vector<tshint::SampleTensor> test_samples =
      tshint::make_samples(d.split.test, model_cfg.t_len);
  tshint::EvalMetrics metrics = tshint::evaluate(model, test_samples);
  manifest.add_metric("test_rmse", metrics.rmse);
  manifest.add_metric("test_r2", metrics.r2);
  manifest.add_metric("best_epoch", static_cast<double>(result.best_epoch));
  manifest.add_note("checkpoint_hash", model.content_hash());
  manifest.add_output(ckpt);
  manifest.add_output(history_path);
  manifest.write(out_dir);
  std::printf("pretrain: %zu epochs, test rmse %.4f r2 %.4f, checkpoint %s\n",
              result.train_loss.size(), metrics.rmse, metrics.r2, ckpt.string().c_str());
  return 0;
}

int cmd_fewshot(const std::string& ckpt_path, const DataOpts& data_opts,
                const TrainOpts& train_opts, const HintOpts& hint_opts, std::size_t n_shots,
                const std::string& selection, const std::string& out_dir, std::uint64_t seed) {
  tshint::RunManifest manifest("fewshot", seed);
  tshint::Model model = tshint::Model::load(ckpt_path);
  apply_hint_layers(model, hint_opts.hint_layers);
  tshint::TrainConfig train_cfg = to_train_config(train_opts, seed);
  tshint::HintParams params = to_hint_params(hint_opts);

  ordered_json config;
  config["checkpoint"] = ckpt_path;
  config["data"] = data_config_json(data_opts);
  config["train"] = train_config_json(train_cfg);
  config["hint"] = hint_config_json(hint_opts);
  config["n_shots"] = n_shots;
  config["selection"] = selection;
  manifest.set_config(std::move(config));
  manifest.add_input(ckpt_path);
  manifest.add_input(data_opts.data);

  LoadedData d = load_and_split(data_opts, seed);
  std::size_t t_len = model.config().t_len;
  std::vector<tshint::SampleTensor> pretrain_samples =
      tshint::make_samples(d.split.pretrain, t_len);
  std::vector<tshint::SampleTensor> pool_samples =
      tshint::make_samples(d.split.shot_pool, t_len);
  std::vector<tshint::SampleTensor> test_samples = tshint::make_samples(d.split.test, t_len);

  tshint::InsightBundle bundle = tshint::insight(model, pretrain_samples, params.insight_k);
  std::unique_ptr<tshint::HintProvider> provider =
      tshint::make_provider(hint_opts.provider, model.config(), params, to_endpoint(hint_opts));

  tshint::FewShotConfig few_cfg;
  few_cfg.n_shots = n_shots;
  few_cfg.seed = seed;
  if (selection == "random") {
    few_cfg.selection = tshint::ShotSelection::SeededRandom;
  } else if (selection != "highest-error") {
    throw tshint::Error("unknown shot selection '" + selection + "'");
  }

  auto provider_fn = [&](const tshint::SampleTensor& sample, double pred) {
    tshint::SampleMeta meta{sample.run_id, sample.mode, pred, sample.target};
    return provider->make(bundle, meta);
  };
  std::vector<tshint::ShotRecord> records =
      tshint::run_few_shot(model, pool_samples, test_samples, provider_fn, train_cfg, few_cfg);

  fs::create_directories(out_dir);
  fs::path shots_path = fs::path(out_dir) / "shots.csv";
  tshint::write_file_atomic(shots_path, tshint::shots_to_csv(records));
  manifest.add_output(shots_path);
  manifest.add_metric("zero_shot_rmse", *records.front().test_rmse);
  manifest.add_metric("final_rmse", *records.back().test_rmse);
  manifest.add_note("pretrained_checkpoint_hash", tshint::file_fnv1a64_hex(ckpt_path));
  manifest.write(out_dir);
  std::printf("fewshot: %zu shot(s), rmse %.4f -> %.4f, wrote %s\n", n_shots,
              *records.front().test_rmse, *records.back().test_rmse,
              shots_path.string().c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const DataOpts& data_opts, const std::string& out_dir,
             std::uint64_t seed) {
  tshint::RunManifest manifest("eval", seed);
  tshint::Model model = tshint::Model::load(ckpt_path);
  ordered_json config;
  config["checkpoint"] = ckpt_path;
  config["data"] = data_config_json(data_opts);
  manifest.set_config(std::move(config));
  manifest.add_input(ckpt_path);
  manifest.add_input(data_opts.data);

  LoadedData d = load_and_split(data_opts, seed);
  std::vector<tshint::SampleTensor> test_samples =
      tshint::make_samples(d.split.test, model.config().t_len);

  tshint::ModelPredictor predictor(model);
  tshint::EvalReport report =
      tshint::bench({&predictor}, d.split.test, test_samples);
  report.config_hashes["checkpoint"] = model.content_hash();
  tshint::write_report(report, out_dir);
  manifest.add_output(fs::path(out_dir) / "report.csv");
  manifest.add_output(fs::path(out_dir) / "report.json");
  manifest.write(out_dir);
  std::printf("eval: wrote %s\n", (fs::path(out_dir) / "report.json").string().c_str());
  return 0;
}

int cmd_explain(const std::string& ckpt_path, const DataOpts& data_opts,
                const TrainOpts& train_opts, const HintOpts& hint_opts,
                const std::string& out_dir, std::uint64_t seed) {
  tshint::RunManifest manifest("explain", seed);
  tshint::Model model = tshint::Model::load(ckpt_path);
  apply_hint_layers(model, hint_opts.hint_layers);
  tshint::HintParams params = to_hint_params(hint_opts);
  tshint::TrainConfig train_cfg = to_train_config(train_opts, seed);

  ordered_json config;
  config["checkpoint"] = ckpt_path;
  config["data"] = data_config_json(data_opts);
  config["hint"] = hint_config_json(hint_opts);
  manifest.set_config(std::move(config));
  manifest.add_input(ckpt_path);
  manifest.add_input(data_opts.data);

  LoadedData d = load_and_split(data_opts, seed);
  std::size_t t_len = model.config().t_len;
  std::vector<tshint::SampleTensor> pretrain_samples =
      tshint::make_samples(d.split.pretrain, t_len);
  std::vector<tshint::SampleTensor> pool_samples =
      tshint::make_samples(d.split.shot_pool, t_len);

  tshint::InsightBundle bundle = tshint::insight(model, pretrain_samples, params.insight_k);
  std::string ckpt_hash = model.content_hash();

  fs::create_directories(out_dir);
  auto emit = [&](const tshint::Tensor& m, const std::string& stem) {
    fs::path csv = fs::path(out_dir) / (stem + ".csv");
    fs::path ppm = fs::path(out_dir) / (stem + ".ppm");
    tshint::write_matrix_csv(m, csv);
    tshint::write_heatmap_ppm(m, ppm);
    manifest.add_output(csv);
    manifest.add_output(ppm);
  };
  emit(bundle.attention_insight, "attention_insight_" + ckpt_hash);
  emit(bundle.saliency_insight, "saliency_insight_" + ckpt_hash);

  // One hinted shot on the highest-error pool sample; maps before/after.
  std::vector<double> preds = model.predict_batch(pool_samples);
  std::size_t worst = 0;
  double worst_err = -1.0;
  for (std::size_t i = 0; i < pool_samples.size(); ++i) {
    double err = std::abs(preds[i] - pool_samples[i].target);
    if (err > worst_err) {
      worst_err = err;
      worst = i;
    }
  }
  const tshint::SampleTensor& sample = pool_samples[worst];
  std::string tag = ckpt_hash + "_" + sample.run_id;

  tshint::Tensor attn_before = tshint::last_layer_attention(model, sample);
  tshint::Tensor sal_before = tshint::saliency(model, sample).values;

  std::unique_ptr<tshint::HintProvider> provider =
      tshint::make_provider(hint_opts.provider, model.config(), params, to_endpoint(hint_opts));
  tshint::SampleMeta meta{sample.run_id, sample.mode, preds[worst], sample.target};
  tshint::HintOutcome outcome = provider->make(bundle, meta);
  const tshint::AttentionHint* hint = outcome.hint ? &*outcome.hint : nullptr;
  tshint::finetune_step(model, sample, hint, train_cfg);

  tshint::Tensor attn_after = tshint::last_layer_attention(model, sample);
  tshint::Tensor sal_after = tshint::saliency(model, sample).values;

  emit(attn_before, "attention_before_" + tag);
  emit(attn_after, "attention_after_" + tag);
  emit(tshint::diff_maps(attn_before, attn_after), "attention_diff_" + tag);
  emit(sal_before, "saliency_before_" + tag);
  emit(sal_after, "saliency_after_" + tag);
  emit(tshint::diff_maps(sal_before, sal_after), "saliency_diff_" + tag);
  if (outcome.hint) emit(outcome.hint->h, "hint_" + tag);

  manifest.add_note("checkpoint_hash", ckpt_hash);
  manifest.add_note("shot_sample", sample.run_id);
  manifest.add_note("hint_provenance", outcome.provenance);
  manifest.add_note("attention_layer", "last");
  manifest.write(out_dir);
  std::printf("explain: wrote insight and before/after maps for %s to %s\n",
              sample.run_id.c_str(), out_dir.c_str());
  return 0;
}

int cmd_bench(const std::string& ckpt_path, const DataOpts& data_opts,
              const std::string& out_dir, std::uint64_t seed) {
  tshint::RunManifest manifest("bench", seed);
  tshint::Model model = tshint::Model::load(ckpt_path);
  ordered_json config;
  config["checkpoint"] = ckpt_path;
  config["data"] = data_config_json(data_opts);
  manifest.set_config(std::move(config));
  manifest.add_input(ckpt_path);
  manifest.add_input(data_opts.data);

  LoadedData d = load_and_split(data_opts, seed);
  std::vector<tshint::SampleTensor> test_samples =
      tshint::make_samples(d.split.test, model.config().t_len);

  // Preston gets the full labeled train partition; the mean predictor is
  // the in-set R^2 = 0 reference.
  std::vector<tshint::WaferRun> train_runs = d.split.pretrain;
  train_runs.insert(train_runs.end(), d.split.shot_pool.begin(), d.split.shot_pool.end());
  tshint::PrestonPredictor preston(tshint::preston_fit(train_runs));
  tshint::MeanPredictor mean_model(d.split.test);
  tshint::ModelPredictor transformer(model);

  tshint::EvalReport report = tshint::bench({&transformer, &preston, &mean_model},
                                            d.split.test, test_samples);
  report.config_hashes["checkpoint"] = model.content_hash();
  tshint::write_report(report, out_dir);
  manifest.add_output(fs::path(out_dir) / "report.csv");
  manifest.add_output(fs::path(out_dir) / "report.json");
  manifest.write(out_dir);
  std::printf("bench: wrote %s\n", (fs::path(out_dir) / "report.json").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patch-transformer MRR regression with attention hints"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out_dir = "out";

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  tshint::SynthConfig synth_cfg;
  synth_cfg.n_low = 200;
  synth_cfg.n_high = 50;
  synth_cfg.noise_std = 2.0;
  synth->set_config("--config");
  synth->add_option("--seed", seed, "RNG seed");
  synth->add_option("--out", out_dir, "output directory");
  synth->add_option("--n-low", synth_cfg.n_low, "low-speed run count");
  synth->add_option("--n-high", synth_cfg.n_high, "high-speed run count");
  synth->add_option("--min-len", synth_cfg.min_length, "min raw length");
  synth->add_option("--max-len", synth_cfg.max_length, "max raw length");
  synth->add_option("--preston-k", synth_cfg.preston_k, "generator Preston constant");
  synth->add_option("--noise-std", synth_cfg.noise_std, "target noise, nm/min");
  synth->add_option("--nonpreston-coeff", synth_cfg.nonpreston_coeff,
                    "slurry-duty target effect, nm/min");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "pretrain a model on the pretrain split");
  DataOpts pre_data;
  ModelOpts pre_model;
  TrainOpts pre_train;
  pre->set_config("--config");
  pre->add_option("--seed", seed, "RNG seed");
  pre->add_option("--out", out_dir, "output directory");
  add_data_opts(pre, pre_data);
  add_model_opts(pre, pre_model);
  add_train_opts(pre, pre_train);

  // fewshot
  auto* few = app.add_subcommand("fewshot", "N-shot fine-tuning protocol");
  DataOpts few_data;
  TrainOpts few_train;
  HintOpts few_hint;
  std::string few_ckpt;
  std::size_t n_shots = 5;
  std::string selection = "highest-error";
  few->set_config("--config");
  few->add_option("--seed", seed, "RNG seed");
  few->add_option("--out", out_dir, "output directory");
  few->add_option("--ckpt", few_ckpt, "pretrained checkpoint")->required();
  few->add_option("--shots", n_shots, "number of shots");
  few->add_option("--selection", selection, "highest-error|random");
  add_data_opts(few, few_data);
  add_train_opts(few, few_train);
  add_hint_opts(few, few_hint);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  DataOpts eval_data;
  std::string eval_ckpt;
  ev->set_config("--config");
  ev->add_option("--seed", seed, "RNG seed");
  ev->add_option("--out", out_dir, "output directory");
  ev->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
  add_data_opts(ev, eval_data);

  // explain
  auto* ex = app.add_subcommand("explain", "emit insight, saliency, and before/after maps");
  DataOpts explain_data;
  TrainOpts explain_train;
  HintOpts explain_hint;
  std::string explain_ckpt;
  ex->set_config("--config");
  ex->add_option("--seed", seed, "RNG seed");
  ex->add_option("--out", out_dir, "output directory");
  ex->add_option("--ckpt", explain_ckpt, "checkpoint")->required();
  ex->add_option("--k", explain_hint.insight_k, "top-k best samples");
  add_data_opts(ex, explain_data);
  add_train_opts(ex, explain_train);
  add_hint_opts(ex, explain_hint);

  // bench
  auto* be = app.add_subcommand("bench", "benchmark model vs Preston and mean baselines");
  DataOpts bench_data;
  std::string bench_ckpt;
  be->set_config("--config");
  be->add_option("--seed", seed, "RNG seed");
  be->add_option("--out", out_dir, "output directory");
  be->add_option("--ckpt", bench_ckpt, "checkpoint")->required();
  add_data_opts(be, bench_data);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      synth_cfg.seed = seed;
      return cmd_synth(out_dir, seed, synth_cfg);
    }
    if (pre->parsed()) return cmd_pretrain(pre_data, pre_model, pre_train, out_dir, seed);
    if (few->parsed()) {
      return cmd_fewshot(few_ckpt, few_data, few_train, few_hint, n_shots, selection, out_dir,
                         seed);
    }
    if (ev->parsed()) return cmd_eval(eval_ckpt, eval_data, out_dir, seed);
    if (ex->parsed()) {
      return cmd_explain(explain_ckpt, explain_data, explain_train, explain_hint, out_dir, seed);
    }
    if (be->parsed()) return cmd_bench(bench_ckpt, bench_data, out_dir, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
