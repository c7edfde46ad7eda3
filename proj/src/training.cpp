#include "tshint/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tshint/evaluation.hpp"
#include "tshint/rng.hpp"
#include "tshint/util.hpp"

namespace tshint {

void TrainConfig::validate() const {
  if (lr_pretrain <= 0 || lr_finetune < 0) {
    throw Error("train config: learning rates must be positive");
  }
  if (lr_finetune >= lr_pretrain) throw Error("train config: lr_finetune must be below lr_pretrain");
  if (batch_size == 0) throw Error("train config: batch_size must be positive");
  if (max_epochs == 0) throw Error("train config: max_epochs must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw Error("train config: val_fraction must be in (0,1)");
  }
  if (finetune_steps == 0) throw Error("train config: finetune_steps must be positive");
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<Update>& updates) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const Update& u : updates) {
    Tensor& w = *u.weight;
    const Tensor& g = *u.grad;
    auto it = state_.find(u.name);
    if (it == state_.end()) {
      it = state_
               .emplace(u.name,
                        std::make_pair(Tensor::zeros(w.shape()), Tensor::zeros(w.shape())))
               .first;
    }
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      double gi = g[i];
      if (!std::isfinite(gi)) {
        throw Error("training diverged: non-finite gradient for '" + u.name + "'");
      }
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      if (!std::isfinite(w[i])) {
        throw Error("training diverged: non-finite weight in '" + u.name + "'");
      }
    }
  }
}

void Adam::step(Model& model, const Model::LossGraph& lg, const GradientMap& grads) {
  std::vector<Update> updates;
  updates.reserve(lg.params.size());
  for (const auto& [name, node] : lg.params) {
    updates.push_back({name, &model.param(name), &grads.at(node)});
  }
  step(updates);
}

namespace {

double batch_loss_step(Model& model, Adam& opt, const std::vector<const SampleTensor*>& batch,
                       const std::vector<double>& z_targets, const AttentionHint* hint) {
  Model::LossGraph lg = model.build_loss(batch, z_targets, hint);
  double loss = lg.graph.value(lg.loss).scalar_value();
  if (!std::isfinite(loss)) throw Error("training diverged: loss is not finite");
  GradientMap grads = lg.graph.backward(lg.loss);
  opt.step(model, lg, grads);
  return loss;
}

double mean_squared_z_error(const Model& model, const std::vector<SampleTensor>& samples) {
  std::vector<double> preds = model.predict_batch(samples);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double d = model.to_z(preds[i]) - model.to_z(samples[i].target);
    acc += d * d;
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace

PretrainResult pretrain(Model& model, const std::vector<SampleTensor>& pretrain_set,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (pretrain_set.empty()) throw Error("pretrain: empty pretrain set");

  // z-score targets on the data the model actually sees
  double mean = 0.0;
  for (const auto& s : pretrain_set) mean += s.target;
  mean /= static_cast<double>(pretrain_set.size());
  double var = 0.0;
  for (const auto& s : pretrain_set) {
    double d = s.target - mean;
    var += d * d;
  }
  var /= static_cast<double>(pretrain_set.size());
  double std = std::sqrt(var);
  model.set_target_stats(mean, std > 0 ? std : 1.0);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(pretrain_set.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  auto n_val = static_cast<std::size_t>(static_cast<double>(order.size()) * cfg.val_fraction);
  n_val = std::min(n_val, order.size() - 1);
  std::vector<SampleTensor> val_set;
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_val) {
      val_set.push_back(pretrain_set[order[i]]);
    } else {
      train_idx.push_back(order[i]);
    }
  }
  bool use_val = !val_set.empty();

  Adam opt(cfg.lr_pretrain, cfg.beta1, cfg.beta2, cfg.adam_eps);
  PretrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::map<std::string, Tensor> best_params;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(train_idx);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      std::size_t end = std::min(train_idx.size(), start + cfg.batch_size);
      std::vector<const SampleTensor*> batch;
      std::vector<double> z_targets;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&pretrain_set[train_idx[i]]);
        z_targets.push_back(model.to_z(pretrain_set[train_idx[i]].target));
      }
      epoch_loss += batch_loss_step(model, opt, batch, z_targets, nullptr);
      ++n_batches;
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(n_batches));

    double val = use_val ? mean_squared_z_error(model, val_set) : result.train_loss.back();
    result.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      result.best_epoch = epoch;
      since_best = 0;
      best_params.clear();
      for (const auto& name : model.parameter_names()) best_params[name] = model.param(name);
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  for (auto& [name, value] : best_params) model.param(name) = value;
  return result;
}

ShotRecord finetune_step(Model& model, const SampleTensor& sample, const AttentionHint* hint,
                         const TrainConfig& cfg) {
  cfg.validate();
  ShotRecord rec;
  rec.sample_id = sample.run_id;
  if (hint != nullptr) rec.hint_used = *hint;

  rec.loss_before = model.sample_loss(sample, hint);
  Adam opt(cfg.lr_finetune, cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::vector<const SampleTensor*> batch{&sample};
  std::vector<double> z_targets{model.to_z(sample.target)};
  for (std::size_t step = 0; step < cfg.finetune_steps; ++step) {
    batch_loss_step(model, opt, batch, z_targets, hint);
  }
  rec.loss_after = model.sample_loss(sample, hint);
  return rec;
}

EvalMetrics evaluate(const Model& model, const std::vector<SampleTensor>& samples) {
  std::vector<double> y_true, y_pred;
  y_true.reserve(samples.size());
  for (const auto& s : samples) y_true.push_back(s.target);
  y_pred = model.predict_batch(samples);
  return {rmse(y_true, y_pred), r2(y_true, y_pred)};
}

std::vector<ShotRecord> run_few_shot(Model& model, const std::vector<SampleTensor>& shot_pool,
                                     const std::vector<SampleTensor>& test_set,
                                     const HintProviderFn& provider, const TrainConfig& train_cfg,
                                     const FewShotConfig& few_cfg) {
  if (shot_pool.empty()) throw Error("run_few_shot: empty shot pool");
  if (few_cfg.n_shots > shot_pool.size()) {
    throw Error("run_few_shot: n_shots exceeds shot pool size");
  }

  std::vector<ShotRecord> records;
  {
    ShotRecord zero;
    zero.shot_index = 0;
    EvalMetrics m = evaluate(model, test_set);
    zero.test_rmse = m.rmse;
    zero.test_r2 = m.r2;
    records.push_back(std::move(zero));
  }

  // Rank the pool once against the pretrained model.
  std::vector<double> preds = model.predict_batch(shot_pool);
  std::vector<std::size_t> order(shot_pool.size());
  std::iota(order.begin(), order.end(), 0);
  if (few_cfg.selection == ShotSelection::HighestError) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      double ea = std::abs(preds[a] - shot_pool[a].target);
      double eb = std::abs(preds[b] - shot_pool[b].target);
      if (ea != eb) return ea > eb;
      return shot_pool[a].run_id < shot_pool[b].run_id;
    });
  } else {
    Rng rng(few_cfg.seed);
    rng.shuffle(order);
  }

  for (std::size_t shot = 0; shot < few_cfg.n_shots; ++shot) {
    const SampleTensor& sample = shot_pool[order[shot]];
    HintOutcome outcome = provider ? provider(sample, preds[order[shot]])
                                   : HintOutcome{std::nullopt, "none"};
    const AttentionHint* hint = outcome.hint ? &*outcome.hint : nullptr;
    ShotRecord rec = finetune_step(model, sample, hint, train_cfg);
    rec.shot_index = shot + 1;
    rec.hint_provenance = outcome.provenance;
    EvalMetrics m = evaluate(model, test_set);
    rec.test_rmse = m.rmse;
    rec.test_r2 = m.r2;
    records.push_back(std::move(rec));
  }
  return records;
}

std::string shots_to_csv(const std::vector<ShotRecord>& records) {
  std::ostringstream out;
  out << "shot_index,sample_id,loss_before,loss_after,test_rmse,test_r2,hint_provenance,"
         "hint_lambda\n";
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const ShotRecord& r : records) {
    out << r.shot_index << "," << r.sample_id << "," << cell(r.loss_before) << ","
        << cell(r.loss_after) << "," << cell(r.test_rmse) << "," << cell(r.test_r2) << ","
        << r.hint_provenance << ","
        << (r.hint_used ? format_double(r.hint_used->lambda) : std::string()) << "\n";
  }
  return out.str();
}

}  // namespace tshint
