#include "tshint/hinting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tshint/util.hpp"

namespace tshint {

void HintParams::validate() const {
  if (lambda < 0) throw Error("hint params: lambda must be >= 0");
  if (smooth_kernel == 0 || smooth_kernel % 2 == 0) {
    throw Error("hint params: smooth_kernel must be odd and >= 1");
  }
  if (n_hints == 0) throw Error("hint params: n_hints must be positive");
  if (insight_k == 0) throw Error("hint params: insight_k must be positive");
}

LLMEndpointConfig LLMEndpointConfig::with_env_overrides(LLMEndpointConfig cfg) {
  if (const char* url = std::getenv("TSHINT_LLM_BASE_URL")) cfg.base_url = url;
  if (const char* model = std::getenv("TSHINT_LLM_MODEL")) cfg.model_name = model;
  return cfg;
}

namespace {

// Box smoothing along the key (column) axis with index clamping at edges.
void box_smooth_keys(Tensor& h, std::size_t kernel) {
  if (kernel <= 1) return;
  std::size_t radius = kernel / 2;
  std::size_t rows = h.rows(), cols = h.cols();
  std::vector<double> row(cols);
  for (std::size_t p = 0; p < rows; ++p) {
    double* src = h.data() + p * cols;
    for (std::size_t q = 0; q < cols; ++q) {
      double acc = 0.0;
      for (std::size_t o = 0; o < kernel; ++o) {
        auto idx = static_cast<long>(q) + static_cast<long>(o) - static_cast<long>(radius);
        idx = std::clamp<long>(idx, 0, static_cast<long>(cols) - 1);
        acc += src[idx];
      }
      row[q] = acc / static_cast<double>(kernel);
    }
    std::copy(row.begin(), row.end(), src);
  }
}

void max_normalize(Tensor& h) {
  double mx = 0.0;
  for (double v : h.vec()) mx = std::max(mx, v);
  if (mx > 0.0) {
    for (double& v : h.vec()) v /= mx;
  }
}

std::vector<std::string> channel_names_for(std::size_t n_channels) {
  if (n_channels == default_channel_names().size()) return default_channel_names();
  std::vector<std::string> names;
  names.reserve(n_channels);
  for (std::size_t c = 0; c < n_channels; ++c) names.push_back("ch" + std::to_string(c));
  return names;
}

std::string escape_name(const std::string& name) {
  std::string out;
  out.reserve(name.size());
  for (char c : name) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-' || c == '.' || c == ' ';
    out.push_back(ok ? c : '_');
  }
  return out;
}

}  // namespace

AttentionHint heuristic_hint(const InsightBundle& insight, const HintParams& params) {
  params.validate();
  AttentionHint hint;
  hint.lambda = params.lambda;
  hint.h = insight.attention_insight;
  for (double& v : hint.h.vec()) v = std::max(v, 0.0);
  max_normalize(hint.h);
  box_smooth_keys(hint.h, params.smooth_kernel);
  max_normalize(hint.h);
  return hint;
}

std::string build_prompt(const InsightBundle& insight, const SampleMeta& meta,
                         const HintParams& params, const ModelConfig& cfg,
                         const std::vector<std::string>& channel_names) {
  params.validate();
  std::size_t n_p = cfg.n_patches();
  std::ostringstream out;
  out << "You are advising a patch-based transformer that regresses the material removal "
         "rate (MRR, nm/min) of a wafer polishing run from " << cfg.n_channels
      << " sensor channels, each resampled to " << cfg.t_len << " timesteps. The series is "
         "split into " << n_p << " patches of length " << cfg.patch_len << " with stride "
      << cfg.stride << "; patch j covers timesteps [j*" << cfg.stride << ", j*" << cfg.stride
      << "+" << cfg.patch_len << ").\n\n";

  out << "Aggregate attention from the best-performing samples (key patches ranked by "
         "attention column mass):\n";
  if (insight.top_patches.empty()) {
    out << "  (no insight)\n";
  } else {
    std::size_t n = std::min(params.n_hints, insight.top_patches.size());
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t q = insight.top_patches[i];
      double mass = 0.0;
      for (std::size_t p = 0; p < n_p; ++p) mass += insight.attention_insight.at(p, q);
      out << "  patch " << q << " (timesteps [" << q * cfg.stride << ", "
          << q * cfg.stride + cfg.patch_len << ")): mass " << format_double(mass) << "\n";
    }
  }

  out << "Aggregate saliency (channels ranked by mean |gradient|):\n";
  if (insight.top_features.empty()) {
    out << "  (no insight)\n";
  } else {
    std::size_t n = std::min(params.n_hints, insight.top_features.size());
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t c = insight.top_features[i];
      double mass = 0.0;
      for (std::size_t t = 0; t < cfg.t_len; ++t) mass += insight.saliency_insight.at(c, t);
      out << "  channel " << c << " (" << escape_name(channel_names[c]) << "): mass "
          << format_double(mass) << "\n";
    }
  }
  out << "Most salient timesteps:";
  if (insight.top_timesteps.empty()) {
    out << " (no insight)";
  } else {
    std::size_t n = std::min(params.n_hints, insight.top_timesteps.size());
    for (std::size_t i = 0; i < n; ++i) out << " " << insight.top_timesteps[i];
  }
  out << "\n\n";

  out << "Sample under fine-tuning: id " << escape_name(meta.run_id) << ", mode "
      << mode_name(meta.mode) << ", current prediction " << format_double(meta.prediction)
      << " nm/min, target " << format_double(meta.target) << " nm/min (error "
      << format_double(meta.prediction - meta.target) << ").\n\n";

  out << "Think step by step about which timestep ranges and channels the model should "
         "attend to for this sample. Then answer with a single JSON object as the last "
         "thing in your reply, shaped exactly like:\n"
         "{\"important_features\": [{\"channel\": 0, \"weight\": 1.0}], "
         "\"important_timestep_ranges\": [{\"start\": 0, \"end\": 16, \"weight\": 1.0}], "
         "\"rationale\": \"...\"}\n"
         "Channels are 0-based indices below " << cfg.n_channels
      << ", ranges are half-open [start, end) with 0 <= start < end <= " << cfg.t_len
      << ", weights lie in (0, 1]. Text before the JSON is ignored.\n";
  return out.str();
}

namespace {

double clamp_weight(const nlohmann::json& j) {
  if (!j.is_number()) throw Error("parse error: weight must be a number");
  double w = j.get<double>();
  if (!(w > 0.0)) throw Error("parse error: weight must be positive");
  return std::min(w, 1.0);
}

std::size_t require_index(const nlohmann::json& j, const char* what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw Error(std::string("parse error: ") + what + " must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

HintSuggestion suggestion_from_json(const nlohmann::json& j, std::size_t n_channels,
                                    std::size_t t_len) {
  HintSuggestion s;
  if (j.contains("important_features")) {
    const auto& feats = j.at("important_features");
    if (!feats.is_array()) throw Error("parse error: important_features must be an array");
    for (const auto& item : feats) {
      HintSuggestion::FeatureWeight fw;
      if (item.is_number_integer()) {
        fw.channel = require_index(item, "feature index");
      } else if (item.is_object()) {
        fw.channel = require_index(item.at("channel"), "feature index");
        if (item.contains("weight")) fw.weight = clamp_weight(item.at("weight"));
      } else {
        throw Error("parse error: feature entries must be indices or objects");
      }
      if (fw.channel >= n_channels) {
        throw Error("parse error: feature index " + std::to_string(fw.channel) +
                    " out of range for " + std::to_string(n_channels) + " channels");
      }
      s.important_features.push_back(fw);
    }
  }
  if (j.contains("important_timestep_ranges")) {
    const auto& ranges = j.at("important_timestep_ranges");
    if (!ranges.is_array()) throw Error("parse error: important_timestep_ranges must be an array");
    for (const auto& item : ranges) {
      HintSuggestion::RangeWeight rw;
      if (item.is_array() && (item.size() == 2 || item.size() == 3)) {
        rw.start = require_index(item[0], "range start");
        rw.end = require_index(item[1], "range end");
        if (item.size() == 3) rw.weight = clamp_weight(item[2]);
      } else if (item.is_object()) {
        rw.start = require_index(item.at("start"), "range start");
        rw.end = require_index(item.at("end"), "range end");
        if (item.contains("weight")) rw.weight = clamp_weight(item.at("weight"));
      } else {
        throw Error("parse error: range entries must be [start,end] or objects");
      }
      if (rw.start >= rw.end || rw.end > t_len) {
        throw Error("parse error: range [" + std::to_string(rw.start) + "," +
                    std::to_string(rw.end) + ") invalid for T=" + std::to_string(t_len));
      }
      s.important_timestep_ranges.push_back(rw);
    }
  }
  if (j.contains("rationale") && j.at("rationale").is_string()) {
    s.rationale = j.at("rationale").get<std::string>();
  }
  return s;
}

}  // namespace

HintSuggestion parse_response(const std::string& text, std::size_t n_channels,
                              std::size_t t_len) {
  // Collect top-level {...} spans, honoring JSON string syntax.
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  int depth = 0;
  bool in_str = false, escaped = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_str) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"' && depth > 0) {
      in_str = true;
    } else if (c == '{') {
      if (depth == 0) start = i;
      ++depth;
    } else if (c == '}') {
      if (depth > 0 && --depth == 0) spans.emplace_back(start, i + 1);
    }
  }
  // Last well-formed object wins.
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    nlohmann::json j =
        nlohmann::json::parse(text.substr(it->first, it->second - it->first), nullptr,
                              /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) continue;
    return suggestion_from_json(j, n_channels, t_len);
  }
  throw Error("parse error: no JSON object found in response");
}

AttentionHint suggestion_to_hint(const HintSuggestion& s, const ModelConfig& cfg,
                                 const HintParams& params) {
  params.validate();
  std::size_t n_p = cfg.n_patches();
  AttentionHint hint;
  hint.lambda = params.lambda;
  hint.h = Tensor::zeros({n_p, n_p});

  // top-n ranges by weight
  std::vector<HintSuggestion::RangeWeight> ranges = s.important_timestep_ranges;
  std::stable_sort(ranges.begin(), ranges.end(),
                   [](const auto& a, const auto& b) { return a.weight > b.weight; });
  if (ranges.size() > params.n_hints) ranges.resize(params.n_hints);

  std::vector<double> col(n_p, 0.0);
  for (const auto& r : ranges) {
    for (std::size_t q = 0; q < n_p; ++q) {
      std::size_t patch_start = q * cfg.stride;
      std::size_t patch_end = patch_start + cfg.patch_len;
      if (patch_start < r.end && patch_end > r.start) col[q] = std::max(col[q], r.weight);
    }
  }
  for (std::size_t p = 0; p < n_p; ++p) {
    for (std::size_t q = 0; q < n_p; ++q) hint.h.at(p, q) = col[q];
  }
  box_smooth_keys(hint.h, params.smooth_kernel);
  max_normalize(hint.h);
  return hint;
}

// ---------------------------------------------------------------------------
// Transcript cache

std::string transcript_key(const LLMEndpointConfig& endpoint, const std::string& prompt) {
  std::string material = endpoint.model_name;
  material.push_back('\x1f');
  material += format_double(endpoint.temperature);
  material.push_back('\x1f');
  material += prompt;
  return fnv1a64_hex(material);
}

void store_transcript(const std::filesystem::path& cache_dir, const Transcript& t) {
  if (cache_dir.empty()) return;
  std::filesystem::create_directories(cache_dir);
  nlohmann::ordered_json j;
  j["key"] = t.key;
  j["prompt"] = t.prompt;
  j["raw_response"] = t.raw_response;
  j["outcome"] = t.outcome;
  write_file_atomic(cache_dir / (t.key + ".json"), j.dump(2) + "\n");
}

std::optional<Transcript> load_transcript(const std::filesystem::path& cache_dir,
                                          const std::string& key) {
  std::filesystem::path path = cache_dir / (key + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  Transcript t;
  t.key = j.at("key").get<std::string>();
  t.prompt = j.at("prompt").get<std::string>();
  t.raw_response = j.at("raw_response").get<std::string>();
  t.outcome = j.at("outcome").get<std::string>();
  return t;
}

// ---------------------------------------------------------------------------
// HTTP client

std::string chat_completion(const LLMEndpointConfig& endpoint, const std::string& prompt) {
  httplib::Client client(endpoint.base_url);
  auto sec = static_cast<time_t>(endpoint.timeout_seconds);
  auto usec = static_cast<time_t>((endpoint.timeout_seconds - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);

  nlohmann::ordered_json req;
  req["model"] = endpoint.model_name;
  req["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "user"}, {"content", prompt}}});
  req["temperature"] = endpoint.temperature;
  req["stream"] = false;
  std::string body = req.dump();

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    auto res = client.Post("/api/chat", body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.contains("message") || !j["message"].contains("content") ||
        !j["message"]["content"].is_string()) {
      last_error = "malformed completion payload";
      continue;
    }
    return j["message"]["content"].get<std::string>();
  }
  throw Error("llm request failed after " + std::to_string(endpoint.max_retries + 1) +
              " attempt(s): " + last_error);
}

// ---------------------------------------------------------------------------
// Providers

namespace {

class NoneProvider final : public HintProvider {
 public:
  std::string name() const override { return "none"; }
  HintOutcome make(const InsightBundle&, const SampleMeta&) override {
    return {std::nullopt, "none"};
  }
};

class HeuristicProvider final : public HintProvider {
 public:
  explicit HeuristicProvider(HintParams params) : params_(params) {}
  std::string name() const override { return "heuristic"; }
  HintOutcome make(const InsightBundle& insight, const SampleMeta&) override {
    return {heuristic_hint(insight, params_), "heuristic"};
  }

 private:
  HintParams params_;
};

class LlmProvider final : public HintProvider {
 public:
  LlmProvider(LLMEndpointConfig endpoint, ModelConfig model_cfg, HintParams params)
      : endpoint_(std::move(endpoint)), model_cfg_(std::move(model_cfg)), params_(params) {}

  std::string name() const override { return "llm"; }

  HintOutcome make(const InsightBundle& insight, const SampleMeta& meta) override {
    std::string prompt = build_prompt(insight, meta, params_, model_cfg_,
                                      channel_names_for(model_cfg_.n_channels));
    Transcript t;
    t.key = transcript_key(endpoint_, prompt);
    t.prompt = prompt;
    try {
      t.raw_response = chat_completion(endpoint_, prompt);
    } catch (const Error&) {
      t.outcome = "http_error";
      store_transcript(endpoint_.cache_dir, t);
      return {heuristic_hint(insight, params_), "heuristic-fallback"};
    }
    try {
      HintSuggestion s = parse_response(t.raw_response, model_cfg_.n_channels, model_cfg_.t_len);
      s.source = "llm";
      t.outcome = "ok";
      store_transcript(endpoint_.cache_dir, t);
      return {suggestion_to_hint(s, model_cfg_, params_), "llm"};
    } catch (const Error&) {
      t.outcome = "parse_error";
      store_transcript(endpoint_.cache_dir, t);
      return {heuristic_hint(insight, params_), "heuristic-fallback"};
    }
  }

 private:
  LLMEndpointConfig endpoint_;
  ModelConfig model_cfg_;
  HintParams params_;
};

class ReplayProvider final : public HintProvider {
 public:
  ReplayProvider(std::filesystem::path dir, LLMEndpointConfig endpoint, ModelConfig model_cfg,
                 HintParams params)
      : dir_(std::move(dir)),
        endpoint_(std::move(endpoint)),
        model_cfg_(std::move(model_cfg)),
        params_(params) {}

  std::string name() const override { return "replay"; }

  HintOutcome make(const InsightBundle& insight, const SampleMeta& meta) override {
    std::string prompt = build_prompt(insight, meta, params_, model_cfg_,
                                      channel_names_for(model_cfg_.n_channels));
    std::string key = transcript_key(endpoint_, prompt);
    std::optional<Transcript> t = load_transcript(dir_, key);
    if (t && t->outcome == "ok") {
      try {
        HintSuggestion s = parse_response(t->raw_response, model_cfg_.n_channels,
                                          model_cfg_.t_len);
        s.source = "replay";
        return {suggestion_to_hint(s, model_cfg_, params_), "replay"};
      } catch (const Error&) {
        // fall through to heuristic
      }
    }
    return {heuristic_hint(insight, params_), "heuristic-fallback"};
  }

 private:
  std::filesystem::path dir_;
  LLMEndpointConfig endpoint_;
  ModelConfig model_cfg_;
  HintParams params_;
};

}  // namespace

std::unique_ptr<HintProvider> make_provider(const std::string& spec, const ModelConfig& model_cfg,
                                            const HintParams& params,
                                            const LLMEndpointConfig& endpoint) {
  if (spec == "none") return std::make_unique<NoneProvider>();
  if (spec == "heuristic") return std::make_unique<HeuristicProvider>(params);
  if (spec == "llm") {
    return std::make_unique<LlmProvider>(LLMEndpointConfig::with_env_overrides(endpoint),
                                         model_cfg, params);
  }
  if (spec.rfind("replay:", 0) == 0) {
    return std::make_unique<ReplayProvider>(spec.substr(7),
                                            LLMEndpointConfig::with_env_overrides(endpoint),
                                            model_cfg, params);
  }
  throw Error("unknown hint provider '" + spec + "' (expected none|heuristic|llm|replay:<dir>)");
}

}  // namespace tshint
