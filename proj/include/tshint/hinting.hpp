#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tshint/attribution.hpp"
#include "tshint/model.hpp"
#include "tshint/training.hpp"

namespace tshint {

// Structured suggestion from a provider: which channels and timestep
// intervals deserve attention, with weights in (0,1].
struct HintSuggestion {
  struct FeatureWeight {
    std::size_t channel = 0;
    double weight = 1.0;
  };
  struct RangeWeight {
    std::size_t start = 0;  // [start, end)
    std::size_t end = 0;
    double weight = 1.0;
  };
  std::vector<FeatureWeight> important_features;
  std::vector<RangeWeight> important_timestep_ranges;
  std::string rationale;
  std::string source;  // heuristic | llm | replay
};

struct HintParams {
  double lambda = 0.1;
  std::size_t n_hints = 3;        // top features and top ranges kept
  std::size_t smooth_kernel = 3;  // odd 1-D box kernel along the key axis
  std::size_t insight_k = 5;      // top-k best samples feeding the insight

  void validate() const;
};

struct LLMEndpointConfig {
  std::string base_url = "http://127.0.0.1:11434";
  std::string model_name = "deepseek-r1:14b";
  double temperature = 0.0;
  double timeout_seconds = 30.0;
  std::size_t max_retries = 1;
  std::filesystem::path cache_dir;  // transcript cache; empty disables caching

  // TSHINT_LLM_BASE_URL / TSHINT_LLM_MODEL override base_url / model_name.
  static LLMEndpointConfig with_env_overrides(LLMEndpointConfig cfg);
};

struct SampleMeta {
  std::string run_id;
  Mode mode = Mode::LowSpeed;
  double prediction = 0.0;  // nm/min, from the pretrained model
  double target = 0.0;
};

// Insight matrix rescaled to max 1 and box-smoothed along the key axis.
AttentionHint heuristic_hint(const InsightBundle& insight, const HintParams& params);

std::string build_prompt(const InsightBundle& insight, const SampleMeta& meta,
                         const HintParams& params, const ModelConfig& cfg,
                         const std::vector<std::string>& channel_names);

// Extracts the last well-formed JSON object in the text (chain-of-thought
// prefix tolerated) and validates it against the model dimensions.
HintSuggestion parse_response(const std::string& text, std::size_t n_channels,
                              std::size_t t_len);

// Timestep ranges map to the key patches overlapping them; H is uniform
// along the query axis, smoothed, then max-normalized. Feature weights are
// reported but do not enter H (one hint is broadcast over channels).
AttentionHint suggestion_to_hint(const HintSuggestion& s, const ModelConfig& cfg,
                                 const HintParams& params);

struct Transcript {
  std::string key;  // content hash of (model, temperature, prompt)
  std::string prompt;
  std::string raw_response;
  std::string outcome;  // ok | http_error | timeout | parse_error
};

std::string transcript_key(const LLMEndpointConfig& endpoint, const std::string& prompt);
void store_transcript(const std::filesystem::path& cache_dir, const Transcript& t);
std::optional<Transcript> load_transcript(const std::filesystem::path& cache_dir,
                                          const std::string& key);

// POST {model, messages, temperature, stream:false} to base_url/api/chat
// and return the assistant message content. Throws Error on any failure.
std::string chat_completion(const LLMEndpointConfig& endpoint, const std::string& prompt);

class HintProvider {
 public:
  virtual ~HintProvider() = default;
  virtual std::string name() const = 0;
  virtual HintOutcome make(const InsightBundle& insight, const SampleMeta& meta) = 0;
};

// none | heuristic | llm | replay:<dir>
std::unique_ptr<HintProvider> make_provider(const std::string& spec, const ModelConfig& model_cfg,
                                            const HintParams& params,
                                            const LLMEndpointConfig& endpoint);

}  // namespace tshint
