#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "case_eval/trace.hpp"

namespace case_eval {

// Bumped whenever prompt wording changes so cached responses and judgment
// files stay attributable to the template that produced them.
inline constexpr std::string_view kCaseTemplateVersion = "case-judge-v1";
inline constexpr std::string_view kBonTemplateVersion = "bon-judge-v1";

// One-sentence definition of what it means for a step to satisfy `aspect`.
std::string_view aspect_definition(Aspect aspect) noexcept;

enum class VerdictFormat {
  kSingle,     // "JUDGMENT: YES"
  kNumbered,   // "Step 1: YES" per step
  kPerAspect,  // "RELEVANCE: YES" per aspect
};

struct JudgePrompt {
  std::string system;
  std::string user;
  // Aspects judged, in the order verdicts are returned for kPerAspect.
  std::vector<Aspect> aspects;
  // 1-based step under evaluation; nullopt for whole-trace prompts.
  std::optional<std::size_t> step_index;
  std::size_t context_step_count = 0;
  VerdictFormat format = VerdictFormat::kSingle;
  std::size_t expected_labels = 1;
  std::string sample_id;
  std::string template_version;

  Aspect aspect() const { return aspects.front(); }
};

// Causal prompt for step k (1-based): the question, steps 1..k-1 as context
// and step k under evaluation. Later steps and the final answer never enter.
JudgePrompt build_case_prompt(const Question& q, std::span<const Step> steps, std::size_t k,
                              Aspect aspect);
// Same masking, but asks for one verdict line per aspect.
JudgePrompt build_case_prompt_combined(const Question& q, std::span<const Step> steps,
                                       std::size_t k, std::span<const Aspect> aspects);
// Whole-trace prompt asking for a numbered verdict per step.
JudgePrompt build_bon_prompt(const Question& q, std::span<const Step> steps, Aspect aspect);

// YES -> 1, NO -> 0, case-insensitive. Missing or conflicting verdicts throw
// UnparseableResponse. `aspects` is only consulted for kPerAspect.
std::vector<Label> parse_judgment(std::string_view response, VerdictFormat format,
                                  std::size_t expected, std::span<const Aspect> aspects = {});
std::vector<Label> parse_judgment(std::string_view response, const JudgePrompt& prompt);

// The minimal response text the prompt grammar asks for.
std::string render_judgment(std::span<const Label> labels, VerdictFormat format,
                            std::span<const Aspect> aspects = {});

std::string sha256_hex(std::string_view data);
std::string prompt_digest(const JudgePrompt& prompt);

struct JudgeConfig {
  std::string endpoint;  // base address, e.g. http://localhost:8000/v1
  std::string model = "scripted";
  double temperature = 0.0;
  int max_tokens = 1024;
  int votes = 1;  // N: BoN samples, or CaSE self-consistency votes
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 4;
  std::chrono::milliseconds backoff_base{500};
  std::optional<std::filesystem::path> cache_dir;
  std::size_t max_in_flight = 8;
  // Forwarded to the backend as seed + ordinal when set.
  std::optional<std::uint64_t> seed;

  // Throws InvalidInput unless votes >= 1, timeout > 0, temperature >= 0.
  void validate() const;
  // Digest over the settings that influence judgments.
  std::string digest() const;

  static JudgeConfig case_defaults();
  static JudgeConfig bon_defaults();
};

struct Verdict {
  std::vector<Label> labels;
  std::string raw;
  std::string model;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
  bool reprompted = false;

  Label label() const { return labels.at(0); }
};

struct ChatRequest {
  std::string system;
  std::string user;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{60'000};
  std::optional<std::uint64_t> seed;
  std::size_t ordinal = 0;
  // Routing metadata for offline backends (sample_id, aspects, step, ...).
  std::map<std::string, std::string> tags;
};

// A chat-completions style model. Implementations must be safe to call from
// several threads. Rate limits and transient transport faults are reported
// as TransientError; anything else as TransportError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual bool remote() const { return true; }
};

// POSTs {base}/chat/completions with a bearer token from CASE_EVAL_API_KEY.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(std::string endpoint, std::optional<std::string> api_key = std::nullopt);
  std::string complete(const ChatRequest& request) override;

  static std::optional<std::string> api_key_from_env();

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::optional<std::string> api_key_;
};

// Deterministic verdict-table judge. Table lines (JSONL):
//   {"default": 1}
//   {"sample_id": "s01", "aspect": "relevance", "labels": [1, 0, 1],
//    "votes": [[1, 0, 1], ...], "unparseable_steps": [2]}
//   {"sample_id": "s07", "down": true}
// "votes" feeds whole-trace prompts by sample ordinal; "labels" is used
// otherwise. Unknown (sample, aspect) pairs fall back to "default".
class ScriptedJudge final : public ChatBackend {
 public:
  struct Entry {
    std::vector<Label> labels;
    std::vector<std::vector<Label>> votes;
    std::vector<std::size_t> unparseable_steps;
  };

  ScriptedJudge() = default;
  static ScriptedJudge load(const std::filesystem::path& path);

  void set(std::string sample_id, Aspect aspect, Entry entry);
  void set_default(std::optional<Label> label) { default_label_ = label; }
  void set_down(std::string sample_id) { down_.push_back(std::move(sample_id)); }

  std::string complete(const ChatRequest& request) override;
  bool remote() const override { return false; }

 private:
  std::optional<Label> lookup(const std::string& sample_id, Aspect aspect,
                              std::size_t step) const;
  std::vector<Label> lookup_trace(const std::string& sample_id, Aspect aspect,
                                  std::size_t ordinal, std::size_t steps) const;

  std::map<std::pair<std::string, Aspect>, Entry> table_;
  std::vector<std::string> down_;
  std::optional<Label> default_label_;
};

// Passes requests through and counts how many reached the wrapped backend.
class CountingBackend final : public ChatBackend {
 public:
  explicit CountingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
  std::string complete(const ChatRequest& request) override;
  bool remote() const override { return inner_->remote(); }
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::atomic<std::size_t> calls_{0};
};

// "scripted:<path>" or an http(s) endpoint address.
std::shared_ptr<ChatBackend> make_backend(const std::string& uri);

// One file per entry, named by the entry digest, holding the raw response.
// Writes go through a temporary file and rename, so concurrent readers never
// observe partial entries.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  static std::string entry_key(std::string_view model, double temperature,
                               std::string_view prompt_digest, std::size_t ordinal);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string_view raw) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

// judge_call: cache lookup, bounded in-flight requests, retries with
// exponential backoff on TransientError, one stricter reprompt when the
// first response cannot be parsed.
class JudgeClient {
 public:
  JudgeClient(std::shared_ptr<ChatBackend> backend, JudgeConfig config);

  Verdict call(const JudgePrompt& prompt, std::size_t ordinal = 0) const;

  const JudgeConfig& config() const noexcept { return config_; }
  ChatBackend& backend() const noexcept { return *backend_; }

 private:
  std::string fetch(const ChatRequest& request, const std::string& digest, bool& from_cache) const;

  std::shared_ptr<ChatBackend> backend_;
  JudgeConfig config_;
  std::optional<ResponseCache> cache_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

// Appended to the user message when the first response had no verdict.
std::string_view strict_format_reminder(VerdictFormat format);

}  // namespace case_eval
