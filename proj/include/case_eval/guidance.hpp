#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "case_eval/answer.hpp"
#include "case_eval/judge.hpp"

namespace case_eval {

enum class GuidanceMode { kBaseline, kMultiAspect, kCorrectnessOnly };

std::string_view to_string(GuidanceMode m) noexcept;
std::optional<GuidanceMode> parse_guidance_mode(std::string_view name);

// The text appended for `mode`; empty for the baseline.
std::string guidance_text(GuidanceMode mode);

// base + guidance block. The base is always an exact prefix, and applying the
// same mode to an already guided prompt returns it unchanged.
std::string build_guided_prompt(std::string_view base_system_prompt, GuidanceMode mode);

struct Problem {
  std::string id;
  std::string question;
  std::string answer;  // gold
};

// JSONL {"id", "question", "answer"}.
std::vector<Problem> load_problems(const std::filesystem::path& path);

// Decoding settings shared by every mode of a comparison.
struct GenerationConfig {
  std::string model = "scripted";
  double temperature = 0.6;
  int max_tokens = 4096;
  std::chrono::milliseconds timeout{600'000};
  std::size_t max_in_flight = 8;
  AnswerStyle style = AnswerStyle::kCompetitionLatex;

  void validate() const;
};

struct AnswerRecord {
  std::string problem_id;
  std::string generated;  // normalized answer, empty when extraction failed
  std::string gold;
  bool equivalent = false;
  bool extraction_failed = false;
  std::string error;  // generation failure, if any

  friend bool operator==(const AnswerRecord&, const AnswerRecord&) = default;
};

struct SeededRunResult {
  std::uint64_t seed = 0;
  std::vector<AnswerRecord> records;

  // Mean of the equivalent flags; 0 for an empty run.
  double accuracy() const;
};

struct RunSummary {
  double mean = 0.0;
  double max = 0.0;
  std::vector<std::pair<std::uint64_t, double>> per_seed;  // sorted by seed
};

// Throws InvalidInput on an empty input.
RunSummary score_runs(std::span<const SeededRunResult> results);
// The response must mark its answer with \boxed{}, \fbox{} or "####".
// The response must mark its answer with \\boxed{}, \\fbox{} or "####".
AnswerRecord score_response(const Problem& problem, std::string_view response, AnswerStyle style);

// One generation per problem under `seed`; output order follows `problems`.
// Generation failures are recorded as incorrect answers with an error.
SeededRunResult run_seed(std::span<const Problem> problems, const std::string& system_prompt,
                         GuidanceMode mode, ChatBackend& backend, const GenerationConfig& config,
                         std::uint64_t seed);

// Offline generator. JSONL lines:
//   {"problem_id": "p1", "response": "... \\boxed{7}", "seed": 1, "mode": "multi-aspect"}
// "seed" and "mode" are optional; the most specific match wins.
class ScriptedGenerator final : public ChatBackend {
 public:
  static ScriptedGenerator load(const std::filesystem::path& path);
  void add(std::string problem_id, std::optional<std::uint64_t> seed,
           std::optional<GuidanceMode> mode, std::string response);

  std::string complete(const ChatRequest& request) override;
  bool remote() const override { return false; }

 private:
  struct Row {
    std::optional<std::uint64_t> seed;
    std::optional<GuidanceMode> mode;
    std::string response;
  };
  std::map<std::string, std::vector<Row>> rows_;
};

struct SummaryRow {
  std::string method;
  std::string dataset;
  std::string seed;  // a seed, or "mean" / "max"
  double accuracy = 0.0;
};

std::vector<SummaryRow> summary_rows(std::string_view method, std::string_view dataset,
                                     const RunSummary& summary);
std::string render_summary_csv(std::span<const SummaryRow> rows);

// JSONL, one line per (seed, problem).
std::string serialize_run_records(std::string_view method, std::string_view dataset,
                                  std::span<const SeededRunResult> results);

}  // namespace case_eval
