#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "case_eval/dataset.hpp"
#include "case_eval/judge.hpp"
#include "case_eval/trace.hpp"

namespace case_eval {

enum class Method { kCase, kBon };

std::string_view to_string(Method m) noexcept;
std::string_view display_name(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name);

// Strict majority of 1s; exact ties resolve to 0. Throws on empty input.
Label strict_majority(std::span<const Label> votes);

struct StepError {
  std::size_t step = 0;  // 0 when the failure concerns the whole trace
  std::string message;

  friend bool operator==(const StepError&, const StepError&) = default;
};

struct AspectJudgment {
  Aspect aspect = Aspect::kRelevance;
  // nullopt marks a step whose judgment failed.
  std::vector<std::optional<Label>> predictions;
  std::optional<Label> solution_level;
  std::optional<double> mean;
  std::vector<StepError> errors;
  bool failed = false;  // every step failed

  bool complete() const;
  // Fills solution_level/mean from predictions (undefined when any slot is empty).
  void derive_scores();

  friend bool operator==(const AspectJudgment&, const AspectJudgment&) = default;
};

struct TraceJudgment {
  std::string sample_id;
  Method method = Method::kCase;
  std::size_t step_count = 0;
  std::vector<AspectJudgment> aspects;

  const AspectJudgment* find(Aspect a) const;
  bool has_failures() const;

  friend bool operator==(const TraceJudgment&, const TraceJudgment&) = default;
};

struct RunMetadata {
  std::string timestamp;
  std::string config_digest;
  std::string template_version;
  std::vector<Aspect> aspects;
  std::size_t samples = 0;
  std::size_t failed_samples = 0;
};

struct JudgmentSet {
  std::string benchmark;
  std::string judge_model;
  Method method = Method::kCase;
  std::vector<TraceJudgment> traces;
  RunMetadata meta;

  const TraceJudgment* find(std::string_view sample_id) const;
};

struct EngineOptions {
  // One prompt per step covering every requested aspect, instead of one
  // prompt per (step, aspect).
  bool combined_aspects = false;
};

// Judges every step k with a causal prompt over steps 1..k-1. With votes > 1
// each step takes the strict majority over that many samples.
TraceJudgment evaluate_case(const BenchmarkSample& sample, std::span<const Aspect> aspects,
                            const JudgeClient& judge, const EngineOptions& options = {});

// N = judge.config().votes whole-trace judgments, majority per step (ties -> 0).
// An aspect fails when more than half of the N calls fail.
TraceJudgment evaluate_bon(const BenchmarkSample& sample, std::span<const Aspect> aspects,
                           const JudgeClient& judge);

// Runs up to `concurrency_limit` samples at once. Output order follows input
// order; per-sample failures are recorded, never thrown.
JudgmentSet evaluate_corpus(const BenchmarkSet& set, Method method,
                            std::span<const Aspect> aspects, const JudgeClient& judge,
                            std::size_t concurrency_limit, const EngineOptions& options = {});
JudgmentSet evaluate_samples(std::string benchmark, std::span<const BenchmarkSample> samples,
                             Method method, std::span<const Aspect> aspects,
                             const JudgeClient& judge, std::size_t concurrency_limit,
                             const EngineOptions& options = {});

// Line-delimited: one run header, then one record per (sample, aspect):
//   {"sample_id", "method", "aspect", "step_labels": [1, 0, null],
//    "solution_level": 0|1|null, "mean": x|null, "errors": [{"step", "message"}], "failed"}
std::string serialize_judgments(const JudgmentSet& set);
JudgmentSet parse_judgments(std::istream& in);
void write_judgments(const JudgmentSet& set, const std::filesystem::path& path);
JudgmentSet load_judgments(const std::filesystem::path& path);

// ISO-8601 UTC; SOURCE_DATE_EPOCH, when set, replaces the clock.
std::string utc_timestamp();

}  // namespace case_eval
