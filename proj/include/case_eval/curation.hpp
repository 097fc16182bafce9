#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "case_eval/dataset.hpp"
#include "case_eval/engine.hpp"

namespace case_eval {

enum class CurationMode { kStepLevel, kSampleLevel };
enum class SelectionStrategy {
  kUniform,       // seeded uniform draw among eligible samples
  kLongestFirst,  // most solution text first; ties by corpus order
};

std::string_view to_string(CurationMode m) noexcept;
std::optional<CurationMode> parse_curation_mode(std::string_view name);
std::string_view to_string(SelectionStrategy s) noexcept;
std::optional<SelectionStrategy> parse_selection_strategy(std::string_view name);

struct CurationPolicy {
  CurationMode mode = CurationMode::kSampleLevel;
  std::vector<Aspect> required = {Aspect::kRelevance, Aspect::kCoherence};
  std::size_t budget = 1000;
  std::uint64_t seed = 0;
  bool drop_empty = true;
  SelectionStrategy selection = SelectionStrategy::kUniform;

  void validate() const;
  std::string digest() const;
};

struct AuditEntry {
  std::string sample_id;
  std::string action;  // kept | pruned | dropped | selected | rejudged
  std::string reason;
  std::vector<std::size_t> step_indices;  // 1-based, original numbering

  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

struct CuratedCorpus {
  std::vector<SftSample> kept;
  std::vector<AuditEntry> audit;
  std::string policy_digest;
  std::vector<std::string> warnings;
};

// Identifier used to match an SFT sample with its judgments: meta.source_id,
// or "sft-<n>" (1-based position) when the sample has none.
std::string sft_sample_id(const SftSample& sample, std::size_t position);

// True when the step at 0-based `step` passes every required aspect. Failed
// judgments count as not passing.
bool step_passes(const TraceJudgment& judgment, std::size_t step,
                 const std::vector<Aspect>& required);

struct StepFilterResult {
  std::optional<SftSample> kept;
  AuditEntry audit;
};

// Keeps exactly the passing steps in order; the final answer always stays.
// When nothing survives the sample is dropped (drop_empty) or kept as an
// answer-only record marked meta.answer_only = true.
StepFilterResult filter_steps(const SftSample& sample, const std::string& sample_id,
                              const TraceJudgment& judgment, const CurationPolicy& policy);

// Eligible = every step passes. Selects min(budget, |eligible|) samples
// deterministically from the seed; kept samples stay in corpus order.
CuratedCorpus filter_samples(const std::vector<SftSample>& corpus, const JudgmentSet& judgments,
                             const CurationPolicy& policy);

// Applies filter_steps to every sample.
CuratedCorpus filter_corpus_steps(const std::vector<SftSample>& corpus,
                                  const JudgmentSet& judgments, const CurationPolicy& policy);

// Dispatches on policy.mode.
CuratedCorpus curate(const std::vector<SftSample>& corpus, const JudgmentSet& judgments,
                     const CurationPolicy& policy);

// Re-evaluates pruned samples with CaSE and appends a "rejudged" audit entry
// per sample listing the surviving-trace steps that now fail.
void rejudge_pruned(CuratedCorpus& corpus, const JudgeClient& judge,
                    const std::vector<Aspect>& aspects);

// Line-delimited {"sample_id", "action", "reason", "step_indices"}.
void write_audit(const std::vector<AuditEntry>& audit, const std::filesystem::path& path);
std::vector<AuditEntry> load_audit(const std::filesystem::path& path);

}  // namespace case_eval
