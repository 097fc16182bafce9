#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "case_eval/dataset.hpp"
#include "case_eval/engine.hpp"
#include "case_eval/trace.hpp"

namespace case_eval {

// Gold label fusion across annotators: strict majority, ties -> 0.
Label majority_label(std::span<const Label> annotator_labels);

// Class 1 is the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  double accuracy() const;
  // Unweighted mean of per-class F1 over {0, 1}. A class absent from both
  // prediction and gold is left out of the mean; absent from one side only
  // it contributes F1 = 0.
  double macro_f1() const;

  Confusion& operator+=(const Confusion& other) noexcept;
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(std::span<const Label> pred, std::span<const Label> gold);
double accuracy(std::span<const Label> pred, std::span<const Label> gold);
double macro_f1(std::span<const Label> pred, std::span<const Label> gold);

enum class Pooling {
  kMicro,      // pool all (sample, step) pairs
  kPerSample,  // compute per sample, then average over samples
};

std::string_view to_string(Pooling p) noexcept;
std::optional<Pooling> parse_pooling(std::string_view name);

struct AspectMetrics {
  Aspect aspect = Aspect::kRelevance;
  bool present = false;  // false when no (sample, step) pair could be scored
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  Confusion confusion;
  std::size_t judged = 0;    // scored pairs
  std::size_t excluded = 0;  // pairs left out (failed judgments, missing gold)
};

struct AspectReport {
  std::string benchmark;
  std::string method;
  std::string judge_model;
  Pooling pooling = Pooling::kMicro;
  std::array<AspectMetrics, kAspectCount> aspects;
  // Means over present aspects; nullopt when none is present.
  std::optional<double> average_accuracy;
  std::optional<double> average_macro_f1;

  const AspectMetrics& at(Aspect a) const { return aspects[index_of(a)]; }
};

// Gold step labels come from majority_label over each sample's annotators.
// Throws InvalidInput listing orphaned ids when the two sets do not align.
AspectReport aspect_report(const JudgmentSet& judgments, const BenchmarkSet& gold,
                           Pooling pooling = Pooling::kMicro);

struct Proportion {
  std::size_t hits = 0;
  std::size_t total = 0;

  std::optional<double> value() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(total);
  }
};

// counts[aspect_label][solution_correct]
struct CrossTab {
  std::string label;
  std::array<std::array<std::size_t, 2>, 2> counts{};
};

struct ScoreDistribution {
  Aspect aspect = Aspect::kRelevance;
  bool answer_correct = false;
  std::vector<double> values;  // one mean step score per sample, input order
  std::optional<double> mean;
  std::optional<double> stddev;  // population standard deviation
};

struct AnalysisReport {
  std::string benchmark;
  std::size_t samples = 0;
  // relevance, coherence, relevance-and-coherence vs. solution-level validity.
  std::vector<CrossTab> cross_tabs;
  // Among solution-level incorrect samples: P(answer correct | every step
  // relevant and coherent) and the same for the complement.
  Proportion rc_satisfied;
  Proportion rc_violated;
  // Samples whose answers could not be normalized; excluded above and below.
  std::size_t unscorable_answers = 0;
  // Per aspect, grouped by answer correctness (incorrect first).
  std::vector<ScoreDistribution> distributions;
};

// Throws InvalidInput when a sample lacks relevance or coherence annotations.
AnalysisReport annotation_analysis(const BenchmarkSet& set);

}  // namespace case_eval
