#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace case_eval {

enum class Aspect : std::uint8_t { kRelevance = 0, kCoherence = 1, kCorrectness = 2 };

inline constexpr std::array<Aspect, 3> kAllAspects = {Aspect::kRelevance, Aspect::kCoherence,
                                                      Aspect::kCorrectness};
inline constexpr std::size_t kAspectCount = kAllAspects.size();

constexpr std::size_t index_of(Aspect a) noexcept { return static_cast<std::size_t>(a); }

// Lowercase wire name ("relevance", ...).
std::string_view to_string(Aspect a) noexcept;
// Capitalized display name ("Relevance", ...).
std::string_view display_name(Aspect a) noexcept;
// Accepts wire names case-insensitively plus the short forms rel/coh/corr.
std::optional<Aspect> parse_aspect(std::string_view name);
// Comma-separated list; throws InvalidInput on unknown or duplicate names.
std::vector<Aspect> parse_aspect_list(std::string_view csv);

using Label = std::uint8_t;

struct Question {
  std::string id;
  std::string text;
  std::string source;
};

struct Step {
  std::size_t index = 0;  // 1-based
  std::string text;
};

struct StepLabelVector {
  Aspect aspect = Aspect::kRelevance;
  std::vector<Label> labels;
};

// annotations[aspect] holds one label vector per annotator.
using AnnotatorLabels = std::vector<std::vector<Label>>;
using AspectAnnotations = std::array<AnnotatorLabels, kAspectCount>;

struct BenchmarkSample {
  Question question;
  std::vector<Step> steps;
  std::string final_answer;
  std::string gold_answer;
  AspectAnnotations annotations;
  Label solution_correct = 0;

  const std::string& id() const noexcept { return question.id; }
  const AnnotatorLabels& annotators(Aspect a) const { return annotations[index_of(a)]; }
};

// Throws InvalidInput describing the first violated invariant. Annotation
// requirements are only checked when `require_annotations` is set, so
// unannotated traces (e.g. SFT data awaiting judgment) can share the type.
void validate_sample(const BenchmarkSample& sample, bool require_annotations);

std::vector<Step> make_steps(const std::vector<std::string>& texts);
std::vector<std::string> step_texts(std::span<const Step> steps);

enum class SegmentationRule { kNumberedMarker, kBlankLine, kSentence, kPreSegmentedList };

std::optional<SegmentationRule> parse_segmentation_rule(std::string_view name);
std::string_view to_string(SegmentationRule rule) noexcept;

// Steps plus the verbatim text around them: raw == separators[0] + steps[0]
// + separators[1] + ... + steps[n-1] + tail.
struct Segmentation {
  std::vector<Step> steps;
  std::vector<std::string> separators;
  std::string tail;

  std::string rejoin() const;
};

Segmentation segment(std::string_view raw, SegmentationRule rule);
std::vector<Step> segment_trace(std::string_view raw,
                                SegmentationRule rule = SegmentationRule::kNumberedMarker);

// 1 iff every label is 1. Throws InvalidInput on empty input.
Label solution_score(std::span<const Label> labels);
double mean_step_score(std::span<const Label> labels);

inline Label solution_score(const StepLabelVector& v) { return solution_score(v.labels); }
inline double mean_step_score(const StepLabelVector& v) { return mean_step_score(v.labels); }

std::string_view trim(std::string_view s) noexcept;

}  // namespace case_eval
