#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "case_eval/answer.hpp"
#include "case_eval/errors.hpp"
#include "case_eval/trace.hpp"
#include "json.hpp"

namespace case_eval {

struct BenchmarkSet {
  std::string name;
  std::vector<BenchmarkSample> samples;
  AnswerStyle style = AnswerStyle::kGradeSchoolNumeric;
  // Non-fatal loader diagnostics (e.g. empty file).
  std::vector<std::string> warnings;

  const BenchmarkSample* find(std::string_view id) const;
};

// One benchmark record per line:
//   {"id", "question", "steps": [..], "final_answer", "gold_answer",
//    "solution_correct": 0|1,
//    "annotations": {"relevance": [[..], ..], "coherence": [..], "correctness": [..]}}
// An optional leading header line {"benchmark": name, "style": tag} sets the
// set name and answer style. Without it the style falls back to
// `default_style`, then to a guess from the gold answers.
BenchmarkSet load_benchmark(const std::filesystem::path& path,
                            std::optional<AnswerStyle> default_style = std::nullopt);
BenchmarkSet parse_benchmark(std::istream& in, std::string name,
                             std::optional<AnswerStyle> default_style = std::nullopt);

nlohmann::json benchmark_record(const BenchmarkSample& sample);
BenchmarkSample parse_benchmark_record(const nlohmann::json& record);

// Writes the header line plus one record per sample.
void save_benchmark(const BenchmarkSet& set, const std::filesystem::path& path);

struct SftSample {
  std::string question;
  std::vector<std::string> steps;
  std::string answer;
  nlohmann::json meta = nlohmann::json::object();

  // meta["source_id"] when present, empty otherwise.
  std::string source_id() const;

  friend bool operator==(const SftSample&, const SftSample&) = default;
};

// Throws InvalidInput when a sample has an empty answer, or no steps unless
// meta.answer_only is true.
void validate_sft_sample(const SftSample& sample);

nlohmann::json sft_record(const SftSample& sample);
SftSample parse_sft_record(const nlohmann::json& record);

// One {"question", "steps", "answer", "meta"} record per line. Returns the
// number of records written; throws IoError when the file cannot be written.
std::size_t write_sft_corpus(const std::vector<SftSample>& samples,
                             const std::filesystem::path& path);
std::vector<SftSample> load_sft_corpus(const std::filesystem::path& path);

// Wraps an SFT sample as an unannotated benchmark sample so it can be judged.
BenchmarkSample as_benchmark_sample(const SftSample& sample, std::string fallback_id);

// Writes `text` to `path` via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_file(const std::filesystem::path& path);

// Splits a JSONL stream, skipping blank lines. The callback receives the
// 1-based line number and the parsed value; JSON errors become ParseError.
template <typename Fn>
void for_each_jsonl(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    fn(line_no, value);
  }
}

}  // namespace case_eval
