#include "case_eval/dataset.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace case_eval {

namespace {

using nlohmann::json;

// Field accessors that turn schema problems into ParseError with context.
class RecordReader {
 public:
  RecordReader(const json& record, std::size_t line) : record_(record), line_(line) {}

  const json& require(const char* key) const {
    if (!record_.is_object()) fail("record is not an object");
    const auto it = record_.find(key);
    if (it == record_.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  std::string string(const char* key) const {
    const auto& v = require(key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }

  std::string string_or(const char* key, std::string fallback) const {
    const auto it = record_.find(key);
    if (it == record_.end() || it->is_null()) return fallback;
    if (!it->is_string()) fail(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  }

  std::vector<std::string> strings(const char* key) const {
    const auto& v = require(key);
    if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail(std::string("field '") + key + "' must hold strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Label binary(const json& v, const std::string& what) const {
    if (!v.is_number_integer()) fail(what + " must be 0 or 1");
    const auto x = v.get<long long>();
    if (x != 0 && x != 1) fail(what + " must be 0 or 1");
    return static_cast<Label>(x);
  }

  [[noreturn]] void fail(const std::string& reason) const { throw ParseError(line_, reason); }

 private:
  const json& record_;
  std::size_t line_;
};

AnswerStyle guess_style(const std::vector<BenchmarkSample>& samples) {
  for (const auto& s : samples) {
    if (s.gold_answer.find("\\boxed") != std::string::npos ||
        s.gold_answer.find("\\frac") != std::string::npos) {
      return AnswerStyle::kCompetitionLatex;
    }
  }
  return AnswerStyle::kGradeSchoolNumeric;
}

BenchmarkSample parse_record_at(const json& record, std::size_t line) {
  const RecordReader r(record, line);
  BenchmarkSample s;
  s.question.id = r.string("id");
  s.question.text = r.string("question");
  s.question.source = r.string_or("source", "");
  s.steps = make_steps(r.strings("steps"));
  s.final_answer = r.string("final_answer");
  s.gold_answer = r.string("gold_answer");
  s.solution_correct = r.binary(r.require("solution_correct"), "solution_correct");

  const auto& ann = r.require("annotations");
  if (!ann.is_object()) r.fail("'annotations' must be an object");
  for (const auto& [key, value] : ann.items()) {
    const auto aspect = parse_aspect(key);
    if (!aspect) r.fail("unknown annotation aspect '" + key + "'");
    if (!value.is_array()) r.fail("annotations." + key + " must be a list of label vectors");
    auto& slot = s.annotations[index_of(*aspect)];
    for (const auto& vec : value) {
      if (!vec.is_array()) r.fail("annotations." + key + " must be a list of label vectors");
      std::vector<Label> labels;
      for (const auto& l : vec) labels.push_back(r.binary(l, "annotation label"));
      if (labels.size() != s.steps.size()) {
        throw SchemaError("sample '" + s.id() + "' (line " + std::to_string(line) + "): " + key +
                          " vector has " + std::to_string(labels.size()) + " entries over " +
                          std::to_string(s.steps.size()) + " steps");
      }
      slot.push_back(std::move(labels));
    }
  }
  try {
    validate_sample(s, /*require_annotations=*/true);
  } catch (const InvalidInput& e) {
    throw SchemaError(std::string(e.what()) + " (line " + std::to_string(line) + ")");
  }
  return s;
}

bool is_header(const json& record) {
  return record.is_object() && !record.contains("id") && record.contains("style");
}

}  // namespace

const BenchmarkSample* BenchmarkSet::find(std::string_view id) const {
  for (const auto& s : samples) {
    if (s.id() == id) return &s;
  }
  return nullptr;
}

BenchmarkSet parse_benchmark(std::istream& in, std::string name,
                             std::optional<AnswerStyle> default_style) {
  BenchmarkSet set;
  set.name = std::move(name);
  std::optional<AnswerStyle> header_style;
  std::unordered_set<std::string> ids;
  bool first = true;
  for_each_jsonl(in, [&](std::size_t line, const json& record) {
    if (first && is_header(record)) {
      first = false;
      const RecordReader r(record, line);
      const auto tag = r.string("style");
      header_style = parse_answer_style(tag);
      if (!header_style) r.fail("unknown answer style '" + tag + "'");
      set.name = r.string_or("benchmark", set.name);
      return;
    }
    first = false;
    auto sample = parse_record_at(record, line);
    if (!ids.insert(sample.id()).second) {
      throw SchemaError("duplicate sample id '" + sample.id() + "' (line " +
                        std::to_string(line) + ")");
    }
    set.samples.push_back(std::move(sample));
  });
  if (set.samples.empty()) set.warnings.push_back("benchmark '" + set.name + "' has no samples");
  if (header_style) {
    set.style = *header_style;
  } else if (default_style) {
    set.style = *default_style;
  } else {
    set.style = guess_style(set.samples);
  }
  return set;
}

BenchmarkSet load_benchmark(const std::filesystem::path& path,
                            std::optional<AnswerStyle> default_style) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open benchmark file " + path.string());
  return parse_benchmark(in, path.stem().string(), default_style);
}

json benchmark_record(const BenchmarkSample& sample) {
  json ann = json::object();
  for (const auto aspect : kAllAspects) {
    const auto& vecs = sample.annotators(aspect);
    if (vecs.empty()) continue;
    json lists = json::array();
    for (const auto& v : vecs) {
      json row = json::array();
      for (const auto l : v) row.push_back(static_cast<int>(l));
      lists.push_back(std::move(row));
    }
    ann[std::string(to_string(aspect))] = std::move(lists);
  }
  json record;
  record["id"] = sample.id();
  record["question"] = sample.question.text;
  if (!sample.question.source.empty()) record["source"] = sample.question.source;
  record["steps"] = step_texts(sample.steps);
  record["final_answer"] = sample.final_answer;
  record["gold_answer"] = sample.gold_answer;
  record["solution_correct"] = static_cast<int>(sample.solution_correct);
  record["annotations"] = std::move(ann);
  return record;
}

BenchmarkSample parse_benchmark_record(const json& record) { return parse_record_at(record, 1); }

void save_benchmark(const BenchmarkSet& set, const std::filesystem::path& path) {
  std::ostringstream out;
  out << json{{"benchmark", set.name}, {"style", to_string(set.style)}}.dump() << '\n';
  for (const auto& s : set.samples) out << benchmark_record(s).dump() << '\n';
  write_file_atomic(path, out.str());
}

std::string SftSample::source_id() const {
  const auto it = meta.find("source_id");
  if (it == meta.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

void validate_sft_sample(const SftSample& sample) {
  if (!sample.meta.is_object()) throw InvalidInput("SFT sample meta must be an object");
  const bool answer_only = sample.meta.value("answer_only", false);
  if (sample.steps.empty() && !answer_only) throw InvalidInput("SFT sample has no steps");
  if (trim(sample.answer).empty()) throw InvalidInput("SFT sample has an empty answer");
}

json sft_record(const SftSample& sample) {
  return json{{"question", sample.question},
              {"steps", sample.steps},
              {"answer", sample.answer},
              {"meta", sample.meta}};
}

namespace {

SftSample parse_sft_at(const json& record, std::size_t line) {
  const RecordReader r(record, line);
  SftSample s;
  s.question = r.string("question");
  s.steps = r.strings("steps");
  s.answer = r.string("answer");
  if (const auto it = record.find("meta"); it != record.end() && !it->is_null()) {
    if (!it->is_object()) r.fail("'meta' must be an object");
    s.meta = *it;
  }
  return s;
}

}  // namespace

SftSample parse_sft_record(const json& record) { return parse_sft_at(record, 1); }

std::size_t write_sft_corpus(const std::vector<SftSample>& samples,
                             const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& s : samples) {
    validate_sft_sample(s);
    out << sft_record(s).dump() << '\n';
  }
  write_file_atomic(path, out.str());
  return samples.size();
}

std::vector<SftSample> load_sft_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open SFT corpus " + path.string());
  std::vector<SftSample> out;
  for_each_jsonl(in, [&](std::size_t line, const json& record) {
    auto s = parse_sft_at(record, line);
    try {
      validate_sft_sample(s);
    } catch (const InvalidInput& e) {
      throw SchemaError(std::string(e.what()) + " (line " + std::to_string(line) + ")");
    }
    out.push_back(std::move(s));
  });
  return out;
}

BenchmarkSample as_benchmark_sample(const SftSample& sample, std::string fallback_id) {
  BenchmarkSample b;
  b.question.id = sample.source_id().empty() ? std::move(fallback_id) : sample.source_id();
  b.question.text = sample.question;
  b.steps = make_steps(sample.steps);
  b.final_answer = sample.answer;
  return b;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  static std::atomic<unsigned long> counter{0};
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." +
                   std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp + " into place at " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace case_eval
