#include "case_eval/trace.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <utility>

#include "case_eval/errors.hpp"

namespace case_eval {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct Span {
  std::size_t begin;
  std::size_t end;
};

// Content spans for the numbered-marker rule: each marker at the start of a
// line opens a new span. Text before the first marker forms its own span.
std::vector<Span> numbered_spans(std::string_view raw) {
  static const std::regex kMarker(R"([ \t]*(?:step[ \t]*\d+[ \t]*[:.)\-]?|\d+[.)](?=\s))[ \t]*)",
                                  std::regex::icase);
  std::vector<Span> spans;
  std::size_t content_begin = 0;
  std::size_t line_start = 0;
  while (line_start <= raw.size()) {
    std::cmatch m;
    const char* first = raw.data() + line_start;
    const char* last = raw.data() + raw.size();
    if (std::regex_search(first, last, m, kMarker, std::regex_constants::match_continuous)) {
      spans.push_back({content_begin, line_start});
      content_begin = line_start + static_cast<std::size_t>(m.length(0));
    }
    const auto nl = raw.find('\n', line_start);
    if (nl == std::string_view::npos) break;
    line_start = nl + 1;
  }
  spans.push_back({content_begin, raw.size()});
  return spans;
}

std::vector<Span> blank_line_spans(std::string_view raw) {
  static const std::regex kBlank(R"(\n[ \t\r]*\n)");
  std::vector<Span> spans;
  std::size_t begin = 0;
  auto it = std::cregex_iterator(raw.data(), raw.data() + raw.size(), kBlank);
  for (; it != std::cregex_iterator(); ++it) {
    const auto pos = static_cast<std::size_t>(it->position(0));
    spans.push_back({begin, pos});
    begin = pos + static_cast<std::size_t>(it->length(0));
  }
  spans.push_back({begin, raw.size()});
  return spans;
}

std::vector<Span> sentence_spans(std::string_view raw) {
  std::vector<Span> spans;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if ((c == '.' || c == '!' || c == '?') && i + 1 < raw.size() && is_space(raw[i + 1])) {
      spans.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  spans.push_back({begin, raw.size()});
  return spans;
}

std::vector<Span> line_spans(std::string_view raw) {
  std::vector<Span> spans;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\n') {
      spans.push_back({begin, i});
      begin = i + 1;
    }
  }
  spans.push_back({begin, raw.size()});
  return spans;
}

}  // namespace

std::string_view to_string(Aspect a) noexcept {
  switch (a) {
    case Aspect::kRelevance:
      return "relevance";
    case Aspect::kCoherence:
      return "coherence";
    case Aspect::kCorrectness:
      return "correctness";
  }
  return "unknown";
}

std::string_view display_name(Aspect a) noexcept {
  switch (a) {
    case Aspect::kRelevance:
      return "Relevance";
    case Aspect::kCoherence:
      return "Coherence";
    case Aspect::kCorrectness:
      return "Correctness";
  }
  return "Unknown";
}

std::optional<Aspect> parse_aspect(std::string_view name) {
  const auto n = lower(trim(name));
  if (n == "relevance" || n == "rel") return Aspect::kRelevance;
  if (n == "coherence" || n == "coh") return Aspect::kCoherence;
  if (n == "correctness" || n == "corr") return Aspect::kCorrectness;
  return std::nullopt;
}

std::vector<Aspect> parse_aspect_list(std::string_view csv) {
  std::vector<Aspect> out;
  std::size_t begin = 0;
  while (begin <= csv.size()) {
    auto end = csv.find(',', begin);
    if (end == std::string_view::npos) end = csv.size();
    const auto token = trim(csv.substr(begin, end - begin));
    const auto aspect = parse_aspect(token);
    if (!aspect) throw InvalidInput("unknown aspect '" + std::string(token) + "'");
    if (std::find(out.begin(), out.end(), *aspect) != out.end()) {
      throw InvalidInput("duplicate aspect '" + std::string(token) + "'");
    }
    out.push_back(*aspect);
    begin = end + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) noexcept {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

void validate_sample(const BenchmarkSample& sample, bool require_annotations) {
  const auto& id = sample.id();
  if (trim(sample.question.text).empty()) {
    throw InvalidInput("sample '" + id + "': question text is empty");
  }
  if (sample.steps.empty()) throw InvalidInput("sample '" + id + "': no steps");
  for (std::size_t i = 0; i < sample.steps.size(); ++i) {
    const auto& step = sample.steps[i];
    if (step.index != i + 1) {
      throw InvalidInput("sample '" + id + "': step " + std::to_string(i + 1) +
                         " carries index " + std::to_string(step.index));
    }
    if (trim(step.text).empty()) {
      throw InvalidInput("sample '" + id + "': step " + std::to_string(step.index) + " is empty");
    }
  }
  if (sample.solution_correct > 1) {
    throw InvalidInput("sample '" + id + "': solution_correct must be 0 or 1");
  }
  for (const auto aspect : kAllAspects) {
    for (const auto& vec : sample.annotators(aspect)) {
      if (vec.size() != sample.steps.size()) {
        throw InvalidInput("sample '" + id + "': " + std::string(to_string(aspect)) +
                           " annotator vector has " + std::to_string(vec.size()) +
                           " entries for " + std::to_string(sample.steps.size()) + " steps");
      }
      for (const auto l : vec) {
        if (l > 1) {
          throw InvalidInput("sample '" + id + "': non-binary " + std::string(to_string(aspect)) +
                             " label");
        }
      }
    }
  }
  if (require_annotations) {
    for (const auto aspect : {Aspect::kRelevance, Aspect::kCoherence}) {
      if (sample.annotators(aspect).empty()) {
        throw InvalidInput("sample '" + id + "': no " + std::string(to_string(aspect)) +
                           " annotations");
      }
    }
  }
}

std::vector<Step> make_steps(const std::vector<std::string>& texts) {
  std::vector<Step> steps;
  steps.reserve(texts.size());
  for (const auto& t : texts) steps.push_back({steps.size() + 1, t});
  return steps;
}

std::vector<std::string> step_texts(std::span<const Step> steps) {
  std::vector<std::string> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.text);
  return out;
}

std::optional<SegmentationRule> parse_segmentation_rule(std::string_view name) {
  const auto n = lower(trim(name));
  if (n == "numbered-marker" || n == "numbered") return SegmentationRule::kNumberedMarker;
  if (n == "blank-line") return SegmentationRule::kBlankLine;
  if (n == "sentence") return SegmentationRule::kSentence;
  if (n == "pre-segmented-list" || n == "list") return SegmentationRule::kPreSegmentedList;
  return std::nullopt;
}

std::string_view to_string(SegmentationRule rule) noexcept {
  switch (rule) {
    case SegmentationRule::kNumberedMarker:
      return "numbered-marker";
    case SegmentationRule::kBlankLine:
      return "blank-line";
    case SegmentationRule::kSentence:
      return "sentence";
    case SegmentationRule::kPreSegmentedList:
      return "pre-segmented-list";
  }
  return "unknown";
}

std::string Segmentation::rejoin() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out += separators[i];
    out += steps[i].text;
  }
  out += tail;
  return out;
}

Segmentation segment(std::string_view raw, SegmentationRule rule) {
  if (trim(raw).empty()) throw InvalidInput("cannot segment an empty solution");

  std::vector<Span> spans;
  switch (rule) {
    case SegmentationRule::kNumberedMarker:
      spans = numbered_spans(raw);
      break;
    case SegmentationRule::kBlankLine:
      spans = blank_line_spans(raw);
      break;
    case SegmentationRule::kSentence:
      spans = sentence_spans(raw);
      break;
    case SegmentationRule::kPreSegmentedList:
      spans = line_spans(raw);
      break;
  }

  Segmentation out;
  std::size_t cursor = 0;
  for (const auto& span : spans) {
    auto b = span.begin;
    auto e = span.end;
    while (b < e && is_space(raw[b])) ++b;
    while (e > b && is_space(raw[e - 1])) --e;
    if (b == e) continue;  // whitespace-only fragment
    out.separators.emplace_back(raw.substr(cursor, b - cursor));
    out.steps.push_back({out.steps.size() + 1, std::string(raw.substr(b, e - b))});
    cursor = e;
  }
  out.tail = std::string(raw.substr(cursor));
  return out;
}

std::vector<Step> segment_trace(std::string_view raw, SegmentationRule rule) {
  return segment(raw, rule).steps;
}

Label solution_score(std::span<const Label> labels) {
  if (labels.empty()) throw InvalidInput("solution_score: empty label vector");
  return *std::min_element(labels.begin(), labels.end());
}

double mean_step_score(std::span<const Label> labels) {
  if (labels.empty()) throw InvalidInput("mean_step_score: empty label vector");
  std::size_t ones = 0;
  for (const auto l : labels) ones += l;
  return static_cast<double>(ones) / static_cast<double>(labels.size());
}

}  // namespace case_eval
