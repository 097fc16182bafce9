#include <openssl/evp.h>

#include <algorithm>
#include <regex>
#include <sstream>

#include "case_eval/errors.hpp"
#include "case_eval/judge.hpp"

namespace case_eval {

namespace {

constexpr std::string_view kCaseSystem =
    "You are a careful evaluator of step-by-step mathematical reasoning. You judge one step "
    "at a time, using only the question and the steps written before it.";

constexpr std::string_view kBonSystem =
    "You are a careful evaluator of step-by-step mathematical reasoning. You judge every "
    "step of a complete solution.";

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

void append_steps(std::ostringstream& out, std::span<const Step> steps) {
  for (const auto& s : steps) out << "Step " << s.index << ": " << s.text << '\n';
}

void check_step_index(std::span<const Step> steps, std::size_t k) {
  if (k < 1 || k > steps.size()) {
    throw InvalidInput("step index " + std::to_string(k) + " out of range for a " +
                       std::to_string(steps.size()) + "-step trace");
  }
}

// Shared body of the causal prompts; `verdict_block` describes the answer
// format.
std::string case_user_text(const Question& q, std::span<const Step> steps, std::size_t k,
                           std::span<const Aspect> aspects, std::string_view verdict_block) {
  std::ostringstream out;
  out << '[' << kCaseTemplateVersion << "]\n";
  if (aspects.size() == 1) {
    out << "Evaluate a single reasoning step for " << display_name(aspects.front()) << ".\n\n";
    out << "Definition: " << aspect_definition(aspects.front()) << "\n\n";
  } else {
    out << "Evaluate a single reasoning step for each of the following aspects.\n\n";
    for (const auto a : aspects) {
      out << display_name(a) << ": " << aspect_definition(a) << '\n';
    }
    out << '\n';
  }
  out << "Question:\n" << q.text << "\n\n";
  out << "Previous steps:\n";
  if (k == 1) {
    out << "(none; this is the first step)\n";
  } else {
    append_steps(out, steps.subspan(0, k - 1));
  }
  out << "\nStep under evaluation:\n";
  append_steps(out, steps.subspan(k - 1, 1));
  out << "\nJudge only the step under evaluation, using only the question and the previous "
         "steps shown above. Do not speculate about how the solution continues. Give a brief "
         "justification, then finish with "
      << verdict_block;
  return out.str();
}

std::regex icase(const char* pattern) {
  return std::regex(pattern, std::regex::icase | std::regex::ECMAScript);
}

Label yes_no(const std::string& word) { return upper(word) == "YES" ? 1 : 0; }

[[noreturn]] void unparseable(std::string_view why, std::string_view response) {
  constexpr std::size_t kPreview = 200;
  std::string preview(response.substr(0, kPreview));
  if (response.size() > kPreview) preview += "...";
  throw UnparseableResponse(std::string(why) + " in response: \"" + preview + "\"");
}

}  // namespace

std::string_view aspect_definition(Aspect aspect) noexcept {
  switch (aspect) {
    case Aspect::kRelevance:
      return "A step is relevant if it works from what the question actually gives and asks, "
             "and the solution needs what it does.";
    case Aspect::kCoherence:
      return "A step is coherent if it can be derived from the question and the earlier steps, "
             "with no unexplained jump.";
    case Aspect::kCorrectness:
      return "A step is correct if its mathematics holds, given the question and the earlier "
             "steps.";
  }
  return "";
}

JudgePrompt build_case_prompt(const Question& q, std::span<const Step> steps, std::size_t k,
                              Aspect aspect) {
  check_step_index(steps, k);
  const std::array<Aspect, 1> aspects{aspect};
  JudgePrompt p;
  p.system = std::string(kCaseSystem);
  p.user = case_user_text(q, steps, k, aspects,
                          "exactly one line of the form\nJUDGMENT: YES\nor\nJUDGMENT: NO\n"
                          "where YES means the step satisfies the definition.\n");
  p.aspects = {aspect};
  p.step_index = k;
  p.context_step_count = k - 1;
  p.format = VerdictFormat::kSingle;
  p.expected_labels = 1;
  p.sample_id = q.id;
  p.template_version = std::string(kCaseTemplateVersion);
  return p;
}

JudgePrompt build_case_prompt_combined(const Question& q, std::span<const Step> steps,
                                       std::size_t k, std::span<const Aspect> aspects) {
  check_step_index(steps, k);
  if (aspects.empty()) throw InvalidInput("combined prompt needs at least one aspect");
  std::ostringstream block;
  block << "one verdict line per aspect, in this order and format:\n";
  for (const auto a : aspects) block << upper(to_string(a)) << ": YES or NO\n";
  block << "where YES means the step satisfies that aspect's definition.\n";
  JudgePrompt p;
  p.system = std::string(kCaseSystem);
  p.user = case_user_text(q, steps, k, aspects, block.str());
  p.aspects.assign(aspects.begin(), aspects.end());
  p.step_index = k;
  p.context_step_count = k - 1;
  p.format = VerdictFormat::kPerAspect;
  p.expected_labels = aspects.size();
  p.sample_id = q.id;
  p.template_version = std::string(kCaseTemplateVersion);
  return p;
}

JudgePrompt build_bon_prompt(const Question& q, std::span<const Step> steps, Aspect aspect) {
  if (steps.empty()) throw InvalidInput("cannot build a whole-trace prompt for an empty trace");
  std::ostringstream out;
  out << '[' << kBonTemplateVersion << "]\n";
  out << "Evaluate every step of the solution below for " << display_name(aspect) << ".\n\n";
  out << "Definition: " << aspect_definition(aspect) << "\n\n";
  out << "Question:\n" << q.text << "\n\nSolution:\n";
  append_steps(out, steps);
  out << "\nFor each step decide whether it satisfies the definition. You may give a brief "
         "justification first, then finish with exactly one verdict line per step, in order:\n";
  for (const auto& s : steps) out << "Step " << s.index << ": YES or NO\n";

  JudgePrompt p;
  p.system = std::string(kBonSystem);
  p.user = out.str();
  p.aspects = {aspect};
  p.step_index = std::nullopt;
  p.context_step_count = steps.size();
  p.format = VerdictFormat::kNumbered;
  p.expected_labels = steps.size();
  p.sample_id = q.id;
  p.template_version = std::string(kBonTemplateVersion);
  return p;
}

std::vector<Label> parse_judgment(std::string_view response, VerdictFormat format,
                                  std::size_t expected, std::span<const Aspect> aspects) {
  const std::string text(response);
  switch (format) {
    case VerdictFormat::kSingle: {
      static const auto re = icase(R"(judgment\s*:\s*\**\s*(yes|no)\b)");
      std::optional<Label> found;
      for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
           it != std::sregex_iterator(); ++it) {
        const auto l = yes_no((*it)[1].str());
        if (found && *found != l) unparseable("conflicting JUDGMENT lines", response);
        found = l;
      }
      if (!found) unparseable("no JUDGMENT line", response);
      return {*found};
    }
    case VerdictFormat::kNumbered: {
      static const auto re =
          icase(R"((?:^|\n)[ \t>*#-]*step[ \t]*(\d+)[ \t*]*[:.)-][ \t*]*(yes|no)\b)");
      std::vector<std::optional<Label>> slots(expected);
      for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
           it != std::sregex_iterator(); ++it) {
        const auto idx = std::stoul((*it)[1].str());
        if (idx < 1 || idx > expected) unparseable("verdict for unknown step", response);
        const auto l = yes_no((*it)[2].str());
        auto& slot = slots[idx - 1];
        if (slot && *slot != l) unparseable("conflicting verdicts for one step", response);
        slot = l;
      }
      std::vector<Label> out;
      for (std::size_t i = 0; i < expected; ++i) {
        if (!slots[i]) unparseable("missing verdict for step " + std::to_string(i + 1), response);
        out.push_back(*slots[i]);
      }
      return out;
    }
    case VerdictFormat::kPerAspect: {
      if (aspects.size() != expected) throw InvalidInput("aspect list does not match expected count");
      static const auto re =
          icase(R"((?:^|\n)[ \t>*#-]*(relevance|coherence|correctness)[ \t*]*:[ \t*]*(yes|no)\b)");
      std::array<std::optional<Label>, kAspectCount> slots;
      for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
           it != std::sregex_iterator(); ++it) {
        const auto a = parse_aspect((*it)[1].str());
        const auto l = yes_no((*it)[2].str());
        auto& slot = slots[index_of(*a)];
        if (slot && *slot != l) unparseable("conflicting verdicts for one aspect", response);
        slot = l;
      }
      std::vector<Label> out;
      for (const auto a : aspects) {
        const auto& slot = slots[index_of(a)];
        if (!slot) unparseable("missing verdict for " + std::string(to_string(a)), response);
        out.push_back(*slot);
      }
      return out;
    }
  }
  throw InvalidInput("unknown verdict format");
}

std::vector<Label> parse_judgment(std::string_view response, const JudgePrompt& prompt) {
  return parse_judgment(response, prompt.format, prompt.expected_labels, prompt.aspects);
}

std::string render_judgment(std::span<const Label> labels, VerdictFormat format,
                            std::span<const Aspect> aspects) {
  auto word = [](Label l) { return l ? "YES" : "NO"; };
  std::ostringstream out;
  switch (format) {
    case VerdictFormat::kSingle:
      out << "JUDGMENT: " << word(labels.front()) << '\n';
      break;
    case VerdictFormat::kNumbered:
      for (std::size_t i = 0; i < labels.size(); ++i) {
        out << "Step " << (i + 1) << ": " << word(labels[i]) << '\n';
      }
      break;
    case VerdictFormat::kPerAspect:
      for (std::size_t i = 0; i < labels.size(); ++i) {
        out << upper(to_string(aspects[i])) << ": " << word(labels[i]) << '\n';
      }
      break;
  }
  return out.str();
}

std::string_view strict_format_reminder(VerdictFormat format) {
  switch (format) {
    case VerdictFormat::kSingle:
      return "Your previous reply did not contain a verdict. Reply again and make the final "
             "line exactly \"JUDGMENT: YES\" or \"JUDGMENT: NO\".";
    case VerdictFormat::kNumbered:
      return "Your previous reply did not contain a complete verdict list. Reply again with "
             "one line per step, exactly \"Step <number>: YES\" or \"Step <number>: NO\", "
             "covering every step.";
    case VerdictFormat::kPerAspect:
      return "Your previous reply did not contain a verdict for every aspect. Reply again "
             "with one line per aspect, exactly \"<ASPECT>: YES\" or \"<ASPECT>: NO\".";
  }
  return "";
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

std::string prompt_digest(const JudgePrompt& prompt) {
  std::string material = prompt.system;
  material.push_back('\0');
  material += prompt.user;
  return sha256_hex(material);
}

}  // namespace case_eval
