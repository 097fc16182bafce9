#include "case_eval/answer.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "case_eval/errors.hpp"
#include "case_eval/trace.hpp"

namespace case_eval {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Index just past the brace group opening at `open` (s[open] == '{'), or npos
// when the group is unbalanced.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

// Contents of the last \boxed{...} / \fbox{...}; nullopt when absent.
std::optional<std::string> extract_boxed(std::string_view s) {
  std::size_t best = std::string_view::npos;
  std::size_t cmd_len = 0;
  for (std::string_view cmd : {"\\boxed", "\\fbox"}) {
    const auto pos = s.rfind(cmd);
    if (pos != std::string_view::npos && (best == std::string_view::npos || pos > best)) {
      best = pos;
      cmd_len = cmd.size();
    }
  }
  if (best == std::string_view::npos) return std::nullopt;
  auto i = best + cmd_len;
  if (i < s.size() && s[i] == '{') {
    const auto end = match_brace(s, i);
    if (end == std::string_view::npos) throw ExtractionError("unbalanced braces in boxed answer");
    return std::string(s.substr(i + 1, end - i - 2));
  }
  // "\boxed 5": the next whitespace-delimited token.
  while (i < s.size() && is_space(s[i])) ++i;
  auto j = i;
  while (j < s.size() && !is_space(s[j]) && s[j] != '$') ++j;
  return std::string(s.substr(i, j - i));
}

std::string after_last_marker(std::string_view s) {
  const auto pos = s.rfind("####");
  if (pos == std::string_view::npos) return std::string(s);
  return std::string(s.substr(pos + 4));
}

// Removes `\cmd{...}` wrappers, keeping the group contents.
void unwrap_command(std::string& s, std::string_view cmd) {
  std::size_t pos = 0;
  while ((pos = s.find(cmd, pos)) != std::string::npos) {
    const auto open = pos + cmd.size();
    if (open >= s.size() || s[open] != '{') {
      pos = open;
      continue;
    }
    const auto end = match_brace(s, open);
    if (end == std::string::npos) throw ExtractionError("unbalanced braces after " + std::string(cmd));
    const auto inner = s.substr(open + 1, end - open - 2);
    s.replace(pos, end - pos, inner);
  }
}

bool is_simple_operand(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
           return std::isalnum(static_cast<unsigned char>(c)) || c == '.';
         });
}

// Reads one \frac argument starting at i: a brace group or a single char.
std::optional<std::pair<std::string, std::size_t>> frac_argument(const std::string& s,
                                                                 std::size_t i) {
  if (i >= s.size()) return std::nullopt;
  if (s[i] == '{') {
    const auto end = match_brace(s, i);
    if (end == std::string::npos) throw ExtractionError("unbalanced braces in \\frac");
    return std::pair{s.substr(i + 1, end - i - 2), end};
  }
  if (s[i] == '\\') return std::nullopt;
  return std::pair{std::string(1, s[i]), i + 1};
}

// \frac{A}{B} -> A/B, parenthesizing compound operands. Innermost first so
// nested fractions resolve.
void rewrite_fractions(std::string& s) {
  while (true) {
    const auto pos = s.rfind("\\frac");
    if (pos == std::string::npos) return;
    const auto num = frac_argument(s, pos + 5);
    if (!num) throw ExtractionError("malformed \\frac");
    const auto den = frac_argument(s, num->second);
    if (!den) throw ExtractionError("malformed \\frac");
    auto wrap = [](const std::string& x) { return is_simple_operand(x) ? x : "(" + x + ")"; };
    s.replace(pos, den->second - pos, wrap(num->first) + "/" + wrap(den->first));
  }
}

// Lowercases letters that are not part of a LaTeX command name.
void lower_outside_commands(std::string& s) {
  bool in_command = false;
  for (auto& c : s) {
    if (c == '\\') {
      in_command = true;
      continue;
    }
    if (in_command && is_alpha(c)) continue;
    in_command = false;
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
}

// "1,000,000" -> "1000000"; commas between list items ("1, 2") survive.
std::string strip_thousands_separators(const std::string& s) {
  static const std::regex kGrouped(R"((\d),(?=\d{3}(?!\d)))");
  std::string prev;
  std::string cur = s;
  while (cur != prev) {
    prev = cur;
    cur = std::regex_replace(cur, kGrouped, "$1");
  }
  return cur;
}

std::string canonical_number_or_self(const std::string& s) {
  const auto r = parse_rational(s);
  if (!r) return s;
  // Keep terminating decimals in decimal form so "0.5" stays readable while
  // "0.50" and "0.5" still coincide.
  static const std::regex kDecimal(R"(^([+-]?)(\d*)\.(\d*)$)");
  std::smatch m;
  if (std::regex_match(s, m, kDecimal)) {
    std::string int_part = m[2].str();
    std::string frac_part = m[3].str();
    while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
    int_part.erase(0, std::min(int_part.find_first_not_of('0'), int_part.size()));
    if (int_part.empty()) int_part = "0";
    std::string out = int_part;
    if (!frac_part.empty()) out += "." + frac_part;
    if (m[1].str() == "-" && *r != 0) out = "-" + out;
    return out;
  }
  return format_rational(*r);
}

std::string finish(std::string s) {
  s = std::string(trim(s));
  // Trailing sentence punctuation and leading "x =" assignments.
  static const std::regex kAssignment(R"(^[a-z]\s*=\s*(.+)$)");
  while (true) {
    const auto before = s;
    while (!s.empty() && (s.back() == '.' || s.back() == ',')) s.pop_back();
    s = std::string(trim(s));
    std::smatch m;
    if (std::regex_match(s, m, kAssignment)) s = std::string(trim(m[1].str()));
    if (s == before) break;
  }
  s = strip_thousands_separators(s);
  return canonical_number_or_self(s);
}

std::string strip_dollars(std::string s) {
  replace_all(s, "\\$", "");
  s.erase(std::remove(s.begin(), s.end(), '$'), s.end());
  return s;
}

std::string normalize_grade_school(std::string_view raw) {
  std::string s = after_last_marker(raw);
  if (auto boxed = extract_boxed(s)) s = *boxed;
  s = strip_dollars(std::move(s));
  s = std::string(trim(s));
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  s = finish(std::move(s));
  if (s.empty()) throw ExtractionError("no answer after the #### marker in '" + std::string(raw) + "'");
  return s;
}

std::string normalize_latex(std::string_view raw) {
  std::string s;
  if (auto boxed = extract_boxed(raw)) {
    s = *boxed;
  } else {
    s = after_last_marker(raw);
  }
  for (std::string_view cmd : {"\\text", "\\textbf", "\\mathrm", "\\mathbf", "\\mbox"}) {
    unwrap_command(s, cmd);
  }
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  for (std::string_view junk : {"\\left", "\\right", "\\!", "\\,", "\\;", "\\:", "^{\\circ}",
                                "^\\circ", "\\circ", "\\%", "\\displaystyle"}) {
    replace_all(s, junk, "");
  }
  s = strip_dollars(std::move(s));
  s.erase(std::remove(s.begin(), s.end(), '%'), s.end());
  // "\ " (explicit space) and all remaining whitespace carry no meaning.
  replace_all(s, "\\ ", "");
  s.erase(std::remove_if(s.begin(), s.end(), is_space), s.end());
  rewrite_fractions(s);
  lower_outside_commands(s);
  s = finish(std::move(s));
  // Unparenthesize "(p)/(q)" once both sides are plain numbers.
  if (const auto r = parse_rational(s); r && s.find('(') != std::string::npos) {
    s = format_rational(*r);
  }
  if (s.empty()) throw ExtractionError("no extractable answer in '" + std::string(raw) + "'");
  return s;
}

}  // namespace

std::string_view to_string(AnswerStyle style) noexcept {
  switch (style) {
    case AnswerStyle::kGradeSchoolNumeric:
      return "grade-school-numeric";
    case AnswerStyle::kCompetitionLatex:
      return "competition-latex";
  }
  return "unknown";
}

std::optional<AnswerStyle> parse_answer_style(std::string_view name) {
  const auto n = trim(name);
  if (n == "grade-school-numeric" || n == "gsm8k") return AnswerStyle::kGradeSchoolNumeric;
  if (n == "competition-latex" || n == "math") return AnswerStyle::kCompetitionLatex;
  return std::nullopt;
}

std::optional<Rational> parse_rational(std::string_view text) {
  static const std::regex kNumber(R"(^([+-]?)(\d+(?:\.\d*)?|\.\d+)$)");
  auto parse_number = [](std::string_view part) -> std::optional<Rational> {
    part = trim(part);
    if (part.size() >= 2 && part.front() == '(' && part.back() == ')') {
      part = part.substr(1, part.size() - 2);
    }
    std::cmatch m;
    if (!std::regex_match(part.begin(), part.end(), m, kNumber)) return std::nullopt;
    const auto body = m[2].str();
    const auto dot = body.find('.');
    std::string digits = body;
    std::size_t scale = 0;
    if (dot != std::string::npos) {
      scale = body.size() - dot - 1;
      digits.erase(dot, 1);
    }
    // cpp_int reads a leading 0 as an octal prefix.
    digits.erase(0, digits.find_first_not_of('0'));
    if (digits.empty()) digits = "0";
    boost::multiprecision::cpp_int numerator(digits);
    boost::multiprecision::cpp_int denominator = boost::multiprecision::pow(
        boost::multiprecision::cpp_int(10), static_cast<unsigned>(scale));
    Rational value(numerator, denominator);
    if (m[1].str() == "-") value = -value;
    return value;
  };

  const auto t = trim(text);
  if (t.empty()) return std::nullopt;
  const auto slash = t.find('/');
  if (slash == std::string_view::npos) return parse_number(t);
  if (t.find('/', slash + 1) != std::string_view::npos) return std::nullopt;
  const auto num = parse_number(t.substr(0, slash));
  const auto den = parse_number(t.substr(slash + 1));
  if (!num || !den || *den == 0) return std::nullopt;
  return *num / *den;
}

std::string format_rational(const Rational& value) {
  const auto num = boost::multiprecision::numerator(value);
  const auto den = boost::multiprecision::denominator(value);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

std::string normalize_answer(std::string_view raw, AnswerStyle style) {
  if (trim(raw).empty()) throw ExtractionError("empty answer");
  switch (style) {
    case AnswerStyle::kGradeSchoolNumeric:
      return normalize_grade_school(raw);
    case AnswerStyle::kCompetitionLatex:
      return normalize_latex(raw);
  }
  throw ExtractionError("unknown answer style");
}

bool answers_equivalent(std::string_view a, std::string_view b, AnswerStyle style) {
  const auto na = normalize_answer(a, style);
  const auto nb = normalize_answer(b, style);
  const auto ra = parse_rational(na);
  const auto rb = parse_rational(nb);
  if (ra && rb) return *ra == *rb;
  return na == nb;
}

}  // namespace case_eval
