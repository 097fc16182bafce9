#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace case_eval {

enum class AnswerStyle { kGradeSchoolNumeric, kCompetitionLatex };

std::string_view to_string(AnswerStyle style) noexcept;
std::optional<AnswerStyle> parse_answer_style(std::string_view name);

using Rational = boost::multiprecision::cpp_rational;

// Parses integers, decimals and a/b fractions of those ("-3", "0.25",
// "1/2", "1.5/3", "(1)/(2)"). Zero denominators yield nullopt.
std::optional<Rational> parse_rational(std::string_view text);

// "p" for integers, "p/q" in lowest terms otherwise.
std::string format_rational(const Rational& value);

// Canonical answer text:
//  - grade-school-numeric: text after the last "####" marker
//  - competition-latex: contents of the last \boxed{...} (or \fbox{...})
// then trimmed, wrappers ($, \text{}, \left/\right, units like % and degrees)
// removed, \frac rewritten as a/b, numbers canonicalized ("72.0" -> "72",
// "1,000" -> "1000", "2/4" -> "1/2"), letters outside LaTeX commands
// lowercased. Throws ExtractionError when nothing usable remains.
std::string normalize_answer(std::string_view raw, AnswerStyle style);

// Exact rational comparison when both canonical forms parse as rationals,
// canonical string equality otherwise. No symbolic algebra.
bool answers_equivalent(std::string_view a, std::string_view b, AnswerStyle style);

}  // namespace case_eval
