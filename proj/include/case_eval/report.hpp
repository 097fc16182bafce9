#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "case_eval/metrics.hpp"

namespace case_eval {

enum class ReportFormat { kTable, kCsv, kRecords };

std::string_view to_string(ReportFormat f) noexcept;
std::optional<ReportFormat> parse_report_format(std::string_view name);

// Table: one row per method, column groups Relevance / Coherence /
// Correctness / Average with Acc and F1 sub-columns, followed by the
// confusion counts. CSV: one row per (method, aspect, metric). Records: one
// JSON object per (method, aspect). Absent aspects render as "-" / empty.
std::string emit_report(const AspectReport& report, ReportFormat format);
std::string emit_report(std::span<const AspectReport> reports, ReportFormat format);

// Differences of every later report against the first one.
std::string emit_delta(std::span<const AspectReport> reports, ReportFormat format);

std::string emit_report(const AnalysisReport& report, ReportFormat format);

}  // namespace case_eval
