#include "case_eval/report.hpp"

#include <fmt/format.h>

#include "case_eval/errors.hpp"
#include "json.hpp"

namespace case_eval {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 4> kGroups = {"Relevance", "Coherence", "Correctness",
                                                     "Average"};

struct Cell {
  std::optional<double> acc;
  std::optional<double> f1;
};

std::array<Cell, 4> cells(const AspectReport& r) {
  std::array<Cell, 4> out;
  for (const auto a : kAllAspects) {
    const auto& m = r.at(a);
    if (m.present) out[index_of(a)] = {m.accuracy, m.macro_f1};
  }
  out[3] = {r.average_accuracy, r.average_macro_f1};
  return out;
}

std::string num(std::optional<double> v, int decimals = 3) {
  if (!v) return "-";
  return fmt::format("{:.{}f}", *v, decimals);
}

std::string signed_num(std::optional<double> v) {
  if (!v) return "-";
  return fmt::format("{:+.3f}", *v);
}

std::string csv_num(std::optional<double> v) { return v ? fmt::format("{:.6f}", *v) : ""; }

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string rstrip_lines(const std::string& text) {
  std::string out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    auto line = text.substr(start, end - start);
    line.erase(line.find_last_not_of(' ') + 1);
    out += line;
    if (end < text.size()) out += '\n';
    start = end + 1;
  }
  return out;
}

json opt_json(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

std::size_t method_width(std::span<const AspectReport> reports) {
  std::size_t w = 6;
  for (const auto& r : reports) w = std::max(w, r.method.size());
  return w;
}

void check_reports(std::span<const AspectReport> reports) {
  if (reports.empty()) throw InvalidInput("no reports to render");
}

// Shared header lines; each distinct value is listed once.
std::string preamble(std::span<const AspectReport> reports) {
  auto collect = [&](auto field) {
    std::vector<std::string> seen;
    for (const auto& r : reports) {
      auto v = std::string(field(r));
      if (std::find(seen.begin(), seen.end(), v) == seen.end()) seen.push_back(v);
    }
    std::string out;
    for (const auto& v : seen) out += (out.empty() ? "" : ", ") + v;
    return out;
  };
  return fmt::format("benchmark: {}\njudge: {}\npooling: {}\n\n",
                     collect([](const AspectReport& r) { return r.benchmark; }),
                     collect([](const AspectReport& r) { return r.judge_model; }),
                     collect([](const AspectReport& r) { return to_string(r.pooling); }));
}

std::string group_header(std::size_t mw) {
  std::string line1 = fmt::format("{:<{}}", "Method", mw);
  std::string line2 = fmt::format("{:<{}}", "", mw);
  for (const auto g : kGroups) {
    line1 += fmt::format(" | {:^13}", g);
    line2 += fmt::format(" | {:>6} {:>6}", "Acc", "F1");
  }
  std::string rule(line1.size(), '-');
  return line1 + "\n" + line2 + "\n" + rule + "\n";
}

std::string render_table(std::span<const AspectReport> reports) {
  const auto mw = method_width(reports);
  std::string out = preamble(reports) + group_header(mw);
  for (const auto& r : reports) {
    out += fmt::format("{:<{}}", r.method, mw);
    for (const auto& c : cells(r)) out += fmt::format(" | {:>6} {:>6}", num(c.acc), num(c.f1));
    out += '\n';
  }
  out += "\ncounts\n";
  out += fmt::format("{:<{}}  {:<11} {:>7} {:>8} {:>5} {:>5} {:>5} {:>5}\n", "Method", mw, "Aspect",
                     "judged", "excluded", "TP", "FP", "TN", "FN");
  for (const auto& r : reports) {
    for (const auto& m : r.aspects) {
      out += fmt::format("{:<{}}  {:<11} {:>7} {:>8} {:>5} {:>5} {:>5} {:>5}\n", r.method, mw,
                         to_string(m.aspect), m.judged, m.excluded, m.confusion.tp,
                         m.confusion.fp, m.confusion.tn, m.confusion.fn);
    }
  }
  return out;
}

std::string render_csv(std::span<const AspectReport> reports) {
  std::string out = "benchmark,method,judge_model,pooling,aspect,metric,value\n";
  constexpr std::array<std::string_view, 4> kKeys = {"relevance", "coherence", "correctness",
                                                     "average"};
  for (const auto& r : reports) {
    const auto cs = cells(r);
    for (std::size_t g = 0; g < cs.size(); ++g) {
      for (const auto& [metric, value] :
           {std::pair{"accuracy", cs[g].acc}, std::pair{"macro_f1", cs[g].f1}}) {
        out += fmt::format("{},{},{},{},{},{},{}\n", csv_field(r.benchmark), csv_field(r.method),
                           csv_field(r.judge_model), to_string(r.pooling), kKeys[g], metric,
                           csv_num(value));
      }
    }
  }
  return out;
}

std::string render_records(std::span<const AspectReport> reports) {
  std::string out;
  for (const auto& r : reports) {
    for (const auto& m : r.aspects) {
      json j{{"benchmark", r.benchmark},
             {"method", r.method},
             {"judge_model", r.judge_model},
             {"pooling", to_string(r.pooling)},
             {"aspect", to_string(m.aspect)},
             {"present", m.present},
             {"accuracy", m.present ? json(m.accuracy) : json(nullptr)},
             {"macro_f1", m.present ? json(m.macro_f1) : json(nullptr)},
             {"judged", m.judged},
             {"excluded", m.excluded},
             {"confusion",
              {{"tp", m.confusion.tp},
               {"fp", m.confusion.fp},
               {"tn", m.confusion.tn},
               {"fn", m.confusion.fn}}}};
      out += j.dump() + "\n";
    }
    json avg{{"benchmark", r.benchmark},         {"method", r.method},
             {"judge_model", r.judge_model},     {"pooling", to_string(r.pooling)},
             {"aspect", "average"},              {"accuracy", opt_json(r.average_accuracy)},
             {"macro_f1", opt_json(r.average_macro_f1)}};
    out += avg.dump() + "\n";
  }
  return out;
}

std::optional<double> diff(std::optional<double> a, std::optional<double> base) {
  if (!a || !base) return std::nullopt;
  return *a - *base;
}

std::string yes_no_tab(const CrossTab& t) {
  return fmt::format("{:<20} {:>10} {:>10}\n{:<20} {:>10} {:>10}\n{:<20} {:>10} {:>10}\n",
                     t.label, "invalid", "valid", "  all steps pass", t.counts[1][0],
                     t.counts[1][1], "  some step fails", t.counts[0][0], t.counts[0][1]);
}

std::string proportion(const Proportion& p) {
  if (!p.value()) return fmt::format("n/a ({}/{})", p.hits, p.total);
  return fmt::format("{:.3f} ({}/{})", *p.value(), p.hits, p.total);
}

}  // namespace

std::string_view to_string(ReportFormat f) noexcept {
  switch (f) {
    case ReportFormat::kTable: return "table";
    case ReportFormat::kCsv: return "csv";
    case ReportFormat::kRecords: return "records";
  }
  return "table";
}

std::optional<ReportFormat> parse_report_format(std::string_view name) {
  const auto n = trim(name);
  if (n == "table") return ReportFormat::kTable;
  if (n == "csv") return ReportFormat::kCsv;
  if (n == "records" || n == "jsonl") return ReportFormat::kRecords;
  return std::nullopt;
}

std::string emit_report(const AspectReport& report, ReportFormat format) {
  return emit_report(std::span<const AspectReport>(&report, 1), format);
}

std::string emit_report(std::span<const AspectReport> reports, ReportFormat format) {
  check_reports(reports);
  switch (format) {
    case ReportFormat::kTable: return rstrip_lines(render_table(reports));
    case ReportFormat::kCsv: return render_csv(reports);
    case ReportFormat::kRecords: return render_records(reports);
  }
  return {};
}

std::string emit_delta(std::span<const AspectReport> reports, ReportFormat format) {
  check_reports(reports);
  const auto base = cells(reports.front());
  const auto& base_name = reports.front().method;
  std::string out;
  if (format == ReportFormat::kTable) {
    const auto mw = method_width(reports) + base_name.size() + 4;
    out = "delta vs " + base_name + "\n" + group_header(mw);
    for (std::size_t i = 1; i < reports.size(); ++i) {
      out += fmt::format("{:<{}}", reports[i].method + " - " + base_name, mw);
      const auto cs = cells(reports[i]);
      for (std::size_t g = 0; g < cs.size(); ++g) {
        out += fmt::format(" | {:>6} {:>6}", signed_num(diff(cs[g].acc, base[g].acc)),
                           signed_num(diff(cs[g].f1, base[g].f1)));
      }
      out += '\n';
    }
    return rstrip_lines(out);
  }
  constexpr std::array<std::string_view, 4> kKeys = {"relevance", "coherence", "correctness",
                                                     "average"};
  if (format == ReportFormat::kCsv) out = "method,baseline,aspect,metric,delta\n";
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto cs = cells(reports[i]);
    for (std::size_t g = 0; g < cs.size(); ++g) {
      const auto da = diff(cs[g].acc, base[g].acc);
      const auto df = diff(cs[g].f1, base[g].f1);
      if (format == ReportFormat::kCsv) {
        out += fmt::format("{},{},{},accuracy,{}\n", csv_field(reports[i].method),
                           csv_field(base_name), kKeys[g], csv_num(da));
        out += fmt::format("{},{},{},macro_f1,{}\n", csv_field(reports[i].method),
                           csv_field(base_name), kKeys[g], csv_num(df));
      } else {
        out += json{{"method", reports[i].method},
                    {"baseline", base_name},
                    {"aspect", kKeys[g]},
                    {"accuracy_delta", opt_json(da)},
                    {"macro_f1_delta", opt_json(df)}}
                   .dump() +
               "\n";
      }
    }
  }
  return out;
}

std::string emit_report(const AnalysisReport& r, ReportFormat format) {
  if (format == ReportFormat::kTable) {
    std::string out = fmt::format("benchmark: {}\nsamples: {}\n\n", r.benchmark, r.samples);
    out += "step-level aspect vs solution-level validity\n";
    for (const auto& t : r.cross_tabs) out += yes_no_tab(t) + "\n";
    out += "answer correct among invalid solutions\n";
    out += fmt::format("  relevant and coherent:     {}\n", proportion(r.rc_satisfied));
    out += fmt::format("  not relevant or coherent:  {}\n", proportion(r.rc_violated));
    out += fmt::format("  unscorable answers:        {}\n\n", r.unscorable_answers);
    out += "mean step score by answer correctness\n";
    out += fmt::format("{:<12} {:<9} {:>5} {:>7} {:>7}\n", "aspect", "answer", "n", "mean", "std");
    for (const auto& d : r.distributions) {
      out += fmt::format("{:<12} {:<9} {:>5} {:>7} {:>7}\n", to_string(d.aspect),
                         d.answer_correct ? "correct" : "incorrect", d.values.size(),
                         num(d.mean), num(d.stddev));
    }
    return rstrip_lines(out);
  }
  if (format == ReportFormat::kCsv) {
    std::string out = "benchmark,section,key,value\n";
    auto row = [&](std::string_view section, std::string_view key, const std::string& value) {
      out += fmt::format("{},{},{},{}\n", csv_field(r.benchmark), section, key, value);
    };
    row("summary", "samples", std::to_string(r.samples));
    row("summary", "unscorable_answers", std::to_string(r.unscorable_answers));
    for (const auto& t : r.cross_tabs) {
      for (int label = 1; label >= 0; --label) {
        for (int valid = 0; valid <= 1; ++valid) {
          row("crosstab", fmt::format("{}:{}:{}", t.label, label ? "pass" : "fail",
                                      valid ? "valid" : "invalid"),
              std::to_string(t.counts[label][valid]));
        }
      }
    }
    row("conditional", "rc_satisfied", csv_num(r.rc_satisfied.value()));
    row("conditional", "rc_violated", csv_num(r.rc_violated.value()));
    for (const auto& d : r.distributions) {
      const auto key = fmt::format("{}:{}", to_string(d.aspect),
                                   d.answer_correct ? "correct" : "incorrect");
      row("distribution", key + ":n", std::to_string(d.values.size()));
      row("distribution", key + ":mean", csv_num(d.mean));
      row("distribution", key + ":std", csv_num(d.stddev));
    }
    return out;
  }
  std::string out;
  for (const auto& t : r.cross_tabs) {
    out += json{{"type", "crosstab"},
                {"benchmark", r.benchmark},
                {"label", t.label},
                {"pass_invalid", t.counts[1][0]},
                {"pass_valid", t.counts[1][1]},
                {"fail_invalid", t.counts[0][0]},
                {"fail_valid", t.counts[0][1]}}
               .dump() +
           "\n";
  }
  for (const auto& [name, p] : {std::pair{"rc_satisfied", r.rc_satisfied},
                                std::pair{"rc_violated", r.rc_violated}}) {
    out += json{{"type", "conditional"}, {"benchmark", r.benchmark}, {"key", name},
                {"hits", p.hits},        {"total", p.total},         {"value", opt_json(p.value())}}
               .dump() +
           "\n";
  }
  for (const auto& d : r.distributions) {
    out += json{{"type", "distribution"},
                {"benchmark", r.benchmark},
                {"aspect", to_string(d.aspect)},
                {"answer_correct", d.answer_correct},
                {"values", d.values},
                {"mean", opt_json(d.mean)},
                {"stddev", opt_json(d.stddev)}}
               .dump() +
           "\n";
  }
  out += json{{"type", "summary"},
              {"benchmark", r.benchmark},
              {"samples", r.samples},
              {"unscorable_answers", r.unscorable_answers}}
             .dump() +
         "\n";
  return out;
}

}  // namespace case_eval
