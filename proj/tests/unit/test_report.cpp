#include <sstream>

#include "case_eval/errors.hpp"
#include "case_eval/report.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/support.hpp"

using namespace case_eval;

namespace {

AspectReport synthetic(const std::string& method, double rel_acc, double rel_f1) {
  AspectReport r;
  r.benchmark = "bench";
  r.method = method;
  r.judge_model = "m";
  for (const auto a : kAllAspects) r.aspects[index_of(a)].aspect = a;
  auto& rel = r.aspects[index_of(Aspect::kRelevance)];
  rel.present = true;
  rel.accuracy = rel_acc;
  rel.macro_f1 = rel_f1;
  rel.judged = 4;
  rel.confusion = {2, 1, 0, 1};
  auto& corr = r.aspects[index_of(Aspect::kCorrectness)];
  corr.present = true;
  corr.accuracy = 1.0;
  corr.macro_f1 = 1.0;
  corr.judged = 4;
  corr.confusion = {2, 0, 2, 0};
  r.aspects[index_of(Aspect::kCoherence)].excluded = 4;
  r.average_accuracy = (rel_acc + 1.0) / 2;
  r.average_macro_f1 = (rel_f1 + 1.0) / 2;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("format names") {
    CHECK(parse_report_format("table") == ReportFormat::kTable);
    CHECK(parse_report_format("csv") == ReportFormat::kCsv);
    CHECK(parse_report_format("jsonl") == ReportFormat::kRecords);
    CHECK_FALSE(parse_report_format("xml"));
  }

  TEST_CASE("table groups and absent aspects") {
    const auto t = emit_report(synthetic("CaSE", 0.75, 0.5), ReportFormat::kTable);
    const auto ls = lines(t);
    bool header = false, row = false;
    for (const auto& l : ls) {
      if (l.find("Relevance") != std::string::npos && l.find("Coherence") != std::string::npos &&
          l.find("Correctness") != std::string::npos && l.find("Average") != std::string::npos) {
        header = true;
      }
      if (l.rfind("CaSE ", 0) == 0 && l.find('|') != std::string::npos) {
        row = true;
        CHECK(l.find("0.750  0.500") != std::string::npos);
        CHECK(l.find("-") != std::string::npos);
        CHECK(l.find("0.875  0.750") != std::string::npos);
      }
      CHECK((l.empty() || l.back() != ' '));
    }
    CHECK(header);
    CHECK(row);
  }

  TEST_CASE("csv has one row per method, group and metric") {
    const std::vector<AspectReport> rs = {synthetic("CaSE", 0.75, 0.5), synthetic("BoN", 0.5, 0.25)};
    const auto csv = emit_report(rs, ReportFormat::kCsv);
    const auto ls = lines(csv);
    REQUIRE(ls.size() == 1 + 2 * 4 * 2);
    CHECK(ls[0] == "benchmark,method,judge_model,pooling,aspect,metric,value");
    CHECK(ls[1] == "bench,CaSE,m,micro,relevance,accuracy,0.750000");
    CHECK(ls[3] == "bench,CaSE,m,micro,coherence,accuracy,");
    CHECK(ls[16] == "bench,BoN,m,micro,average,macro_f1,0.625000");
  }

  TEST_CASE("records are one json object per method and aspect") {
    const auto rec = emit_report(synthetic("CaSE", 0.75, 0.5), ReportFormat::kRecords);
    const auto ls = lines(rec);
    REQUIRE(ls.size() == 4);
    const auto coh = nlohmann::json::parse(ls[1]);
    CHECK(coh["aspect"] == "coherence");
    CHECK(coh["present"] == false);
    CHECK(coh["accuracy"].is_null());
    CHECK(coh["excluded"] == 4);
    CHECK(nlohmann::json::parse(ls[0])["confusion"]["fn"] == 1);
  }

  TEST_CASE("delta against the first method") {
    const std::vector<AspectReport> rs = {synthetic("CaSE", 0.75, 0.5), synthetic("BoN", 0.5, 0.25)};
    const auto t = emit_delta(rs, ReportFormat::kTable);
    CHECK(t.find("delta vs CaSE") != std::string::npos);
    CHECK(t.find("BoN - CaSE") != std::string::npos);
    CHECK(t.find("-0.250") != std::string::npos);
    CHECK(t.find("+0.000") != std::string::npos);
    const auto csv = lines(emit_delta(rs, ReportFormat::kCsv));
    REQUIRE(csv.size() == 1 + 4 * 2);
    CHECK(csv[1] == "BoN,CaSE,relevance,accuracy,-0.250000");
  }

  TEST_CASE("rendering is deterministic") {
    const std::vector<AspectReport> rs = {synthetic("CaSE", 0.75, 0.5), synthetic("BoN", 0.5, 0.25)};
    for (const auto f : {ReportFormat::kTable, ReportFormat::kCsv, ReportFormat::kRecords}) {
      CHECK(emit_report(rs, f) == emit_report(rs, f));
    }
    CHECK_THROWS_AS(emit_report(std::span<const AspectReport>{}, ReportFormat::kTable), InvalidInput);
  }

  TEST_CASE("analysis report shows the conditional proportions") {
    const auto set = load_benchmark(support::fixture("mra_mini.jsonl"));
    const auto t = emit_report(annotation_analysis(set), ReportFormat::kTable);
    CHECK(t.find("0.667 (4/6)") != std::string::npos);
    CHECK(t.find("0.250 (1/4)") != std::string::npos);
    const auto rec = emit_report(annotation_analysis(set), ReportFormat::kRecords);
    CHECK_FALSE(rec.empty());
  }
}
