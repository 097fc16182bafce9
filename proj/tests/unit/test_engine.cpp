#include <algorithm>
#include <random>
#include <sstream>

#include "case_eval/engine.hpp"
#include "case_eval/errors.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace case_eval;

namespace {

const std::vector<Aspect> kRel = {Aspect::kRelevance};
const std::vector<Aspect> kAll(kAllAspects.begin(), kAllAspects.end());

// Answers single-verdict prompts with YES for ordinals below `yes_below`.
class OrdinalBackend final : public ChatBackend {
 public:
  explicit OrdinalBackend(std::size_t yes_below) : yes_below_(yes_below) {}
  std::string complete(const ChatRequest& r) override {
    return r.ordinal < yes_below_ ? "JUDGMENT: YES" : "JUDGMENT: NO";
  }
  bool remote() const override { return false; }

 private:
  std::size_t yes_below_;
};

// Whole-trace backend failing for the first `failing` ordinals.
class FlakyTraceBackend final : public ChatBackend {
 public:
  FlakyTraceBackend(std::size_t failing, std::vector<Label> labels)
      : failing_(failing), labels_(std::move(labels)) {}
  std::string complete(const ChatRequest& r) override {
    if (r.ordinal < failing_) throw TransportError("HTTP 400");
    return render_judgment(labels_, VerdictFormat::kNumbered);
  }
  bool remote() const override { return false; }

 private:
  std::size_t failing_;
  std::vector<Label> labels_;
};

JudgeClient scripted_client(const ScriptedJudge& table, int votes = 1) {
  auto cfg = support::fast_config();
  cfg.votes = votes;
  return JudgeClient(std::make_shared<ScriptedJudge>(table), cfg);
}

ScriptedJudge::Entry votes_entry(std::vector<std::vector<Label>> votes) {
  ScriptedJudge::Entry e;
  e.votes = std::move(votes);
  return e;
}

void check_consistent(const AspectJudgment& aj) {
  if (!aj.complete()) {
    CHECK_FALSE(aj.solution_level);
    CHECK_FALSE(aj.mean);
    return;
  }
  std::vector<Label> v;
  for (const auto& p : aj.predictions) v.push_back(*p);
  CHECK(aj.solution_level == support::oracle_all_pass(v));
  CHECK(*aj.mean == doctest::Approx(support::oracle_mean(v)).epsilon(1e-12));
}

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("scripted table composed with aggregation") {
    ScriptedJudge table;
    table.set("e1", Aspect::kRelevance, {{1, 0, 1}, {}, {}});
    const auto client = scripted_client(table);
    const auto tj = evaluate_case(support::plain_sample("e1", 3), kRel, client);
    REQUIRE(tj.aspects.size() == 1);
    const auto& aj = tj.aspects[0];
    CHECK(aj.predictions == std::vector<std::optional<Label>>{1, 0, 1});
    CHECK(aj.solution_level == 0);
    CHECK(*aj.mean == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(tj.step_count == 3);
  }

  TEST_CASE("an all-YES judge passes every solution") {
    ScriptedJudge table;
    table.set_default(1);
    const auto client = scripted_client(table);
    for (std::size_t n = 1; n <= 5; ++n) {
      const auto tj = evaluate_case(support::plain_sample("all" + std::to_string(n), n), kAll, client);
      for (const auto& aj : tj.aspects) CHECK(aj.solution_level == 1);
    }
  }

  TEST_CASE("a failing step leaves an error slot") {
    ScriptedJudge table;
    table.set("e2", Aspect::kRelevance, {{1, 1, 1}, {}, {2}});
    const auto client = scripted_client(table);
    const auto tj = evaluate_case(support::plain_sample("e2", 3), kRel, client);
    const auto& aj = tj.aspects[0];
    CHECK(aj.predictions[0] == 1);
    CHECK_FALSE(aj.predictions[1]);
    CHECK(aj.predictions[2] == 1);
    REQUIRE(aj.errors.size() == 1);
    CHECK(aj.errors[0].step == 2);
    CHECK_FALSE(aj.solution_level);
    CHECK_FALSE(aj.mean);
    CHECK_FALSE(aj.failed);
    CHECK(tj.has_failures());
  }

  TEST_CASE("combined prompts agree with per-aspect prompts") {
    std::mt19937_64 rng(17);
    ScriptedJudge table;
    std::vector<BenchmarkSample> samples;
    for (int i = 0; i < 20; ++i) {
      const auto id = "cb" + std::to_string(i);
      const auto n = 1 + rng() % 6;
      samples.push_back(support::plain_sample(id, n));
      for (const auto a : kAll) table.set(id, a, {support::random_labels(rng, n), {}, {}});
    }
    const auto client = scripted_client(table);
    EngineOptions combined;
    combined.combined_aspects = true;
    for (const auto& s : samples) {
      CHECK(evaluate_case(s, kAll, client) == evaluate_case(s, kAll, client, combined));
    }
  }

  TEST_CASE("self-consistency takes the strict majority") {
    auto cfg = support::fast_config();
    cfg.votes = 3;
    const JudgeClient two_of_three(std::make_shared<OrdinalBackend>(2), cfg);
    CHECK(evaluate_case(support::plain_sample("sc", 2), kRel, two_of_three).aspects[0].predictions ==
          std::vector<std::optional<Label>>{1, 1});
    cfg.votes = 4;
    const JudgeClient two_of_four(std::make_shared<OrdinalBackend>(2), cfg);
    CHECK(evaluate_case(support::plain_sample("sc", 2), kRel, two_of_four).aspects[0].predictions ==
          std::vector<std::optional<Label>>{0, 0});
  }

  TEST_CASE("BoN per-step majority") {
    ScriptedJudge table;
    // Step 1 votes [1,1,1,0,1,0,1,1]; step 2 votes split 4/4.
    const std::vector<Label> s1 = {1, 1, 1, 0, 1, 0, 1, 1};
    const std::vector<Label> s2 = {1, 0, 1, 0, 1, 0, 1, 0};
    std::vector<std::vector<Label>> votes;
    for (std::size_t i = 0; i < 8; ++i) votes.push_back({s1[i], s2[i]});
    table.set("b1", Aspect::kRelevance, votes_entry(votes));
    const auto client = scripted_client(table, 8);
    const auto tj = evaluate_bon(support::plain_sample("b1", 2), kRel, client);
    CHECK(tj.aspects[0].predictions == std::vector<std::optional<Label>>{1, 0});
    CHECK(tj.method == Method::kBon);
  }

  TEST_CASE("BoN with N=1 passes the verdict through") {
    ScriptedJudge table;
    table.set("b2", Aspect::kRelevance, votes_entry({{0, 1, 1}}));
    const auto tj = evaluate_bon(support::plain_sample("b2", 3), kRel, scripted_client(table, 1));
    CHECK(tj.aspects[0].predictions == std::vector<std::optional<Label>>{0, 1, 1});
  }

  TEST_CASE("BoN majority over every vote multiset up to N=8") {
    for (std::size_t n = 1; n <= 8; ++n) {
      for (std::size_t ones = 0; ones <= n; ++ones) {
        std::vector<Label> votes(n, 0);
        std::fill(votes.begin(), votes.begin() + static_cast<std::ptrdiff_t>(ones), 1);
        const Label expected = 2 * ones > n ? 1 : 0;
        std::sort(votes.begin(), votes.end());
        do {
          REQUIRE(strict_majority(votes) == expected);
        } while (std::next_permutation(votes.begin(), votes.end()));
      }
    }
    CHECK_THROWS_AS(strict_majority(std::vector<Label>{}), InvalidInput);
  }

  TEST_CASE("BoN aspect fails when more than half the samples fail") {
    auto cfg = support::fast_config();
    cfg.votes = 8;
    const JudgeClient five_fail(std::make_shared<FlakyTraceBackend>(5, std::vector<Label>{1, 0}), cfg);
    const auto bad = evaluate_bon(support::plain_sample("f", 2), kRel, five_fail);
    CHECK(bad.aspects[0].failed);
    CHECK_FALSE(bad.aspects[0].solution_level);
    const JudgeClient four_fail(std::make_shared<FlakyTraceBackend>(4, std::vector<Label>{1, 0}), cfg);
    const auto ok = evaluate_bon(support::plain_sample("f", 2), kRel, four_fail);
    CHECK_FALSE(ok.aspects[0].failed);
    CHECK(ok.aspects[0].predictions == std::vector<std::optional<Label>>{1, 0});
  }

  TEST_CASE("evaluate_case equals table lookup composed with aggregation") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
      ScriptedJudge table;
      const auto id = "o" + std::to_string(trial);
      const auto n = 1 + rng() % 10;
      std::vector<std::vector<Label>> expected;
      for (const auto a : kAll) {
        expected.push_back(support::random_labels(rng, n));
        table.set(id, a, {expected.back(), {}, {}});
      }
      const auto tj = evaluate_case(support::plain_sample(id, n), kAll, scripted_client(table));
      for (std::size_t i = 0; i < kAll.size(); ++i) {
        const auto& aj = tj.aspects[i];
        REQUIRE(aj.aspect == kAll[i]);
        for (std::size_t k = 0; k < n; ++k) REQUIRE(aj.predictions[k] == expected[i][k]);
        REQUIRE(aj.solution_level == support::oracle_all_pass(expected[i]));
        REQUIRE(*aj.mean == support::oracle_mean(expected[i]));
      }
    }
  }

  TEST_CASE("corpus run keeps input order and isolates failures") {
    const auto set = load_benchmark(support::fixture("mra_mini.jsonl"));
    auto table = ScriptedJudge::load(support::fixture("verdicts.jsonl"));
    table.set_down("s07");
    const auto client = scripted_client(table);
    const auto js = evaluate_corpus(set, Method::kCase, kAll, client, 4);
    REQUIRE(js.traces.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) CHECK(js.traces[i].sample_id == set.samples[i].id());
    CHECK(js.meta.failed_samples == 1);
    for (const auto& t : js.traces) {
      CHECK(t.has_failures() == (t.sample_id == "s07"));
      for (const auto& aj : t.aspects) check_consistent(aj);
    }
    const auto* s07 = js.find("s07");
    REQUIRE(s07);
    for (const auto& aj : s07->aspects) CHECK(aj.failed);
    CHECK(js.judge_model == "scripted");
    CHECK(js.method == Method::kCase);
  }

  TEST_CASE("concurrency limit does not change results") {
    const auto set = load_benchmark(support::fixture("mra_mini.jsonl"));
    const auto table = ScriptedJudge::load(support::fixture("verdicts.jsonl"));
    const auto client = scripted_client(table, 8);
    const auto serial = evaluate_corpus(set, Method::kBon, kAll, client, 1);
    const auto parallel = evaluate_corpus(set, Method::kBon, kAll, client, 8);
    CHECK(serial.traces == parallel.traces);
    CHECK_THROWS_AS(evaluate_corpus(set, Method::kBon, kAll, client, 0), InvalidInput);
  }

  TEST_CASE("warm cache makes no backend calls") {
    support::TempDir dir;
    const auto set = load_benchmark(support::fixture("mra_mini.jsonl"));
    auto counting = std::make_shared<CountingBackend>(
        std::make_shared<ScriptedJudge>(ScriptedJudge::load(support::fixture("verdicts.jsonl"))));
    auto cfg = support::fast_config();
    cfg.cache_dir = dir.path();
    const JudgeClient client(counting, cfg);
    const auto cold = evaluate_corpus(set, Method::kCase, kAll, client, 4);
    const auto after_cold = counting->calls();
    CHECK(after_cold == 3 * 46);
    const auto warm = evaluate_corpus(set, Method::kCase, kAll, client, 4);
    CHECK(counting->calls() == after_cold);
    CHECK(warm.traces == cold.traces);
  }

  TEST_CASE("judgment files round-trip") {
    const auto set = load_benchmark(support::fixture("mra_mini.jsonl"));
    auto table = ScriptedJudge::load(support::fixture("verdicts.jsonl"));
    table.set("s03", Aspect::kCoherence, {{1, 1, 1, 1}, {}, {3}});
    const auto js = evaluate_corpus(set, Method::kCase, kAll, scripted_client(table), 2);
    std::istringstream in(serialize_judgments(js));
    const auto back = parse_judgments(in);
    CHECK(back.traces == js.traces);
    CHECK(back.benchmark == js.benchmark);
    CHECK(back.judge_model == js.judge_model);
    CHECK(back.method == js.method);
    CHECK(back.meta.config_digest == js.meta.config_digest);
    CHECK(back.meta.timestamp == js.meta.timestamp);
    CHECK(serialize_judgments(back) == serialize_judgments(js));
  }

  TEST_CASE("method names") {
    CHECK(parse_method("case") == Method::kCase);
    CHECK(parse_method("bon") == Method::kBon);
    CHECK(display_name(Method::kCase) == "CaSE");
    CHECK_FALSE(parse_method("vote"));
  }
}
