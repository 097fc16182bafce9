#include <map>
#include <random>
#include <set>

#include "case_eval/curation.hpp"
#include "case_eval/errors.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace case_eval;

namespace {

SftSample sft(const std::string& id, std::size_t steps) {
  SftSample s;
  s.question = "question " + id;
  for (std::size_t k = 1; k <= steps; ++k) s.steps.push_back(id + " step " + std::to_string(k));
  s.answer = "#### " + std::to_string(steps);
  if (!id.empty()) s.meta["source_id"] = id;
  return s;
}

AspectJudgment aspect_labels(Aspect a, std::vector<std::optional<Label>> preds) {
  AspectJudgment aj;
  aj.aspect = a;
  aj.predictions = std::move(preds);
  aj.derive_scores();
  return aj;
}

TraceJudgment trace(const std::string& id, const std::vector<std::optional<Label>>& rel,
                    const std::vector<std::optional<Label>>& coh) {
  TraceJudgment t;
  t.sample_id = id;
  t.step_count = rel.size();
  t.aspects = {aspect_labels(Aspect::kRelevance, rel), aspect_labels(Aspect::kCoherence, coh)};
  return t;
}

TraceJudgment passing(const std::string& id, std::size_t n) {
  return trace(id, std::vector<std::optional<Label>>(n, 1), std::vector<std::optional<Label>>(n, 1));
}

struct RandomCorpus {
  std::vector<SftSample> samples;
  JudgmentSet judgments;
};

RandomCorpus random_corpus(std::mt19937_64& rng, std::size_t n) {
  RandomCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = "r" + std::to_string(i);
    const auto steps = 1 + rng() % 8;
    c.samples.push_back(sft(id, steps));
    std::vector<std::optional<Label>> rel, coh;
    // Bias towards passing so some samples are fully eligible.
    for (std::size_t k = 0; k < steps; ++k) {
      const auto roll = rng() % 10;
      rel.push_back(roll == 0 ? std::nullopt : std::optional<Label>(roll < 8 ? 1 : 0));
      coh.push_back(rng() % 10 < 8 ? 1 : 0);
    }
    c.judgments.traces.push_back(trace(id, rel, coh));
  }
  return c;
}

// Predicate re-applied from the raw judgment vectors.
bool oracle_step_ok(const TraceJudgment& t, std::size_t k) {
  for (const auto& aj : t.aspects) {
    if (!aj.predictions[k] || *aj.predictions[k] != 1) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("curation") {
  TEST_CASE("policy validation") {
    CurationPolicy p;
    CHECK_NOTHROW(p.validate());
    p.required.clear();
    CHECK_THROWS_AS(p.validate(), InvalidInput);
    p.required = {Aspect::kRelevance};
    p.budget = 0;
    CHECK_THROWS_AS(p.validate(), InvalidInput);
    p.mode = CurationMode::kStepLevel;
    CHECK_NOTHROW(p.validate());
    CHECK(p.digest().size() == 16);
    CurationPolicy q = p;
    q.seed = 1;
    CHECK(p.digest() != q.digest());
    CHECK(parse_curation_mode("step-level") == CurationMode::kStepLevel);
    CHECK(parse_selection_strategy("longest-first") == SelectionStrategy::kLongestFirst);
    CHECK_FALSE(parse_curation_mode("random"));
  }

  TEST_CASE("step filter keeps passing steps in order") {
    CurationPolicy p;
    p.mode = CurationMode::kStepLevel;
    const auto s = sft("a", 3);
    const auto r = filter_steps(s, "a", trace("a", {1, 0, 1}, {1, 1, 1}), p);
    REQUIRE(r.kept);
    CHECK(r.kept->steps == std::vector<std::string>{"a step 1", "a step 3"});
    CHECK(r.kept->answer == s.answer);
    CHECK(r.audit.action == "pruned");
    CHECK(r.audit.step_indices == std::vector<std::size_t>{2});
  }

  TEST_CASE("all-pass sample is unchanged") {
    CurationPolicy p;
    p.mode = CurationMode::kStepLevel;
    const auto s = sft("b", 4);
    const auto r = filter_steps(s, "b", passing("b", 4), p);
    REQUIRE(r.kept);
    CHECK(*r.kept == s);
    CHECK(r.audit.action == "kept");
    CHECK(r.audit.step_indices.empty());
  }

  TEST_CASE("all-fail sample is dropped or kept answer-only") {
    CurationPolicy p;
    p.mode = CurationMode::kStepLevel;
    const auto s = sft("c", 2);
    const auto t = trace("c", {0, 1}, {1, std::nullopt});
    const auto dropped = filter_steps(s, "c", t, p);
    CHECK_FALSE(dropped.kept);
    CHECK(dropped.audit.action == "dropped");
    CHECK_FALSE(dropped.audit.reason.empty());
    CHECK(dropped.audit.step_indices == std::vector<std::size_t>{1, 2});
    p.drop_empty = false;
    const auto kept = filter_steps(s, "c", t, p);
    REQUIRE(kept.kept);
    CHECK(kept.kept->steps.empty());
    CHECK(kept.kept->meta["answer_only"] == true);
    CHECK(kept.kept->answer == s.answer);
    CHECK_NOTHROW(validate_sft_sample(*kept.kept));
  }

  TEST_CASE("correctness is only consulted when required") {
    CurationPolicy p;
    p.mode = CurationMode::kStepLevel;
    auto t = passing("d", 2);
    t.aspects.push_back(aspect_labels(Aspect::kCorrectness, {0, 1}));
    CHECK(filter_steps(sft("d", 2), "d", t, p).audit.action == "kept");
    p.required = {Aspect::kRelevance, Aspect::kCoherence, Aspect::kCorrectness};
    CHECK(filter_steps(sft("d", 2), "d", t, p).audit.step_indices == std::vector<std::size_t>{1});
  }

  TEST_CASE("length mismatch is rejected") {
    CurationPolicy p;
    p.mode = CurationMode::kStepLevel;
    CHECK_THROWS_AS(filter_steps(sft("e", 3), "e", passing("e", 2), p), InvalidInput);
    auto t = passing("e", 3);
    t.aspects[1].predictions.pop_back();
    CHECK_THROWS_AS(filter_steps(sft("e", 3), "e", t, p), InvalidInput);
  }

  TEST_CASE("seeded selection of two out of three eligible") {
    std::vector<SftSample> corpus;
    JudgmentSet js;
    for (int i = 1; i <= 5; ++i) {
      const auto id = "f" + std::to_string(i);
      corpus.push_back(sft(id, 2));
      js.traces.push_back(i <= 3 ? passing(id, 2) : trace(id, {1, 0}, {1, 1}));
    }
    CurationPolicy p;
    p.budget = 2;
    p.seed = 7;
    const auto a = filter_samples(corpus, js, p);
    const auto b = filter_samples(corpus, js, p);
    REQUIRE(a.kept.size() == 2);
    CHECK(a.kept == b.kept);
    CHECK(a.audit == b.audit);
    for (const auto& s : a.kept) CHECK(s.source_id() <= "f3");
    CHECK(a.warnings.empty());
    CHECK(a.audit.size() == 5);
  }

  TEST_CASE("budget above the eligible count warns") {
    std::vector<SftSample> corpus;
    JudgmentSet js;
    for (int i = 1; i <= 5; ++i) {
      const auto id = "g" + std::to_string(i);
      corpus.push_back(sft(id, 1));
      js.traces.push_back(i % 2 ? passing(id, 1) : trace(id, {0}, {1}));
    }
    CurationPolicy p;
    p.budget = 10;
    const auto out = filter_samples(corpus, js, p);
    CHECK(out.kept.size() == 3);
    CHECK(out.warnings.size() == 1);
  }

  TEST_CASE("empty corpus and missing judgments are rejected") {
    CurationPolicy p;
    CHECK_THROWS_AS(filter_samples({}, JudgmentSet{}, p), InvalidInput);
    CHECK_THROWS_AS(filter_samples({sft("h", 1)}, JudgmentSet{}, p), InvalidInput);
    p.mode = CurationMode::kStepLevel;
    CHECK_THROWS_AS(curate({}, JudgmentSet{}, p), InvalidInput);
  }

  TEST_CASE("selection is uniform over subsets") {
    // 5 eligible, budget 2: each of the 10 subsets should appear ~1/10 of the time.
    std::vector<SftSample> corpus;
    JudgmentSet js;
    for (int i = 0; i < 5; ++i) {
      const auto id = "u" + std::to_string(i);
      corpus.push_back(sft(id, 1));
      js.traces.push_back(passing(id, 1));
    }
    CurationPolicy p;
    p.budget = 2;
    std::map<std::string, int> freq;
    const int trials = 20000;
    for (int seed = 0; seed < trials; ++seed) {
      p.seed = static_cast<std::uint64_t>(seed);
      const auto out = filter_samples(corpus, js, p);
      freq[out.kept[0].source_id() + out.kept[1].source_id()]++;
    }
    CHECK(freq.size() == 10);
    // Binomial(20000, 0.1): sd ~ 42, allow ~5 sd.
    for (const auto& [k, v] : freq) CHECK(std::abs(v - trials / 10) < 210);
  }

  TEST_CASE("longest-first ranking") {
    std::vector<SftSample> corpus = {sft("l1", 1), sft("l2", 4), sft("l3", 2), sft("l4", 4)};
    JudgmentSet js;
    for (const auto& s : corpus) js.traces.push_back(passing(s.source_id(), s.steps.size()));
    CurationPolicy p;
    p.budget = 2;
    p.selection = SelectionStrategy::kLongestFirst;
    const auto out = filter_samples(corpus, js, p);
    REQUIRE(out.kept.size() == 2);
    CHECK(out.kept[0].source_id() == "l2");
    CHECK(out.kept[1].source_id() == "l4");
  }

  TEST_CASE("soundness, subset and audit completeness on random corpora") {
    std::mt19937_64 rng(424242);
    for (int trial = 0; trial < 100; ++trial) {
      const auto c = random_corpus(rng, 1 + rng() % 40);
      const auto before = c.samples;
      std::map<std::string, const SftSample*> by_id;
      for (const auto& s : c.samples) by_id[s.source_id()] = &s;

      CurationPolicy step;
      step.mode = CurationMode::kStepLevel;
      step.drop_empty = trial % 2 == 0;
      const auto pruned = curate(c.samples, c.judgments, step);
      REQUIRE(c.samples == before);
      REQUIRE(pruned.audit.size() == c.samples.size());
      std::size_t k_idx = 0;
      for (std::size_t i = 0; i < c.samples.size(); ++i) {
        const auto& e = pruned.audit[i];
        const auto& t = c.judgments.traces[i];
        std::vector<std::string> expect;
        std::vector<std::size_t> expect_pruned;
        for (std::size_t k = 0; k < t.step_count; ++k) {
          if (oracle_step_ok(t, k)) expect.push_back(c.samples[i].steps[k]);
          else expect_pruned.push_back(k + 1);
        }
        REQUIRE(e.step_indices == expect_pruned);
        if (e.action == "dropped") {
          REQUIRE(expect.empty());
          REQUIRE(step.drop_empty);
          continue;
        }
        const auto& kept = pruned.kept.at(k_idx++);
        REQUIRE(kept.steps == expect);
        REQUIRE(kept.steps.size() + e.step_indices.size() == c.samples[i].steps.size());
        REQUIRE(kept.answer == c.samples[i].answer);
        REQUIRE(kept.question == c.samples[i].question);
      }
      REQUIRE(k_idx == pruned.kept.size());

      CurationPolicy sample;
      sample.budget = 1 + rng() % 20;
      sample.seed = rng();
      const auto sel = curate(c.samples, c.judgments, sample);
      const auto again = curate(c.samples, c.judgments, sample);
      REQUIRE(sel.kept == again.kept);
      REQUIRE(sel.audit == again.audit);
      std::size_t eligible = 0;
      for (const auto& t : c.judgments.traces) {
        bool ok = true;
        for (std::size_t k = 0; k < t.step_count; ++k) ok = ok && oracle_step_ok(t, k);
        eligible += ok;
      }
      REQUIRE(sel.kept.size() == std::min<std::size_t>(sample.budget, eligible));
      std::size_t dropped = 0;
      for (const auto& e : sel.audit) dropped += e.action == "dropped";
      REQUIRE(sel.kept.size() + dropped == c.samples.size());
      std::string last;
      for (const auto& s : sel.kept) {
        REQUIRE(by_id.count(s.source_id()));
        REQUIRE(s == *by_id[s.source_id()]);
        const auto* t = c.judgments.find(s.source_id());
        for (std::size_t k = 0; k < t->step_count; ++k) REQUIRE(oracle_step_ok(*t, k));
        // corpus order: ids are r<index>, compare by position
        const auto pos = std::stoul(s.source_id().substr(1));
        if (!last.empty()) REQUIRE(pos > std::stoul(last.substr(1)));
        last = s.source_id();
      }
    }
  }

  TEST_CASE("samples without source ids are matched by position") {
    std::vector<SftSample> corpus = {sft("", 2), sft("", 2)};
    JudgmentSet js;
    js.traces = {trace("sft-1", {0, 0}, {1, 1}), trace("sft-2", {1, 0}, {1, 1})};
    CurationPolicy p;
    p.mode = CurationMode::kStepLevel;
    const auto out = curate(corpus, js, p);
    CHECK(out.kept.size() == 1);
    CHECK(out.audit[0].sample_id == "sft-1");
    CHECK(out.audit[0].action == "dropped");
    CHECK(out.audit[1].sample_id == "sft-2");
  }

  TEST_CASE("rejudge pass audits pruned traces") {
    std::vector<SftSample> corpus = {sft("", 2), sft("", 3), sft("", 3)};
    JudgmentSet js;
    js.traces = {trace("sft-1", {0, 0}, {1, 1}), passing("sft-2", 3),
                 trace("sft-3", {1, 0, 1}, {1, 1, 1})};
    CurationPolicy p;
    p.mode = CurationMode::kStepLevel;
    auto out = curate(corpus, js, p);
    REQUIRE(out.kept.size() == 2);
    ScriptedJudge table;
    table.set_default(1);
    // After pruning, sft-3 has two steps; the second no longer follows.
    table.set("sft-3", Aspect::kCoherence, {{1, 0}, {}, {}});
    const JudgeClient client(std::make_shared<ScriptedJudge>(table), support::fast_config());
    const std::vector<Aspect> aspects = {Aspect::kRelevance, Aspect::kCoherence};
    rejudge_pruned(out, client, aspects);
    REQUIRE(out.audit.size() == 4);
    const auto& e = out.audit.back();
    CHECK(e.action == "rejudged");
    CHECK(e.sample_id == "sft-3");
    CHECK(e.step_indices == std::vector<std::size_t>{2});
    CHECK(out.kept.size() == 2);
  }

  TEST_CASE("audit log round-trip") {
    support::TempDir dir;
    std::mt19937_64 rng(3);
    const auto c = random_corpus(rng, 25);
    CurationPolicy p;
    p.mode = CurationMode::kStepLevel;
    const auto out = curate(c.samples, c.judgments, p);
    write_audit(out.audit, dir / "audit.jsonl");
    CHECK(load_audit(dir / "audit.jsonl") == out.audit);
  }
}
