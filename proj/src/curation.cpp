#include "case_eval/curation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "case_eval/errors.hpp"

namespace case_eval {

namespace {

using nlohmann::json;

std::string join_indices(const std::vector<std::size_t>& idx) {
  std::string out;
  for (const auto i : idx) {
    if (!out.empty()) out += ',';
    out += std::to_string(i);
  }
  return out;
}

std::string join_aspects(const std::vector<Aspect>& aspects) {
  std::string out;
  for (const auto a : aspects) {
    if (!out.empty()) out += '+';
    out += to_string(a);
  }
  return out;
}

const TraceJudgment& judgment_for(const JudgmentSet& judgments, const std::string& id,
                                  std::size_t steps) {
  const auto* tj = judgments.find(id);
  if (tj == nullptr) throw InvalidInput("no judgments for sample '" + id + "'");
  if (tj->step_count != steps) {
    throw InvalidInput("judgments for sample '" + id + "' cover " + std::to_string(tj->step_count) +
                       " steps, sample has " + std::to_string(steps));
  }
  return *tj;
}

std::vector<std::size_t> failing_steps(const TraceJudgment& tj, const std::vector<Aspect>& required) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < tj.step_count; ++k) {
    if (!step_passes(tj, k, required)) out.push_back(k + 1);
  }
  return out;
}

// Uniform in [0, 1) from the top 53 bits; fixed across platforms, unlike
// std::uniform_real_distribution.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Selection sampling (Knuth, Algorithm S): each subset of size `take` is
// equally likely and the result stays in input order.
std::vector<std::size_t> seeded_subset(std::size_t n, std::size_t take, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < n && out.size() < take; ++i) {
    const auto remaining = static_cast<double>(n - i);
    const auto needed = static_cast<double>(take - out.size());
    if (remaining * unit_draw(rng) < needed) out.push_back(i);
  }
  return out;
}

std::size_t text_length(const SftSample& s) {
  std::size_t n = 0;
  for (const auto& step : s.steps) n += step.size();
  return n;
}

CuratedCorpus start_corpus(const std::vector<SftSample>& corpus, const CurationPolicy& policy) {
  policy.validate();
  if (corpus.empty()) throw InvalidInput("cannot curate an empty corpus");
  CuratedCorpus out;
  out.policy_digest = policy.digest();
  return out;
}

}  // namespace

std::string_view to_string(CurationMode m) noexcept {
  return m == CurationMode::kStepLevel ? "step-level" : "sample-level";
}

std::optional<CurationMode> parse_curation_mode(std::string_view name) {
  const auto n = trim(name);
  if (n == "step-level" || n == "step") return CurationMode::kStepLevel;
  if (n == "sample-level" || n == "sample") return CurationMode::kSampleLevel;
  return std::nullopt;
}

std::string_view to_string(SelectionStrategy s) noexcept {
  return s == SelectionStrategy::kUniform ? "uniform" : "longest-first";
}

std::optional<SelectionStrategy> parse_selection_strategy(std::string_view name) {
  const auto n = trim(name);
  if (n == "uniform") return SelectionStrategy::kUniform;
  if (n == "longest-first") return SelectionStrategy::kLongestFirst;
  return std::nullopt;
}

void CurationPolicy::validate() const {
  if (required.empty()) throw InvalidInput("curation policy needs at least one required aspect");
  if (mode == CurationMode::kSampleLevel && budget < 1) {
    throw InvalidInput("sample-level curation needs a budget of at least 1");
  }
}

std::string CurationPolicy::digest() const {
  json req = json::array();
  for (const auto a : required) req.push_back(to_string(a));
  const json j{{"mode", to_string(mode)},
               {"required", req},
               {"budget", budget},
               {"seed", seed},
               {"drop_empty", drop_empty},
               {"selection", to_string(selection)}};
  return sha256_hex(j.dump()).substr(0, 16);
}

std::string sft_sample_id(const SftSample& sample, std::size_t position) {
  auto id = sample.source_id();
  if (!id.empty()) return id;
  return "sft-" + std::to_string(position);
}

bool step_passes(const TraceJudgment& judgment, std::size_t step,
                 const std::vector<Aspect>& required) {
  for (const auto a : required) {
    const auto* aj = judgment.find(a);
    if (aj == nullptr) {
      throw InvalidInput("judgments for sample '" + judgment.sample_id + "' lack " +
                         std::string(to_string(a)));
    }
    if (step >= aj->predictions.size()) {
      throw InvalidInput("judgment vector for sample '" + judgment.sample_id + "' is too short");
    }
    const auto& p = aj->predictions[step];
    if (!p || *p != 1) return false;
  }
  return true;
}

StepFilterResult filter_steps(const SftSample& sample, const std::string& sample_id,
                              const TraceJudgment& judgment, const CurationPolicy& policy) {
  if (judgment.step_count != sample.steps.size()) {
    throw InvalidInput("judgments for sample '" + sample_id + "' cover " +
                       std::to_string(judgment.step_count) + " steps, sample has " +
                       std::to_string(sample.steps.size()));
  }
  for (const auto a : policy.required) {
    const auto* aj = judgment.find(a);
    if (aj == nullptr || aj->predictions.size() != sample.steps.size()) {
      throw InvalidInput("judgment vector length mismatch for sample '" + sample_id + "' (" +
                         std::string(to_string(a)) + ")");
    }
  }

  StepFilterResult result;
  result.audit.sample_id = sample_id;
  SftSample kept = sample;
  kept.steps.clear();
  std::vector<std::size_t> pruned;
  for (std::size_t k = 0; k < sample.steps.size(); ++k) {
    if (step_passes(judgment, k, policy.required)) {
      kept.steps.push_back(sample.steps[k]);
    } else {
      pruned.push_back(k + 1);
    }
  }
  result.audit.step_indices = pruned;
  if (pruned.empty()) {
    result.audit.action = "kept";
    result.audit.reason = "all steps pass " + join_aspects(policy.required);
    result.kept = sample;
  } else if (kept.steps.empty()) {
    if (policy.drop_empty) {
      result.audit.action = "dropped";
      result.audit.reason = "no step passes " + join_aspects(policy.required);
    } else {
      result.audit.action = "pruned";
      result.audit.reason = "no step passes " + join_aspects(policy.required) +
                            "; kept as answer-only";
      kept.meta["answer_only"] = true;
      result.kept = std::move(kept);
    }
  } else {
    result.audit.action = "pruned";
    result.audit.reason = "steps " + join_indices(pruned) + " fail " + join_aspects(policy.required);
    result.kept = std::move(kept);
  }
  return result;
}

CuratedCorpus filter_corpus_steps(const std::vector<SftSample>& corpus,
                                  const JudgmentSet& judgments, const CurationPolicy& policy) {
  auto out = start_corpus(corpus, policy);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto id = sft_sample_id(corpus[i], i + 1);
    const auto& tj = judgment_for(judgments, id, corpus[i].steps.size());
    auto r = filter_steps(corpus[i], id, tj, policy);
    if (r.kept) out.kept.push_back(*std::move(r.kept));
    out.audit.push_back(std::move(r.audit));
  }
  return out;
}

CuratedCorpus filter_samples(const std::vector<SftSample>& corpus, const JudgmentSet& judgments,
                             const CurationPolicy& policy) {
  auto out = start_corpus(corpus, policy);
  std::vector<std::size_t> eligible;
  std::vector<AuditEntry> entries(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto id = sft_sample_id(corpus[i], i + 1);
    const auto& tj = judgment_for(judgments, id, corpus[i].steps.size());
    auto failing = failing_steps(tj, policy.required);
    entries[i].sample_id = id;
    if (failing.empty()) {
      eligible.push_back(i);
    } else {
      entries[i].action = "dropped";
      entries[i].reason = "ineligible: steps " + join_indices(failing) + " fail " +
                          join_aspects(policy.required);
      entries[i].step_indices = std::move(failing);
    }
  }

  const auto take = std::min(policy.budget, eligible.size());
  if (take < policy.budget) {
    out.warnings.push_back("budget " + std::to_string(policy.budget) + " exceeds the " +
                           std::to_string(eligible.size()) + " eligible samples");
  }
  std::vector<std::size_t> chosen;
  if (policy.selection == SelectionStrategy::kUniform) {
    for (const auto pos : seeded_subset(eligible.size(), take, policy.seed)) {
      chosen.push_back(eligible[pos]);
    }
  } else {
    auto ranked = eligible;
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      return text_length(corpus[a]) > text_length(corpus[b]);
    });
    chosen.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<bool> is_chosen(corpus.size(), false);
  for (const auto i : chosen) is_chosen[i] = true;
  for (const auto i : eligible) {
    if (is_chosen[i]) {
      entries[i].action = "selected";
      entries[i].reason = "all steps pass " + join_aspects(policy.required);
    } else {
      entries[i].action = "dropped";
      entries[i].reason = "eligible but not selected under budget " + std::to_string(policy.budget);
    }
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (is_chosen[i]) out.kept.push_back(corpus[i]);
  }
  out.audit = std::move(entries);
  return out;
}

CuratedCorpus curate(const std::vector<SftSample>& corpus, const JudgmentSet& judgments,
                     const CurationPolicy& policy) {
  return policy.mode == CurationMode::kStepLevel ? filter_corpus_steps(corpus, judgments, policy)
                                                 : filter_samples(corpus, judgments, policy);
}

void rejudge_pruned(CuratedCorpus& corpus, const JudgeClient& judge,
                    const std::vector<Aspect>& aspects) {
  // Kept samples follow corpus order, as do the audit entries that kept them.
  std::vector<const AuditEntry*> kept_entries;
  for (const auto& e : corpus.audit) {
    if (e.action == "kept" || e.action == "pruned" || e.action == "selected") {
      kept_entries.push_back(&e);
    }
  }
  if (kept_entries.size() != corpus.kept.size()) {
    throw InvalidInput("audit log does not match the kept samples");
  }
  std::vector<AuditEntry> added;
  for (std::size_t i = 0; i < corpus.kept.size(); ++i) {
    const auto& s = corpus.kept[i];
    const auto& id = kept_entries[i]->sample_id;
    if (kept_entries[i]->action != "pruned" || s.steps.empty()) continue;
    const auto tj = evaluate_case(as_benchmark_sample(s, id), aspects, judge);
    AuditEntry e;
    e.sample_id = id;
    e.action = "rejudged";
    std::vector<std::size_t> failing;
    bool errors = false;
    for (std::size_t k = 0; k < tj.step_count; ++k) {
      for (const auto& aj : tj.aspects) {
        if (!aj.predictions[k]) errors = true;
        if (!aj.predictions[k] || *aj.predictions[k] != 1) {
          failing.push_back(k + 1);
          break;
        }
      }
    }
    e.step_indices = failing;
    if (failing.empty()) {
      e.reason = "pruned trace passes " + join_aspects(aspects);
    } else {
      e.reason = "pruned trace steps " + join_indices(failing) + " fail " + join_aspects(aspects) +
                 (errors ? " (some judgments failed)" : "");
    }
    added.push_back(std::move(e));
  }
  corpus.audit.insert(corpus.audit.end(), added.begin(), added.end());
}

void write_audit(const std::vector<AuditEntry>& audit, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& e : audit) {
    out << json{{"sample_id", e.sample_id},
                {"action", e.action},
                {"reason", e.reason},
                {"step_indices", e.step_indices}}
               .dump()
        << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<AuditEntry> load_audit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open audit file " + path.string());
  std::vector<AuditEntry> out;
  for_each_jsonl(in, [&](std::size_t line, const json& rec) {
    try {
      out.push_back({rec.at("sample_id").get<std::string>(), rec.at("action").get<std::string>(),
                     rec.at("reason").get<std::string>(),
                     rec.at("step_indices").get<std::vector<std::size_t>>()});
    } catch (const json::exception& e) {
      throw ParseError(line, e.what());
    }
  });
  return out;
}

}  // namespace case_eval
