#include "case_eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "case_eval/errors.hpp"

namespace case_eval {

namespace {

void check_pair(std::span<const Label> pred, std::span<const Label> gold) {
  if (pred.size() != gold.size()) {
    throw InvalidInput("prediction/gold length mismatch: " + std::to_string(pred.size()) + " vs " +
                       std::to_string(gold.size()));
  }
  if (pred.empty()) throw InvalidInput("metrics need at least one label pair");
}

double class_f1(std::size_t hits, std::size_t false_pos, std::size_t false_neg) {
  return 2.0 * static_cast<double>(hits) / static_cast<double>(2 * hits + false_pos + false_neg);
}

std::vector<Label> fused_gold(const AnnotatorLabels& annotators, std::size_t steps) {
  std::vector<Label> out(steps);
  std::vector<Label> column(annotators.size());
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t a = 0; a < annotators.size(); ++a) column[a] = annotators[a][k];
    out[k] = majority_label(column);
  }
  return out;
}

std::optional<double> mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

std::optional<double> stddev_of(const std::vector<double>& xs) {
  const auto m = mean_of(xs);
  if (!m) return std::nullopt;
  double acc = 0.0;
  for (const auto x : xs) acc += (x - *m) * (x - *m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

}  // namespace

Label majority_label(std::span<const Label> annotator_labels) {
  if (annotator_labels.empty()) throw InvalidInput("majority_label: no annotator labels");
  return strict_majority(annotator_labels);
}

double Confusion::accuracy() const {
  if (total() == 0) throw InvalidInput("accuracy of an empty confusion matrix");
  return static_cast<double>(tp + tn) / static_cast<double>(total());
}

double Confusion::macro_f1() const {
  if (total() == 0) throw InvalidInput("macro-F1 of an empty confusion matrix");
  double sum = 0.0;
  int classes = 0;
  if (tp + fp + fn > 0) {
    sum += class_f1(tp, fp, fn);
    ++classes;
  }
  if (tn + fn + fp > 0) {
    sum += class_f1(tn, fn, fp);
    ++classes;
  }
  return sum / classes;
}

Confusion& Confusion::operator+=(const Confusion& other) noexcept {
  tp += other.tp;
  fp += other.fp;
  tn += other.tn;
  fn += other.fn;
  return *this;
}

Confusion confusion(std::span<const Label> pred, std::span<const Label> gold) {
  check_pair(pred, gold);
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && gold[i] == 1) ++c.tp;
    if (pred[i] == 1 && gold[i] == 0) ++c.fp;
    if (pred[i] == 0 && gold[i] == 0) ++c.tn;
    if (pred[i] == 0 && gold[i] == 1) ++c.fn;
  }
  return c;
}

double accuracy(std::span<const Label> pred, std::span<const Label> gold) {
  return confusion(pred, gold).accuracy();
}

double macro_f1(std::span<const Label> pred, std::span<const Label> gold) {
  return confusion(pred, gold).macro_f1();
}

std::string_view to_string(Pooling p) noexcept {
  return p == Pooling::kMicro ? "micro" : "per-sample";
}

std::optional<Pooling> parse_pooling(std::string_view name) {
  const auto n = trim(name);
  if (n == "micro") return Pooling::kMicro;
  if (n == "per-sample") return Pooling::kPerSample;
  return std::nullopt;
}

AspectReport aspect_report(const JudgmentSet& judgments, const BenchmarkSet& gold,
                           Pooling pooling) {
  std::set<std::string> judged_ids;
  std::set<std::string> gold_ids;
  for (const auto& t : judgments.traces) judged_ids.insert(t.sample_id);
  for (const auto& s : gold.samples) gold_ids.insert(s.id());
  std::vector<std::string> orphans;
  for (const auto& id : judged_ids) {
    if (!gold_ids.count(id)) orphans.push_back("judged-only:" + id);
  }
  for (const auto& id : gold_ids) {
    if (!judged_ids.count(id)) orphans.push_back("gold-only:" + id);
  }
  if (!orphans.empty()) {
    std::string msg = "judgment and gold sample ids do not align:";
    for (const auto& o : orphans) msg += " " + o;
    throw InvalidInput(msg);
  }

  AspectReport report;
  report.benchmark = judgments.benchmark;
  report.method = std::string(display_name(judgments.method));
  report.judge_model = judgments.judge_model;
  report.pooling = pooling;

  for (const auto aspect : kAllAspects) {
    auto& m = report.aspects[index_of(aspect)];
    m.aspect = aspect;
    std::vector<double> per_sample_acc;
    std::vector<double> per_sample_f1;
    // Sorted by id so the result does not depend on sample order.
    std::vector<const TraceJudgment*> traces;
    for (const auto& t : judgments.traces) traces.push_back(&t);
    std::sort(traces.begin(), traces.end(),
              [](const auto* a, const auto* b) { return a->sample_id < b->sample_id; });
    for (const auto* t : traces) {
      const auto* aj = t->find(aspect);
      if (aj == nullptr) continue;
      const auto* sample = gold.find(t->sample_id);
      if (aj->predictions.size() != sample->steps.size()) {
        throw InvalidInput("sample '" + t->sample_id + "': " + std::string(to_string(aspect)) +
                           " judgment covers " + std::to_string(aj->predictions.size()) +
                           " steps, gold has " + std::to_string(sample->steps.size()));
      }
      const auto& annotators = sample->annotators(aspect);
      if (annotators.empty()) {
        m.excluded += aj->predictions.size();
        continue;
      }
      const auto fused = fused_gold(annotators, sample->steps.size());
      Confusion c;
      for (std::size_t k = 0; k < fused.size(); ++k) {
        const auto& p = aj->predictions[k];
        if (!p) {
          ++m.excluded;
          continue;
        }
        const Label pred[] = {*p};
        const Label g[] = {fused[k]};
        c += confusion(pred, g);
      }
      if (c.total() > 0) {
        per_sample_acc.push_back(c.accuracy());
        per_sample_f1.push_back(c.macro_f1());
      }
      m.confusion += c;
    }
    m.judged = m.confusion.total();
    m.present = m.judged > 0;
    if (!m.present) continue;
    if (pooling == Pooling::kMicro) {
      m.accuracy = m.confusion.accuracy();
      m.macro_f1 = m.confusion.macro_f1();
    } else {
      m.accuracy = *mean_of(per_sample_acc);
      m.macro_f1 = *mean_of(per_sample_f1);
    }
  }

  std::vector<double> accs;
  std::vector<double> f1s;
  for (const auto& m : report.aspects) {
    if (!m.present) continue;
    accs.push_back(m.accuracy);
    f1s.push_back(m.macro_f1);
  }
  report.average_accuracy = mean_of(accs);
  report.average_macro_f1 = mean_of(f1s);
  return report;
}

AnalysisReport annotation_analysis(const BenchmarkSet& set) {
  AnalysisReport r;
  r.benchmark = set.name;
  r.samples = set.samples.size();
  CrossTab rel{"relevance", {}};
  CrossTab coh{"coherence", {}};
  CrossTab both{"relevance+coherence", {}};
  // [aspect][answer_correct]
  std::array<std::array<std::vector<double>, 2>, kAspectCount> means;

  for (const auto& s : set.samples) {
    for (const auto a : {Aspect::kRelevance, Aspect::kCoherence}) {
      if (s.annotators(a).empty()) {
        throw InvalidInput("sample '" + s.id() + "' has no " + std::string(to_string(a)) +
                           " annotations");
      }
    }
    const auto rel_gold = fused_gold(s.annotators(Aspect::kRelevance), s.steps.size());
    const auto coh_gold = fused_gold(s.annotators(Aspect::kCoherence), s.steps.size());
    const auto rel_ok = solution_score(rel_gold);
    const auto coh_ok = solution_score(coh_gold);
    const Label both_ok = rel_ok & coh_ok;
    const auto valid = s.solution_correct;
    ++rel.counts[rel_ok][valid];
    ++coh.counts[coh_ok][valid];
    ++both.counts[both_ok][valid];

    std::optional<bool> answer_correct;
    try {
      answer_correct = answers_equivalent(s.final_answer, s.gold_answer, set.style);
    } catch (const ExtractionError&) {
      ++r.unscorable_answers;
    }
    if (!answer_correct) continue;

    if (valid == 0) {
      auto& bucket = both_ok ? r.rc_satisfied : r.rc_violated;
      ++bucket.total;
      if (*answer_correct) ++bucket.hits;
    }
    for (const auto a : kAllAspects) {
      const auto& annotators = s.annotators(a);
      if (annotators.empty()) continue;
      const auto fused = fused_gold(annotators, s.steps.size());
      means[index_of(a)][*answer_correct ? 1 : 0].push_back(mean_step_score(fused));
    }
  }
  r.cross_tabs = {rel, coh, both};
  for (const auto a : kAllAspects) {
    for (const bool correct : {false, true}) {
      ScoreDistribution d;
      d.aspect = a;
      d.answer_correct = correct;
      d.values = means[index_of(a)][correct ? 1 : 0];
      d.mean = mean_of(d.values);
      d.stddev = stddev_of(d.values);
      r.distributions.push_back(std::move(d));
    }
  }
  return r;
}

}  // namespace case_eval
