#include "case_eval/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "case_eval/errors.hpp"

namespace case_eval {

namespace {

using nlohmann::json;

// Majority over up to `votes` samples of one prompt. Fails when more than
// half of the samples fail.
std::vector<Label> voted_labels(const JudgeClient& judge, const JudgePrompt& prompt) {
  const auto votes = static_cast<std::size_t>(judge.config().votes);
  std::vector<std::vector<Label>> ok;
  std::string last_error;
  for (std::size_t ordinal = 0; ordinal < votes; ++ordinal) {
    try {
      ok.push_back(judge.call(prompt, ordinal).labels);
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  const auto failures = votes - ok.size();
  if (failures * 2 > votes || ok.empty()) {
    if (votes == 1) throw Error(last_error);
    throw Error(std::to_string(failures) + " of " + std::to_string(votes) +
                " samples failed; last error: " + last_error);
  }
  std::vector<Label> out(prompt.expected_labels);
  std::vector<Label> column(ok.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t v = 0; v < ok.size(); ++v) column[v] = ok[v][i];
    out[i] = strict_majority(column);
  }
  return out;
}

AspectJudgment empty_judgment(Aspect aspect, std::size_t steps) {
  AspectJudgment aj;
  aj.aspect = aspect;
  aj.predictions.assign(steps, std::nullopt);
  return aj;
}

void finalize(AspectJudgment& aj) {
  const auto judged = std::count_if(aj.predictions.begin(), aj.predictions.end(),
                                    [](const auto& p) { return p.has_value(); });
  aj.failed = judged == 0;
  aj.derive_scores();
}

TraceJudgment failed_trace(const BenchmarkSample& sample, Method method,
                           std::span<const Aspect> aspects, const std::string& message) {
  TraceJudgment tj;
  tj.sample_id = sample.id();
  tj.method = method;
  tj.step_count = sample.steps.size();
  for (const auto a : aspects) {
    auto aj = empty_judgment(a, sample.steps.size());
    aj.errors.push_back({0, message});
    finalize(aj);
    tj.aspects.push_back(std::move(aj));
  }
  return tj;
}

json optional_label(const std::optional<Label>& l) {
  return l ? json(static_cast<int>(*l)) : json(nullptr);
}

}  // namespace

std::string_view to_string(Method m) noexcept { return m == Method::kCase ? "case" : "bon"; }

std::string_view display_name(Method m) noexcept { return m == Method::kCase ? "CaSE" : "BoN"; }

std::optional<Method> parse_method(std::string_view name) {
  const auto n = trim(name);
  if (n == "case" || n == "CaSE") return Method::kCase;
  if (n == "bon" || n == "BoN") return Method::kBon;
  return std::nullopt;
}

Label strict_majority(std::span<const Label> votes) {
  if (votes.empty()) throw InvalidInput("majority of an empty vote list");
  const auto ones = static_cast<std::size_t>(std::count(votes.begin(), votes.end(), Label{1}));
  return ones * 2 > votes.size() ? 1 : 0;
}

bool AspectJudgment::complete() const {
  return !predictions.empty() &&
         std::all_of(predictions.begin(), predictions.end(),
                     [](const auto& p) { return p.has_value(); });
}

void AspectJudgment::derive_scores() {
  if (!complete()) {
    solution_level.reset();
    mean.reset();
    return;
  }
  std::vector<Label> labels;
  labels.reserve(predictions.size());
  for (const auto& p : predictions) labels.push_back(*p);
  solution_level = solution_score(labels);
  mean = mean_step_score(labels);
}

const AspectJudgment* TraceJudgment::find(Aspect a) const {
  for (const auto& aj : aspects) {
    if (aj.aspect == a) return &aj;
  }
  return nullptr;
}

bool TraceJudgment::has_failures() const {
  return std::any_of(aspects.begin(), aspects.end(),
                     [](const AspectJudgment& aj) { return aj.failed || !aj.complete(); });
}

const TraceJudgment* JudgmentSet::find(std::string_view sample_id) const {
  for (const auto& t : traces) {
    if (t.sample_id == sample_id) return &t;
  }
  return nullptr;
}

TraceJudgment evaluate_case(const BenchmarkSample& sample, std::span<const Aspect> aspects,
                            const JudgeClient& judge, const EngineOptions& options) {
  if (sample.steps.empty()) throw InvalidInput("sample '" + sample.id() + "' has no steps");
  const auto n = sample.steps.size();
  TraceJudgment tj;
  tj.sample_id = sample.id();
  tj.method = Method::kCase;
  tj.step_count = n;
  for (const auto a : aspects) tj.aspects.push_back(empty_judgment(a, n));

  if (options.combined_aspects) {
    for (std::size_t k = 1; k <= n; ++k) {
      try {
        const auto prompt = build_case_prompt_combined(sample.question, sample.steps, k, aspects);
        const auto labels = voted_labels(judge, prompt);
        for (std::size_t i = 0; i < aspects.size(); ++i) tj.aspects[i].predictions[k - 1] = labels[i];
      } catch (const Error& e) {
        for (auto& aj : tj.aspects) aj.errors.push_back({k, e.what()});
      }
    }
  } else {
    for (auto& aj : tj.aspects) {
      for (std::size_t k = 1; k <= n; ++k) {
        try {
          const auto prompt = build_case_prompt(sample.question, sample.steps, k, aj.aspect);
          aj.predictions[k - 1] = voted_labels(judge, prompt).front();
        } catch (const Error& e) {
          aj.errors.push_back({k, e.what()});
        }
      }
    }
  }
  for (auto& aj : tj.aspects) finalize(aj);
  return tj;
}

TraceJudgment evaluate_bon(const BenchmarkSample& sample, std::span<const Aspect> aspects,
                           const JudgeClient& judge) {
  if (sample.steps.empty()) throw InvalidInput("sample '" + sample.id() + "' has no steps");
  const auto n = sample.steps.size();
  const auto votes = static_cast<std::size_t>(judge.config().votes);
  TraceJudgment tj;
  tj.sample_id = sample.id();
  tj.method = Method::kBon;
  tj.step_count = n;
  for (const auto a : aspects) {
    auto aj = empty_judgment(a, n);
    const auto prompt = build_bon_prompt(sample.question, sample.steps, a);
    std::vector<std::vector<Label>> lists;
    std::vector<std::string> failures;
    for (std::size_t ordinal = 0; ordinal < votes; ++ordinal) {
      try {
        lists.push_back(judge.call(prompt, ordinal).labels);
      } catch (const Error& e) {
        failures.push_back("sample " + std::to_string(ordinal) + ": " + e.what());
      }
    }
    if (failures.size() * 2 > votes) {
      aj.errors.push_back({0, std::to_string(failures.size()) + " of " + std::to_string(votes) +
                                  " whole-trace judgments failed; " + failures.back()});
    } else {
      for (const auto& f : failures) aj.errors.push_back({0, f});
      std::vector<Label> column(lists.size());
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t v = 0; v < lists.size(); ++v) column[v] = lists[v][k];
        aj.predictions[k] = strict_majority(column);
      }
    }
    finalize(aj);
    tj.aspects.push_back(std::move(aj));
  }
  return tj;
}

JudgmentSet evaluate_samples(std::string benchmark, std::span<const BenchmarkSample> samples,
                             Method method, std::span<const Aspect> aspects,
                             const JudgeClient& judge, std::size_t concurrency_limit,
                             const EngineOptions& options) {
  if (concurrency_limit < 1) throw InvalidInput("concurrency limit must be at least 1");
  if (aspects.empty()) throw InvalidInput("no aspects requested");

  std::vector<TraceJudgment> results(samples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
      const auto& sample = samples[i];
      try {
        results[i] = method == Method::kCase ? evaluate_case(sample, aspects, judge, options)
                                             : evaluate_bon(sample, aspects, judge);
      } catch (const std::exception& e) {
        results[i] = failed_trace(sample, method, aspects, e.what());
      }
    }
  };
  {
    const auto workers = std::min(concurrency_limit, std::max<std::size_t>(samples.size(), 1));
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  JudgmentSet set;
  set.benchmark = std::move(benchmark);
  set.judge_model = judge.config().model;
  set.method = method;
  set.traces = std::move(results);
  set.meta.timestamp = utc_timestamp();
  set.meta.config_digest = judge.config().digest();
  set.meta.template_version =
      std::string(method == Method::kCase ? kCaseTemplateVersion : kBonTemplateVersion);
  set.meta.aspects.assign(aspects.begin(), aspects.end());
  set.meta.samples = set.traces.size();
  set.meta.failed_samples = static_cast<std::size_t>(std::count_if(
      set.traces.begin(), set.traces.end(), [](const auto& t) { return t.has_failures(); }));
  return set;
}

JudgmentSet evaluate_corpus(const BenchmarkSet& set, Method method,
                            std::span<const Aspect> aspects, const JudgeClient& judge,
                            std::size_t concurrency_limit, const EngineOptions& options) {
  return evaluate_samples(set.name, set.samples, method, aspects, judge, concurrency_limit,
                          options);
}

std::string serialize_judgments(const JudgmentSet& set) {
  std::ostringstream out;
  json aspects = json::array();
  for (const auto a : set.meta.aspects) aspects.push_back(to_string(a));
  const json header{{"type", "run"},
                    {"benchmark", set.benchmark},
                    {"judge_model", set.judge_model},
                    {"method", to_string(set.method)},
                    {"timestamp", set.meta.timestamp},
                    {"config_digest", set.meta.config_digest},
                    {"template_version", set.meta.template_version},
                    {"aspects", aspects},
                    {"samples", set.meta.samples},
                    {"failed_samples", set.meta.failed_samples}};
  out << header.dump() << '\n';
  for (const auto& t : set.traces) {
    for (const auto& aj : t.aspects) {
      json labels = json::array();
      for (const auto& p : aj.predictions) labels.push_back(optional_label(p));
      json errors = json::array();
      for (const auto& e : aj.errors) errors.push_back({{"step", e.step}, {"message", e.message}});
      const json rec{{"sample_id", t.sample_id},
                     {"method", to_string(t.method)},
                     {"aspect", to_string(aj.aspect)},
                     {"step_labels", labels},
                     {"solution_level", optional_label(aj.solution_level)},
                     {"mean", aj.mean ? json(*aj.mean) : json(nullptr)},
                     {"errors", errors},
                     {"failed", aj.failed}};
      out << rec.dump() << '\n';
    }
  }
  return out.str();
}

JudgmentSet parse_judgments(std::istream& in) {
  JudgmentSet set;
  bool have_header = false;
  std::unordered_map<std::string, std::size_t> index;
  for_each_jsonl(in, [&](std::size_t line, const json& rec) {
    try {
      if (rec.value("type", "") == "run") {
        set.benchmark = rec.at("benchmark").get<std::string>();
        set.judge_model = rec.at("judge_model").get<std::string>();
        const auto m = parse_method(rec.at("method").get<std::string>());
        if (!m) throw ParseError(line, "unknown method");
        set.method = *m;
        set.meta.timestamp = rec.value("timestamp", "");
        set.meta.config_digest = rec.value("config_digest", "");
        set.meta.template_version = rec.value("template_version", "");
        for (const auto& a : rec.value("aspects", json::array())) {
          const auto aspect = parse_aspect(a.get<std::string>());
          if (!aspect) throw ParseError(line, "unknown aspect in run header");
          set.meta.aspects.push_back(*aspect);
        }
        set.meta.samples = rec.value("samples", std::size_t{0});
        set.meta.failed_samples = rec.value("failed_samples", std::size_t{0});
        have_header = true;
        return;
      }
      const auto id = rec.at("sample_id").get<std::string>();
      const auto aspect = parse_aspect(rec.at("aspect").get<std::string>());
      const auto method = parse_method(rec.at("method").get<std::string>());
      if (!aspect || !method) throw ParseError(line, "unknown aspect or method");
      AspectJudgment aj;
      aj.aspect = *aspect;
      for (const auto& l : rec.at("step_labels")) {
        if (l.is_null()) {
          aj.predictions.emplace_back(std::nullopt);
        } else {
          const auto v = l.get<int>();
          if (v != 0 && v != 1) throw ParseError(line, "step label must be 0, 1 or null");
          aj.predictions.emplace_back(static_cast<Label>(v));
        }
      }
      for (const auto& e : rec.value("errors", json::array())) {
        aj.errors.push_back({e.at("step").get<std::size_t>(), e.at("message").get<std::string>()});
      }
      aj.failed = rec.value("failed", false);
      aj.derive_scores();
      auto [it, inserted] = index.try_emplace(id, set.traces.size());
      if (inserted) {
        TraceJudgment tj;
        tj.sample_id = id;
        tj.method = *method;
        tj.step_count = aj.predictions.size();
        set.traces.push_back(std::move(tj));
      }
      auto& tj = set.traces[it->second];
      if (tj.step_count != aj.predictions.size()) {
        throw ParseError(line, "step count differs between aspects of sample '" + id + "'");
      }
      if (tj.find(aj.aspect)) throw ParseError(line, "duplicate aspect record for '" + id + "'");
      tj.aspects.push_back(std::move(aj));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, e.what());
    }
  });
  if (!have_header) throw ParseError(1, "judgment file lacks a run header");
  return set;
}

void write_judgments(const JudgmentSet& set, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_judgments(set));
}

JudgmentSet load_judgments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open judgment file " + path.string());
  return parse_judgments(in);
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  // Reproducible-builds convention: a fixed clock for byte-identical outputs.
  if (const char* fixed = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      now = static_cast<std::time_t>(std::stoll(fixed));
    } catch (const std::exception&) {
      throw InvalidInput("SOURCE_DATE_EPOCH must be an integer");
    }
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace case_eval
