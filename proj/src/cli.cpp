#include "case_eval/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "case_eval/curation.hpp"
#include "case_eval/dataset.hpp"
#include "case_eval/engine.hpp"
#include "case_eval/errors.hpp"
#include "case_eval/guidance.hpp"
#include "case_eval/metrics.hpp"
#include "case_eval/report.hpp"

#ifndef CASE_EVAL_TEMPLATE_DIR
#define CASE_EVAL_TEMPLATE_DIR "templates"
#endif

namespace case_eval::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr std::string_view kAllAspectList = "relevance,coherence,correctness";

// ---------------------------------------------------------------------------
// Flag groups

struct Common {
  std::string config;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
};

struct JudgeFlags {
  std::string judge;
  std::string model = "scripted";
  double temperature = 0.0;
  int max_tokens = 1024;
  double timeout_s = 60.0;
  int max_retries = 4;
  std::size_t max_concurrency = 8;
  std::string cache_dir;
  int n = 0;
  bool self_consistency = false;
  bool combined = false;
  std::string aspects = std::string(kAllAspectList);

  CLI::Option* n_opt = nullptr;
  CLI::Option* temperature_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON settings file (keys are flag names)");
  sub->add_option("--out-dir", c.out_dir, "Directory for every artifact")->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed for all randomness")->capture_default_str();
}

void add_judge_flags(CLI::App* sub, JudgeFlags& j) {
  sub->add_option("--judge", j.judge, "scripted:<verdicts.jsonl> or an http(s) endpoint");
  sub->add_option("--model", j.model, "Judge model name")->capture_default_str();
  j.temperature_opt = sub->add_option("--temperature", j.temperature,
                                      "Sampling temperature (default 0 for case, 0.7 for bon)");
  sub->add_option("--max-tokens", j.max_tokens, "Response token limit")->capture_default_str();
  sub->add_option("--timeout", j.timeout_s, "Per-request timeout in seconds")->capture_default_str();
  sub->add_option("--max-retries", j.max_retries, "Retries on transient failures")
      ->capture_default_str();
  sub->add_option("--max-concurrency", j.max_concurrency, "Bounded in-flight requests")
      ->capture_default_str();
  sub->add_option("--cache-dir", j.cache_dir, "Response cache directory");
  j.n_opt = sub->add_option("--n", j.n, "Votes: BoN samples, or self-consistency votes for case");
  sub->add_flag("--self-consistency", j.self_consistency, "Majority over --n samples per CaSE step");
  sub->add_flag("--combined", j.combined, "One CaSE prompt per step covering all aspects");
  sub->add_option("--aspects", j.aspects, "Comma-separated aspects")->capture_default_str();
}

// ---------------------------------------------------------------------------
// Config file and environment layers

std::string env_name(const std::string& flag) {
  std::string out = "CASE_EVAL_";
  for (const char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(c));
  return out;
}

std::string config_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) out += (out.empty() ? "" : ",") + config_value(e);
    return out;
  }
  return v.dump();
}

json read_config(const std::string& path) {
  json cfg;
  try {
    cfg = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
  return cfg;
}

std::string long_name(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

// Fills options not given on the command line from the environment, then
// from the config file.
void apply_layers(CLI::App& app, CLI::App* sub, const std::string& config_flag) {
  std::string config_path = config_flag;
  if (config_path.empty()) {
    if (const char* e = std::getenv("CASE_EVAL_CONFIG")) config_path = e;
  }
  json cfg = json::object();
  if (!config_path.empty()) cfg = read_config(config_path);

  std::set<std::string> known;
  for (const auto* s : app.get_subcommands({})) {
    for (const auto* o : s->get_options()) known.insert(long_name(o));
  }
  for (const auto& [key, value] : cfg.items()) {
    if (key == "api-key" || key == "api_key") {
      throw UsageError("credentials are read from CASE_EVAL_API_KEY only");
    }
    if (!known.count(key)) throw UsageError("unknown config key '" + key + "'");
  }

  for (auto* opt : sub->get_options()) {
    const auto name = long_name(opt);
    if (name.empty() || name == "help" || name == "config" || opt->count() > 0) continue;
    std::optional<std::string> value;
    if (const char* e = std::getenv(env_name(name).c_str())) {
      value = e;
    } else if (cfg.contains(name)) {
      value = config_value(cfg.at(name));
    }
    if (!value) continue;
    try {
      opt->add_result(*value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("bad value for " + name + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Helpers

template <typename T, typename Parse>
T parse_or_usage(const std::string& text, Parse parse, std::string_view what) {
  const auto v = parse(text);
  if (!v) throw UsageError(fmt::format("unknown {} '{}'", what, text));
  return *v;
}

std::vector<Aspect> aspects_or_usage(const std::string& csv) {
  try {
    return parse_aspect_list(csv);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir.empty() ? "." : dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create output directory " + p.string() + ": " + ec.message());
  return p;
}

std::string extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::kTable: return "txt";
    case ReportFormat::kCsv: return "csv";
    case ReportFormat::kRecords: return "jsonl";
  }
  return "txt";
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

JudgeConfig judge_config(const JudgeFlags& f, Method method, const ChatBackend& backend,
                         std::uint64_t seed) {
  JudgeConfig cfg = method == Method::kBon ? JudgeConfig::bon_defaults()
                                           : JudgeConfig::case_defaults();
  const bool n_given = f.n_opt->count() > 0;
  if (n_given && f.n < 1) throw UsageError("--n must be at least 1");
  if (method == Method::kBon) {
    if (f.self_consistency) throw UsageError("--self-consistency applies to method case only");
    if (n_given) cfg.votes = f.n;
  } else if (f.self_consistency) {
    if (!n_given) throw UsageError("--self-consistency needs --n");
    cfg.votes = f.n;
    cfg.temperature = 0.7;
  }
  if (f.temperature_opt->count() > 0) cfg.temperature = f.temperature;
  if (cfg.temperature < 0) throw UsageError("--temperature must be >= 0");
  if (f.max_tokens < 1) throw UsageError("--max-tokens must be >= 1");
  if (f.timeout_s <= 0) throw UsageError("--timeout must be positive");
  if (f.max_retries < 0) throw UsageError("--max-retries must be >= 0");
  if (f.max_concurrency < 1) throw UsageError("--max-concurrency must be >= 1");
  cfg.endpoint = f.judge;
  cfg.model = f.model;
  cfg.max_tokens = f.max_tokens;
  cfg.timeout = std::chrono::milliseconds(static_cast<long long>(f.timeout_s * 1000));
  cfg.max_retries = f.max_retries;
  cfg.max_in_flight = f.max_concurrency;
  cfg.seed = seed;
  if (!f.cache_dir.empty()) cfg.cache_dir = fs::path(f.cache_dir);
  if (!backend.remote()) cfg.backoff_base = std::chrono::milliseconds(0);
  return cfg;
}

// Checks flag combinations that do not depend on the method.
void check_judge_flags(const JudgeFlags& f, bool case_selected) {
  if (f.judge.empty()) throw UsageError("--judge is required");
  const bool n_given = f.n_opt->count() > 0;
  if (n_given && f.n < 1) throw UsageError("--n must be at least 1");
  if (f.self_consistency && !case_selected) {
    throw UsageError("--self-consistency applies to method case only");
  }
  if (f.combined && !case_selected) throw UsageError("--combined applies to method case only");
}

std::shared_ptr<ChatBackend> backend_or_usage(const std::string& uri) {
  if (uri.rfind("scripted:", 0) != 0 && uri.rfind("http://", 0) != 0 &&
      uri.rfind("https://", 0) != 0) {
    throw UsageError("unsupported endpoint '" + uri + "' (expected scripted:<file> or http(s)://)");
  }
  return make_backend(uri);
}

std::optional<AnswerStyle> style_or_usage(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_or_usage<AnswerStyle>(s, parse_answer_style, "answer style");
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

JudgmentSet run_method(const BenchmarkSet& set, Method method, const std::vector<Aspect>& aspects,
                       const JudgeFlags& f, std::uint64_t seed,
                       const std::shared_ptr<ChatBackend>& backend) {
  const JudgeClient client(backend, judge_config(f, method, *backend, seed));
  EngineOptions opts;
  opts.combined_aspects = f.combined && method == Method::kCase;
  return evaluate_corpus(set, method, aspects, client, f.max_concurrency, opts);
}

void summarize_run(const JudgmentSet& js, const fs::path& path, std::ostream& out,
                   std::ostream& err) {
  out << fmt::format("{}: judged {} samples ({} failed) -> {}\n", display_name(js.method),
                     js.meta.samples, js.meta.failed_samples, path.string());
  for (const auto& t : js.traces) {
    for (const auto& a : t.aspects) {
      for (const auto& e : a.errors) {
        err << fmt::format("warning: {} {} step {}: {}\n", t.sample_id, to_string(a.aspect),
                           e.step, e.message);
      }
    }
  }
}

bool run_failed(const JudgmentSet& js) {
  return js.meta.samples > 0 && js.meta.failed_samples == js.meta.samples;
}

// ---------------------------------------------------------------------------
// Subcommands

struct EvaluateArgs {
  Common common;
  JudgeFlags judge;
  std::string dataset;
  std::string method = "case";
  std::string style;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.dataset.empty()) throw UsageError("--dataset is required");
  const auto method = parse_or_usage<Method>(a.method, parse_method, "method");
  check_judge_flags(a.judge, method == Method::kCase);
  const auto aspects = aspects_or_usage(a.judge.aspects);
  const auto style = style_or_usage(a.style);
  const auto backend = backend_or_usage(a.judge.judge);
  judge_config(a.judge, method, *backend, a.common.seed);  // validate before loading data

  const auto set = load_benchmark(a.dataset, style);
  print_warnings(set.warnings, err);
  const auto dir = prepare_out_dir(a.common.out_dir);
  const auto js = run_method(set, method, aspects, a.judge, a.common.seed, backend);
  const auto path = dir / fmt::format("judgments_{}.jsonl", to_string(method));
  write_judgments(js, path);
  summarize_run(js, path, out, err);
  return run_failed(js) ? kExitFailure : kExitOk;
}

struct CompareArgs {
  Common common;
  JudgeFlags judge;
  std::string dataset;
  std::string methods = "case,bon";
  std::string style;
  std::string format = "table";
  std::string pooling = "micro";
};

int cmd_compare(const CompareArgs& a, std::ostream& out, std::ostream& err) {
  if (a.dataset.empty()) throw UsageError("--dataset is required");
  std::vector<Method> methods;
  for (const auto& m : split_csv(a.methods)) {
    const auto method = parse_or_usage<Method>(m, parse_method, "method");
    if (std::find(methods.begin(), methods.end(), method) != methods.end()) {
      throw UsageError("method '" + m + "' listed twice");
    }
    methods.push_back(method);
  }
  if (methods.size() < 2) throw UsageError("--methods needs at least two methods");
  const bool has_case = std::find(methods.begin(), methods.end(), Method::kCase) != methods.end();
  check_judge_flags(a.judge, has_case);
  const auto aspects = aspects_or_usage(a.judge.aspects);
  const auto style = style_or_usage(a.style);
  const auto format = parse_or_usage<ReportFormat>(a.format, parse_report_format, "format");
  const auto pooling = parse_or_usage<Pooling>(a.pooling, parse_pooling, "pooling");
  const auto backend = backend_or_usage(a.judge.judge);
  for (const auto m : methods) judge_config(a.judge, m, *backend, a.common.seed);

  const auto set = load_benchmark(a.dataset, style);
  print_warnings(set.warnings, err);
  const auto dir = prepare_out_dir(a.common.out_dir);
  std::vector<AspectReport> reports;
  bool failed = false;
  for (const auto m : methods) {
    const auto js = run_method(set, m, aspects, a.judge, a.common.seed, backend);
    const auto path = dir / fmt::format("judgments_{}.jsonl", to_string(m));
    write_judgments(js, path);
    summarize_run(js, path, err, err);
    failed = failed || run_failed(js);
    reports.push_back(aspect_report(js, set, pooling));
  }
  std::string text = emit_report(reports, format);
  text += (format == ReportFormat::kTable ? "\n" : "");
  const auto delta = emit_delta(reports, format);
  const auto report_path = dir / fmt::format("compare.{}", extension(format));
  const auto delta_path = dir / fmt::format("compare_delta.{}", extension(format));
  write_file_atomic(report_path, text);
  write_file_atomic(delta_path, delta);
  out << text;
  if (format == ReportFormat::kTable) out << delta;
  return failed ? kExitFailure : kExitOk;
}

struct AnalyzeArgs {
  Common common;
  std::string dataset;
  std::string style;
  std::string format = "table";
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  if (a.dataset.empty()) throw UsageError("--dataset is required");
  const auto style = style_or_usage(a.style);
  const auto format = parse_or_usage<ReportFormat>(a.format, parse_report_format, "format");
  const auto set = load_benchmark(a.dataset, style);
  print_warnings(set.warnings, err);
  const auto report = annotation_analysis(set);
  const auto text = emit_report(report, format);
  const auto dir = prepare_out_dir(a.common.out_dir);
  write_file_atomic(dir / fmt::format("analysis.{}", extension(format)), text);
  out << text;
  return kExitOk;
}

struct CurateArgs {
  Common common;
  JudgeFlags judge;
  std::string sft;
  std::string judgments;
  std::string mode = "sample-level";
  std::string require = "relevance,coherence";
  std::size_t budget = 1000;
  bool keep_empty = false;
  std::string selection = "uniform";
  bool rejudge = false;
};

int cmd_curate(const CurateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.sft.empty()) throw UsageError("--sft is required");
  if (a.judgments.empty() == a.judge.judge.empty()) {
    throw UsageError("give exactly one of --judgments or --judge");
  }
  if (a.rejudge && a.judge.judge.empty()) throw UsageError("--rejudge needs --judge");
  CurationPolicy policy;
  policy.mode = parse_or_usage<CurationMode>(a.mode, parse_curation_mode, "curation mode");
  policy.selection =
      parse_or_usage<SelectionStrategy>(a.selection, parse_selection_strategy, "selection");
  policy.required = aspects_or_usage(a.require);
  policy.budget = a.budget;
  policy.seed = a.common.seed;
  policy.drop_empty = !a.keep_empty;
  try {
    policy.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }

  const auto corpus = load_sft_corpus(a.sft);
  const auto dir = prepare_out_dir(a.common.out_dir);
  JudgmentSet judgments;
  std::shared_ptr<ChatBackend> backend;
  if (!a.judgments.empty()) {
    judgments = load_judgments(a.judgments);
  } else {
    check_judge_flags(a.judge, true);
    backend = backend_or_usage(a.judge.judge);
    BenchmarkSet set;
    set.name = fs::path(a.sft).stem().string();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      set.samples.push_back(as_benchmark_sample(corpus[i], sft_sample_id(corpus[i], i + 1)));
    }
    judgments = run_method(set, Method::kCase, policy.required, a.judge, a.common.seed, backend);
    const auto path = dir / "judgments_sft.jsonl";
    write_judgments(judgments, path);
    summarize_run(judgments, path, err, err);
  }

  auto curated = curate(corpus, judgments, policy);
  if (a.rejudge) {
    const JudgeClient client(backend, judge_config(a.judge, Method::kCase, *backend, a.common.seed));
    rejudge_pruned(curated, client, policy.required);
  }
  print_warnings(curated.warnings, err);
  const auto kept_path = dir / "curated.jsonl";
  const auto audit_path = dir / "audit.jsonl";
  write_sft_corpus(curated.kept, kept_path);
  write_audit(curated.audit, audit_path);
  std::size_t dropped = 0;
  for (const auto& e : curated.audit) dropped += e.action == "dropped";
  out << fmt::format("{} curation (policy {}): {} input, {} kept, {} dropped -> {}\n",
                     to_string(policy.mode), curated.policy_digest, corpus.size(),
                     curated.kept.size(), dropped, kept_path.string());
  return kExitOk;
}

struct GuideArgs {
  Common common;
  std::string problems;
  std::string generator;
  std::string guidance = "baseline";
  std::string base_prompt;
  std::string model = "scripted";
  double temperature = 0.6;
  int max_tokens = 4096;
  double timeout_s = 600.0;
  std::size_t max_concurrency = 8;
  int runs = 3;
  std::string style = "math";
  std::string dataset_name;
};

fs::path default_base_prompt() {
  const fs::path local = fs::path("templates") / "base_system.txt";
  if (fs::exists(local)) return local;
  return fs::path(CASE_EVAL_TEMPLATE_DIR) / "base_system.txt";
}

int cmd_guide(const GuideArgs& a, std::ostream& out, std::ostream&) {
  if (a.problems.empty()) throw UsageError("--problems is required");
  if (a.generator.empty()) throw UsageError("--generator is required");
  if (a.runs < 1) throw UsageError("--runs must be at least 1");
  const auto mode = parse_or_usage<GuidanceMode>(a.guidance, parse_guidance_mode, "guidance mode");
  GenerationConfig cfg;
  cfg.model = a.model;
  cfg.temperature = a.temperature;
  cfg.max_tokens = a.max_tokens;
  cfg.timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout_s * 1000));
  cfg.max_in_flight = a.max_concurrency;
  cfg.style = parse_or_usage<AnswerStyle>(a.style, parse_answer_style, "answer style");
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }

  std::shared_ptr<ChatBackend> backend;
  if (a.generator.rfind("scripted:", 0) == 0) {
    backend = std::make_shared<ScriptedGenerator>(ScriptedGenerator::load(a.generator.substr(9)));
  } else {
    backend = backend_or_usage(a.generator);
  }
  const auto base = read_file(a.base_prompt.empty() ? default_base_prompt() : fs::path(a.base_prompt));
  const auto system_prompt = build_guided_prompt(base, mode);
  const auto problems = load_problems(a.problems);
  const auto dataset =
      a.dataset_name.empty() ? fs::path(a.problems).stem().string() : a.dataset_name;

  std::vector<SeededRunResult> results;
  for (int r = 0; r < a.runs; ++r) {
    results.push_back(run_seed(problems, system_prompt, mode, *backend, cfg,
                               a.common.seed + static_cast<std::uint64_t>(r)));
  }
  const auto summary = score_runs(results);
  const auto method = std::string(to_string(mode));
  const auto dir = prepare_out_dir(a.common.out_dir);
  write_file_atomic(dir / fmt::format("guide_{}.jsonl", method),
                    serialize_run_records(method, dataset, results));
  const auto rows = summary_rows(method, dataset, summary);
  const auto csv = render_summary_csv(rows);
  write_file_atomic(dir / fmt::format("guide_{}_summary.csv", method), csv);
  out << csv;
  return kExitOk;
}

struct ReportArgs {
  Common common;
  std::vector<std::string> judgments;
  std::string dataset;
  std::string style;
  std::string format = "table";
  std::string pooling = "micro";
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  if (a.dataset.empty()) throw UsageError("--dataset is required");
  if (a.judgments.empty()) throw UsageError("--judgments is required");
  const auto style = style_or_usage(a.style);
  const auto format = parse_or_usage<ReportFormat>(a.format, parse_report_format, "format");
  const auto pooling = parse_or_usage<Pooling>(a.pooling, parse_pooling, "pooling");
  const auto set = load_benchmark(a.dataset, style);
  print_warnings(set.warnings, err);
  std::vector<AspectReport> reports;
  for (const auto& path : a.judgments) reports.push_back(aspect_report(load_judgments(path), set, pooling));
  const auto text = emit_report(reports, format);
  const auto dir = prepare_out_dir(a.common.out_dir);
  write_file_atomic(dir / fmt::format("report.{}", extension(format)), text);
  out << text;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Step-wise judging of reasoning traces, agreement metrics and SFT curation",
               "case-eval"};
  app.require_subcommand(1);
  app.fallthrough(false);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Judge every step of a benchmark");
  add_common(evaluate, ev.common);
  add_judge_flags(evaluate, ev.judge);
  evaluate->add_option("--dataset", ev.dataset, "Benchmark JSONL");
  evaluate->add_option("--method", ev.method, "case or bon")->capture_default_str();
  evaluate->add_option("--style", ev.style, "Answer style: gsm8k or math");

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "Evaluate several methods and report deltas");
  add_common(compare, cmp.common);
  add_judge_flags(compare, cmp.judge);
  compare->add_option("--dataset", cmp.dataset, "Benchmark JSONL");
  compare->add_option("--methods", cmp.methods, "Comma-separated methods")->capture_default_str();
  compare->add_option("--style", cmp.style, "Answer style: gsm8k or math");
  compare->add_option("--format", cmp.format, "table, csv or records")->capture_default_str();
  compare->add_option("--pooling", cmp.pooling, "micro or per-sample")->capture_default_str();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Aspect vs. correctness analysis of annotations");
  add_common(analyze, an.common);
  analyze->add_option("--dataset", an.dataset, "Annotated benchmark JSONL");
  analyze->add_option("--style", an.style, "Answer style: gsm8k or math");
  analyze->add_option("--format", an.format, "table, csv or records")->capture_default_str();

  CurateArgs cu;
  auto* curate_cmd = app.add_subcommand("curate", "Build an SFT corpus from judged traces");
  add_common(curate_cmd, cu.common);
  add_judge_flags(curate_cmd, cu.judge);
  curate_cmd->add_option("--sft", cu.sft, "SFT corpus JSONL");
  curate_cmd->add_option("--judgments", cu.judgments, "Judgment file for the corpus");
  curate_cmd->add_option("--mode", cu.mode, "step-level or sample-level")->capture_default_str();
  curate_cmd->add_option("--require", cu.require, "Aspects every kept step must pass")
      ->capture_default_str();
  curate_cmd->add_option("--budget", cu.budget, "Samples to select (sample-level)")
      ->capture_default_str();
  curate_cmd->add_flag("--keep-empty", cu.keep_empty, "Keep fully pruned samples answer-only");
  curate_cmd->add_option("--selection", cu.selection, "uniform or longest-first")
      ->capture_default_str();
  curate_cmd->add_flag("--rejudge", cu.rejudge, "Re-judge pruned traces and log the result");

  GuideArgs gu;
  auto* guide = app.add_subcommand("guide", "Seeded generation with aspect-guided prompts");
  add_common(guide, gu.common);
  guide->add_option("--problems", gu.problems, "JSONL {id, question, answer}");
  guide->add_option("--generator", gu.generator, "scripted:<responses.jsonl> or an http(s) endpoint");
  guide->add_option("--guidance", gu.guidance, "baseline, multi-aspect or correctness-only")
      ->capture_default_str();
  guide->add_option("--base-prompt", gu.base_prompt, "Base system prompt file");
  guide->add_option("--model", gu.model, "Generator model name")->capture_default_str();
  guide->add_option("--temperature", gu.temperature, "Sampling temperature")->capture_default_str();
  guide->add_option("--max-tokens", gu.max_tokens, "Response token limit")->capture_default_str();
  guide->add_option("--timeout", gu.timeout_s, "Per-request timeout in seconds")
      ->capture_default_str();
  guide->add_option("--max-concurrency", gu.max_concurrency, "Bounded in-flight requests")
      ->capture_default_str();
  guide->add_option("--runs", gu.runs, "Seeds used: seed, seed+1, ...")->capture_default_str();
  guide->add_option("--style", gu.style, "Answer style: gsm8k or math")->capture_default_str();
  guide->add_option("--dataset-name", gu.dataset_name, "Label for the summary CSV");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Agreement report for judgment files");
  add_common(report, rep.common);
  report->add_option("--judgments", rep.judgments, "Judgment file(s)")->delimiter(',');
  report->add_option("--dataset", rep.dataset, "Annotated benchmark JSONL");
  report->add_option("--style", rep.style, "Answer style: gsm8k or math");
  report->add_option("--format", rep.format, "table, csv or records")->capture_default_str();
  report->add_option("--pooling", rep.pooling, "micro or per-sample")->capture_default_str();

  CLI::App* chosen = nullptr;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    for (auto* sub : app.get_subcommands()) chosen = sub;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    CLI::App* help_for = &app;
    for (auto* sub : app.get_subcommands()) help_for = sub;
    err << help_for->help();
    return kExitUsage;
  }

  try {
    const std::string* config = nullptr;
    if (chosen == evaluate) config = &ev.common.config;
    if (chosen == compare) config = &cmp.common.config;
    if (chosen == analyze) config = &an.common.config;
    if (chosen == curate_cmd) config = &cu.common.config;
    if (chosen == guide) config = &gu.common.config;
    if (chosen == report) config = &rep.common.config;
    apply_layers(app, chosen, *config);

    if (chosen == evaluate) return cmd_evaluate(ev, out, err);
    if (chosen == compare) return cmd_compare(cmp, out, err);
    if (chosen == analyze) return cmd_analyze(an, out, err);
    if (chosen == curate_cmd) return cmd_curate(cu, out, err);
    if (chosen == guide) return cmd_guide(gu, out, err);
    return cmd_report(rep, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << chosen->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace case_eval::cli
