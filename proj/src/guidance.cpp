#include "case_eval/guidance.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "case_eval/dataset.hpp"
#include "case_eval/errors.hpp"

namespace case_eval {

namespace {

using nlohmann::json;

constexpr std::string_view kCorrectnessEmphasis =
    "While reasoning, make sure every step is mathematically correct given the steps before it. "
    "Check each calculation and deduction before moving on.";

std::string guidance_block(GuidanceMode mode) {
  const auto text = guidance_text(mode);
  return text.empty() ? text : "\n\n" + text;
}

}  // namespace

std::string_view to_string(GuidanceMode m) noexcept {
  switch (m) {
    case GuidanceMode::kBaseline: return "baseline";
    case GuidanceMode::kMultiAspect: return "multi-aspect";
    case GuidanceMode::kCorrectnessOnly: return "correctness-only";
  }
  return "baseline";
}

std::optional<GuidanceMode> parse_guidance_mode(std::string_view name) {
  const auto n = trim(name);
  if (n == "baseline") return GuidanceMode::kBaseline;
  if (n == "multi-aspect") return GuidanceMode::kMultiAspect;
  if (n == "correctness-only") return GuidanceMode::kCorrectnessOnly;
  return std::nullopt;
}

std::string guidance_text(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::kBaseline:
      return {};
    case GuidanceMode::kMultiAspect:
      return fmt::format(
          "Keep two properties in mind for each step you write.\n"
          "Relevance: {}\n"
          "Coherence: {}\n"
          "Before moving on from a step, check it against both.",
          aspect_definition(Aspect::kRelevance), aspect_definition(Aspect::kCoherence));
    case GuidanceMode::kCorrectnessOnly:
      return std::string(kCorrectnessEmphasis);
  }
  return {};
}

std::string build_guided_prompt(std::string_view base_system_prompt, GuidanceMode mode) {
  if (trim(base_system_prompt).empty()) throw InvalidInput("base system prompt is empty");
  const auto block = guidance_block(mode);
  std::string out(base_system_prompt);
  if (block.empty() || out.ends_with(block)) return out;
  return out + block;
}

std::vector<Problem> load_problems(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open problem file " + path.string());
  std::vector<Problem> out;
  for_each_jsonl(in, [&](std::size_t line, const json& rec) {
    try {
      Problem p{rec.at("id").get<std::string>(), rec.at("question").get<std::string>(),
                rec.at("answer").get<std::string>()};
      if (p.id.empty() || trim(p.question).empty()) throw ParseError(line, "empty id or question");
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(line, e.what());
    }
  });
  return out;
}

void GenerationConfig::validate() const {
  if (temperature < 0) throw InvalidInput("temperature must be >= 0");
  if (max_tokens < 1) throw InvalidInput("max_tokens must be >= 1");
  if (timeout.count() <= 0) throw InvalidInput("timeout must be positive");
  if (max_in_flight < 1) throw InvalidInput("max_in_flight must be >= 1");
}

double SeededRunResult::accuracy() const {
  if (records.empty()) return 0.0;
  const auto hits = std::count_if(records.begin(), records.end(),
                                  [](const AnswerRecord& r) { return r.equivalent; });
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

RunSummary score_runs(std::span<const SeededRunResult> results) {
  if (results.empty()) throw InvalidInput("score_runs needs at least one seeded result");
  RunSummary s;
  for (const auto& r : results) s.per_seed.emplace_back(r.seed, r.accuracy());
  std::sort(s.per_seed.begin(), s.per_seed.end());
  // Summing in seed order keeps the mean independent of input order.
  double sum = 0.0;
  s.max = s.per_seed.front().second;
  for (const auto& [seed, acc] : s.per_seed) {
    sum += acc;
    s.max = std::max(s.max, acc);
  }
  s.mean = sum / static_cast<double>(s.per_seed.size());
  return s;
}

AnswerRecord score_response(const Problem& problem, std::string_view response, AnswerStyle style) {
  AnswerRecord r;
  r.problem_id = problem.id;
  r.gold = problem.answer;
  // Gold answers are bare, but a generation must mark its answer; otherwise
  // the whole response would be taken as the answer.
  const bool marked = response.find("\\boxed") != std::string_view::npos ||
                      response.find("\\fbox") != std::string_view::npos ||
                      response.find("####") != std::string_view::npos;
  if (!marked) {
    r.extraction_failed = true;
    return r;
  }
  try {
    r.generated = normalize_answer(response, style);
  } catch (const ExtractionError&) {
    r.extraction_failed = true;
    return r;
  }
  try {
    r.equivalent = answers_equivalent(r.generated, problem.answer, style);
  } catch (const ExtractionError&) {
    r.equivalent = false;
  }
  return r;
}

SeededRunResult run_seed(std::span<const Problem> problems, const std::string& system_prompt,
                         GuidanceMode mode, ChatBackend& backend, const GenerationConfig& config,
                         std::uint64_t seed) {
  config.validate();
  SeededRunResult result;
  result.seed = seed;
  result.records.resize(problems.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next.fetch_add(1); i < problems.size(); i = next.fetch_add(1)) {
      const auto& p = problems[i];
      ChatRequest req;
      req.system = system_prompt;
      req.user = p.question;
      req.model = config.model;
      req.temperature = config.temperature;
      req.max_tokens = config.max_tokens;
      req.timeout = config.timeout;
      req.seed = seed;
      req.tags = {{"problem_id", p.id}, {"guidance", std::string(to_string(mode))}};
      try {
        result.records[i] = score_response(p, backend.complete(req), config.style);
      } catch (const Error& e) {
        AnswerRecord r;
        r.problem_id = p.id;
        r.gold = p.answer;
        r.error = e.what();
        result.records[i] = std::move(r);
      }
    }
  };
  const auto workers = std::min(config.max_in_flight, problems.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return result;
}

ScriptedGenerator ScriptedGenerator::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open generation table " + path.string());
  ScriptedGenerator g;
  for_each_jsonl(in, [&](std::size_t line, const json& rec) {
    try {
      std::optional<std::uint64_t> seed;
      if (rec.contains("seed")) seed = rec.at("seed").get<std::uint64_t>();
      std::optional<GuidanceMode> mode;
      if (rec.contains("mode")) {
        mode = parse_guidance_mode(rec.at("mode").get<std::string>());
        if (!mode) throw ParseError(line, "unknown guidance mode");
      }
      g.add(rec.at("problem_id").get<std::string>(), seed, mode,
            rec.at("response").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(line, e.what());
    }
  });
  return g;
}

void ScriptedGenerator::add(std::string problem_id, std::optional<std::uint64_t> seed,
                            std::optional<GuidanceMode> mode, std::string response) {
  rows_[std::move(problem_id)].push_back({seed, mode, std::move(response)});
}

std::string ScriptedGenerator::complete(const ChatRequest& request) {
  const auto pid = request.tags.find("problem_id");
  if (pid == request.tags.end()) throw TransportError("scripted generator: request has no problem_id");
  const auto it = rows_.find(pid->second);
  if (it == rows_.end()) throw TransportError("scripted generator: no response for " + pid->second);
  std::optional<GuidanceMode> mode;
  if (const auto g = request.tags.find("guidance"); g != request.tags.end()) {
    mode = parse_guidance_mode(g->second);
  }
  const Row* best = nullptr;
  int best_score = -1;
  for (const auto& row : it->second) {
    if (row.seed && row.seed != request.seed) continue;
    if (row.mode && row.mode != mode) continue;
    const int score = (row.seed ? 2 : 0) + (row.mode ? 1 : 0);
    if (score > best_score) {
      best = &row;
      best_score = score;
    }
  }
  if (best == nullptr) {
    throw TransportError("scripted generator: no matching response for " + pid->second);
  }
  return best->response;
}

std::vector<SummaryRow> summary_rows(std::string_view method, std::string_view dataset,
                                     const RunSummary& summary) {
  std::vector<SummaryRow> rows;
  for (const auto& [seed, acc] : summary.per_seed) {
    rows.push_back({std::string(method), std::string(dataset), std::to_string(seed), acc});
  }
  rows.push_back({std::string(method), std::string(dataset), "mean", summary.mean});
  rows.push_back({std::string(method), std::string(dataset), "max", summary.max});
  return rows;
}

std::string render_summary_csv(std::span<const SummaryRow> rows) {
  std::string out = "method,dataset,seed,accuracy\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{:.4f}\n", r.method, r.dataset, r.seed, r.accuracy);
  }
  return out;
}

std::string serialize_run_records(std::string_view method, std::string_view dataset,
                                  std::span<const SeededRunResult> results) {
  std::ostringstream out;
  for (const auto& res : results) {
    for (const auto& r : res.records) {
      json j{{"method", method},         {"dataset", dataset},
             {"seed", res.seed},         {"problem_id", r.problem_id},
             {"generated", r.generated}, {"gold", r.gold},
             {"equivalent", r.equivalent}, {"extraction_failed", r.extraction_failed}};
      if (!r.error.empty()) j["error"] = r.error;
      out << j.dump() << '\n';
    }
  }
  return out.str();
}

}  // namespace case_eval
