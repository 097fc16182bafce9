#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "case_eval/dataset.hpp"
#include "case_eval/errors.hpp"
#include "case_eval/judge.hpp"
#include "fmt/format.h"

namespace case_eval {

namespace {

using nlohmann::json;

std::string join_aspects(std::span<const Aspect> aspects) {
  std::string out;
  for (const auto a : aspects) {
    if (!out.empty()) out += ',';
    out += to_string(a);
  }
  return out;
}

std::string_view format_tag(VerdictFormat f) {
  switch (f) {
    case VerdictFormat::kSingle:
      return "single";
    case VerdictFormat::kNumbered:
      return "numbered";
    case VerdictFormat::kPerAspect:
      return "per-aspect";
  }
  return "single";
}

std::vector<Label> labels_from(const json& v, const std::string& what, std::size_t line) {
  if (!v.is_array()) throw ParseError(line, what + " must be a list of 0/1");
  std::vector<Label> out;
  for (const auto& x : v) {
    if (!x.is_number_integer() || (x.get<int>() != 0 && x.get<int>() != 1)) {
      throw ParseError(line, what + " must be a list of 0/1");
    }
    out.push_back(static_cast<Label>(x.get<int>()));
  }
  return out;
}

struct SlotGuard {
  explicit SlotGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;
  std::counting_semaphore<>& sem;
};

}  // namespace

// ---------------------------------------------------------------------------
// JudgeConfig

void JudgeConfig::validate() const {
  if (votes < 1) throw InvalidInput("vote count N must be at least 1");
  if (timeout.count() <= 0) throw InvalidInput("timeout must be positive");
  if (!(temperature >= 0.0)) throw InvalidInput("temperature must be non-negative");
  if (max_retries < 0) throw InvalidInput("max retries must be non-negative");
  if (max_tokens < 1) throw InvalidInput("max output length must be positive");
  if (max_in_flight < 1) throw InvalidInput("in-flight limit must be at least 1");
}

std::string JudgeConfig::digest() const {
  json j{{"model", model},
               {"temperature", temperature},
               {"max_tokens", max_tokens},
               {"votes", votes},
               {"case_template", kCaseTemplateVersion},
               {"bon_template", kBonTemplateVersion}};
  if (seed) j["seed"] = *seed;
  return sha256_hex(j.dump()).substr(0, 16);
}

JudgeConfig JudgeConfig::case_defaults() { return JudgeConfig{}; }

JudgeConfig JudgeConfig::bon_defaults() {
  JudgeConfig cfg;
  cfg.votes = 8;
  cfg.temperature = 0.7;
  return cfg;
}

// ---------------------------------------------------------------------------
// ResponseCache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::string ResponseCache::entry_key(std::string_view model, double temperature,
                                     std::string_view prompt_digest, std::size_t ordinal) {
  return sha256_hex(fmt::format("{}\n{:.6f}\n{}\n{}", model, temperature, prompt_digest, ordinal));
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  const auto path = dir_ / (key + ".txt");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ResponseCache::put(const std::string& key, std::string_view raw) const {
  write_file_atomic(dir_ / (key + ".txt"), raw);
}

// ---------------------------------------------------------------------------
// JudgeClient

JudgeClient::JudgeClient(std::shared_ptr<ChatBackend> backend, JudgeConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
  if (!backend_) throw InvalidInput("judge client needs a backend");
  config_.validate();
  if (config_.cache_dir) cache_.emplace(*config_.cache_dir);
  in_flight_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(config_.max_in_flight));
}

std::string JudgeClient::fetch(const ChatRequest& request, const std::string& digest,
                               bool& from_cache) const {
  std::string key;
  if (cache_) {
    key = ResponseCache::entry_key(request.model, request.temperature, digest, request.ordinal);
    if (auto hit = cache_->get(key)) {
      from_cache = true;
      return *std::move(hit);
    }
  }
  from_cache = false;

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = config_.backoff_base * (1LL << std::min(attempt - 1, 16));
      std::this_thread::sleep_for(delay);
    }
    try {
      std::string raw;
      {
        const SlotGuard slot(*in_flight_);
        raw = backend_->complete(request);
      }
      if (cache_) cache_->put(key, raw);
      return raw;
    } catch (const TransientError& e) {
      last_error = e.what();
    }
  }
  throw TransportError("judge request " + digest.substr(0, 16) + " failed after " +
                       std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

Verdict JudgeClient::call(const JudgePrompt& prompt, std::size_t ordinal) const {
  const auto start = std::chrono::steady_clock::now();
  ChatRequest req;
  req.system = prompt.system;
  req.user = prompt.user;
  req.model = config_.model;
  req.temperature = config_.temperature;
  req.max_tokens = config_.max_tokens;
  req.timeout = config_.timeout;
  req.ordinal = ordinal;
  if (config_.seed) req.seed = *config_.seed + ordinal;
  req.tags = {{"sample_id", prompt.sample_id},
              {"aspects", join_aspects(prompt.aspects)},
              {"step", prompt.step_index ? std::to_string(*prompt.step_index) : "all"},
              {"steps", std::to_string(prompt.format == VerdictFormat::kNumbered
                                           ? prompt.expected_labels
                                           : prompt.context_step_count + 1)},
              {"format", std::string(format_tag(prompt.format))},
              {"attempt", "1"}};

  Verdict v;
  v.model = config_.model;
  bool cached = false;
  v.raw = fetch(req, prompt_digest(prompt), cached);
  v.from_cache = cached;
  try {
    v.labels = parse_judgment(v.raw, prompt);
  } catch (const UnparseableResponse&) {
    JudgePrompt strict = prompt;
    strict.user += "\n\n";
    strict.user += strict_format_reminder(prompt.format);
    req.user = strict.user;
    req.tags["attempt"] = "2";
    v.raw = fetch(req, prompt_digest(strict), cached);
    v.from_cache = v.from_cache && cached;
    v.reprompted = true;
    try {
      v.labels = parse_judgment(v.raw, prompt);
    } catch (const UnparseableResponse& second) {
      throw UnparseableResponse("no usable verdict after reprompt (" +
                                prompt_digest(prompt).substr(0, 16) + "): " + second.what());
    }
  }
  v.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  return v;
}

// ---------------------------------------------------------------------------
// ScriptedJudge

ScriptedJudge ScriptedJudge::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open verdict table " + path.string());
  ScriptedJudge judge;
  for_each_jsonl(in, [&](std::size_t line, const json& rec) {
    if (!rec.is_object()) throw ParseError(line, "verdict record must be an object");
    if (const auto it = rec.find("default"); it != rec.end()) {
      const auto d = labels_from(json::array({*it}), "default", line);
      judge.set_default(d.front());
      return;
    }
    if (!rec.contains("sample_id") || !rec["sample_id"].is_string()) {
      throw ParseError(line, "verdict record needs a string sample_id");
    }
    const auto id = rec["sample_id"].get<std::string>();
    if (rec.value("down", false)) {
      judge.set_down(id);
      return;
    }
    if (!rec.contains("aspect") || !rec["aspect"].is_string()) {
      throw ParseError(line, "verdict record needs an aspect");
    }
    const auto aspect = parse_aspect(rec["aspect"].get<std::string>());
    if (!aspect) throw ParseError(line, "unknown aspect in verdict record");
    Entry e;
    if (rec.contains("labels")) e.labels = labels_from(rec["labels"], "labels", line);
    if (rec.contains("votes")) {
      if (!rec["votes"].is_array()) throw ParseError(line, "votes must be a list of lists");
      for (const auto& v : rec["votes"]) e.votes.push_back(labels_from(v, "votes", line));
    }
    if (rec.contains("unparseable_steps")) {
      for (const auto& s : rec["unparseable_steps"]) e.unparseable_steps.push_back(s.get<std::size_t>());
    }
    judge.set(id, *aspect, std::move(e));
  });
  return judge;
}

void ScriptedJudge::set(std::string sample_id, Aspect aspect, Entry entry) {
  table_[{std::move(sample_id), aspect}] = std::move(entry);
}

std::optional<Label> ScriptedJudge::lookup(const std::string& sample_id, Aspect aspect,
                                           std::size_t step) const {
  const auto it = table_.find({sample_id, aspect});
  if (it != table_.end() && step >= 1 && step <= it->second.labels.size()) {
    return it->second.labels[step - 1];
  }
  return default_label_;
}

std::vector<Label> ScriptedJudge::lookup_trace(const std::string& sample_id, Aspect aspect,
                                               std::size_t ordinal, std::size_t steps) const {
  const auto it = table_.find({sample_id, aspect});
  if (it != table_.end() && !it->second.votes.empty()) {
    const auto& v = it->second.votes[ordinal % it->second.votes.size()];
    if (v.size() == steps) return v;
  }
  std::vector<Label> out;
  for (std::size_t k = 1; k <= steps; ++k) {
    const auto l = lookup(sample_id, aspect, k);
    if (!l) throw TransportError("no scripted verdict for " + sample_id + "/" +
                                 std::string(to_string(aspect)) + " step " + std::to_string(k));
    out.push_back(*l);
  }
  return out;
}

std::string ScriptedJudge::complete(const ChatRequest& request) {
  auto tag = [&](const char* key) -> std::string {
    const auto it = request.tags.find(key);
    if (it == request.tags.end()) {
      throw TransportError(std::string("scripted judge: request lacks '") + key + "' tag");
    }
    return it->second;
  };
  const auto sample_id = tag("sample_id");
  if (std::find(down_.begin(), down_.end(), sample_id) != down_.end()) {
    throw TransientError("scripted judge: endpoint down for " + sample_id);
  }
  const auto aspects = parse_aspect_list(tag("aspects"));
  const auto format = tag("format");
  const auto step_tag = tag("step");

  if (format == "numbered") {
    const auto steps = std::stoul(tag("steps"));
    const auto labels = lookup_trace(sample_id, aspects.front(), request.ordinal, steps);
    return "Verdicts for the whole trace.\n" + render_judgment(labels, VerdictFormat::kNumbered);
  }

  const auto step = std::stoul(step_tag);
  std::vector<Label> labels;
  for (const auto a : aspects) {
    const auto it = table_.find({sample_id, a});
    if (it != table_.end()) {
      const auto& bad = it->second.unparseable_steps;
      if (std::find(bad.begin(), bad.end(), step) != bad.end()) return "I am not sure.";
    }
    const auto l = lookup(sample_id, a, step);
    if (!l) {
      throw TransportError("no scripted verdict for " + sample_id + "/" +
                           std::string(to_string(a)) + " step " + std::to_string(step));
    }
    labels.push_back(*l);
  }
  const auto body = "Step " + std::to_string(step) + " checked against the definition.\n";
  if (format == "per-aspect") return body + render_judgment(labels, VerdictFormat::kPerAspect, aspects);
  return body + render_judgment(labels, VerdictFormat::kSingle);
}

// ---------------------------------------------------------------------------

std::string CountingBackend::complete(const ChatRequest& request) {
  calls_.fetch_add(1);
  return inner_->complete(request);
}

std::shared_ptr<ChatBackend> make_backend(const std::string& uri) {
  constexpr std::string_view kScripted = "scripted:";
  if (uri.rfind(kScripted, 0) == 0) {
    return std::make_shared<ScriptedJudge>(ScriptedJudge::load(uri.substr(kScripted.size())));
  }
  if (uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0) {
    return std::make_shared<HttpChatBackend>(uri);
  }
  throw InvalidInput("unsupported judge address '" + uri +
                     "' (expected scripted:<file> or an http(s) endpoint)");
}

}  // namespace case_eval
