#pragma once

// Helpers shared by the unit and acceptance binaries. The oracles here are
// written from the textbook definitions and deliberately avoid the library
// code they check.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "case_eval/engine.hpp"
#include "case_eval/judge.hpp"
#include "case_eval/trace.hpp"

#ifndef CASE_EVAL_FIXTURE_DIR
#error "CASE_EVAL_FIXTURE_DIR must be defined"
#endif

namespace support {

using case_eval::Label;

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(CASE_EVAL_FIXTURE_DIR) / name;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("case_eval_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<Label> random_labels(std::mt19937_64& rng, std::size_t n) {
  std::vector<Label> v(n);
  for (auto& x : v) x = static_cast<Label>(rng() & 1U);
  return v;
}

// --- metric oracles: per-class precision and recall ------------------------

struct OracleCounts {
  double tp = 0, fp = 0, tn = 0, fn = 0;
};

inline OracleCounts oracle_counts(const std::vector<Label>& pred, const std::vector<Label>& gold) {
  OracleCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gold[i] != 0;
    if (p && g) c.tp += 1;
    else if (p && !g) c.fp += 1;
    else if (!p && !g) c.tn += 1;
    else c.fn += 1;
  }
  return c;
}

inline double oracle_accuracy(const std::vector<Label>& pred, const std::vector<Label>& gold) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) same += pred[i] == gold[i];
  return static_cast<double>(same) / static_cast<double>(pred.size());
}

// F1 of one class from precision and recall; a class that appears in neither
// vector is skipped.
inline double oracle_macro_f1(const std::vector<Label>& pred, const std::vector<Label>& gold) {
  double sum = 0;
  int classes = 0;
  for (Label cls : {Label{0}, Label{1}}) {
    double predicted = 0, actual = 0, hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      predicted += pred[i] == cls;
      actual += gold[i] == cls;
      hit += pred[i] == cls && gold[i] == cls;
    }
    if (predicted == 0 && actual == 0) continue;
    ++classes;
    const double precision = predicted > 0 ? hit / predicted : 0.0;
    const double recall = actual > 0 ? hit / actual : 0.0;
    sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / classes;
}

// --- aggregation oracles ----------------------------------------------------

inline Label oracle_all_pass(const std::vector<Label>& v) {
  for (const auto x : v) {
    if (x == 0) return 0;
  }
  return 1;
}

inline double oracle_mean(const std::vector<Label>& v) {
  double s = 0;
  for (const auto x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline Label oracle_majority(const std::vector<Label>& votes) {
  std::size_t yes = 0;
  for (const auto v : votes) yes += v;
  return yes * 2 > votes.size() ? 1 : 0;
}

// --- traces -----------------------------------------------------------------

inline std::string sentinel(std::size_t step) { return "ZQX" + std::to_string(step) + "QXZ"; }

// A trace whose step k carries the unique sentinel for k, with a final answer
// carrying its own sentinel.
inline case_eval::BenchmarkSample sentinel_sample(const std::string& id, std::size_t steps) {
  case_eval::BenchmarkSample s;
  s.question = {id, "Compute the value described in " + id + ".", ""};
  std::vector<std::string> texts;
  for (std::size_t k = 1; k <= steps; ++k) {
    texts.push_back("Intermediate result " + sentinel(k) + " follows.");
  }
  s.steps = case_eval::make_steps(texts);
  s.final_answer = "#### ANSWERSENTINEL";
  s.gold_answer = "0";
  return s;
}

inline case_eval::BenchmarkSample plain_sample(const std::string& id, std::size_t steps) {
  case_eval::BenchmarkSample s;
  s.question = {id, "Question " + id, ""};
  std::vector<std::string> texts;
  for (std::size_t k = 1; k <= steps; ++k) texts.push_back("step " + std::to_string(k) + " of " + id);
  s.steps = case_eval::make_steps(texts);
  s.final_answer = "#### 1";
  s.gold_answer = "1";
  return s;
}

// Backend returning a queue of canned responses or errors, in order.
class QueueBackend final : public case_eval::ChatBackend {
 public:
  enum class Kind { kText, kTransient, kFatal };
  struct Item {
    Kind kind;
    std::string text;
  };

  void push_text(std::string t) { items_.push_back({Kind::kText, std::move(t)}); }
  void push_transient() { items_.push_back({Kind::kTransient, {}}); }
  void push_fatal() { items_.push_back({Kind::kFatal, {}}); }

  std::string complete(const case_eval::ChatRequest& request) override {
    requests.push_back(request);
    if (next_ >= items_.size()) throw case_eval::TransientError("queue exhausted");
    const auto item = items_[next_++];
    switch (item.kind) {
      case Kind::kText: return item.text;
      case Kind::kTransient: throw case_eval::TransientError("HTTP 429 rate limited");
      case Kind::kFatal: throw case_eval::TransportError("HTTP 400 bad request");
    }
    return {};
  }
  bool remote() const override { return false; }

  std::vector<case_eval::ChatRequest> requests;

 private:
  std::vector<Item> items_;
  std::size_t next_ = 0;
};

inline case_eval::JudgeConfig fast_config() {
  case_eval::JudgeConfig cfg;
  cfg.backoff_base = std::chrono::milliseconds(0);
  return cfg;
}

}  // namespace support
