#include <cstdlib>
#include <mutex>
#include <thread>

#include "case_eval/errors.hpp"
#include "case_eval/judge.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support/support.hpp"

using namespace case_eval;

namespace {

// Local chat-completions stand-in. Replies with the queued statuses first,
// then 200 with a fixed verdict.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      bodies.push_back(nlohmann::json::parse(req.body));
      auth.push_back(req.get_header_value("Authorization"));
      if (next_ < statuses_.size()) {
        res.status = statuses_[next_++];
        res.set_content("{\"error\":\"busy\"}", "application/json");
        return;
      }
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"JUDGMENT: YES"}}]})",
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  std::vector<nlohmann::json> bodies;
  std::vector<std::string> auth;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<int> statuses_;
  std::size_t next_ = 0;
};

ChatRequest request() {
  ChatRequest r;
  r.system = "sys";
  r.user = "user text";
  r.model = "judge-model";
  r.temperature = 0.7;
  r.max_tokens = 64;
  r.timeout = std::chrono::milliseconds(5000);
  r.seed = 11;
  return r;
}

}  // namespace

TEST_SUITE("http") {
  TEST_CASE("posts a chat-completions request with the bearer token") {
    FakeEndpoint endpoint({});
    HttpChatBackend backend(endpoint.base(), std::string("secret-token"));
    CHECK(backend.complete(request()) == "JUDGMENT: YES");
    REQUIRE(endpoint.bodies.size() == 1);
    const auto& body = endpoint.bodies[0];
    CHECK(body["model"] == "judge-model");
    CHECK(body["temperature"] == doctest::Approx(0.7));
    CHECK(body["max_tokens"] == 64);
    CHECK(body["seed"] == 11);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "user text");
    CHECK(endpoint.auth[0] == "Bearer secret-token");
  }

  TEST_CASE("api key comes from the environment") {
    ::setenv("CASE_EVAL_API_KEY", "from-env", 1);
    FakeEndpoint endpoint({});
    HttpChatBackend backend(endpoint.base());
    backend.complete(request());
    CHECK(endpoint.auth[0] == "Bearer from-env");
    ::unsetenv("CASE_EVAL_API_KEY");
    CHECK_FALSE(HttpChatBackend::api_key_from_env());
  }

  TEST_CASE("rate limiting is transient, client errors are not") {
    {
      FakeEndpoint endpoint({429});
      HttpChatBackend backend(endpoint.base());
      CHECK_THROWS_AS(backend.complete(request()), TransientError);
    }
    {
      FakeEndpoint endpoint({503});
      HttpChatBackend backend(endpoint.base());
      CHECK_THROWS_AS(backend.complete(request()), TransientError);
    }
    {
      FakeEndpoint endpoint({400});
      HttpChatBackend backend(endpoint.base());
      try {
        backend.complete(request());
        FAIL("expected TransportError");
      } catch (const TransientError&) {
        FAIL("400 must not be transient");
      } catch (const TransportError&) {
      }
    }
  }

  TEST_CASE("judge client retries through a 429") {
    FakeEndpoint endpoint({429});
    auto backend = std::make_shared<HttpChatBackend>(endpoint.base());
    const JudgeClient client(backend, support::fast_config());
    const auto s = support::plain_sample("h1", 2);
    const auto v = client.call(build_case_prompt(s.question, s.steps, 2, Aspect::kCoherence));
    CHECK(v.label() == 1);
    CHECK(endpoint.bodies.size() == 2);
  }

  TEST_CASE("unreachable endpoint is transient") {
    int port = 0;
    {
      httplib::Server probe;
      port = probe.bind_to_any_port("127.0.0.1");
    }
    HttpChatBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1");
    auto r = request();
    r.timeout = std::chrono::milliseconds(500);
    CHECK_THROWS_AS(backend.complete(r), TransientError);
  }
}
