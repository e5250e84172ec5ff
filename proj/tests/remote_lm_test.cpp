#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "knm/remote_lm.hpp"

namespace knm {
namespace {

/// In-process stand-in for a model server.
class StubServer {
 public:
  StubServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

RemoteOptions options_for(const StubServer& s, std::size_t vocab, std::size_t dim = 4) {
  RemoteOptions o;
  o.base_url = s.url();
  o.vocab_size = vocab;
  o.dim = dim;
  o.timeout_seconds = 5.0;
  return o;
}

void reply(httplib::Response& res, const nlohmann::json& j) { res.set_content(j.dump(), "application/json"); }

TEST(RemoteLm, LogitsBecomeSoftmax) {
  const std::vector<double> logits{1.0, -2.0, 0.5, 3.0, 0.0};
  StubServer stub;
  stub.server().Post("/v1/next_token", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"logits", logits}});
  });
  const RemoteLanguageModel lm(options_for(stub, logits.size()));
  const auto p = lm.predict(TokenSequence{2, 3});
  double z = 0.0;
  for (double x : logits) z += std::exp(x);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    EXPECT_NEAR(p[static_cast<TokenId>(i)], std::exp(logits[i]) / z, 1e-6);
  }
  EXPECT_EQ(p.argmax(), 3u);
}

TEST(RemoteLm, SendsContextAndReadsProbs) {
  StubServer stub;
  std::vector<TokenId> seen;
  stub.server().Post("/v1/next_token", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body).at("tokens").get<std::vector<TokenId>>();
    reply(res, {{"probs", {0.1, 0.2, 0.7}}});
  });
  const RemoteLanguageModel lm(options_for(stub, 3));
  const auto p = lm.predict(TokenSequence{2, 1, 2});
  EXPECT_EQ(seen, (std::vector<TokenId>{2, 1, 2}));
  EXPECT_NEAR(p[2], 0.7, 1e-12);
  EXPECT_TRUE(p.is_valid());
}

TEST(RemoteLm, TopKReplySpreadsTheRest) {
  StubServer stub;
  std::size_t asked = 0;
  stub.server().Post("/v1/next_token", [&](const httplib::Request& req, httplib::Response& res) {
    asked = nlohmann::json::parse(req.body).at("top_k").get<std::size_t>();
    reply(res, {{"top_ids", {3, 0}}, {"top_probs", {0.6, 0.2}}});
  });
  auto opt = options_for(stub, 6);
  opt.top_k = 2;
  const RemoteLanguageModel lm(opt);
  const auto p = lm.predict(TokenSequence{});
  EXPECT_EQ(asked, 2u);
  EXPECT_NEAR(p[3], 0.6, 1e-12);
  EXPECT_NEAR(p[0], 0.2, 1e-12);
  for (TokenId id : {1u, 2u, 4u, 5u}) EXPECT_NEAR(p[id], 0.05, 1e-12);
}

TEST(RemoteLm, EmbedReadsVector) {
  StubServer stub;
  stub.server().Post("/v1/embed", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"vec", {0.5, -0.25, 0.0, 1.0}}});
  });
  const RemoteLanguageModel lm(options_for(stub, 3, 4));
  EXPECT_EQ(lm.embed(TokenSequence{1}).values, (std::vector<float>{0.5f, -0.25f, 0.0f, 1.0f}));
}

TEST(RemoteLm, BadRepliesAreBackendUnavailable) {
  StubServer stub;
  std::string mode;
  stub.server().Post("/v1/next_token", [&](const httplib::Request&, httplib::Response& res) {
    if (mode == "status") {
      res.status = 500;
    } else if (mode == "json") {
      res.set_content("{not json", "application/json");
    } else if (mode == "length") {
      reply(res, {{"probs", {0.5, 0.5}}});
    } else if (mode == "negative") {
      reply(res, {{"probs", {1.5, -0.5, 0.0}}});
    } else {
      reply(res, {{"something", 1}});
    }
  });
  stub.server().Post("/v1/embed", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"vec", {1.0, 2.0}}});
  });
  const RemoteLanguageModel lm(options_for(stub, 3, 4));
  for (const char* m : {"status", "json", "length", "negative", "missing"}) {
    mode = m;
    EXPECT_THROW(lm.predict(TokenSequence{}), BackendUnavailable) << m;
  }
  EXPECT_THROW(lm.embed(TokenSequence{}), BackendUnavailable);
}

TEST(RemoteLm, UnreachableServerIsBackendUnavailable) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }  // closed again: nothing listens there now
  RemoteOptions o;
  o.base_url = "http://127.0.0.1:" + std::to_string(port);
  o.vocab_size = 3;
  o.timeout_seconds = 1.0;
  const RemoteLanguageModel lm(o);
  EXPECT_THROW(lm.predict(TokenSequence{}), BackendUnavailable);
  EXPECT_THROW(lm.embed(TokenSequence{}), BackendUnavailable);
}

TEST(RemoteLm, RejectsBadOptions) {
  RemoteOptions o;
  o.vocab_size = 3;
  EXPECT_THROW(RemoteLanguageModel{o}, ConfigError);
  o.base_url = "http://127.0.0.1:1";
  o.max_in_flight = 0;
  EXPECT_THROW(RemoteLanguageModel{o}, ConfigError);
}

TEST(RemoteLm, CapsRequestsInFlight) {
  StubServer stub;
  std::atomic<int> now{0}, peak{0};
  stub.server().Post("/v1/next_token", [&](const httplib::Request&, httplib::Response& res) {
    const int n = ++now;
    int p = peak.load();
    while (n > p && !peak.compare_exchange_weak(p, n)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(40));
    --now;
    reply(res, {{"probs", {0.5, 0.5}}});
  });
  auto opt = options_for(stub, 2);
  opt.max_in_flight = 2;
  const RemoteLanguageModel lm(opt);
  {
    std::vector<std::jthread> callers;
    for (int i = 0; i < 6; ++i) callers.emplace_back([&] { lm.predict(TokenSequence{}); });
  }
  EXPECT_GE(peak.load(), 1);
  EXPECT_LE(peak.load(), 2);
}

}  // namespace
}  // namespace knm
