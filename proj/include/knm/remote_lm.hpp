#pragma once

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "knm/distribution.hpp"
#include "knm/errors.hpp"
#include "knm/lm_backend.hpp"

namespace knm {

struct RemoteOptions {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::size_t vocab_size = 0;
  std::size_t dim = 64;
  double timeout_seconds = 30.0;
  std::ptrdiff_t max_in_flight = 8;
  std::optional<std::size_t> top_k;  // unset: ask for the full vocabulary
};

/// JSON-over-HTTP adapter for a model served elsewhere.
///
///   POST /v1/next_token {"tokens":[...], "top_k":K?}
///        -> {"probs":[V floats]} | {"logits":[V floats]}
///           | {"top_ids":[...], "top_probs":[...]}
///   POST /v1/embed {"tokens":[...]} -> {"vec":[d floats]}
///
/// A top-K answer spreads the leftover mass uniformly over the remaining ids.
/// Any transport failure, non-200 status or malformed body throws
/// BackendUnavailable. At most max_in_flight requests run at once.
class RemoteLanguageModel final : public LanguageModel {
 public:
  explicit RemoteLanguageModel(RemoteOptions options)
      : options_(std::move(options)),
        slots_(std::make_unique<std::counting_semaphore<>>(options_.max_in_flight)) {
    if (options_.base_url.empty()) throw ConfigError("remote model: empty base URL");
    if (options_.vocab_size < 2) throw ConfigError("remote model: vocabulary size not set");
    if (options_.max_in_flight < 1) throw ConfigError("remote model: max_in_flight must be >= 1");
  }

  TokenDistribution predict(std::span<const TokenId> context) const override {
    nlohmann::json body{{"tokens", std::vector<TokenId>(context.begin(), context.end())}};
    if (options_.top_k) body["top_k"] = *options_.top_k;
    const auto reply = post("/v1/next_token", body);
    const std::size_t v = options_.vocab_size;
    try {
      if (reply.contains("logits")) {
        const auto logits = reply.at("logits").get<std::vector<double>>();
        require(logits.size() == v, "logits length != vocabulary size");
        for (double x : logits) require(std::isfinite(x), "non-finite logit");
        return TokenDistribution::softmax(logits);
      }
      if (reply.contains("probs")) {
        auto probs = reply.at("probs").get<std::vector<double>>();
        require(probs.size() == v, "probs length != vocabulary size");
        return normalized(std::move(probs));
      }
      if (reply.contains("top_ids")) {
        const auto ids = reply.at("top_ids").get<std::vector<std::size_t>>();
        const auto ps = reply.at("top_probs").get<std::vector<double>>();
        require(ids.size() == ps.size() && !ids.empty() && ids.size() <= v,
                "top_ids/top_probs mismatch");
        std::vector<double> probs(v, -1.0);
        double mass = 0.0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          require(ids[i] < v && probs[ids[i]] < 0.0, "bad or repeated top id");
          require(std::isfinite(ps[i]) && ps[i] >= 0.0, "bad top probability");
          probs[ids[i]] = ps[i];
          mass += ps[i];
        }
        require(mass <= 1.0 + 1e-6, "top probabilities exceed 1");
        const std::size_t rest = v - ids.size();
        const double fill = rest == 0 ? 0.0 : std::max(0.0, 1.0 - mass) / static_cast<double>(rest);
        for (auto& p : probs) {
          if (p < 0.0) p = fill;
        }
        return normalized(std::move(probs));
      }
    } catch (const nlohmann::json::exception& e) {
      throw BackendUnavailable(std::string("remote model: malformed next_token reply: ") + e.what());
    }
    throw BackendUnavailable("remote model: next_token reply has no probs/logits/top_ids");
  }

  ContextEmbedding embed(std::span<const TokenId> context) const override {
    const nlohmann::json body{{"tokens", std::vector<TokenId>(context.begin(), context.end())}};
    const auto reply = post("/v1/embed", body);
    ContextEmbedding e;
    try {
      const auto vec = reply.at("vec").get<std::vector<double>>();
      require(vec.size() == options_.dim, "embedding length != configured dimension");
      e.values.reserve(vec.size());
      for (double x : vec) {
        require(std::isfinite(x), "non-finite embedding entry");
        e.values.push_back(static_cast<float>(x));
      }
    } catch (const nlohmann::json::exception& ex) {
      throw BackendUnavailable(std::string("remote model: malformed embed reply: ") + ex.what());
    }
    return e;
  }

  std::size_t vocab_size() const override { return options_.vocab_size; }
  std::size_t embedding_dim() const override { return options_.dim; }
  const RemoteOptions& options() const { return options_; }

 private:
  static void require(bool ok, const char* what) {
    if (!ok) throw BackendUnavailable(std::string("remote model: ") + what);
  }

  static TokenDistribution normalized(std::vector<double> probs) {
    double s = 0.0;
    for (double p : probs) {
      require(std::isfinite(p) && p >= 0.0, "negative or non-finite probability");
      s += p;
    }
    require(std::abs(s - 1.0) <= 1e-3, "probabilities do not sum to 1");
    for (auto& p : probs) p /= s;
    return TokenDistribution(std::move(probs));
  }

  nlohmann::json post(const std::string& endpoint, const nlohmann::json& body) const {
    struct Slot {
      std::counting_semaphore<>& s;
      explicit Slot(std::counting_semaphore<>& sem) : s(sem) { s.acquire(); }
      ~Slot() { s.release(); }
    } slot(*slots_);

    httplib::Client client(options_.base_url);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(options_.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(endpoint, body.dump(), "application/json");
    if (!res) {
      throw BackendUnavailable("remote model: " + endpoint + " failed: " +
                               httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw BackendUnavailable("remote model: " + endpoint + " returned HTTP " +
                               std::to_string(res->status));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendUnavailable("remote model: " + endpoint + " returned invalid JSON: " + e.what());
    }
  }

  RemoteOptions options_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace knm
