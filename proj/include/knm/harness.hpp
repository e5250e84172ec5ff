#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "knm/combiner.hpp"
#include "knm/config.hpp"
#include "knm/corpus.hpp"
#include "knm/datastore.hpp"
#include "knm/metrics.hpp"
#include "knm/ngram_lm.hpp"
#include "knm/remote_lm.hpp"
#include "knm/retrieval.hpp"
#include "knm/tokenizer.hpp"

namespace knm {

inline constexpr std::size_t kLambdaBins = 20;

struct ModeReport {
  CombineMode mode = CombineMode::lm_only;
  std::size_t tokens = 0;
  std::size_t correct = 0;
  double token_accuracy = 0.0;
  std::array<std::size_t, 5> class_tokens{};
  std::array<std::size_t, 5> class_correct{};
  std::array<double, 5> class_accuracy{};
  std::size_t lines = 0;
  double line_em = 0.0;
  double line_es = 0.0;
  std::uint64_t db_bytes = 0;
  std::array<std::size_t, kLambdaBins> lambda_histogram{};
  // Wall-clock dependent; never part of the deterministic records.
  double tokens_per_second = 0.0;
};

struct EvalReport {
  std::vector<ModeReport> modes;
  std::size_t test_tokens = 0;
  std::size_t test_lines = 0;
  std::uint64_t db_total_tokens = 0;
  std::uint64_t db_mistake_tokens = 0;
  double db_err = 0.0;
  std::size_t k = 0;
  std::size_t window = 0;
  double fixed_lambda = 0.0;
  double throughput_floor = 5.0;

  const ModeReport& mode(CombineMode m) const {
    for (const auto& r : modes) {
      if (r.mode == m) return r;
    }
    throw ConfigError("mode '" + std::string(to_string(m)) + "' was not evaluated");
  }
  bool has(CombineMode m) const {
    return std::any_of(modes.begin(), modes.end(), [m](const auto& r) { return r.mode == m; });
  }

  /// One JSON object per (mode, metric) cell. Depends only on the inputs.
  std::vector<std::string> records() const {
    std::vector<std::string> out;
    auto put = [&](std::string_view mode, std::string_view metric, const nlohmann::json& value) {
      out.push_back(nlohmann::json{{"mode", mode}, {"metric", metric}, {"value", value}}.dump());
    };
    put("*", "db_total_tokens", db_total_tokens);
    put("*", "db_mistake_tokens", db_mistake_tokens);
    put("*", "db_err", db_err);
    put("*", "test_tokens", test_tokens);
    put("*", "test_lines", test_lines);
    put("*", "k", k);
    put("*", "window", window);
    put("*", "fixed_lambda", fixed_lambda);
    for (const auto& r : modes) {
      const auto name = to_string(r.mode);
      put(name, "token_accuracy", r.token_accuracy);
      put(name, "tokens", r.tokens);
      for (std::size_t c = 0; c < kAllTokenClasses.size(); ++c) {
        const auto cls = std::string(to_string(kAllTokenClasses[c]));
        put(name, "class_accuracy/" + cls, r.class_accuracy[c]);
        put(name, "class_tokens/" + cls, r.class_tokens[c]);
      }
      put(name, "line_em", r.line_em);
      put(name, "line_es", r.line_es);
      put(name, "lines", r.lines);
      put(name, "db_bytes", r.db_bytes);
      put(name, "lambda_histogram", r.lambda_histogram);
    }
    return out;
  }

  /// Throughput records, including the slowdown guard against lm_only.
  std::vector<std::string> timing_records() const {
    std::vector<std::string> out;
    const double base = has(CombineMode::lm_only) ? mode(CombineMode::lm_only).tokens_per_second : 0.0;
    for (const auto& r : modes) {
      nlohmann::json j{{"mode", to_string(r.mode)}, {"metric", "tokens_per_second"},
                       {"value", r.tokens_per_second}};
      if (base > 0.0 && r.tokens_per_second > 0.0) {
        const double slowdown = base / r.tokens_per_second;
        j["slowdown_vs_lm_only"] = slowdown;
        j["within_floor"] = slowdown <= throughput_floor;
      }
      out.push_back(j.dump());
    }
    return out;
  }

  std::string table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "datastore: " << db_total_tokens << " tokens, " << db_mistake_tokens
       << " mistakes, err = " << std::setprecision(4) << db_err << std::setprecision(2) << "\n";
    os << "test: " << test_tokens << " tokens, " << test_lines << " line items; k = " << k
       << ", N = " << window << ", fixed lambda = " << fixed_lambda << "\n\n";
    os << std::left << std::setw(18) << "mode" << std::right << std::setw(9) << "acc%";
    for (auto c : kAllTokenClasses) os << std::setw(13) << to_string(c);
    os << std::setw(9) << "EM%" << std::setw(9) << "ES%" << std::setw(12) << "db bytes"
       << std::setw(12) << "tok/s" << "\n";
    for (const auto& r : modes) {
      os << std::left << std::setw(18) << to_string(r.mode) << std::right << std::setw(9)
         << r.token_accuracy;
      for (std::size_t c = 0; c < 5; ++c) os << std::setw(13) << r.class_accuracy[c];
      os << std::setw(9) << r.line_em << std::setw(9) << r.line_es << std::setw(12) << r.db_bytes
         << std::setw(12) << std::setprecision(0) << r.tokens_per_second << std::setprecision(2)
         << "\n";
    }
    return os.str();
  }
};

namespace detail {

/// Runs `fn`, prefixing any library error with the pipeline stage while
/// keeping its category (config / backend / data).
template <typename F>
auto in_stage(std::string_view stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(stage) + ": " + e.what());
  } catch (const BackendError& e) {
    throw BackendUnavailable(std::string(stage) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(stage) + ": " + e.what());
  }
}

inline std::size_t lambda_bin(double lambda) {
  const auto b = static_cast<std::size_t>(std::floor(lambda * static_cast<double>(kLambdaBins)));
  return std::min(b, kLambdaBins - 1);
}

/// Seeded cut point in [1, len - 1] for a line of `len` >= 2 tokens.
inline std::size_t line_cut(std::uint64_t seed, std::size_t sequence, std::size_t line,
                            std::size_t len) {
  std::uint64_t h = splitmix64(seed ^ 0x6C696E65ULL);
  h = splitmix64(h ^ sequence);
  h = splitmix64(h ^ line);
  return 1 + static_cast<std::size_t>(h % (len - 1));
}

using Clock = std::chrono::steady_clock;
inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

/// One line-completion item: complete `sequence[cut, end)` from
/// `sequence[0, cut)`.
struct LineItem {
  std::size_t sequence = 0;
  std::size_t cut = 0;
  std::size_t end = 0;
};

/// Seeded line items for a tokenized test corpus; lines shorter than two
/// tokens are skipped.
inline std::vector<LineItem> make_line_items(std::span<const TokenSequence> test,
                                             std::uint64_t seed) {
  std::vector<LineItem> items;
  for (std::size_t s = 0; s < test.size(); ++s) {
    const auto& seq = test[s];
    std::size_t start = 0;
    std::size_t line = 0;
    while (start < seq.size()) {
      std::size_t end = start;
      while (end < seq.size() && seq[end] != kEolId) ++end;
      const std::size_t len = end - start;
      if (len >= 2) items.push_back({s, start + detail::line_cut(seed, s, line, len), end});
      start = end + 1;
      ++line;
    }
  }
  return items;
}

/// A prepared experiment: vocabulary, model, both datastores and their
/// indexes, plus per-position caches reused across evaluations.
class Experiment {
 public:
  Experiment(Vocabulary vocab, std::unique_ptr<LanguageModel> lm,
             std::vector<TokenSequence> db, std::vector<TokenSequence> test,
             const ExperimentConfig& config)
      : vocab_(std::move(vocab)),
        lm_(std::move(lm)),
        db_(std::move(db)),
        test_(std::move(test)),
        config_(config),
        classes_(classify_vocabulary(vocab_, parse_language(config.language))) {
    if (lm_->vocab_size() != vocab_.size()) {
      throw VocabMismatch("model vocabulary size " + std::to_string(lm_->vocab_size()) +
                          " != shared vocabulary size " + std::to_string(vocab_.size()));
    }
    std::size_t n = 0;
    for (const auto& s : test_) n += s.size();
    if (n == 0) throw EmptyCorpus("test corpus has no tokens");
    BuildOptions bo{.dim = config.dim, .threads = config.threads, .origins = nullptr};
    decoupled_ = std::make_unique<Datastore>(
        detail::in_stage("build decoupled datastore", [&] { return build_decoupled(db_, *lm_, bo); }));
    full_ = std::make_unique<Datastore>(
        detail::in_stage("build full datastore", [&] { return build_full(db_, *lm_, bo); }));
    decoupled_index_ = std::make_unique<FlatIndex>(*decoupled_);
    full_index_ = std::make_unique<FlatIndex>(*full_);
  }

  /// Loads corpora, builds the vocabulary and the model named by the config.
  static std::unique_ptr<Experiment> prepare(const ExperimentConfig& config) {
    config.validate();
    const auto db_records = detail::in_stage("read db corpus", [&] { return read_corpus(config.db_corpus); });
    const auto test_records =
        detail::in_stage("read test corpus", [&] { return read_corpus(config.test_corpus); });

    Vocabulary vocab;
    std::unique_ptr<LanguageModel> lm;
    if (config.remote()) {
      vocab = detail::in_stage("load vocabulary", [&] { return Vocabulary::load(config.vocab); });
      RemoteOptions ro;
      ro.base_url = config.remote_url();
      ro.vocab_size = vocab.size();
      ro.dim = config.dim;
      ro.timeout_seconds = config.remote_timeout;
      ro.max_in_flight = config.remote_max_in_flight;
      if (config.remote_top_k > 0) ro.top_k = config.remote_top_k;
      lm = detail::in_stage("connect remote model",
                            [&] { return std::make_unique<RemoteLanguageModel>(ro); });
    } else {
      const auto train_records = detail::in_stage(
          "read lm training corpus", [&] { return read_corpus(config.lm_train_corpus); });
      std::vector<std::string> texts = texts_of(train_records);
      for (const auto& r : db_records) texts.push_back(r.text);
      vocab = detail::in_stage("build vocabulary", [&] { return build_vocabulary(texts); });
      const auto train = tokenize_corpus(train_records, vocab);
      NgramOptions opt;
      opt.order = config.lm_order;
      opt.smoothing_k = config.lm_smoothing_k;
      opt.dim = config.dim;
      opt.seed = config.seed;
      lm = detail::in_stage("train reference model", [&] {
        return std::make_unique<NgramLanguageModel>(
            NgramLanguageModel::train(train, vocab.size(), opt));
      });
    }
    auto db = tokenize_corpus(db_records, vocab);
    auto test = tokenize_corpus(test_records, vocab);
    return std::make_unique<Experiment>(std::move(vocab), std::move(lm), std::move(db),
                                        std::move(test), config);
  }

  const Vocabulary& vocab() const { return vocab_; }
  const LanguageModel& lm() const { return *lm_; }
  const Datastore& decoupled() const { return *decoupled_; }
  const Datastore& full() const { return *full_; }
  const FlatIndex& index_for(CombineMode m) const {
    return uses_full_store(m) ? *full_index_ : *decoupled_index_;
  }
  const std::vector<TokenSequence>& db_sequences() const { return db_; }
  const std::vector<TokenSequence>& test_sequences() const { return test_; }
  const ExperimentConfig& config() const { return config_; }

  /// Per-position lambda of every test position under `mode`, in corpus
  /// order. Uses the same cached replay as evaluate().
  std::vector<double> position_lambdas(const ExperimentConfig& settings, CombineMode mode) {
    const auto cc = settings.combiner(mode);
    std::vector<double> out;
    for (std::size_t s = 0; s < test_.size(); ++s) {
      const auto& events = events_for(s, settings.k);
      for (std::size_t t = 0; t < test_[s].size(); ++t) {
        const auto w = make_window(std::span<const Event>(events).first(t), cc.window, cc.exclusion);
        out.push_back(lambda_for_mode(cc, w, index_for(mode).store().err()));
      }
    }
    return out;
  }

  /// Scores every configured mode on every test position and line item.
  /// Only k, window, fixed_lambda, exclusion, modes, line settings and seed
  /// are read from `settings`; the model and datastores are fixed.
  EvalReport evaluate(const ExperimentConfig& settings) {
    EvalReport rep;
    rep.k = settings.k;
    rep.window = settings.window;
    rep.fixed_lambda = settings.fixed_lambda;
    rep.throughput_floor = settings.throughput_floor;
    rep.db_total_tokens = decoupled_->total_tokens();
    rep.db_mistake_tokens = decoupled_->mistake_tokens();
    rep.db_err = decoupled_->err();

    const auto& modes = settings.modes;
    const bool any_knm = std::any_of(modes.begin(), modes.end(), [](CombineMode m) {
      return uses_retrieval(m) && !uses_full_store(m);
    });
    const bool any_full = std::any_of(modes.begin(), modes.end(), uses_full_store);
    const bool any_retrieval = any_knm || any_full;

    // Warm the caches sequentially so timings and contents are fixed.
    for (std::size_t s = 0; s < test_.size(); ++s) {
      if (any_retrieval) embeddings_for(s);
      if (any_knm) neighbors_for(s, settings.k, false);
      if (any_full) neighbors_for(s, settings.k, true);
      if (any_knm) events_for(s, settings.k);
    }

    struct Partial {
      std::vector<ModeReport> modes;
      std::vector<double> em, es;
      double predict_seconds = 0.0;
      std::vector<double> combine_seconds;
    };
    const auto items = settings.line_task ? make_line_items(test_, settings.seed)
                                          : std::vector<LineItem>{};
    std::vector<std::vector<std::size_t>> items_by_seq(test_.size());
    for (std::size_t i = 0; i < items.size(); ++i) items_by_seq[items[i].sequence].push_back(i);

    auto run_sequence = [&](std::size_t s) {
      Partial part;
      part.modes.resize(modes.size());
      part.combine_seconds.assign(modes.size(), 0.0);
      for (std::size_t m = 0; m < modes.size(); ++m) part.modes[m].mode = modes[m];
      const auto& seq = test_[s];
      const std::vector<Event>* events = any_knm ? &events_for(s, settings.k) : nullptr;
      const std::vector<NeighborSet>* nb_dec = any_knm ? &neighbors_for(s, settings.k, false) : nullptr;
      const std::vector<NeighborSet>* nb_full = any_full ? &neighbors_for(s, settings.k, true) : nullptr;

      for (std::size_t t = 0; t < seq.size(); ++t) {
        const auto ctx = std::span<const TokenId>(seq).first(t);
        auto t0 = detail::Clock::now();
        const auto p_lm = lm_->predict(ctx);
        part.predict_seconds += detail::seconds_since(t0);
        std::optional<TokenDistribution> p_dec, p_full;
        if (nb_dec) p_dec = knm_distribution((*nb_dec)[t], vocab_.size());
        if (nb_full) p_full = knm_distribution((*nb_full)[t], vocab_.size());
        ObservationWindow window;
        if (events) {
          window = make_window(std::span<const Event>(*events).first(t), settings.window,
                               settings.exclusion);
        }
        const TokenId actual = seq[t];
        const auto cls = static_cast<std::size_t>(classes_[actual]);
        for (std::size_t m = 0; m < modes.size(); ++m) {
          t0 = detail::Clock::now();
          const auto cc = settings.combiner(modes[m]);
          const double lam = lambda_for_mode(cc, window, index_for(modes[m]).store().err());
          const TokenId pred =
              modes[m] == CombineMode::lm_only
                  ? p_lm.argmax()
                  : interpolate(p_lm, uses_full_store(modes[m]) ? p_full : p_dec, lam).argmax();
          part.combine_seconds[m] += detail::seconds_since(t0);
          auto& r = part.modes[m];
          ++r.tokens;
          ++r.class_tokens[cls];
          if (pred == actual) {
            ++r.correct;
            ++r.class_correct[cls];
          }
          ++r.lambda_histogram[detail::lambda_bin(lam)];
        }
      }

      for (std::size_t idx : items_by_seq[s]) {
        const auto& item = items[idx];
        const auto ctx = std::span<const TokenId>(seq).first(item.cut);
        const auto reference =
            render_line(std::span<const TokenId>(seq).subspan(item.cut, item.end - item.cut), vocab_);
        ObservationWindow window;
        if (events) {
          window = make_window(std::span<const Event>(*events).first(item.cut), settings.window,
                               settings.exclusion);
        }
        for (std::size_t m = 0; m < modes.size(); ++m) {
          const auto cc = settings.combiner(modes[m]);
          const double lam = lambda_for_mode(cc, window, index_for(modes[m]).store().err());
          const Completer completer(*lm_, index_for(modes[m]), cc);
          const auto generated = completer.complete_line_with_lambda(ctx, lam, settings.line_max_tokens);
          const auto hyp = render_line(generated, vocab_);
          auto& r = part.modes[m];
          ++r.lines;
          r.line_em += exact_match(hyp, reference);
          r.line_es += edit_similarity(hyp, reference);
        }
      }
      return part;
    };

    std::vector<Partial> parts(test_.size());
    const unsigned threads = std::min<std::size_t>(
        settings.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : settings.threads,
        std::max<std::size_t>(1, test_.size()));
    if (threads <= 1) {
      for (std::size_t s = 0; s < test_.size(); ++s) parts[s] = run_sequence(s);
    } else {
      std::vector<std::exception_ptr> errors(threads);
      {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
          pool.emplace_back([&, w] {
            try {
              for (std::size_t s = w; s < test_.size(); s += threads) parts[s] = run_sequence(s);
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        }
      }
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    // Ordered reduction.
    rep.modes.resize(modes.size());
    double predict_seconds = 0.0;
    std::vector<double> combine_seconds(modes.size(), 0.0);
    for (std::size_t m = 0; m < modes.size(); ++m) rep.modes[m].mode = modes[m];
    for (const auto& part : parts) {
      predict_seconds += part.predict_seconds;
      for (std::size_t m = 0; m < modes.size(); ++m) {
        auto& r = rep.modes[m];
        const auto& p = part.modes[m];
        r.tokens += p.tokens;
        r.correct += p.correct;
        for (std::size_t c = 0; c < 5; ++c) {
          r.class_tokens[c] += p.class_tokens[c];
          r.class_correct[c] += p.class_correct[c];
        }
        for (std::size_t b = 0; b < kLambdaBins; ++b) r.lambda_histogram[b] += p.lambda_histogram[b];
        r.lines += p.lines;
        r.line_em += p.line_em;
        r.line_es += p.line_es;
        combine_seconds[m] += part.combine_seconds[m];
      }
    }
    rep.test_tokens = rep.modes.empty() ? 0 : rep.modes.front().tokens;
    rep.test_lines = items.size();
    for (std::size_t m = 0; m < modes.size(); ++m) {
      auto& r = rep.modes[m];
      r.token_accuracy = r.tokens ? 100.0 * static_cast<double>(r.correct) / static_cast<double>(r.tokens) : 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        r.class_accuracy[c] = r.class_tokens[c] ? 100.0 * static_cast<double>(r.class_correct[c]) /
                                                      static_cast<double>(r.class_tokens[c])
                                                : 0.0;
      }
      if (r.lines) {
        r.line_em = 100.0 * r.line_em / static_cast<double>(r.lines);
        r.line_es = r.line_es / static_cast<double>(r.lines);
      }
      r.db_bytes = !uses_retrieval(r.mode)    ? 0
                   : uses_full_store(r.mode) ? full_->serialized_size()
                                             : decoupled_->serialized_size();
      double seconds = predict_seconds + combine_seconds[m];
      if (uses_retrieval(r.mode)) {
        seconds += embed_seconds_ + search_seconds_[{settings.k, uses_full_store(r.mode)}];
      }
      r.tokens_per_second = seconds > 0.0 ? static_cast<double>(r.tokens) / seconds : 0.0;
    }
    return rep;
  }

 private:
  const std::vector<ContextEmbedding>& embeddings_for(std::size_t s) {
    std::lock_guard lock(cache_mutex_);
    auto& slot = embeddings_[s];
    if (slot.size() != test_[s].size()) {
      slot.clear();
      const auto t0 = detail::Clock::now();
      for (std::size_t t = 0; t < test_[s].size(); ++t) {
        slot.push_back(lm_->embed(std::span<const TokenId>(test_[s]).first(t)));
      }
      embed_seconds_ += detail::seconds_since(t0);
    }
    return slot;
  }

  const std::vector<NeighborSet>& neighbors_for(std::size_t s, std::size_t k, bool full) {
    const auto& emb = embeddings_for(s);
    std::lock_guard lock(cache_mutex_);
    auto& table = neighbors_[{k, full}];
    if (table.empty()) table.resize(test_.size());
    auto& slot = table[s];
    if (slot.size() != test_[s].size()) {
      slot.clear();
      const auto& index = full ? *full_index_ : *decoupled_index_;
      const auto t0 = detail::Clock::now();
      for (const auto& e : emb) slot.push_back(index.search(e, k));
      search_seconds_[{k, full}] += detail::seconds_since(t0);
    }
    return slot;
  }

  // Observation per test position: LM argmax vs retrieval top-1 (decoupled
  // store) vs the actual token.
  const std::vector<Event>& events_for(std::size_t s, std::size_t k) {
    const auto& nb = neighbors_for(s, k, false);
    std::lock_guard lock(cache_mutex_);
    auto& table = events_[k];
    if (table.empty()) table.resize(test_.size());
    auto& slot = table[s];
    if (slot.size() != test_[s].size()) {
      slot.clear();
      const auto& seq = test_[s];
      for (std::size_t t = 0; t < seq.size(); ++t) {
        const auto argmax = lm_->predict(std::span<const TokenId>(seq).first(t)).argmax();
        slot.push_back(classify_observation(argmax, nb[t].top1(), seq[t]));
      }
    }
    return slot;
  }

  Vocabulary vocab_;
  std::unique_ptr<LanguageModel> lm_;
  std::vector<TokenSequence> db_;
  std::vector<TokenSequence> test_;
  ExperimentConfig config_;
  std::vector<TokenClass> classes_;
  std::unique_ptr<Datastore> decoupled_;
  std::unique_ptr<Datastore> full_;
  std::unique_ptr<FlatIndex> decoupled_index_;
  std::unique_ptr<FlatIndex> full_index_;

  std::mutex cache_mutex_;
  std::map<std::size_t, std::vector<ContextEmbedding>> embeddings_;
  std::map<std::pair<std::size_t, bool>, std::vector<std::vector<NeighborSet>>> neighbors_;
  std::map<std::size_t, std::vector<std::vector<Event>>> events_;
  double embed_seconds_ = 0.0;
  std::map<std::pair<std::size_t, bool>, double> search_seconds_;
};

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) {
    text += l;
    text += '\n';
  }
  binary::write_file(path, text);
}

/// Prepares, evaluates and writes every configured output.
inline EvalReport run_experiment(const ExperimentConfig& config) {
  auto exp = Experiment::prepare(config);
  auto report = detail::in_stage("evaluate", [&] { return exp->evaluate(config); });
  detail::in_stage("write outputs", [&] {
    if (!config.datastore_dir.empty()) {
      std::filesystem::create_directories(config.datastore_dir);
      const std::filesystem::path dir(config.datastore_dir);
      exp->decoupled().save((dir / "decoupled.knmds").string());
      exp->full().save((dir / "full.knmds").string());
      exp->vocab().save((dir / "vocab.txt").string());
    }
    if (!config.report.empty()) write_lines(config.report, report.records());
    if (!config.timing_report.empty()) write_lines(config.timing_report, report.timing_records());
    return 0;
  });
  return report;
}

enum class SweepAxis : std::uint8_t { k, window, fixed_lambda };

inline SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "k") return SweepAxis::k;
  if (s == "N" || s == "window") return SweepAxis::window;
  if (s == "lambda" || s == "fixed_lambda") return SweepAxis::fixed_lambda;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "' (expected k, N or lambda)");
}

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::k: return "k";
    case SweepAxis::window: return "N";
    case SweepAxis::fixed_lambda: return "lambda";
  }
  return "k";
}

inline ExperimentConfig with_axis_value(ExperimentConfig c, SweepAxis axis, double value) {
  auto as_count = [&](const char* name) {
    if (!(value >= 1.0) || value != std::floor(value)) {
      throw ConfigError(std::string("sweep: ") + name + " values must be positive integers");
    }
    return static_cast<std::size_t>(value);
  };
  switch (axis) {
    case SweepAxis::k: c.k = as_count("k"); break;
    case SweepAxis::window: c.window = as_count("N"); break;
    case SweepAxis::fixed_lambda:
      if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("sweep: lambda values must lie in [0, 1]");
      c.fixed_lambda = value;
      break;
  }
  return c;
}

/// One report per axis value on a single prepared experiment.
inline std::vector<EvalReport> sweep(Experiment& exp, const ExperimentConfig& config,
                                     SweepAxis axis, std::span<const double> values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<EvalReport> reports;
  for (double v : values) reports.push_back(exp.evaluate(with_axis_value(config, axis, v)));
  return reports;
}

inline std::vector<EvalReport> sweep(const ExperimentConfig& config, SweepAxis axis,
                                     std::span<const double> values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  auto exp = Experiment::prepare(config);
  return sweep(*exp, config, axis, values);
}

inline std::string sweep_csv(SweepAxis axis, std::span<const double> values,
                             std::span<const EvalReport> reports) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "axis,value,mode,token_accuracy,line_em,line_es,db_bytes,tokens_per_second\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (const auto& r : reports[i].modes) {
      os << to_string(axis) << ',' << values[i] << ',' << to_string(r.mode) << ','
         << r.token_accuracy << ',' << r.line_em << ',' << r.line_es << ',' << r.db_bytes << ','
         << r.tokens_per_second << '\n';
    }
  }
  return os.str();
}

}  // namespace knm
