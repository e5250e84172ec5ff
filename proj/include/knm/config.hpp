#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "knm/combiner.hpp"
#include "knm/errors.hpp"
#include "knm/tokenizer.hpp"

namespace knm {

/// Flat `key = value` text: one pair per line, `#` starts a comment, values
/// may be wrapped in double quotes. Duplicate keys are an error.
inline std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config key '" + key + "': bad number '" + value + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : value) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) items.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) items.push_back(std::move(cur));
  return items;
}

}  // namespace detail

/// Everything one evaluation run needs. Paths are resolved against the
/// directory of the config file they came from.
struct ExperimentConfig {
  // data
  std::string db_corpus;
  std::string test_corpus;
  std::string language = "java";

  // model: "ref" trains the reference n-gram LM on lm_train_corpus;
  // "url:<base>" talks to a remote model and needs a vocabulary file.
  std::string lm = "ref";
  std::string lm_train_corpus;
  int lm_order = 3;
  double lm_smoothing_k = 1.0;
  std::string vocab;  // required for url: models
  double remote_timeout = 30.0;
  std::int64_t remote_max_in_flight = 8;
  std::size_t remote_top_k = 0;  // 0: full vocabulary

  // engine
  std::size_t dim = 64;
  std::size_t k = 8;
  std::size_t window = 8;
  double fixed_lambda = 0.1;
  ExclusionRule exclusion = ExclusionRule::drop;
  std::vector<CombineMode> modes = {CombineMode::lm_only, CombineMode::knn_lm_baseline,
                                    CombineMode::knm_fixed_lambda, CombineMode::knm_prior_only,
                                    CombineMode::knm_bayesian};
  std::uint64_t seed = 0;

  // evaluation
  bool line_task = true;
  std::size_t line_max_tokens = 32;
  unsigned threads = 0;
  double throughput_floor = 5.0;

  // outputs (optional)
  std::string report;          // machine-readable records
  std::string timing_report;   // wall-clock dependent records
  std::string datastore_dir;   // decoupled.knmds and full.knmds

  bool remote() const { return lm.rfind("url:", 0) == 0; }
  std::string remote_url() const { return lm.substr(4); }

  void validate() const {
    if (db_corpus.empty()) throw ConfigError("config: db_corpus is required");
    if (test_corpus.empty()) throw ConfigError("config: test_corpus is required");
    if (remote()) {
      if (remote_url().empty()) throw ConfigError("config: lm = url: needs a base URL");
      if (vocab.empty()) throw ConfigError("config: a remote lm needs a vocab file");
    } else if (lm == "ref") {
      if (lm_train_corpus.empty()) throw ConfigError("config: lm = ref needs lm_train_corpus");
      if (lm_order < 1 || lm_order > 3) throw ConfigError("config: lm_order must be 1, 2 or 3");
      if (!(lm_smoothing_k > 0.0)) throw ConfigError("config: lm_smoothing_k must be > 0");
    } else {
      throw ConfigError("config: lm must be 'ref' or 'url:<base>'");
    }
    if (dim == 0) throw ConfigError("config: dim must be >= 1");
    if (k == 0) throw ConfigError("config: k must be >= 1");
    if (!(fixed_lambda >= 0.0 && fixed_lambda <= 1.0)) {
      throw ConfigError("config: fixed_lambda must lie in [0, 1]");
    }
    if (modes.empty()) throw ConfigError("config: modes must not be empty");
    if (line_max_tokens == 0) throw ConfigError("config: line_max_tokens must be >= 1");
    parse_language(language);
  }

  static ExperimentConfig from_text(std::string_view text,
                                    const std::filesystem::path& base_dir = {}) {
    ExperimentConfig c;
    auto path = [&](const std::string& v) {
      std::filesystem::path p(v);
      return (p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal().string();
    };
    for (const auto& [key, value] : parse_key_values(text)) {
      using detail::parse_number;
      if (key == "db_corpus") c.db_corpus = path(value);
      else if (key == "test_corpus") c.test_corpus = path(value);
      else if (key == "language") c.language = value;
      else if (key == "lm") c.lm = value;
      else if (key == "lm_train_corpus") c.lm_train_corpus = path(value);
      else if (key == "lm_order") c.lm_order = parse_number<int>(key, value);
      else if (key == "lm_smoothing_k") c.lm_smoothing_k = parse_number<double>(key, value);
      else if (key == "vocab") c.vocab = path(value);
      else if (key == "remote_timeout") c.remote_timeout = parse_number<double>(key, value);
      else if (key == "remote_max_in_flight") c.remote_max_in_flight = parse_number<std::int64_t>(key, value);
      else if (key == "remote_top_k") c.remote_top_k = parse_number<std::size_t>(key, value);
      else if (key == "dim" || key == "d") c.dim = parse_number<std::size_t>(key, value);
      else if (key == "k") c.k = parse_number<std::size_t>(key, value);
      else if (key == "window" || key == "N") c.window = parse_number<std::size_t>(key, value);
      else if (key == "fixed_lambda" || key == "lambda") c.fixed_lambda = parse_number<double>(key, value);
      else if (key == "exclusion") {
        if (value == "drop") c.exclusion = ExclusionRule::drop;
        else if (value == "count_as_e") c.exclusion = ExclusionRule::count_as_e;
        else throw ConfigError("config key 'exclusion': expected drop or count_as_e");
      } else if (key == "modes") {
        c.modes.clear();
        for (const auto& m : detail::split_list(value)) c.modes.push_back(parse_combine_mode(m));
      } else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
      else if (key == "line_task") c.line_task = detail::parse_bool(key, value);
      else if (key == "line_max_tokens") c.line_max_tokens = parse_number<std::size_t>(key, value);
      else if (key == "threads") c.threads = parse_number<unsigned>(key, value);
      else if (key == "throughput_floor") c.throughput_floor = parse_number<double>(key, value);
      else if (key == "report") c.report = path(value);
      else if (key == "timing_report") c.timing_report = path(value);
      else if (key == "datastore_dir") c.datastore_dir = path(value);
      else throw ConfigError("config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
  }

  static ExperimentConfig from_file(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), std::filesystem::path(file).parent_path());
  }

  CombinerConfig combiner(CombineMode mode) const {
    CombinerConfig cc;
    cc.mode = mode;
    cc.k = k;
    cc.window = window;
    cc.fixed_lambda = fixed_lambda;
    cc.exclusion = exclusion;
    return cc;
  }
};

}  // namespace knm
