#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "knm/binary_io.hpp"
#include "knm/corpus.hpp"

namespace knm {

/// Parameters of the synthetic domain-shift suite: a general corpus for the
/// model, and a domain corpus (database + test split) that mixes the same
/// kind of code with fixed 4-token idioms the general corpus never shows.
struct ShiftSuiteOptions {
  std::uint64_t seed = 7;
  std::size_t idioms = 30;
  std::size_t db_repeats = 20;    // occurrences of each idiom in the database split
  std::size_t test_repeats = 12;  // occurrences of each idiom in the test split
  std::size_t train_files = 120;
  std::size_t db_files = 40;
  std::size_t test_files = 20;
  std::size_t statements_per_file = 80;  // background statements per file
  std::size_t test_statements_per_file = 10;
  std::size_t phrasebook = 24;  // distinct background statements
};

struct ShiftSuite {
  std::vector<SourceRecord> train;  // general corpus (model training)
  std::vector<SourceRecord> db;     // domain corpus, database split
  std::vector<SourceRecord> test;   // domain corpus, test split
  std::vector<std::array<std::string, 4>> idioms;
};

namespace detail {

class SuiteWriter {
 public:
  explicit SuiteWriter(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  // Rank-skewed pick: rank r has weight 1 / (r + 1).
  std::size_t skewed(std::size_t n) {
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) total += 1.0 / static_cast<double>(r + 1);
    double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53 * total;
    for (std::size_t r = 0; r < n; ++r) {
      u -= 1.0 / static_cast<double>(r + 1);
      if (u < 0.0) return r;
    }
    return n - 1;
  }

  std::string ident() { return kIdents[skewed(kIdents.size())]; }
  std::string method() { return kMethods[skewed(kMethods.size())]; }
  std::string number() { return kNumbers[skewed(kNumbers.size())]; }

  std::string statement() {
    switch (skewed(7)) {
      case 0: return ident() + " = " + ident() + " + " + number() + " ;";
      case 1: return ident() + " . " + method() + " ( " + ident() + " ) ;";
      case 2: return "if ( " + ident() + " > " + number() + " ) {";
      case 3: return "}";
      case 4: return "return " + ident() + " ;";
      case 5: return "int " + ident() + " = " + number() + " ;";
      default: return ident() + " . " + method() + " ( ) ;";
    }
  }

  std::vector<std::string> phrasebook(std::size_t n) {
    std::vector<std::string> lines;
    while (lines.size() < n) {
      auto l = statement();
      if (std::find(lines.begin(), lines.end(), l) == lines.end()) lines.push_back(std::move(l));
    }
    return lines;
  }

  std::string idiom_statement(const std::array<std::string, 4>& idiom) {
    return idiom[0] + " " + idiom[1] + " " + idiom[2] + " " + idiom[3] + " " + ident() + " ) ;";
  }

 private:
  static inline const std::vector<std::string> kIdents = {
      "count", "value", "result", "index", "total", "buffer", "item",  "node",
      "size",  "data",  "offset", "name",  "key",   "state",  "limit", "temp"};
  static inline const std::vector<std::string> kMethods = {
      "add", "get", "put", "remove", "update", "append", "clear", "reset", "push", "close"};
  static inline const std::vector<std::string> kNumbers = {"0", "1", "2", "10", "100"};

  std::mt19937_64 rng_;
};

}  // namespace detail

/// Deterministic in `options.seed`. Every idiom appears exactly
/// db_repeats times in the database split and test_repeats times in the
/// test split, inserted at seeded statement positions.
inline ShiftSuite make_shift_suite(const ShiftSuiteOptions& options = {}) {
  ShiftSuite suite;
  for (std::size_t i = 0; i < options.idioms; ++i) {
    const auto n = std::to_string(i);
    suite.idioms.push_back({"svc" + n, ".", "invoke" + n, "("});
  }
  detail::SuiteWriter w(options.seed);

  const auto book = w.phrasebook(options.phrasebook);
  auto general_file = [&](std::size_t statements) {
    std::vector<std::string> lines;
    for (std::size_t s = 0; s < statements; ++s) lines.push_back(book[w.skewed(book.size())]);
    return lines;
  };
  auto join = [](const std::vector<std::string>& lines) {
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    return text;
  };

  for (std::size_t f = 0; f < options.train_files; ++f) {
    suite.train.push_back({"general/File" + std::to_string(f) + ".java",
                           join(general_file(options.statements_per_file))});
  }

  auto domain_split = [&](std::size_t files, std::size_t statements, std::size_t repeats,
                          const std::string& prefix) {
    std::vector<std::vector<std::string>> contents;
    for (std::size_t f = 0; f < files; ++f) contents.push_back(general_file(statements));
    for (std::size_t r = 0; r < repeats; ++r) {
      for (const auto& idiom : suite.idioms) {
        auto& file = contents[w.below(files)];
        const auto pos = w.below(file.size() + 1);
        file.insert(file.begin() + static_cast<std::ptrdiff_t>(pos), w.idiom_statement(idiom));
      }
    }
    std::vector<SourceRecord> out;
    for (std::size_t f = 0; f < files; ++f) {
      out.push_back({prefix + "/File" + std::to_string(f) + ".java", join(contents[f])});
    }
    return out;
  };
  suite.db = domain_split(options.db_files, options.statements_per_file, options.db_repeats, "domain/db");
  suite.test = domain_split(options.test_files, options.test_statements_per_file, options.test_repeats, "domain/test");
  return suite;
}

/// Writes train.jsonl, db.jsonl, test.jsonl and a ready-to-run suite.conf
/// into `dir`; returns the config path.
inline std::string write_shift_suite(const std::filesystem::path& dir, const ShiftSuite& suite,
                                     std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  write_corpus((dir / "train.jsonl").string(), suite.train);
  write_corpus((dir / "db.jsonl").string(), suite.db);
  write_corpus((dir / "test.jsonl").string(), suite.test);
  const auto conf = (dir / "suite.conf").string();
  binary::write_file(conf,
                     "# synthetic domain-shift suite\n"
                     "lm = ref\n"
                     "lm_train_corpus = train.jsonl\n"
                     "db_corpus = db.jsonl\n"
                     "test_corpus = test.jsonl\n"
                     "lm_order = 3\n"
                     "lm_smoothing_k = 0.01\n"
                     "k = 8\n"
                     "N = 8\n"
                     "fixed_lambda = 0.1\n"
                     "seed = " + std::to_string(seed) + "\n"
                     "report = report.jsonl\n"
                     "timing_report = timing.jsonl\n");
  return conf;
}

}  // namespace knm
