#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "knm/errors.hpp"
#include "knm/tokenizer.hpp"

namespace knm {

/// One source file of a corpus.
struct SourceRecord {
  std::string path;
  std::string text;
};

/// Reads line-delimited JSON records of the form {"path": ..., "text": ...}.
/// Blank lines are skipped.
inline std::vector<SourceRecord> read_corpus(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open corpus: " + file);
  std::vector<SourceRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      records.push_back({j.at("path").get<std::string>(), j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(file + ":" + std::to_string(lineno) + ": bad corpus record: " + e.what());
    }
  }
  return records;
}

inline void write_corpus(const std::string& file, const std::vector<SourceRecord>& records) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open corpus for writing: " + file);
  for (const auto& r : records) {
    out << nlohmann::json{{"path", r.path}, {"text", r.text}}.dump() << '\n';
  }
  if (!out) throw IoError("failed writing corpus: " + file);
}

inline std::vector<std::string> texts_of(const std::vector<SourceRecord>& records) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.text);
  return texts;
}

inline std::vector<TokenSequence> tokenize_corpus(const std::vector<SourceRecord>& records,
                                                  const Vocabulary& vocab) {
  std::vector<TokenSequence> seqs;
  seqs.reserve(records.size());
  for (const auto& r : records) seqs.push_back(tokenize(r.text, vocab));
  return seqs;
}

}  // namespace knm
