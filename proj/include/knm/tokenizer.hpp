#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "knm/errors.hpp"

namespace knm {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

inline constexpr TokenId kEolId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::string_view kEolText = "<eol>";
inline constexpr std::string_view kUnkText = "<unk>";

enum class TokenClass : std::uint8_t { Punctuation, Identifier, Operator, Keyword, Literal };
inline constexpr std::array<TokenClass, 5> kAllTokenClasses = {
    TokenClass::Punctuation, TokenClass::Identifier, TokenClass::Operator, TokenClass::Keyword,
    TokenClass::Literal};

inline std::string_view to_string(TokenClass c) {
  switch (c) {
    case TokenClass::Punctuation: return "punctuation";
    case TokenClass::Identifier: return "identifier";
    case TokenClass::Operator: return "operator";
    case TokenClass::Keyword: return "keyword";
    case TokenClass::Literal: return "literal";
  }
  return "identifier";
}

enum class Language : std::uint8_t { java, python };

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

enum class LexemeKind : std::uint8_t { Word, Number, String, Operator, Punctuation, Newline, Unknown };

struct Lexeme {
  std::string text;
  LexemeKind kind = LexemeKind::Word;
};

namespace detail {

// Longest-match order: every operator appears before its own prefixes.
inline constexpr auto kOperators = std::to_array<std::string_view>({
    ">>>=", "<<=", ">>=", ">>>", "**=", "//=",
    "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
    "^=", "<<", ">>", "->", "::", "**", "//", "@=", ":=",
    "+", "-", "*", "/", "%", "=", "<", ">", "!", "&", "|", "^", "~", "?", "@"});

inline constexpr std::string_view kPunctuation = "(){}[];,.:";

inline bool is_ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}
inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
inline bool is_ident_char(unsigned char c) { return is_ident_start(c) || is_digit(c); }
inline bool is_blank(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
}

inline std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

}  // namespace detail

/// Splits source text into lexemes. Blanks are dropped, each newline becomes
/// its own Newline lexeme, string and char literals stay whole (contents and
/// quotes included, terminated at the closing quote or end of line).
inline std::vector<Lexeme> lex(std::string_view text) {
  using namespace detail;
  std::vector<Lexeme> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '\n') {
      out.push_back({std::string(kEolText), LexemeKind::Newline});
      ++i;
    } else if (is_blank(c)) {
      ++i;
    } else if (is_ident_start(c)) {
      std::size_t j = i + 1;
      while (j < n && is_ident_char(static_cast<unsigned char>(text[j]))) ++j;
      out.push_back({std::string(text.substr(i, j - i)), LexemeKind::Word});
      i = j;
    } else if (is_digit(c) ||
               (c == '.' && i + 1 < n && is_digit(static_cast<unsigned char>(text[i + 1])))) {
      std::size_t j = i + 1;
      const bool hex = c == '0' && j < n && (text[j] == 'x' || text[j] == 'X');
      while (j < n) {
        const auto d = static_cast<unsigned char>(text[j]);
        if (is_ident_char(d) || d == '.') {
          ++j;
        } else if ((d == '+' || d == '-') && !hex && (text[j - 1] == 'e' || text[j - 1] == 'E')) {
          ++j;
        } else {
          break;
        }
      }
      out.push_back({std::string(text.substr(i, j - i)), LexemeKind::Number});
      i = j;
    } else if (c == '"' || c == '\'') {
      std::size_t j = i + 1;
      while (j < n && text[j] != '\n' && text[j] != '\r') {
        if (text[j] == '\\' && j + 1 < n && text[j + 1] != '\n') {
          j += 2;
          continue;
        }
        if (text[j] == static_cast<char>(c)) {
          ++j;
          break;
        }
        ++j;
      }
      j = std::min(j, n);
      out.push_back({std::string(text.substr(i, j - i)), LexemeKind::String});
      i = j;
    } else {
      bool matched = false;
      for (std::string_view op : kOperators) {
        if (text.substr(i, op.size()) == op) {
          out.push_back({std::string(op), LexemeKind::Operator});
          i += op.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
      if (kPunctuation.find(static_cast<char>(c)) != std::string_view::npos) {
        out.push_back({std::string(1, static_cast<char>(c)), LexemeKind::Punctuation});
        ++i;
        continue;
      }
      const std::size_t len = std::min(utf8_length(c), n - i);
      out.push_back({std::string(text.substr(i, len)), LexemeKind::Unknown});
      i += len;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Bijective token string <-> id map shared by every component of an
/// experiment. Ids 0 and 1 are always END-OF-LINE and UNKNOWN.
class Vocabulary {
 public:
  Vocabulary() {
    add(std::string(kEolText));
    add(std::string(kUnkText));
  }

  TokenId add(const std::string& token) {
    if (auto it = token_to_id_.find(token); it != token_to_id_.end()) return it->second;
    const auto id = static_cast<TokenId>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
  }

  /// UNKNOWN for strings the vocabulary has never seen.
  TokenId id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  bool contains(std::string_view token) const { return token_to_id_.contains(std::string(token)); }

  const std::string& token(TokenId id) const { return id_to_token_.at(id); }
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  TokenSequence encode(std::span<const Lexeme> lexemes) const {
    TokenSequence ids;
    ids.reserve(lexemes.size());
    for (const auto& lx : lexemes) {
      if (lx.kind == LexemeKind::Newline) {
        ids.push_back(kEolId);
      } else if (lx.kind == LexemeKind::Unknown) {
        ids.push_back(kUnkId);
      } else {
        ids.push_back(id(lx.text));
      }
    }
    return ids;
  }

  /// One token per line; the zero-based line number is the id.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open vocabulary for writing: " + path);
    for (const auto& t : id_to_token_) out << t << '\n';
    if (!out) throw IoError("failed writing vocabulary: " + path);
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary: " + path);
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      if (lineno < 2) {
        if (line != v.id_to_token_[lineno]) {
          throw FormatError("vocabulary " + path + ": reserved token missing at line " +
                            std::to_string(lineno));
        }
      } else {
        if (v.contains(line)) throw FormatError("vocabulary " + path + ": duplicate token '" + line + "'");
        v.add(line);
      }
      ++lineno;
    }
    if (lineno < 2) throw FormatError("vocabulary " + path + ": missing reserved tokens");
    return v;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  const auto lexemes = lex(text);
  return vocab.encode(lexemes);
}

/// Joins tokens with single spaces; END-OF-LINE becomes a bare newline.
inline std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  bool line_start = true;
  for (TokenId id : ids) {
    if (id == kEolId) {
      out.push_back('\n');
      line_start = true;
      continue;
    }
    if (!line_start) out.push_back(' ');
    out += vocab.token(id);
    line_start = false;
  }
  return out;
}

/// Reserved ids first, then every distinct lexeme in first-occurrence order.
/// Unknown characters are not added; they map to UNKNOWN.
inline Vocabulary build_vocabulary(std::span<const std::string> texts) {
  Vocabulary vocab;
  bool any = false;
  for (const auto& text : texts) {
    for (const auto& lx : lex(text)) {
      any = true;
      if (lx.kind == LexemeKind::Newline || lx.kind == LexemeKind::Unknown) continue;
      vocab.add(lx.text);
    }
  }
  if (!any) throw EmptyCorpus();
  return vocab;
}

// ---------------------------------------------------------------------------
// Token classes
// ---------------------------------------------------------------------------

namespace detail {

inline const std::unordered_set<std::string_view>& java_keywords() {
  static const std::unordered_set<std::string_view> kw = {
      "abstract", "assert",     "boolean",   "break",     "byte",       "case",     "catch",
      "char",     "class",      "const",     "continue",  "default",    "do",       "double",
      "else",     "enum",       "extends",   "final",     "finally",    "float",    "for",
      "goto",     "if",         "implements", "import",   "instanceof", "int",      "interface",
      "long",     "native",     "new",       "package",   "private",    "protected", "public",
      "return",   "short",      "static",    "strictfp",  "super",      "switch",   "synchronized",
      "this",     "throw",      "throws",    "transient", "try",        "void",     "volatile",
      "while",    "var",        "record",    "yield",     "null"};
  return kw;
}

inline const std::unordered_set<std::string_view>& python_keywords() {
  static const std::unordered_set<std::string_view> kw = {
      "None",   "and",   "as",     "assert", "async",  "await",    "break", "class",
      "continue", "def", "del",    "elif",   "else",   "except",   "finally", "for",
      "from",   "global", "if",    "import", "in",     "is",       "lambda", "nonlocal",
      "not",    "or",    "pass",   "raise",  "return", "try",      "while", "with",
      "yield",  "match", "case"};
  return kw;
}

inline bool is_operator(std::string_view token) {
  for (std::string_view op : kOperators) {
    if (op == token) return true;
  }
  return false;
}

}  // namespace detail

/// Total classification into the five evaluation classes. Precedence:
/// boolean literals, keywords, other literals, operators, punctuation,
/// identifiers. END-OF-LINE counts as punctuation.
inline TokenClass classify(std::string_view token, Language language = Language::java) {
  using namespace detail;
  if (token == kEolText) return TokenClass::Punctuation;
  if (token.empty()) return TokenClass::Identifier;
  if (language == Language::java ? (token == "true" || token == "false")
                                 : (token == "True" || token == "False")) {
    return TokenClass::Literal;
  }
  const auto& keywords = language == Language::java ? java_keywords() : python_keywords();
  if (keywords.contains(token)) return TokenClass::Keyword;
  const auto c0 = static_cast<unsigned char>(token[0]);
  if (is_digit(c0) || c0 == '"' || c0 == '\'' ||
      (c0 == '.' && token.size() > 1 && is_digit(static_cast<unsigned char>(token[1])))) {
    return TokenClass::Literal;
  }
  if (is_operator(token)) return TokenClass::Operator;
  if (token.size() == 1 && kPunctuation.find(token[0]) != std::string_view::npos) {
    return TokenClass::Punctuation;
  }
  return TokenClass::Identifier;
}

inline std::vector<TokenClass> classify_vocabulary(const Vocabulary& vocab, Language language) {
  std::vector<TokenClass> classes;
  classes.reserve(vocab.size());
  for (const auto& t : vocab.tokens()) classes.push_back(classify(t, language));
  return classes;
}

inline Language parse_language(std::string_view s) {
  if (s == "java") return Language::java;
  if (s == "python") return Language::python;
  throw ConfigError("unknown language '" + std::string(s) + "' (expected java or python)");
}

}  // namespace knm
