#include <gtest/gtest.h>

#include "knm/corpus.hpp"
#include "knm/tokenizer.hpp"
#include "test_util.hpp"

namespace knm {
namespace {

std::vector<std::string> lexeme_texts(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& lx : lex(text)) out.push_back(lx.text);
  return out;
}

TEST(Tokenizer, EmptyTextGivesNoTokens) {
  Vocabulary v;
  EXPECT_TRUE(tokenize("", v).empty());
}

TEST(Tokenizer, OneTokenPerLexeme) {
  const std::vector<std::string> texts{"if (x) {\n"};
  const auto v = build_vocabulary(texts);
  const auto ids = tokenize("if (x) {\n", v);
  ASSERT_EQ(ids.size(), 6u);
  EXPECT_EQ(v.token(ids[0]), "if");
  EXPECT_EQ(v.token(ids[1]), "(");
  EXPECT_EQ(v.token(ids[2]), "x");
  EXPECT_EQ(v.token(ids[3]), ")");
  EXPECT_EQ(v.token(ids[4]), "{");
  EXPECT_EQ(ids[5], kEolId);
}

TEST(Tokenizer, UnknownCharactersMapToUnknown) {
  const std::vector<std::string> texts{"a"};
  const auto v = build_vocabulary(texts);
  const auto ids = tokenize("a \xE2\x82\xAC b", v);  // euro sign, then an unseen word
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[0], v.id("a"));
  EXPECT_EQ(ids[1], kUnkId);
  EXPECT_EQ(ids[2], kUnkId);
}

TEST(Tokenizer, LexerKeepsLiteralsAndLongestOperators) {
  EXPECT_EQ(lexeme_texts("x += \"a b\" >>= 'c' 3.5e2 0x1F"),
            (std::vector<std::string>{"x", "+=", "\"a b\"", ">>=", "'c'", "3.5e2", "0x1F"}));
  EXPECT_EQ(lexeme_texts("a->b::c"), (std::vector<std::string>{"a", "->", "b", "::", "c"}));
  EXPECT_EQ(lexeme_texts("i++;"), (std::vector<std::string>{"i", "++", ";"}));
}

TEST(Tokenizer, UnterminatedStringStopsAtLineEnd) {
  const auto t = lexeme_texts("s = \"open\nx");
  EXPECT_EQ(t, (std::vector<std::string>{"s", "=", "\"open", std::string(kEolText), "x"}));
}

TEST(Tokenizer, IsDeterministic) {
  const auto src = testing::read_text(testing::data_path("roundtrip.java"));
  const std::vector<std::string> texts{src};
  const auto v = build_vocabulary(texts);
  EXPECT_EQ(tokenize(src, v), tokenize(src, v));
  EXPECT_EQ(build_vocabulary(texts), v);
}

// Oracle: tests/oracles/normalize.py over the checked-in file.
TEST(Tokenizer, TwoHundredLineFileRoundTrips) {
  const auto src = testing::read_text(testing::data_path("roundtrip.java"));
  const auto expected = testing::read_text(testing::data_path("roundtrip.normalized"));
  const std::vector<std::string> texts{src};
  const auto v = build_vocabulary(texts);
  EXPECT_EQ(std::count(src.begin(), src.end(), '\n'), 200);
  EXPECT_EQ(detokenize(tokenize(src, v), v), expected);
}

TEST(Vocabulary, ReservedIdsThenFirstOccurrence) {
  const std::vector<std::string> texts{"a b", "b c"};
  const auto v = build_vocabulary(texts);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v.token(kEolId), kEolText);
  EXPECT_EQ(v.token(kUnkId), kUnkText);
  EXPECT_EQ(v.id("a"), 2u);
  EXPECT_EQ(v.id("b"), 3u);
  EXPECT_EQ(v.id("c"), 4u);
}

TEST(Vocabulary, EmptyCorpusThrows) {
  const std::vector<std::string> blank{""};
  EXPECT_THROW(build_vocabulary(blank), EmptyCorpus);
  const std::vector<std::string> none;
  EXPECT_THROW(build_vocabulary(none), EmptyCorpus);
}

TEST(Vocabulary, IsBijective) {
  const auto records = read_corpus(testing::data_path("corpus100.jsonl"));
  const auto v = build_vocabulary(texts_of(records));
  for (TokenId i = 0; i < v.size(); ++i) EXPECT_EQ(v.id(v.token(i)), i);
}

// Oracle: tests/oracles/distinct_tokens.sh (tr | sort -u | wc -l, plus two).
TEST(Vocabulary, HundredFileCorpusSizeMatchesDistinctCount) {
  const auto records = read_corpus(testing::data_path("corpus100.jsonl"));
  ASSERT_EQ(records.size(), 100u);
  EXPECT_EQ(build_vocabulary(texts_of(records)).size(), 85u);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  const auto dir = testing::scratch_dir("vocab");
  const std::vector<std::string> texts{"int x = 1 ;\nreturn x ;"};
  const auto v = build_vocabulary(texts);
  v.save((dir / "vocab.txt").string());
  EXPECT_EQ(Vocabulary::load((dir / "vocab.txt").string()), v);
}

TEST(Vocabulary, LoadRejectsBadFiles) {
  const auto dir = testing::scratch_dir("vocab_bad");
  binary::write_file((dir / "dup.txt").string(), "<eol>\n<unk>\na\na\n");
  EXPECT_THROW(Vocabulary::load((dir / "dup.txt").string()), FormatError);
  binary::write_file((dir / "reserved.txt").string(), "a\n<unk>\n");
  EXPECT_THROW(Vocabulary::load((dir / "reserved.txt").string()), FormatError);
  EXPECT_THROW(Vocabulary::load((dir / "missing.txt").string()), IoError);
}

TEST(Classify, Examples) {
  EXPECT_EQ(classify("("), TokenClass::Punctuation);
  EXPECT_EQ(classify("if", Language::java), TokenClass::Keyword);
  EXPECT_EQ(classify("myCounter"), TokenClass::Identifier);
  EXPECT_EQ(classify("42"), TokenClass::Literal);
  EXPECT_EQ(classify("+="), TokenClass::Operator);
}

TEST(Classify, LiteralsAndLanguages) {
  EXPECT_EQ(classify("\"s\""), TokenClass::Literal);
  EXPECT_EQ(classify("'c'"), TokenClass::Literal);
  EXPECT_EQ(classify("true"), TokenClass::Literal);
  EXPECT_EQ(classify("False", Language::python), TokenClass::Literal);
  EXPECT_EQ(classify(".5"), TokenClass::Literal);
  EXPECT_EQ(classify("def", Language::python), TokenClass::Keyword);
  EXPECT_EQ(classify("def", Language::java), TokenClass::Identifier);
  EXPECT_EQ(classify("."), TokenClass::Punctuation);
  EXPECT_EQ(classify("->"), TokenClass::Operator);
  EXPECT_EQ(classify(kEolText), TokenClass::Punctuation);
}

TEST(Classify, ClassCountsPartitionTheCorpus) {
  const auto records = read_corpus(testing::data_path("corpus100.jsonl"));
  const auto v = build_vocabulary(texts_of(records));
  const auto classes = classify_vocabulary(v, Language::java);
  std::array<std::size_t, 5> per_class{};
  std::size_t total = 0;
  for (const auto& seq : tokenize_corpus(records, v)) {
    for (TokenId id : seq) {
      ++per_class[static_cast<std::size_t>(classes[id])];
      ++total;
    }
  }
  std::size_t sum = 0;
  for (auto c : per_class) sum += c;
  EXPECT_EQ(sum, total);
  EXPECT_GT(per_class[static_cast<std::size_t>(TokenClass::Keyword)], 0u);
  EXPECT_GT(per_class[static_cast<std::size_t>(TokenClass::Literal)], 0u);
}

TEST(Corpus, JsonlRoundTrip) {
  const auto dir = testing::scratch_dir("corpus");
  const std::vector<SourceRecord> recs{{"a.java", "x = 1 ;\n"}, {"b.java", "s = \"q\\\"\" ;\n"}};
  write_corpus((dir / "c.jsonl").string(), recs);
  const auto back = read_corpus((dir / "c.jsonl").string());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].path, "b.java");
  EXPECT_EQ(back[1].text, recs[1].text);
}

TEST(Corpus, MalformedRecordIsFormatError) {
  const auto dir = testing::scratch_dir("corpus_bad");
  binary::write_file((dir / "c.jsonl").string(), "{\"path\": \"a\"}\n");
  EXPECT_THROW(read_corpus((dir / "c.jsonl").string()), FormatError);
}

}  // namespace
}  // namespace knm
