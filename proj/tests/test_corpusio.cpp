#include "blicomb/corpusio.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace blicomb;
using namespace blicomb::corpusio;
using testutil::TempDir;

namespace {

template <typename Fn>
std::string parse_error_message(Fn&& fn, std::size_t expected_line) {
  try {
    fn();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), expected_line);
    return e.what();
  }
  ADD_FAILURE() << "expected ParseError";
  return {};
}

}  // namespace

TEST(LoadEmbeddings, ParsesRowsInFileOrder) {
  TempDir t("emb");
  auto e = load_embeddings(t.write("a.emb", "2 3\ncat 1 0 0\ndog 0 1 0\n"));
  EXPECT_EQ(e.vocab.words(), (std::vector<std::string>{"cat", "dog"}));
  ASSERT_EQ(e.data.rows(), 2);
  ASSERT_EQ(e.dim(), 3);
  EXPECT_EQ(e.data(1, 1), 1.0);
  EXPECT_EQ(e.data(0, 1), 0.0);
}

TEST(LoadEmbeddings, DuplicateKeepsFirstRow) {
  TempDir t("emb");
  auto e = load_embeddings(t.write("a.emb", "2 3\ncat 1 0 0\ncat 0 1 0\n"));
  ASSERT_EQ(e.vocab.size(), 1);
  EXPECT_EQ(e.data.rows(), 1);
  EXPECT_EQ(e.data(0, 0), 1.0);
  EXPECT_EQ(e.data(0, 1), 0.0);
}

TEST(LoadEmbeddings, LowercasesAndDeduplicatesAfterLowering) {
  TempDir t("emb");
  auto e = load_embeddings(t.write("a.emb", "2 1\nCat 1\ncAT 2\n"));
  ASSERT_EQ(e.vocab.size(), 1);
  EXPECT_EQ(e.vocab.word(0), "cat");
  EXPECT_EQ(e.data(0, 0), 1.0);
}

TEST(LoadEmbeddings, WrongArityNamesTheLine) {
  TempDir t("emb");
  auto p = t.write("a.emb", "2 3\ncat 1 0\ndog 0 1 0\n");
  auto msg = parse_error_message([&] { load_embeddings(p); }, 2);
  EXPECT_NE(msg.find(p + ":2"), std::string::npos);
}

TEST(LoadEmbeddings, RejectsNonFiniteAndBadHeader) {
  TempDir t("emb");
  parse_error_message([&] { load_embeddings(t.write("n.emb", "1 2\ncat nan 0\n")); }, 2);
  parse_error_message([&] { load_embeddings(t.write("i.emb", "1 2\ncat 1 inf\n")); }, 2);
  parse_error_message([&] { load_embeddings(t.write("h.emb", "two 3\n")); }, 1);
  parse_error_message([&] { load_embeddings(t.write("h2.emb", "1 2 3\n")); }, 1);
  parse_error_message([&] { load_embeddings(t.write("c.emb", "3 1\na 1\nb 2\n")); }, 3);
}

TEST(LoadEmbeddings, MissingFileIsIoError) {
  try {
    load_embeddings("/nonexistent/dir/x.emb");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.emb"), std::string::npos);
  }
}

TEST(SaveEmbeddings, RoundTripIsExact) {
  TempDir t("emb");
  std::mt19937_64 rng(3);
  Matrix m = testutil::random_matrix(5, 4, rng);
  m(0, 0) = 0.1;
  m(1, 1) = std::numeric_limits<double>::denorm_min();
  m(2, 2) = -1e300;
  Vocabulary v({"a", "b", "c", "d", "e"});
  save_embeddings(t.file("r.emb"), v, m);
  auto e = load_embeddings(t.file("r.emb"));
  EXPECT_EQ(e.vocab, v);
  EXPECT_EQ(e.data, m);
}

class DictionaryFixture : public ::testing::Test {
 protected:
  Vocabulary src{std::vector<std::string>{"cat", "dog", "emu"}};
  Vocabulary tgt{std::vector<std::string>{"gato", "perro", "emu"}};
  TempDir t{"dict"};
};

TEST_F(DictionaryFixture, CompleteVocabularies) {
  auto r = load_dictionary(t.write("d", "cat gato\ndog perro\n"), src, tgt);
  EXPECT_EQ(r.retained, 2u);
  EXPECT_EQ(r.dropped, 0u);
  EXPECT_EQ(r.dict, BilingualDictionary({{0, 0}, {1, 1}}));
}

TEST_F(DictionaryFixture, AllPairsOutOfVocabularyIsAnError) {
  Vocabulary no_gato(std::vector<std::string>{"perro"});
  try {
    load_dictionary(t.write("d", "cat gato\n"), src, no_gato);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("1 dropped"), std::string::npos);
  }
}

TEST_F(DictionaryFixture, DropsAndCountsOutOfVocabulary) {
  auto r = load_dictionary(t.write("d", "cat gato\nyak gato\ndog lobo\n"), src, tgt);
  EXPECT_EQ(r.retained, 1u);
  EXPECT_EQ(r.dropped, 2u);
}

TEST_F(DictionaryFixture, DuplicatesAndMultipleTargetsKept) {
  auto r = load_dictionary(t.write("d", "cat gato\ncat gato\ncat perro\n"), src, tgt);
  EXPECT_EQ(r.retained, 3u);
  EXPECT_EQ(r.dict, BilingualDictionary({{0, 0}, {0, 0}, {0, 1}}));
}

TEST_F(DictionaryFixture, RequiresExactlyTwoTokens) {
  parse_error_message([&] { load_dictionary(t.write("d", "cat gato\ndog\n"), src, tgt); }, 2);
  parse_error_message([&] { load_dictionary(t.write("e", "cat gato perro\n"), src, tgt); }, 1);
}

TEST_F(DictionaryFixture, SaveThenLoad) {
  BilingualDictionary d({{2, 2}, {0, 1}});
  save_dictionary(t.file("o"), d, src, tgt);
  EXPECT_EQ(load_dictionary(t.file("o"), src, tgt).dict, d);
}

TEST(ContextRecords, SingleRecord) {
  TempDir t("ctx");
  ContextRecordReader r(t.write("c", "2\ncat 0 0 1 1.0 0.0\n"));
  EXPECT_EQ(r.dim(), 2);
  auto rec = r.next();
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->word, "cat");
  EXPECT_EQ(rec->bpe_count, 1);
  EXPECT_EQ(rec->vector, (std::vector<double>{1.0, 0.0}));
  EXPECT_FALSE(r.next());
}

TEST(ContextRecords, ArityError) {
  TempDir t("ctx");
  ContextRecordReader r(t.write("c", "2\ncat 0 0 1 1.0 0.0 3.0\n"));
  parse_error_message([&] { r.next(); }, 2);
}

TEST(ContextRecords, BpeIndexMustBeBelowCount) {
  TempDir t("ctx");
  ContextRecordReader r(t.write("c", "1\ncat 0 1 1 1.0\n"));
  parse_error_message([&] { r.next(); }, 2);
}

TEST(ContextRecords, TwoPiecesOfOneContext) {
  TempDir t("ctx");
  ContextRecordReader r(t.write("c", "1\ncat 0 0 2 1\ncat 0 1 2 3\n"));
  auto a = r.next();
  auto b = r.next();
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->context_id, b->context_id);
  EXPECT_EQ(a->bpe_index, 0);
  EXPECT_EQ(b->bpe_index, 1);
  EXPECT_EQ(b->bpe_count, 2);
}

TEST(ContextRecords, WriterAndReaderAgree) {
  TempDir t("ctx");
  {
    std::ofstream out(t.file("c"));
    write_context_header(out, 3);
    write_context_record(out, {"dog", 42, 1, 3, {0.1, -2.5, 1e-20}});
  }
  ContextRecordReader r(t.file("c"));
  auto rec = r.next();
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->context_id, 42);
  EXPECT_EQ(rec->vector, (std::vector<double>{0.1, -2.5, 1e-20}));
}

TEST(FormatDouble, ShortestRoundTrip) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    EXPECT_EQ(*detail::parse_double(detail::format_double(v)), v);
  }
  EXPECT_EQ(detail::format_double(0.1), "0.1");
}
