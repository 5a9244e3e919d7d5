#include <gtest/gtest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "drl/corpus.hpp"
#include "drl/error.hpp"
#include "drl/log.hpp"
#include "test_util.hpp"

namespace {

using drl::testing::kind_of;
using drl::testing::TempDir;
using drl::testing::write_file;

TEST(Tokenize, QueryFromTheWorkedExample) {
  const auto config = drl::default_preprocess_config();
  const auto tokens =
      drl::tokenize("Will the USA Basketball team win the world cup in Spain?", config);
  const std::vector<std::string> expected{"usa", "basketball", "team", "win", "world", "cup", "spain"};
  EXPECT_EQ(tokens, expected);
}

TEST(Tokenize, StripsUrlsAndPunctuation) {
  const auto config = drl::default_preprocess_config();
  const auto tokens = drl::tokenize("GO usa!! http://t.co/abc https://x.y/z www.fiba.com #hoops", config);
  const std::vector<std::string> expected{"go", "usa", "hoops"};
  EXPECT_EQ(tokens, expected);
}

TEST(Tokenize, FlagsChangeBehaviour) {
  drl::PreprocessConfig config;  // no stopwords
  config.lowercase = false;
  config.strip_urls = false;
  EXPECT_EQ(drl::tokenize("The www.x", config), (std::vector<std::string>{"The", "www", "x"}));

  config.charset_filter = false;
  EXPECT_EQ(drl::tokenize("caf\xc3\xa9 ok", config), (std::vector<std::string>{"caf\xc3\xa9", "ok"}));
  config.charset_filter = true;
  EXPECT_EQ(drl::tokenize("caf\xc3\xa9 ok", config), (std::vector<std::string>{"caf", "ok"}));
}

TEST(Preprocess, PrunesRareTermsAndShortDocs) {
  drl::PreprocessConfig config;
  config.min_doc_freq = 2;
  config.min_doc_tokens = 2;
  std::vector<drl::RawDocument> docs{
      {"d0", "apple banana cherry", std::nullopt},
      {"d1", "apple banana", std::nullopt},
      {"d2", "apple durian", std::nullopt},
  };
  const auto result = drl::preprocess(docs, config);
  ASSERT_EQ(result.vocab.size(), 2u);
  EXPECT_EQ(result.vocab.term(0), "apple");
  EXPECT_EQ(result.vocab.term(1), "banana");
  EXPECT_EQ(result.vocab.doc_freq(0), 3u);
  EXPECT_EQ(result.pruned_terms, 2u);
  ASSERT_EQ(result.docs.size(), 2u);
  EXPECT_EQ(result.dropped_short_docs, 1u);
  EXPECT_EQ(result.docs[0].id, "d0");
  EXPECT_EQ(result.docs[0].total_tokens, 2u);
}

TEST(Preprocess, EmptyCorpusIsAnError) {
  drl::PreprocessConfig config;
  config.min_doc_freq = 5;
  std::vector<drl::RawDocument> docs{{"a", "one two", std::nullopt}};
  EXPECT_EQ(kind_of([&] { drl::preprocess(docs, config); }), drl::ErrorKind::kEmptyCorpus);
}

TEST(Preprocess, BowInvariants) {
  drl::PreprocessConfig config;
  config.min_doc_freq = 1;
  std::vector<drl::RawDocument> docs{{"a", "x y x z x", std::nullopt}, {"b", "y y", std::nullopt}};
  const auto result = drl::preprocess(docs, config);
  for (const auto& d : result.docs) {
    std::uint32_t sum = 0;
    for (auto [index, count] : d.counts) {
      EXPECT_GE(count, 1u);
      EXPECT_LT(index, result.vocab.size());
      sum += count;
    }
    EXPECT_EQ(sum, d.total_tokens);
  }
  const auto dense = drl::bow_vector(result.docs[0], result.vocab.size());
  EXPECT_EQ(dense[*result.vocab.index_of("x")], 3u);
  EXPECT_EQ(kind_of([&] { drl::bow_vector(result.docs[0], 1); }), drl::ErrorKind::kInvalidArgument);
}

TEST(Query, OutOfVocabularyTermsAreReported) {
  drl::Vocabulary vocab;
  vocab.add("usa", 3);
  vocab.add("team", 3);
  drl::ScopedLogCapture capture;
  const auto q = drl::preprocess_query("USA team wins", drl::default_preprocess_config(), vocab);
  EXPECT_EQ(q.bow.total_tokens, 2u);
  EXPECT_EQ(q.oov_terms, std::vector<std::string>{"wins"});
  ASSERT_EQ(capture.warnings().size(), 1u);
  EXPECT_NE(capture.warnings()[0].find("wins"), std::string::npos);
}

TEST(Vocabulary, JsonRoundTripKeepsHash) {
  drl::Vocabulary vocab;
  vocab.add("b", 4);
  vocab.add("a", 2);
  const auto back = drl::Vocabulary::from_json(vocab.to_json());
  EXPECT_EQ(back.hash(), vocab.hash());
  EXPECT_EQ(back.doc_freq(1), 2u);
  EXPECT_EQ(*back.index_of("b"), 0u);
  EXPECT_EQ(kind_of([] { drl::Vocabulary::from_json("{}"); }), drl::ErrorKind::kParse);
}

TEST(Partition, GroupsByKeyWithUnkeyedDefault) {
  std::vector<drl::RawDocument> raws{{"1", "", "b"}, {"2", "", "a"}, {"3", "", std::nullopt}, {"4", "", "b"}};
  std::vector<drl::BowDocument> docs;
  for (const auto& r : raws) docs.push_back({r.id, {{0, 1}}, 1});
  const auto sets = drl::partition(docs, raws);
  ASSERT_EQ(sets.size(), 3u);
  EXPECT_EQ(sets[0].key, "_unkeyed");
  EXPECT_EQ(sets[1].key, "a");
  EXPECT_EQ(sets[2].key, "b");
  EXPECT_EQ(sets[2].docs.size(), 2u);
}

TEST(Ingest, Jsonl) {
  TempDir dir;
  write_file(dir / "in.jsonl",
             "{\"id\":\"x\",\"text\":\"hello\",\"set_key\":\"s1\"}\n\n{\"text\":\"no id\"}\n");
  const auto docs = drl::ingest(dir / "in.jsonl", {});
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].id, "x");
  EXPECT_EQ(*docs[0].set_key, "s1");
  EXPECT_EQ(docs[1].id, "1");
  EXPECT_FALSE(docs[1].set_key.has_value());
}

TEST(Ingest, MalformedRecordsFailOrSkip) {
  TempDir dir;
  write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"text\":\"ok\"}\n{not json\n{\"id\":\"a\",\"text\":\"dup\"}\n");
  drl::IngestOptions options;
  try {
    drl::ingest(dir / "bad.jsonl", options);
    FAIL() << "expected a parse error";
  } catch (const drl::Error& e) {
    EXPECT_EQ(e.kind(), drl::ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  options.skip_errors = true;
  drl::ScopedLogCapture capture;
  const auto docs = drl::ingest(dir / "bad.jsonl", options);
  EXPECT_EQ(docs.size(), 1u);
  EXPECT_EQ(capture.warnings().size(), 2u);
}

TEST(Ingest, CsvWithQuotedFields) {
  TempDir dir;
  write_file(dir / "in.csv", "id,set_key,text\n1,a,\"hello, world\"\n2,b,\"say \"\"hi\"\"\nthere\"\n");
  drl::IngestOptions options;
  options.format = drl::InputFormat::kCsv;
  const auto docs = drl::ingest(dir / "in.csv", options);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0].text, "hello, world");
  EXPECT_EQ(docs[1].text, "say \"hi\"\nthere");
  EXPECT_EQ(*docs[1].set_key, "b");

  options.text_field = "body";
  EXPECT_EQ(kind_of([&] { drl::ingest(dir / "in.csv", options); }), drl::ErrorKind::kConfig);
}

TEST(Ingest, LinesAndMissingFile) {
  TempDir dir;
  write_file(dir / "in.txt", "first doc\nsecond doc\n");
  drl::IngestOptions options;
  options.format = drl::parse_input_format("lines");
  const auto docs = drl::ingest(dir / "in.txt", options);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[1].id, "1");
  EXPECT_EQ(docs[1].text, "second doc");
  EXPECT_EQ(kind_of([&] { drl::ingest(dir / "missing.txt", options); }), drl::ErrorKind::kIo);
  EXPECT_EQ(kind_of([] { drl::parse_input_format("xml"); }), drl::ErrorKind::kConfig);
}

TEST(Stopwords, FileOverridesDefault) {
  TempDir dir;
  write_file(dir / "stop.txt", "# comment\nfoo\n\n  bar \n");
  const auto words = drl::load_stopwords(dir / "stop.txt");
  EXPECT_EQ(words.size(), 2u);
  EXPECT_TRUE(words.contains("bar"));
  EXPECT_TRUE(drl::default_stopwords().contains("the"));
}

}  // namespace
