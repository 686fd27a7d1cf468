#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "aga/corpus.hpp"
#include "aga/errors.hpp"
#include "test_util.hpp"

using aga::Vocab;

TEST(Ingest, ReadsRecordsInOrder) {
  TempDir dir("ingest");
  write_text(dir / "c.tsv", "pos\tgreat film\nneg\tdull plot\n\npos\tfine\n");
  const auto records = aga::ingest(dir / "c.tsv");
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0].label, "pos");
  EXPECT_EQ(records[1].text, "dull plot");
  EXPECT_EQ(records[2].text, "fine");
}

TEST(Ingest, MissingTabNamesLine) {
  TempDir dir("ingest");
  write_text(dir / "c.tsv", "pos\tok\nno tab here\n");
  try {
    aga::ingest(dir / "c.tsv");
    FAIL() << "expected a parse error";
  } catch (const aga::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(Ingest, EmptyFileIsEmptyCorpus) {
  TempDir dir("ingest");
  write_text(dir / "c.tsv", "");
  EXPECT_THROW(aga::ingest(dir / "c.tsv"), aga::EmptyCorpusError);
}

TEST(Ingest, LabelsSortLexicographically) {
  const std::vector<aga::Record> records{{"pos", "a"}, {"neg", "b"}, {"pos", "c"}};
  EXPECT_EQ(aga::label_set(records), (std::vector<std::string>{"neg", "pos"}));
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(aga::tokenize("Good movie!"), (std::vector<std::string>{"good", "movie", "!"}));
  EXPECT_TRUE(aga::tokenize("").empty());
  EXPECT_EQ(aga::tokenize("A  b"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(aga::tokenize("it's,fine"), (std::vector<std::string>{"it", "'", "s", ",", "fine"}));
}

TEST(VocabBuild, FrequencyThenLexicographic) {
  const std::vector<std::vector<std::string>> s{{"a", "b"}, {"b", "c"}};
  const Vocab v = Vocab::build(s);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "b", "a", "c"}));
}

TEST(VocabBuild, SingleToken) {
  const std::vector<std::vector<std::string>> s{{"x"}};
  EXPECT_EQ(Vocab::build(s).size(), 3u);
}

TEST(VocabBuild, UnseenTokenIsUnk) {
  const std::vector<std::vector<std::string>> s{{"x"}};
  const Vocab v = Vocab::build(s);
  EXPECT_EQ(v.index("never"), Vocab::kUnk);
  EXPECT_EQ(v.index("<pad>"), Vocab::kPad);
}

TEST(VocabBuild, EmptyTrainingSetThrows) {
  EXPECT_THROW(Vocab::build(std::vector<std::vector<std::string>>{}), aga::EmptyCorpusError);
}

TEST(VocabBuild, SaveLoadRoundTrip) {
  TempDir dir("vocab");
  const std::vector<std::vector<std::string>> s{{"the", "cat", "the"}, {"dog", "!"}};
  const Vocab v = Vocab::build(s);
  v.save(dir / "v.txt");
  EXPECT_EQ(Vocab::load(dir / "v.txt"), v);
  EXPECT_EQ(read_text(dir / "v.txt").substr(0, 16), "<pad>\t0\n<unk>\t1\n");
}

TEST(PadEncode, Examples) {
  const std::vector<std::vector<std::string>> s{{"a", "b", "c", "d", "e"}};
  const Vocab v = Vocab::build(s);
  const std::vector<std::string> one{"a"};
  EXPECT_EQ(aga::pad_encode(one, v, 3), (std::vector<int>{v.index("a"), Vocab::kPad, Vocab::kPad}));
  EXPECT_EQ(aga::pad_encode(s[0], v, 3), (std::vector<int>{v.index("a"), v.index("b"), v.index("c")}));
  EXPECT_EQ(aga::pad_encode(std::vector<std::string>{}, v, 2), (std::vector<int>{Vocab::kPad, Vocab::kPad}));
  EXPECT_THROW(aga::pad_encode(one, v, 0), aga::ContractError);
}

TEST(PadEncode, DecodeRestoresInVocabularyTokens) {
  const std::vector<std::vector<std::string>> s{{"x", "y", "z", "y"}};
  const Vocab v = Vocab::build(s);
  const std::vector<std::string> tokens{"z", "y", "x"};
  EXPECT_EQ(aga::decode(aga::pad_encode(tokens, v, 6), v), tokens);
  EXPECT_EQ(aga::decode(aga::pad_encode(tokens, v, 2), v), (std::vector<std::string>{"z", "y"}));
}

TEST(Folds, ExactDivision) {
  const auto plan = aga::make_folds(10, 10, 1);
  for (std::size_t f = 0; f < 10; ++f) EXPECT_EQ(plan.test_indices(f).size(), 1u);
}

TEST(Folds, RemainderGoesToOneFold) {
  const auto plan = aga::make_folds(11, 10, 1);
  std::vector<std::size_t> sizes;
  for (std::size_t f = 0; f < 10; ++f) sizes.push_back(plan.test_indices(f).size());
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 2u), 1);
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 1u), 9);
}

TEST(Folds, DeterministicPerSeed) {
  EXPECT_EQ(aga::make_folds(50, 7, 9).assignments, aga::make_folds(50, 7, 9).assignments);
  EXPECT_NE(aga::make_folds(50, 7, 9).assignments, aga::make_folds(50, 7, 10).assignments);
}

TEST(Folds, PartitionTheDataset) {
  const std::size_t n = 37, k = 5;
  const auto plan = aga::make_folds(n, k, 4);
  std::multiset<std::size_t> seen;
  std::size_t smallest = n, largest = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const auto test = plan.test_indices(f);
    const auto train = plan.train_indices(f);
    EXPECT_EQ(test.size() + train.size(), n);
    std::set<std::size_t> test_set(test.begin(), test.end());
    for (std::size_t i : train) EXPECT_EQ(test_set.count(i), 0u);
    seen.insert(test.begin(), test.end());
    smallest = std::min(smallest, test.size());
    largest = std::max(largest, test.size());
  }
  EXPECT_EQ(seen.size(), n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen.count(i), 1u);
  EXPECT_LE(largest - smallest, 1u);
}

TEST(Folds, RejectsBadArguments) {
  EXPECT_THROW(aga::make_folds(5, 1, 0), aga::ContractError);
  EXPECT_THROW(aga::make_folds(3, 4, 0), aga::ContractError);
}

TEST(Percentile, NearestRank) {
  std::vector<std::vector<std::string>> s;
  for (std::size_t n = 1; n <= 20; ++n) s.emplace_back(n, "w");
  EXPECT_EQ(aga::percentile_length(s), 19u);  // ceil(0.95 * 20) = 19th smallest
  EXPECT_EQ(aga::percentile_length(std::vector<std::vector<std::string>>{{}}), 1u);
}
