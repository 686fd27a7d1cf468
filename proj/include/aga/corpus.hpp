#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aga {

struct Record {
  std::string label;
  std::string text;
};

// Reads `label<TAB>text` lines in file order. Blank lines are skipped.
std::vector<Record> ingest(const std::filesystem::path& path);

// Distinct labels, sorted lexicographically; position = class index.
std::vector<std::string> label_set(std::span<const Record> records);

// Lowercases ASCII, splits on whitespace, and emits each ASCII punctuation
// character as its own token.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  // Only pad and unk.
  Vocab();

  // Tokens ordered by descending frequency, ties broken lexicographically.
  static Vocab build(std::span<const std::vector<std::string>> training_sentences);

  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  int index(std::string_view token) const;  // kUnk when absent
  bool contains(std::string_view token) const;
  const std::string& token(int index) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Right-pads with kPad to `length`, truncating longer input.
std::vector<int> pad_encode(std::span<const std::string> tokens, const Vocab& vocab, std::size_t length);
// Inverse of pad_encode for the unpadded prefix.
std::vector<std::string> decode(std::span<const int> ids, const Vocab& vocab);

struct LabeledExample {
  std::vector<int> tokens;  // exactly m entries
  std::size_t original_length = 0;
  int label = 0;
};

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignments;  // example -> fold

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

// Seeded shuffle, then round-robin assignment to k folds.
FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

// Nearest-rank 95th percentile of sentence lengths, at least 1.
std::size_t percentile_length(std::span<const std::vector<std::string>> sentences, double quantile = 0.95);

}  // namespace aga
