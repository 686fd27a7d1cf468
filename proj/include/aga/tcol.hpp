#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aga/corpus.hpp"

namespace aga {

struct TokenizedExample {
  std::vector<std::string> tokens;
  int label = 0;
};

// Term-count-of-labels table: for every training word, how many times it
// occurs under each class. Immutable once built.
class TCoLTable {
 public:
  using Counts = std::vector<std::uint64_t>;

  TCoLTable() = default;
  TCoLTable(std::size_t classes, std::size_t vocab_size) : classes_(classes), vocab_size_(vocab_size) {}

  std::size_t classes() const noexcept { return classes_; }
  // Normalizer V; the training vocabulary size including reserved tokens.
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t size() const noexcept { return counts_.size(); }
  bool empty() const noexcept { return counts_.empty(); }

  // Zero vector for words never seen in training.
  Counts lookup(const std::string& word) const;
  const std::map<std::string, Counts>& entries() const noexcept { return counts_; }

  void add(const std::string& word, std::size_t label, std::uint64_t count = 1);

  // `#classes=c vocab=V` header, then `word<TAB>count_0<TAB>...` lines.
  void save(const std::filesystem::path& path) const;
  static TCoLTable load(const std::filesystem::path& path);

  friend bool operator==(const TCoLTable&, const TCoLTable&) = default;

 private:
  std::size_t classes_ = 0;
  std::size_t vocab_size_ = 0;
  std::map<std::string, Counts> counts_;
};

// Per-occurrence counts over the training split; pad/unk tokens are skipped.
TCoLTable build_tcol(std::span<const TokenizedExample> training, std::size_t classes, std::size_t vocab_size = 0);

// Row-major c x m matrix.
struct CountMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values.at(r * cols + c); }
};

// Column j holds the counts of token j; pad and unknown tokens give zeros.
CountMatrix sentence_tcol(std::span<const int> ids, const Vocab& vocab, const TCoLTable& table);
CountMatrix normalize_tcol(const CountMatrix& counts, std::size_t vocab_size);

// Vocabulary-indexed view of a table for the training hot path: row v holds
// the counts of vocab token v divided by V (zero for pad and unk).
class TCoLLookup {
 public:
  TCoLLookup(const Vocab& vocab, const TCoLTable& table);

  std::size_t classes() const noexcept { return classes_; }
  // Normalized c x m matrix, row-major.
  std::vector<float> normalized_sentence(std::span<const int> ids) const;

 private:
  std::size_t classes_;
  std::vector<float> rows_;
};

}  // namespace aga
