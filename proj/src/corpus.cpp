#include "aga/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "aga/errors.hpp"
#include "aga/random.hpp"

namespace aga {

namespace {

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); });
}

}  // namespace

std::vector<Record> ingest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), line_no, "missing tab between label and text");
    if (tab == 0) throw ParseError(path.string(), line_no, "empty label");
    records.push_back(Record{line.substr(0, tab), line.substr(tab + 1)});
  }
  if (records.empty()) throw EmptyCorpusError(path.string() + ": corpus is empty");
  return records;
}

std::vector<std::string> label_set(std::span<const Record> records) {
  std::set<std::string> labels;
  for (const Record& r : records) labels.insert(r.label);
  return {labels.begin(), labels.end()};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      flush();
    } else if (ch < 0x80 && std::ispunct(ch)) {
      flush();
      tokens.emplace_back(1, raw);
    } else {
      current.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch)) : raw);
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

void Vocab::add(std::string token) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocab Vocab::build(std::span<const std::vector<std::string>> training_sentences) {
  if (training_sentences.empty()) throw EmptyCorpusError("cannot build a vocabulary from an empty training set");
  std::map<std::string, std::size_t> freq;
  for (const auto& sentence : training_sentences) {
    for (const auto& tok : sentence) {
      if (tok == kPadToken || tok == kUnkToken) continue;
      ++freq[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ordered(freq.begin(), freq.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab vocab;
  for (auto& [tok, count] : ordered) vocab.add(std::move(tok));
  return vocab;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open vocabulary");
  Vocab vocab;
  vocab.tokens_.clear();
  vocab.index_.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), line_no, "expected token<TAB>index");
    std::string token = line.substr(0, tab);
    std::size_t index = 0;
    try {
      std::size_t used = 0;
      index = std::stoul(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(path.string(), line_no, "bad index");
    }
    if (index != vocab.tokens_.size()) throw ParseError(path.string(), line_no, "indices must be consecutive from 0");
    if (vocab.index_.count(token)) throw ParseError(path.string(), line_no, "duplicate token '" + token + "'");
    vocab.add(std::move(token));
  }
  if (vocab.tokens_.size() < 2 || vocab.tokens_[kPad] != kPadToken || vocab.tokens_[kUnk] != kUnkToken) {
    throw ParseError(path.string(), 0, "vocabulary must start with <pad> and <unk>");
  }
  return vocab;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write vocabulary to " + path.string());
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

int Vocab::index(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

const std::string& Vocab::token(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw IndexError("token index " + std::to_string(index) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<int> pad_encode(std::span<const std::string> tokens, const Vocab& vocab, std::size_t length) {
  if (length == 0) throw ContractError("sentence length m must be at least 1");
  std::vector<int> ids(length, Vocab::kPad);
  const std::size_t n = std::min(length, tokens.size());
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.index(tokens[i]);
  return ids;
}

std::vector<std::string> decode(std::span<const int> ids, const Vocab& vocab) {
  std::vector<std::string> tokens;
  for (int id : ids) {
    if (id == Vocab::kPad) break;
    tokens.push_back(vocab.token(id));
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Folds

FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ContractError("cross-validation needs k >= 2, got " + std::to_string(k));
  if (n < k) {
    throw ContractError("cannot split " + std::to_string(n) + " examples into " + std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  FoldPlan plan{k, seed, std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) plan.assignments[order[i]] = i % k;
  return plan;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

std::size_t percentile_length(std::span<const std::vector<std::string>> sentences, double quantile) {
  if (sentences.empty()) return 1;
  std::vector<std::size_t> lengths;
  lengths.reserve(sentences.size());
  for (const auto& s : sentences) lengths.push_back(s.size());
  std::sort(lengths.begin(), lengths.end());
  auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(lengths.size())));
  rank = std::clamp<std::size_t>(rank, 1, lengths.size());
  return std::max<std::size_t>(1, lengths[rank - 1]);
}

}  // namespace aga
