#include "aga/tcol.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "aga/errors.hpp"

namespace aga {

TCoLTable::Counts TCoLTable::lookup(const std::string& word) const {
  const auto it = counts_.find(word);
  return it == counts_.end() ? Counts(classes_, 0) : it->second;
}

void TCoLTable::add(const std::string& word, std::size_t label, std::uint64_t count) {
  if (label >= classes_) {
    throw ContractError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes_) + ")");
  }
  auto [it, inserted] = counts_.try_emplace(word, Counts(classes_, 0));
  it->second[label] += count;
}

TCoLTable build_tcol(std::span<const TokenizedExample> training, std::size_t classes, std::size_t vocab_size) {
  TCoLTable table(classes, vocab_size);
  for (const auto& ex : training) {
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= classes) {
      throw ContractError("training label " + std::to_string(ex.label) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    for (const auto& tok : ex.tokens) {
      if (tok == Vocab::kPadToken || tok == Vocab::kUnkToken) continue;
      table.add(tok, static_cast<std::size_t>(ex.label));
    }
  }
  return table;
}

void TCoLTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write TCoL table to " + path.string());
  out << "#classes=" << classes_ << " vocab=" << vocab_size_ << '\n';
  for (const auto& [word, counts] : counts_) {
    out << word;
    for (std::uint64_t c : counts) out << '\t' << c;
    out << '\n';
  }
}

TCoLTable TCoLTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open TCoL table");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string(), 1, "missing header");
  std::size_t classes = 0, vocab = 0;
  {
    char tail = 0;
    if (std::sscanf(line.c_str(), "#classes=%zu vocab=%zu%c", &classes, &vocab, &tail) != 2 || classes == 0) {
      throw ParseError(path.string(), 1, "header must read '#classes=c vocab=V'");
    }
  }
  TCoLTable table(classes, vocab);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != classes + 1) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(classes) + " counts, got " + std::to_string(fields.size() - 1));
    }
    if (fields[0].empty()) throw ParseError(path.string(), line_no, "empty word");
    if (table.counts_.count(fields[0])) throw ParseError(path.string(), line_no, "duplicate word '" + fields[0] + "'");
    Counts counts(classes);
    for (std::size_t i = 0; i < classes; ++i) {
      const std::string& f = fields[i + 1];
      if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos) {
        throw ParseError(path.string(), line_no, "count '" + f + "' is not a non-negative integer");
      }
      counts[i] = std::stoull(f);
    }
    table.counts_.emplace(fields[0], std::move(counts));
  }
  return table;
}

CountMatrix sentence_tcol(std::span<const int> ids, const Vocab& vocab, const TCoLTable& table) {
  CountMatrix out{table.classes(), ids.size(), std::vector<double>(table.classes() * ids.size(), 0.0)};
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] == Vocab::kPad || ids[j] == Vocab::kUnk) continue;
    const auto counts = table.lookup(vocab.token(ids[j]));
    for (std::size_t i = 0; i < out.rows; ++i) out.values[i * out.cols + j] = static_cast<double>(counts[i]);
  }
  return out;
}

CountMatrix normalize_tcol(const CountMatrix& counts, std::size_t vocab_size) {
  if (vocab_size == 0) throw ContractError("TCoL normalizer V must be positive");
  CountMatrix out = counts;
  for (double& v : out.values) v /= static_cast<double>(vocab_size);
  return out;
}

TCoLLookup::TCoLLookup(const Vocab& vocab, const TCoLTable& table)
    : classes_(table.classes()), rows_(vocab.size() * table.classes(), 0.0f) {
  if (table.vocab_size() == 0) throw ContractError("TCoL table has no vocabulary size for normalization");
  const double v = static_cast<double>(table.vocab_size());
  for (std::size_t id = 2; id < vocab.size(); ++id) {
    const auto counts = table.lookup(vocab.tokens()[id]);
    for (std::size_t i = 0; i < classes_; ++i) {
      rows_[id * classes_ + i] = static_cast<float>(static_cast<double>(counts[i]) / v);
    }
  }
}

std::vector<float> TCoLLookup::normalized_sentence(std::span<const int> ids) const {
  const std::size_t m = ids.size();
  std::vector<float> out(classes_ * m, 0.0f);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t id = static_cast<std::size_t>(ids[j]);
    if (id * classes_ >= rows_.size()) throw IndexError("token id outside TCoL lookup");
    for (std::size_t i = 0; i < classes_; ++i) out[i * m + j] = rows_[id * classes_ + i];
  }
  return out;
}

}  // namespace aga
