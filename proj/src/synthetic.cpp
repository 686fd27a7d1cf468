#include "aga/synthetic.hpp"

#include <cstdio>
#include <fstream>

#include "aga/errors.hpp"
#include "aga/random.hpp"

namespace aga {

namespace {

std::string numbered(const char* stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03zu", stem, i);
  return buf;
}

void check(const SyntheticSpec& spec) {
  if (spec.cue_words < 2 || spec.cue_words % 2 != 0) throw ContractError("cue_words must be even and >= 2");
  if (spec.filler_words == 0) throw ContractError("filler_words must be positive");
  if (spec.min_length < 4 || spec.max_length < spec.min_length) {
    throw ContractError("sentence lengths must satisfy 4 <= min_length <= max_length");
  }
}

}  // namespace

std::vector<std::string> cue_words(const SyntheticSpec& spec, int label) {
  check(spec);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec.cue_words / 2; ++i) out.push_back(numbered(label == 0 ? "dull" : "keen", i));
  return out;
}

std::vector<std::string> filler_words(const SyntheticSpec& spec) {
  check(spec);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec.filler_words; ++i) out.push_back(numbered("w", i));
  return out;
}

std::vector<Record> make_synthetic(const SyntheticSpec& spec) {
  const std::vector<std::string> cues[2] = {cue_words(spec, 0), cue_words(spec, 1)};
  const auto filler = filler_words(spec);
  const char* labels[2] = {"neg", "pos"};
  Rng rng(spec.seed);

  std::vector<Record> out;
  out.reserve(spec.sentences);
  for (std::size_t s = 0; s < spec.sentences; ++s) {
    const int label = static_cast<int>(rng.below(2));
    const std::size_t length = spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
    const std::size_t own = 1 + rng.below(3);
    std::size_t opposite = 0;
    if (own >= 2 && rng.bernoulli(spec.opposite_rate)) opposite = 1 + rng.below(own - 1);

    std::vector<std::string> words;
    for (std::size_t i = 0; i < own; ++i) words.push_back(cues[label][rng.below(cues[label].size())]);
    for (std::size_t i = 0; i < opposite; ++i) words.push_back(cues[1 - label][rng.below(cues[1 - label].size())]);
    while (words.size() < length) words.push_back(filler[rng.below(filler.size())]);
    rng.shuffle(std::span<std::string>(words));

    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    out.push_back({labels[label], std::move(text)});
  }
  return out;
}

void write_masked_embeddings(const std::filesystem::path& path, const SyntheticSpec& spec, std::size_t dim,
                             double noise, std::uint64_t seed) {
  if (dim == 0) throw ContractError("embedding dimension must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write " + path.string());
  Rng rng(seed);
  char buf[32];
  const auto emit = [&](const std::string& word, const std::vector<double>& v) {
    out << word;
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.6f", x);
      out << buf;
    }
    out << '\n';
  };
  const auto random_vector = [&] {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.uniform(-0.5, 0.5);
    return v;
  };

  const auto neg = cue_words(spec, 0);
  const auto pos = cue_words(spec, 1);
  for (std::size_t i = 0; i < neg.size(); ++i) {
    const auto base = random_vector();
    for (const auto* word : {&neg[i], &pos[i]}) {
      auto v = base;
      for (auto& x : v) x += rng.uniform(-noise, noise);
      emit(*word, v);
    }
  }
  for (const auto& w : filler_words(spec)) emit(w, random_vector());
}

void write_tsv(const std::filesystem::path& path, std::span<const Record> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write " + path.string());
  for (const auto& r : records) out << r.label << '\t' << r.text << '\n';
}

}  // namespace aga
