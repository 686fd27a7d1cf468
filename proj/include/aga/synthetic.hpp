#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aga/corpus.hpp"

namespace aga {

// Two-class corpus ("neg", "pos") where each class owns half of the cue
// words. Every sentence carries more cues of its own class than of the other
// class; the rest is filler shared by both classes.
struct SyntheticSpec {
  std::size_t sentences = 2000;
  std::size_t cue_words = 20;
  std::size_t filler_words = 200;
  std::size_t min_length = 6;
  std::size_t max_length = 15;
  double opposite_rate = 0.3;  // chance of a minority opposite-class cue
  std::uint64_t seed = 7;
};

std::vector<Record> make_synthetic(const SyntheticSpec& spec);

// Cue words owned by class 0 ("neg") or 1 ("pos"); pairs share an index.
std::vector<std::string> cue_words(const SyntheticSpec& spec, int label);
std::vector<std::string> filler_words(const SyntheticSpec& spec);

// Word vectors in which the i-th neg cue and the i-th pos cue share a random
// base vector up to `noise`, so embeddings alone barely separate the classes.
void write_masked_embeddings(const std::filesystem::path& path, const SyntheticSpec& spec, std::size_t dim,
                             double noise, std::uint64_t seed);

void write_tsv(const std::filesystem::path& path, std::span<const Record> records);

}  // namespace aga
