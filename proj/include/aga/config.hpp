#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "aga/dropout.hpp"

namespace aga {

enum class Extractor { kCnn, kLstm };

std::string to_string(Extractor extractor);
Extractor parse_extractor(const std::string& text);

// Defaults: windows {3,4,5} with 100 filters
// each, LSTM hidden size 128, dropout rate 0.5.
struct ModelConfig {
  Extractor extractor = Extractor::kCnn;
  std::size_t embed_dim = 300;         // k
  std::size_t max_len = 0;             // m; 0 = 95th-percentile training length
  std::vector<std::size_t> windows{3, 4, 5};
  std::size_t filters = 100;           // per window
  std::size_t hidden = 128;            // LSTM hidden size
  std::size_t classes = 2;             // c, set from data
  std::size_t vocab_size = 2;          // V, set from data
  double epsilon = 0.05;               // valve half-width
  bool gi = true;                      // false replaces projected statistics with zeros
  std::string activation = "relu";     // CNN nonlinearity: relu | tanh
  std::size_t head_layers = 1;
  bool freeze_embeddings = false;
  DropoutSpec dropout{};
  std::uint64_t seed = 1;

  // Semantic feature dimension d.
  std::size_t feature_dim() const;
  // Throws ConfigError naming the first invalid key.
  void validate() const;
};

struct TrainConfig {
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::size_t folds = 0;  // 0 or 1: train/test split; >= 2: cross-validation
  std::size_t seeds = 5;  // replicate runs with seed, seed+1, ...
  bool paired_ttest = false;
  std::string embedding_file;  // optional `word v1 ... vk` text file

  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

using Settings = std::vector<std::pair<std::string, std::string>>;

// Applies one `key=value` entry. Unknown keys and bad values throw ConfigError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
// Flat key=value file; '#' starts a comment line.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
Settings parse_settings(const std::string& text, const std::string& source);

// Canonical key order; doubles printed with round-trip precision.
Settings model_settings(const ModelConfig& config);
Settings run_settings(const RunConfig& config);
std::string format_settings(const Settings& settings);
ModelConfig model_config_from(const Settings& settings);

std::string format_double(double value);

}  // namespace aga
