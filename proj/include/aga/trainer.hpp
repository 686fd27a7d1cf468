#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aga/config.hpp"
#include "aga/corpus.hpp"
#include "aga/metrics.hpp"
#include "aga/model.hpp"
#include "aga/tcol.hpp"

namespace aga {

// Everything a run needs from one train/test partition. Vocabulary, length
// and TCoL statistics come from the training records only.
struct PreparedSplit {
  std::vector<std::string> labels;
  Vocab vocab;
  TCoLTable tcol;
  std::size_t max_len = 0;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  std::vector<Tensor> train_stats;  // normalized c x m TCoL per example
  std::vector<Tensor> test_stats;
};

std::vector<TokenizedExample> tokenize_records(std::span<const Record> records,
                                               const std::vector<std::string>& labels);

// `max_len` 0 picks the 95th-percentile training length.
PreparedSplit prepare_split(std::span<const Record> train, std::span<const Record> test,
                            const std::vector<std::string>& labels, std::size_t max_len);

// Encodes records against an existing vocabulary/table (evaluation path).
void encode_examples(std::span<const Record> records, const std::vector<std::string>& labels, const Vocab& vocab,
                     const TCoLTable& tcol, std::size_t max_len, std::vector<LabeledExample>& examples,
                     std::vector<Tensor>& stats);

// Copies the data-derived fields (classes, V, m) into a model config.
ModelConfig bind_to_split(ModelConfig config, const PreparedSplit& split);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
};

AdamState make_adam(std::span<const Tensor> params, const TrainConfig& config);
// Bias-corrected Adam update from the accumulated gradients.
void adam_step(std::span<Tensor> params, AdamState& state);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double train_f1 = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double test_f1 = 0.0;
};

struct RunReport {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  bool has_fold = false;
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;  // 1-based, highest test accuracy, earliest on ties
  Settings config;
  double wall_seconds = 0.0;  // not serialized; varies run to run

  const EpochMetrics& best() const { return epochs.at(best_epoch - 1); }
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::vector<int> predictions;
};

EvalResult evaluate(const AgaModel<float>& model, std::span<const LabeledExample> examples,
                    std::span<const Tensor> stats);

struct TrainResult {
  RunReport report;
  AgaModel<float> model;  // parameters from the best epoch
};

TrainResult train(const RunConfig& config, const PreparedSplit& split, const std::string& name = "run");

struct Aggregate {
  std::size_t runs = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double f1_mean = 0.0;
  double f1_std = 0.0;
};

Aggregate aggregate(std::span<const RunReport> reports);

// Best-epoch test accuracies, one per run.
std::vector<double> best_accuracies(std::span<const RunReport> reports);

// Replicates with seeds seed, seed+1, ... on a fixed split.
std::vector<TrainResult> run_seeds(const RunConfig& config, const PreparedSplit& split);

// k-fold cross-validation; each fold builds its own vocabulary and TCoL.
std::vector<RunReport> crossval_run(const RunConfig& config, std::span<const Record> dataset, std::size_t k);

// One `record=<kind> key=value ...` line per config, epoch, run, aggregate.
std::string format_report(const Settings& config, std::span<const RunReport> reports);
// `epoch,split,loss,accuracy,f1`, optionally prefixed by a cell column.
std::string format_curves(const RunReport& report, const std::string& cell = "");
std::string curves_header(bool with_cell);

}  // namespace aga
