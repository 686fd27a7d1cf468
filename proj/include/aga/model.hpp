#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aga/config.hpp"
#include "aga/corpus.hpp"
#include "aga/dropout.hpp"
#include "aga/tensor.hpp"

namespace aga {

// Every learnable tensor of the network. named() fixes the canonical order
// used by checkpoints and the optimizer.
template <typename T>
struct Parameters {
  BasicTensor<T> embedding;  // V x k

  // CNN: one [filters x h x k] bank and [filters] bias per window size.
  std::vector<BasicTensor<T>> conv_filters;
  std::vector<BasicTensor<T>> conv_biases;

  // LSTM, gates stacked as (input, forget, output, candidate).
  BasicTensor<T> lstm_input;      // 4d x k
  BasicTensor<T> lstm_recurrent;  // 4d x d
  BasicTensor<T> lstm_bias;       // 4d

  BasicTensor<T> semantic_weight;  // d x d
  BasicTensor<T> semantic_bias;    // d
  BasicTensor<T> stats_weight;     // d x c
  BasicTensor<T> stats_bias;       // d

  std::vector<BasicTensor<T>> head_weights;  // last one is c x d
  std::vector<BasicTensor<T>> head_biases;

  std::vector<std::pair<std::string, BasicTensor<T>>> named() const;
  // Gradient-bearing subset of named(), same order.
  std::vector<BasicTensor<T>> trainable() const;
  void zero_grad();
};

// Embeddings uniform in [-0.05, 0.05], weights uniform in +-1/sqrt(fan_in),
// biases zero; all drawn from config.seed in canonical order.
template <typename T>
Parameters<T> init_parameters(const ModelConfig& config);

// Overwrites embedding rows of words found in a `word v1 ... vk` text file.
// Returns the number of vocabulary words that were found.
std::size_t import_embeddings(const std::filesystem::path& path, const Vocab& vocab, Parameters<float>& params);

template <typename T>
struct LstmState {
  BasicTensor<T> cell;
  BasicTensor<T> hidden;
};

template <typename T>
struct SharedProjection {
  BasicTensor<T> semantic;  // projected features, d x m
  BasicTensor<T> stats;     // projected statistics, d x m
};

template <typename T>
struct AttentionPool {
  BasicTensor<T> weights;  // d x m, rows sum to 1
  BasicTensor<T> pooled;   // a, d
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> features;  // C
  SharedProjection<T> projection;
  BasicTensor<T> fused;  // gated sum, d x m
  AttentionPool<T> attention;
  BasicTensor<T> logits;
};

// Scalar gate: `a` inside the closed band [0.5 - eps, 0.5 + eps], else 0.
double valve(double a, double eps);

template <typename T>
BasicTensor<T> embed(Tape<T>& tape, std::span<const int> tokens, const Parameters<T>& params);

template <typename T>
LstmState<T> lstm_step(Tape<T>& tape, const LstmState<T>& prev, const BasicTensor<T>& x_t,
                       const BasicTensor<T>& input_weight, const BasicTensor<T>& recurrent_weight,
                       const BasicTensor<T>& bias);

// [k x m] embeddings -> [d x m] semantic features.
template <typename T>
BasicTensor<T> extract_features(Tape<T>& tape, const BasicTensor<T>& x, const Parameters<T>& params,
                                const ModelConfig& config);

template <typename T>
SharedProjection<T> project_shared(Tape<T>& tape, const BasicTensor<T>& features, const BasicTensor<T>& stats,
                                   const Parameters<T>& params);

// relu(semantic) + valve(sigmoid(semantic), eps) * stats
template <typename T>
BasicTensor<T> adagate(Tape<T>& tape, const BasicTensor<T>& semantic, const BasicTensor<T>& stats, double eps);

template <typename T>
AttentionPool<T> attend_pool(Tape<T>& tape, const BasicTensor<T>& fused, const BasicTensor<T>& features);

template <typename T>
BasicTensor<T> classify(Tape<T>& tape, const BasicTensor<T>& pooled, const Parameters<T>& params,
                        DropoutSampler* dropout, Mode mode);

template <typename T>
class AgaModel {
 public:
  explicit AgaModel(ModelConfig config);
  AgaModel(ModelConfig config, Parameters<T> params);

  const ModelConfig& config() const noexcept { return config_; }
  Parameters<T>& params() noexcept { return params_; }
  const Parameters<T>& params() const noexcept { return params_; }

  // `stats` is the normalized c x m TCoL matrix of the sentence. `dropout`
  // may be null, which disables it.
  ForwardResult<T> forward(Tape<T>& tape, std::span<const int> tokens, const BasicTensor<T>& stats,
                           Mode mode, DropoutSampler* dropout = nullptr) const;

 private:
  ModelConfig config_;
  Parameters<T> params_;
};

std::size_t argmax(std::span<const float> values);

extern template struct Parameters<float>;
extern template struct Parameters<double>;
extern template class AgaModel<float>;
extern template class AgaModel<double>;

}  // namespace aga
