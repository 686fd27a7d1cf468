#include "aga/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aga/errors.hpp"
#include "aga/random.hpp"

namespace aga {

template <typename T>
std::vector<std::pair<std::string, BasicTensor<T>>> Parameters<T>::named() const {
  std::vector<std::pair<std::string, BasicTensor<T>>> out;
  out.emplace_back("embedding", embedding);
  for (std::size_t i = 0; i < conv_filters.size(); ++i) {
    out.emplace_back("conv" + std::to_string(i) + ".filters", conv_filters[i]);
    out.emplace_back("conv" + std::to_string(i) + ".bias", conv_biases[i]);
  }
  if (lstm_input.defined()) {
    out.emplace_back("lstm.input", lstm_input);
    out.emplace_back("lstm.recurrent", lstm_recurrent);
    out.emplace_back("lstm.bias", lstm_bias);
  }
  out.emplace_back("semantic.weight", semantic_weight);
  out.emplace_back("semantic.bias", semantic_bias);
  out.emplace_back("stats.weight", stats_weight);
  out.emplace_back("stats.bias", stats_bias);
  for (std::size_t i = 0; i < head_weights.size(); ++i) {
    out.emplace_back("head" + std::to_string(i) + ".weight", head_weights[i]);
    out.emplace_back("head" + std::to_string(i) + ".bias", head_biases[i]);
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> Parameters<T>::trainable() const {
  std::vector<BasicTensor<T>> out;
  for (auto& [name, t] : named()) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

template <typename T>
void Parameters<T>::zero_grad() {
  for (auto& [name, t] : named()) {
    auto copy = t;
    copy.zero_grad();
  }
}

template <typename T>
Parameters<T> init_parameters(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t k = config.embed_dim, d = config.feature_dim(), c = config.classes;

  auto uniform = [&](Shape shape, double bound, bool grad = true) {
    std::vector<T> values(shape_numel(shape));
    for (T& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
    return BasicTensor<T>::from(std::move(shape), std::move(values), grad);
  };
  auto fan_in_bound = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };

  Parameters<T> p;
  p.embedding = uniform({config.vocab_size, k}, 0.05, !config.freeze_embeddings);
  if (config.extractor == Extractor::kCnn) {
    for (std::size_t h : config.windows) {
      p.conv_filters.push_back(uniform({config.filters, h, k}, fan_in_bound(h * k)));
      p.conv_biases.push_back(BasicTensor<T>::zeros({config.filters}, true));
    }
  } else {
    p.lstm_input = uniform({4 * d, k}, fan_in_bound(k));
    p.lstm_recurrent = uniform({4 * d, d}, fan_in_bound(d));
    p.lstm_bias = BasicTensor<T>::zeros({4 * d}, true);
  }
  p.semantic_weight = uniform({d, d}, fan_in_bound(d));
  p.semantic_bias = BasicTensor<T>::zeros({d}, true);
  p.stats_weight = uniform({d, c}, fan_in_bound(c));
  p.stats_bias = BasicTensor<T>::zeros({d}, true);
  for (std::size_t layer = 0; layer < config.head_layers; ++layer) {
    const std::size_t out = layer + 1 == config.head_layers ? c : d;
    p.head_weights.push_back(uniform({out, d}, fan_in_bound(d)));
    p.head_biases.push_back(BasicTensor<T>::zeros({out}, true));
  }
  return p;
}

std::size_t import_embeddings(const std::filesystem::path& path, const Vocab& vocab, Parameters<float>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open embedding file");
  const std::size_t k = params.embedding.dim(1);
  auto table = params.embedding.mutable_values();
  std::size_t found = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<float> vec;
    std::string item;
    while (fields >> item) {
      try {
        vec.push_back(std::stof(item));
      } catch (const std::exception&) {
        throw ParseError(path.string(), line_no, "bad vector component '" + item + "'");
      }
    }
    // A leading "count dim" header line is common in word-vector files.
    if (line_no == 1 && vec.size() == 1) continue;
    if (vec.size() != k) {
      throw ParseError(path.string(), line_no,
                       "vector has " + std::to_string(vec.size()) + " components, expected " + std::to_string(k));
    }
    if (!vocab.contains(word)) continue;
    const auto row = static_cast<std::size_t>(vocab.index(word));
    std::copy(vec.begin(), vec.end(), table.begin() + static_cast<std::ptrdiff_t>(row * k));
    ++found;
  }
  return found;
}

double valve(double a, double eps) {
  if (!(eps >= 0.0 && eps <= 0.5)) throw ContractError("valve half-width must lie in [0, 0.5]");
  return (0.5 - eps <= a && a <= 0.5 + eps) ? a : 0.0;
}

template <typename T>
BasicTensor<T> embed(Tape<T>& tape, std::span<const int> tokens, const Parameters<T>& params) {
  return tape.gather_columns(params.embedding, tokens);
}

template <typename T>
LstmState<T> lstm_step(Tape<T>& tape, const LstmState<T>& prev, const BasicTensor<T>& x_t,
                       const BasicTensor<T>& input_weight, const BasicTensor<T>& recurrent_weight,
                       const BasicTensor<T>& bias) {
  const std::size_t d = prev.hidden.numel();
  if (input_weight.rank() != 2 || recurrent_weight.rank() != 2 || input_weight.dim(0) != 4 * d ||
      recurrent_weight.dim(0) != 4 * d || recurrent_weight.dim(1) != d || bias.numel() != 4 * d ||
      prev.cell.numel() != d || input_weight.dim(1) != x_t.numel()) {
    throw DimensionError("lstm_step: weights " + shape_string(input_weight.shape()) + ", " +
                         shape_string(recurrent_weight.shape()) + ", " + shape_string(bias.shape()) +
                         " do not fit hidden size " + std::to_string(d) + " and input " +
                         shape_string(x_t.shape()));
  }
  auto z = tape.add(tape.add(tape.matmul(input_weight, x_t), tape.matmul(recurrent_weight, prev.hidden)), bias);
  auto input_gate = tape.sigmoid(tape.slice(z, 0, d));
  auto forget_gate = tape.sigmoid(tape.slice(z, d, d));
  auto output_gate = tape.sigmoid(tape.slice(z, 2 * d, d));
  auto candidate = tape.tanh(tape.slice(z, 3 * d, d));
  auto cell = tape.add(tape.mul(forget_gate, prev.cell), tape.mul(input_gate, candidate));
  auto hidden = tape.mul(output_gate, tape.tanh(cell));
  return {cell, hidden};
}

template <typename T>
BasicTensor<T> extract_features(Tape<T>& tape, const BasicTensor<T>& x, const Parameters<T>& params,
                                const ModelConfig& config) {
  if (config.extractor == Extractor::kCnn) {
    std::vector<BasicTensor<T>> maps;
    maps.reserve(params.conv_filters.size());
    for (std::size_t i = 0; i < params.conv_filters.size(); ++i) {
      maps.push_back(tape.conv1d_same(x, params.conv_filters[i], params.conv_biases[i]));
    }
    auto stacked = maps.size() == 1 ? maps[0] : tape.concat_rows(maps);
    return config.activation == "tanh" ? tape.tanh(stacked) : tape.relu(stacked);
  }

  const std::size_t d = config.hidden, m = x.dim(1);
  LstmState<T> state{BasicTensor<T>::zeros({d}), BasicTensor<T>::zeros({d})};
  std::vector<BasicTensor<T>> columns;
  columns.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    state = lstm_step(tape, state, tape.column(x, t), params.lstm_input, params.lstm_recurrent, params.lstm_bias);
    columns.push_back(state.hidden);
  }
  return tape.stack_columns(columns);
}

template <typename T>
SharedProjection<T> project_shared(Tape<T>& tape, const BasicTensor<T>& features, const BasicTensor<T>& stats,
                                   const Parameters<T>& params) {
  if (features.rank() != 2 || stats.rank() != 2 || features.dim(1) != stats.dim(1)) {
    throw DimensionError("project_shared: features " + shape_string(features.shape()) + " and statistics " +
                         shape_string(stats.shape()) + " disagree on sentence length");
  }
  auto semantic = tape.add_column_bias(tape.matmul(params.semantic_weight, features), params.semantic_bias);
  auto projected = tape.add_column_bias(tape.matmul(params.stats_weight, stats), params.stats_bias);
  return {semantic, projected};
}

template <typename T>
BasicTensor<T> adagate(Tape<T>& tape, const BasicTensor<T>& semantic, const BasicTensor<T>& stats, double eps) {
  if (semantic.shape() != stats.shape()) {
    throw DimensionError("adagate: " + shape_string(semantic.shape()) + " vs " + shape_string(stats.shape()));
  }
  auto gate = tape.valve(tape.sigmoid(semantic), eps);
  return tape.add(tape.relu(semantic), tape.mul(gate, stats));
}

template <typename T>
AttentionPool<T> attend_pool(Tape<T>& tape, const BasicTensor<T>& fused, const BasicTensor<T>& features) {
  if (fused.shape() != features.shape()) {
    throw DimensionError("attend_pool: " + shape_string(fused.shape()) + " vs " + shape_string(features.shape()));
  }
  auto weights = tape.softmax_over_positions(fused);
  auto pooled = tape.sum_positions(tape.mul(weights, features));
  return {weights, pooled};
}

template <typename T>
BasicTensor<T> classify(Tape<T>& tape, const BasicTensor<T>& pooled, const Parameters<T>& params,
                        DropoutSampler* dropout, Mode mode) {
  BasicTensor<T> h = pooled;
  const std::size_t layers = params.head_weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    if (dropout) h = dropout->apply(tape, h, mode);
    h = tape.add(tape.matmul(params.head_weights[i], h), params.head_biases[i]);
    if (i + 1 < layers) h = tape.relu(h);
  }
  return h;
}

template <typename T>
AgaModel<T>::AgaModel(ModelConfig config) : config_(std::move(config)), params_(init_parameters<T>(config_)) {}

template <typename T>
AgaModel<T>::AgaModel(ModelConfig config, Parameters<T> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
}

template <typename T>
ForwardResult<T> AgaModel<T>::forward(Tape<T>& tape, std::span<const int> tokens, const BasicTensor<T>& stats,
                                      Mode mode, DropoutSampler* dropout) const {
  if (stats.rank() != 2 || stats.dim(0) != config_.classes || stats.dim(1) != tokens.size()) {
    throw DimensionError("forward: statistics matrix " + shape_string(stats.shape()) + " does not match " +
                         std::to_string(config_.classes) + " classes x " + std::to_string(tokens.size()) +
                         " positions");
  }
  ForwardResult<T> r;
  auto x = embed(tape, tokens, params_);
  r.features = extract_features(tape, x, params_, config_);
  r.projection = project_shared(tape, r.features, stats, params_);
  if (!config_.gi) r.projection.stats = BasicTensor<T>::zeros(r.features.shape());
  r.fused = adagate(tape, r.projection.semantic, r.projection.stats, config_.epsilon);
  r.attention = attend_pool(tape, r.fused, r.features);
  r.logits = classify(tape, r.attention.pooled, params_, dropout, mode);
  return r;
}

std::size_t argmax(std::span<const float> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

template struct Parameters<float>;
template struct Parameters<double>;
template class AgaModel<float>;
template class AgaModel<double>;

template Parameters<float> init_parameters<float>(const ModelConfig&);
template Parameters<double> init_parameters<double>(const ModelConfig&);

#define AGA_INSTANTIATE_STAGES(T)                                                                                 \
  template BasicTensor<T> embed(Tape<T>&, std::span<const int>, const Parameters<T>&);                            \
  template LstmState<T> lstm_step(Tape<T>&, const LstmState<T>&, const BasicTensor<T>&, const BasicTensor<T>&,     \
                                  const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> extract_features(Tape<T>&, const BasicTensor<T>&, const Parameters<T>&,                  \
                                           const ModelConfig&);                                                   \
  template SharedProjection<T> project_shared(Tape<T>&, const BasicTensor<T>&, const BasicTensor<T>&,              \
                                              const Parameters<T>&);                                              \
  template BasicTensor<T> adagate(Tape<T>&, const BasicTensor<T>&, const BasicTensor<T>&, double);                \
  template AttentionPool<T> attend_pool(Tape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> classify(Tape<T>&, const BasicTensor<T>&, const Parameters<T>&, DropoutSampler*, Mode);

AGA_INSTANTIATE_STAGES(float)
AGA_INSTANTIATE_STAGES(double)

#undef AGA_INSTANTIATE_STAGES

}  // namespace aga
