#include "aga/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aga/errors.hpp"
#include "aga/random.hpp"

namespace aga {

namespace {

int label_index(const std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) throw ContractError("label '" + label + "' not among the training labels");
  return static_cast<int>(it - labels.begin());
}

Tensor stats_tensor(const TCoLLookup& lookup, std::span<const int> ids) {
  return Tensor::from({lookup.classes(), ids.size()}, lookup.normalized_sentence(ids));
}

}  // namespace

std::vector<TokenizedExample> tokenize_records(std::span<const Record> records,
                                               const std::vector<std::string>& labels) {
  std::vector<TokenizedExample> out;
  out.reserve(records.size());
  for (const Record& r : records) out.push_back({tokenize(r.text), label_index(labels, r.label)});
  return out;
}

void encode_examples(std::span<const Record> records, const std::vector<std::string>& labels, const Vocab& vocab,
                     const TCoLTable& tcol, std::size_t max_len, std::vector<LabeledExample>& examples,
                     std::vector<Tensor>& stats) {
  const TCoLLookup lookup(vocab, tcol);
  for (const auto& ex : tokenize_records(records, labels)) {
    LabeledExample encoded{pad_encode(ex.tokens, vocab, max_len), ex.tokens.size(), ex.label};
    stats.push_back(stats_tensor(lookup, encoded.tokens));
    examples.push_back(std::move(encoded));
  }
}

PreparedSplit prepare_split(std::span<const Record> train, std::span<const Record> test,
                            const std::vector<std::string>& labels, std::size_t max_len) {
  if (train.empty()) throw EmptyCorpusError("training split is empty");
  if (test.empty()) throw EmptyCorpusError("test split is empty");
  PreparedSplit split;
  split.labels = labels;
  const auto train_tok = tokenize_records(train, labels);
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(train_tok.size());
  for (const auto& ex : train_tok) sentences.push_back(ex.tokens);
  split.vocab = Vocab::build(sentences);
  split.max_len = max_len > 0 ? max_len : percentile_length(sentences);
  split.tcol = build_tcol(train_tok, labels.size(), split.vocab.size());
  encode_examples(train, labels, split.vocab, split.tcol, split.max_len, split.train, split.train_stats);
  encode_examples(test, labels, split.vocab, split.tcol, split.max_len, split.test, split.test_stats);
  return split;
}

ModelConfig bind_to_split(ModelConfig config, const PreparedSplit& split) {
  config.classes = split.labels.size();
  config.vocab_size = split.vocab.size();
  config.max_len = split.max_len;
  return config;
}

// ---------------------------------------------------------------------------
// Adam

AdamState make_adam(std::span<const Tensor> params, const TrainConfig& config) {
  AdamState state;
  state.lr = config.lr;
  state.beta1 = config.adam_beta1;
  state.beta2 = config.adam_beta2;
  state.eps = config.adam_eps;
  for (const Tensor& p : params) {
    state.first.emplace_back(p.numel(), 0.0);
    state.second.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first.size()) {
    throw ContractError("optimizer state tracks " + std::to_string(state.first.size()) + " tensors, got " +
                        std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].requires_grad() || params[i].grad().size() != params[i].numel()) {
      throw ContractError("parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.first[i].size() != params[i].numel()) throw ContractError("optimizer moments do not match parameter shape");
  }
  ++state.step;
  const double correct1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double correct2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_values();
    const auto grad = params[i].grad();
    auto& m = state.first[i];
    auto& v = state.second[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / correct1;
      const double v_hat = v[j] / correct2;
      values[j] = static_cast<float>(values[j] - state.lr * m_hat / (std::sqrt(v_hat) + state.eps));
    }
  }
}

// ---------------------------------------------------------------------------
// Training

EvalResult evaluate(const AgaModel<float>& model, std::span<const LabeledExample> examples,
                    std::span<const Tensor> stats) {
  if (examples.empty()) throw ContractError("cannot evaluate on an empty split");
  EvalResult result;
  std::vector<int> labels;
  double total = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Tape<float> tape;
    const auto r = model.forward(tape, examples[i].tokens, stats[i], Mode::kEval);
    total += tape.cross_entropy(r.logits, static_cast<std::size_t>(examples[i].label)).item();
    result.predictions.push_back(static_cast<int>(argmax(r.logits.values())));
    labels.push_back(examples[i].label);
  }
  result.loss = total / static_cast<double>(examples.size());
  result.accuracy = accuracy(result.predictions, labels);
  result.f1 = macro_f1(result.predictions, labels, model.config().classes);
  return result;
}

TrainResult train(const RunConfig& config, const PreparedSplit& split, const std::string& name) {
  if (split.train.empty() || split.test.empty()) throw ContractError("training needs non-empty train and test splits");
  config.train.validate();
  const auto started = std::chrono::steady_clock::now();

  const ModelConfig model_config = bind_to_split(config.model, split);
  AgaModel<float> model(model_config);
  if (!config.train.embedding_file.empty()) {
    import_embeddings(config.train.embedding_file, split.vocab, model.params());
  }
  auto params = model.params().trainable();
  AdamState adam = make_adam(params, config.train);
  DropoutSampler dropout(model_config.dropout, derive_seed(model_config.seed, 1));
  Rng shuffler(derive_seed(model_config.seed, 2));

  RunConfig resolved = config;
  resolved.model = model_config;
  RunReport report;
  report.name = name;
  report.seed = model_config.seed;
  report.config = run_settings(resolved);

  Parameters<float> best_params;
  double best_accuracy = -1.0;

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = config.train.batch_size;

  for (std::size_t epoch = 1; epoch <= config.train.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    std::vector<int> preds, labels;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      Tape<float> tape;
      std::vector<Tensor> losses;
      losses.reserve(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = split.train[order[b]];
        const auto r = model.forward(tape, ex.tokens, split.train_stats[order[b]], Mode::kTrain, &dropout);
        losses.push_back(tape.cross_entropy(r.logits, static_cast<std::size_t>(ex.label)));
        loss_sum += losses.back().item();
        preds.push_back(static_cast<int>(argmax(r.logits.values())));
        labels.push_back(ex.label);
      }
      tape.backward(tape.mean(losses));
      adam_step(params, adam);
      model.params().zero_grad();
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.train_loss = loss_sum / static_cast<double>(order.size());
    metrics.train_accuracy = accuracy(preds, labels);
    metrics.train_f1 = macro_f1(preds, labels, model_config.classes);
    const EvalResult test = evaluate(model, split.test, split.test_stats);
    metrics.test_loss = test.loss;
    metrics.test_accuracy = test.accuracy;
    metrics.test_f1 = test.f1;
    report.epochs.push_back(metrics);

    if (test.accuracy > best_accuracy) {
      best_accuracy = test.accuracy;
      report.best_epoch = epoch;
      best_params = model.params();
      for (auto* group : {&best_params.conv_filters, &best_params.conv_biases, &best_params.head_weights,
                          &best_params.head_biases}) {
        for (auto& t : *group) t = t.clone();
      }
      for (auto* t : {&best_params.embedding, &best_params.lstm_input, &best_params.lstm_recurrent,
                      &best_params.lstm_bias, &best_params.semantic_weight, &best_params.semantic_bias,
                      &best_params.stats_weight, &best_params.stats_bias}) {
        if (t->defined()) *t = t->clone();
      }
    }
  }

  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return TrainResult{std::move(report), AgaModel<float>(model_config, std::move(best_params))};
}

// ---------------------------------------------------------------------------
// Replicates and cross-validation

Aggregate aggregate(std::span<const RunReport> reports) {
  Aggregate agg;
  agg.runs = reports.size();
  std::vector<double> acc, f1;
  for (const auto& r : reports) {
    acc.push_back(r.best().test_accuracy);
    f1.push_back(r.best().test_f1);
  }
  agg.accuracy_mean = mean(acc);
  agg.accuracy_std = sample_stddev(acc);
  agg.f1_mean = mean(f1);
  agg.f1_std = sample_stddev(f1);
  return agg;
}

std::vector<double> best_accuracies(std::span<const RunReport> reports) {
  std::vector<double> out;
  for (const auto& r : reports) out.push_back(r.best().test_accuracy);
  return out;
}

std::vector<TrainResult> run_seeds(const RunConfig& config, const PreparedSplit& split) {
  std::vector<TrainResult> out;
  for (std::size_t r = 0; r < config.train.seeds; ++r) {
    RunConfig replica = config;
    replica.model.seed = config.model.seed + r;
    out.push_back(train(replica, split, "seed" + std::to_string(replica.model.seed)));
  }
  return out;
}

std::vector<RunReport> crossval_run(const RunConfig& config, std::span<const Record> dataset, std::size_t k) {
  const FoldPlan plan = make_folds(dataset.size(), k, config.model.seed);
  const auto labels = label_set(dataset);
  std::vector<RunReport> reports;
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<Record> train_part, test_part;
    for (std::size_t i : plan.train_indices(fold)) train_part.push_back(dataset[i]);
    for (std::size_t i : plan.test_indices(fold)) test_part.push_back(dataset[i]);
    const PreparedSplit split = prepare_split(train_part, test_part, labels, config.model.max_len);
    for (std::size_t r = 0; r < config.train.seeds; ++r) {
      RunConfig replica = config;
      replica.model.seed = config.model.seed + r;
      auto result = train(replica, split, "fold" + std::to_string(fold) + "_seed" + std::to_string(replica.model.seed));
      result.report.fold = fold;
      result.report.has_fold = true;
      reports.push_back(std::move(result.report));
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Serialization

std::string format_report(const Settings& config, std::span<const RunReport> reports) {
  std::ostringstream out;
  out << "record=config";
  for (const auto& [key, value] : config) out << ' ' << key << '=' << (value.empty() ? "-" : value);
  out << '\n';
  for (const auto& r : reports) {
    const std::string fold = r.has_fold ? std::to_string(r.fold) : "-";
    for (const auto& e : r.epochs) {
      out << "record=epoch run=" << r.name << " seed=" << r.seed << " fold=" << fold << " epoch=" << e.epoch
          << " train_loss=" << format_double(e.train_loss) << " train_accuracy=" << format_double(e.train_accuracy)
          << " train_f1=" << format_double(e.train_f1) << " test_loss=" << format_double(e.test_loss)
          << " test_accuracy=" << format_double(e.test_accuracy) << " test_f1=" << format_double(e.test_f1) << '\n';
    }
    out << "record=run run=" << r.name << " seed=" << r.seed << " fold=" << fold << " best_epoch=" << r.best_epoch
        << " test_accuracy=" << format_double(r.best().test_accuracy)
        << " test_f1=" << format_double(r.best().test_f1) << '\n';
  }
  if (!reports.empty()) {
    const Aggregate agg = aggregate(reports);
    out << "record=aggregate runs=" << agg.runs << " accuracy_mean=" << format_double(agg.accuracy_mean)
        << " accuracy_std=" << format_double(agg.accuracy_std) << " f1_mean=" << format_double(agg.f1_mean)
        << " f1_std=" << format_double(agg.f1_std) << '\n';
  }
  return out.str();
}

std::string curves_header(bool with_cell) {
  return with_cell ? "cell,epoch,split,loss,accuracy,f1\n" : "epoch,split,loss,accuracy,f1\n";
}

std::string format_curves(const RunReport& report, const std::string& cell) {
  std::ostringstream out;
  const std::string prefix = cell.empty() ? "" : cell + ",";
  for (const auto& e : report.epochs) {
    out << prefix << e.epoch << ",train," << format_double(e.train_loss) << ',' << format_double(e.train_accuracy)
        << ',' << format_double(e.train_f1) << '\n';
    out << prefix << e.epoch << ",test," << format_double(e.test_loss) << ',' << format_double(e.test_accuracy)
        << ',' << format_double(e.test_f1) << '\n';
  }
  return out.str();
}

}  // namespace aga
