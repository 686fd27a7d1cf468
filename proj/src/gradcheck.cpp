#include "aga/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "aga/config.hpp"
#include "aga/dropout.hpp"
#include "aga/model.hpp"
#include "aga/random.hpp"
#include "aga/tensor.hpp"

namespace aga {

namespace {

using Loss = std::function<Tensor64(Tape<double>&)>;

struct Case {
  std::string name;
  std::vector<Tensor64> leaves;
  Loss loss;
};

Tensor64 random_leaf(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor64::from(std::move(shape), std::move(v), true);
}

// Values bounded away from zero so relu kinks are rarely straddled.
Tensor64 off_zero_leaf(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return Tensor64::from(std::move(shape), std::move(v), true);
}

Tensor64 constant(Rng& rng, Shape shape) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor64::from(std::move(shape), std::move(v));
}

// Scalarizes an arbitrary output with fixed random weights.
Loss weighted(Rng& rng, Shape out_shape, std::function<Tensor64(Tape<double>&)> f) {
  const Tensor64 w = constant(rng, std::move(out_shape));
  return [f = std::move(f), w](Tape<double>& tape) { return tape.sum(tape.mul(f(tape), w)); };
}

struct Evaluation {
  double loss;
  std::uint64_t signature;
};

Evaluation evaluate(const Case& c) {
  Tape<double> tape;
  tape.track_branches(true);
  const Tensor64 loss = c.loss(tape);
  return {loss.item(), tape.branch_signature()};
}

GradCheckEntry check_case(const Case& c, const GradCheckOptions& opt) {
  GradCheckEntry entry;
  entry.op = c.name;

  std::vector<Tensor64> leaves = c.leaves;
  for (auto& leaf : leaves) leaf.zero_grad();
  Tape<double> tape;
  tape.track_branches(true);
  const Tensor64 loss = c.loss(tape);
  const std::uint64_t base = tape.branch_signature();
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
  if (opt.inject_fault == "*" || opt.inject_fault == c.name) {
    for (auto& g : analytic) {
      for (auto& x : g) x = x * 1.1 + 1e-3;
    }
  }

  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + opt.step;
      const Evaluation plus = evaluate(c);
      values[i] = saved - opt.step;
      const Evaluation minus = evaluate(c);
      values[i] = saved;
      if (plus.signature != base || minus.signature != base) {
        ++entry.skipped;
        continue;
      }
      const double fd = (plus.loss - minus.loss) / (2.0 * opt.step);
      const double g = analytic[l][i];
      const double abs_err = std::abs(g - fd);
      const double scale = std::max(std::abs(g), std::abs(fd));
      const double rel_err = scale > opt.abs_tol ? abs_err / scale : 0.0;
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, rel_err);
      if (abs_err > std::max(opt.rel_tol * scale, opt.abs_tol)) entry.passed = false;
      ++entry.checked;
    }
  }
  return entry;
}

ModelConfig toy_config(Extractor extractor, std::uint64_t seed) {
  ModelConfig config;
  config.extractor = extractor;
  config.embed_dim = 8;
  config.max_len = 4;
  config.windows = {3, 4, 5};
  config.filters = 2;
  config.hidden = 6;
  config.classes = 2;
  config.vocab_size = 10;
  config.epsilon = 0.25;
  config.dropout = {DropoutKind::kLeaky, 0.5, 10.0};
  config.seed = seed;
  return config;
}

Case forward_case(const std::string& name, const ModelConfig& config, Rng& rng) {
  Parameters<double> params = init_parameters<double>(config);
  // Spread weights beyond the small default init so that gates and valves
  // see a mix of open and closed entries.
  for (auto& t : params.trainable()) {
    auto v = t.mutable_values();
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  }
  std::vector<int> tokens(config.max_len);
  for (auto& id : tokens) id = static_cast<int>(rng.below(config.vocab_size));
  std::vector<double> stats(config.classes * config.max_len);
  for (auto& x : stats) x = rng.uniform(0.0, 2.0);
  const Tensor64 stats_t = Tensor64::from({config.classes, config.max_len}, stats);
  const std::size_t label = rng.below(config.classes);
  const std::uint64_t mask_seed = rng.next();

  auto model = std::make_shared<AgaModel<double>>(config, params);
  Case c{name, params.trainable(), {}};
  c.loss = [model, tokens, stats_t, label, mask_seed](Tape<double>& tape) {
    DropoutSampler sampler(model->config().dropout, mask_seed);
    const auto r = model->forward(tape, tokens, stats_t, Mode::kTrain, &sampler);
    return tape.cross_entropy(r.logits, label);
  };
  return c;
}

std::vector<Case> build_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Case> cases;

  {
    auto a = random_leaf(rng, {3, 4});
    auto b = random_leaf(rng, {4, 2});
    cases.push_back({"matmul", {a, b}, weighted(rng, {3, 2}, [a, b](Tape<double>& t) { return t.matmul(a, b); })});
  }
  {
    auto a = random_leaf(rng, {3, 4});
    auto b = random_leaf(rng, {4});
    cases.push_back(
        {"matmul_vector", {a, b}, weighted(rng, {3}, [a, b](Tape<double>& t) { return t.matmul(a, b); })});
  }
  {
    auto a = random_leaf(rng, {2, 3});
    auto b = random_leaf(rng, {2, 3});
    cases.push_back({"add", {a, b}, weighted(rng, {2, 3}, [a, b](Tape<double>& t) { return t.add(a, b); })});
    cases.push_back({"mul", {a, b}, weighted(rng, {2, 3}, [a, b](Tape<double>& t) { return t.mul(a, b); })});
    cases.push_back({"scale", {a}, weighted(rng, {2, 3}, [a](Tape<double>& t) { return t.scale(a, -1.7); })});
  }
  {
    auto x = random_leaf(rng, {3, 4});
    auto b = random_leaf(rng, {3});
    cases.push_back({"add_column_bias", {x, b},
                     weighted(rng, {3, 4}, [x, b](Tape<double>& t) { return t.add_column_bias(x, b); })});
  }
  {
    auto x = random_leaf(rng, {2, 5}, -3.0, 3.0);
    cases.push_back({"sigmoid", {x}, weighted(rng, {2, 5}, [x](Tape<double>& t) { return t.sigmoid(x); })});
    cases.push_back({"tanh", {x}, weighted(rng, {2, 5}, [x](Tape<double>& t) { return t.tanh(x); })});
  }
  {
    auto x = off_zero_leaf(rng, {2, 5});
    cases.push_back({"relu", {x}, weighted(rng, {2, 5}, [x](Tape<double>& t) { return t.relu(x); })});
  }
  {
    auto x = random_leaf(rng, {2, 6}, 0.2, 0.8);
    cases.push_back({"valve", {x}, weighted(rng, {2, 6}, [x](Tape<double>& t) { return t.valve(x, 0.2); })});
  }
  {
    auto x = random_leaf(rng, {3, 4}, -2.0, 2.0);
    cases.push_back({"softmax_over_positions", {x},
                     weighted(rng, {3, 4}, [x](Tape<double>& t) { return t.softmax_over_positions(x); })});
  }
  {
    auto x = random_leaf(rng, {5}, -2.0, 2.0);
    cases.push_back({"cross_entropy", {x}, [x](Tape<double>& t) { return t.cross_entropy(x, 3); }});
  }
  {
    auto x = random_leaf(rng, {3, 4});
    cases.push_back({"sum", {x}, [x](Tape<double>& t) { return t.sum(t.mul(x, x)); }});
    cases.push_back(
        {"sum_positions", {x}, weighted(rng, {3}, [x](Tape<double>& t) { return t.sum_positions(x); })});
  }
  {
    auto a = random_leaf(rng, {1});
    auto b = random_leaf(rng, {1});
    cases.push_back({"mean", {a, b}, [a, b](Tape<double>& t) {
                       const Tensor64 parts[] = {t.mul(a, a), t.mul(a, b)};
                       return t.mean(parts);
                     }});
  }
  {
    auto table = random_leaf(rng, {5, 3});
    const std::vector<int> ids{4, 0, 4, 2};
    cases.push_back({"gather_columns", {table},
                     weighted(rng, {3, 4}, [table, ids](Tape<double>& t) { return t.gather_columns(table, ids); })});
  }
  {
    auto x = random_leaf(rng, {3, 5});
    auto f = random_leaf(rng, {2, 4, 3});
    auto b = random_leaf(rng, {2});
    cases.push_back({"conv1d_same", {x, f, b},
                     weighted(rng, {2, 5}, [x, f, b](Tape<double>& t) { return t.conv1d_same(x, f, b); })});
    auto g = random_leaf(rng, {3, 3});
    auto gb = random_leaf(rng, {1});
    cases.push_back({"conv1d_same_single", {x, g, gb},
                     weighted(rng, {5}, [x, g, gb](Tape<double>& t) { return t.conv1d_same(x, g, gb); })});
  }
  {
    auto x = random_leaf(rng, {3, 4});
    auto y = random_leaf(rng, {2, 4});
    auto v = random_leaf(rng, {4});
    cases.push_back({"column", {x}, weighted(rng, {3}, [x](Tape<double>& t) { return t.column(x, 2); })});
    cases.push_back({"stack_columns", {v},
                     weighted(rng, {4, 2}, [v](Tape<double>& t) {
                       const Tensor64 cols[] = {v, t.scale(v, 2.0)};
                       return t.stack_columns(cols);
                     })});
    cases.push_back({"concat_rows", {x, y, v},
                     weighted(rng, {6, 4}, [x, y, v](Tape<double>& t) {
                       const Tensor64 parts[] = {x, y, v};
                       return t.concat_rows(parts);
                     })});
    cases.push_back({"slice", {v}, weighted(rng, {2}, [v](Tape<double>& t) { return t.slice(v, 1, 2); })});
  }
  {
    auto w = random_leaf(rng, {8, 3});
    auto u = random_leaf(rng, {8, 2});
    auto b = random_leaf(rng, {8});
    auto x = random_leaf(rng, {3});
    auto h = random_leaf(rng, {2});
    auto cell = random_leaf(rng, {2});
    cases.push_back({"lstm_step", {w, u, b, x, h, cell},
                     weighted(rng, {2, 2}, [w, u, b, x, h, cell](Tape<double>& t) {
                       const auto next = lstm_step<double>(t, {cell, h}, x, w, u, b);
                       const Tensor64 parts[] = {next.cell, next.hidden};
                       return t.concat_rows(parts);
                     })});
  }
  {
    auto x = random_leaf(rng, {6});
    const std::uint64_t mask_seed = rng.next();
    cases.push_back({"leaky_dropout", {x},
                     weighted(rng, {6}, [x, mask_seed](Tape<double>& t) {
                       DropoutSampler sampler({DropoutKind::kLeaky, 0.5, 10.0}, mask_seed);
                       return sampler.apply(t, x, Mode::kTrain);
                     })});
  }

  cases.push_back(forward_case("forward_cnn", toy_config(Extractor::kCnn, seed), rng));
  cases.push_back(forward_case("forward_lstm", toy_config(Extractor::kLstm, seed), rng));
  {
    ModelConfig deep = toy_config(Extractor::kCnn, seed);
    deep.head_layers = 2;
    deep.activation = "tanh";
    cases.push_back(forward_case("forward_cnn_tanh_deep_head", deep, rng));
  }
  return cases;
}

}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.passed; });
}

const GradCheckEntry* GradCheckReport::find(const std::string& op) const {
  for (const auto& e : entries) {
    if (e.op == op) return &e;
  }
  return nullptr;
}

std::string GradCheckReport::format() const {
  std::ostringstream out;
  char buf[64];
  for (const auto& e : entries) {
    out << "op=" << e.op << " checked=" << e.checked << " skipped=" << e.skipped;
    std::snprintf(buf, sizeof buf, " max_rel_error=%.3e max_abs_error=%.3e", e.max_rel_error, e.max_abs_error);
    out << buf << " status=" << (e.passed ? "pass" : "FAIL") << '\n';
  }
  return out.str();
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  GradCheckReport report;
  for (const Case& c : build_cases(options.seed)) report.entries.push_back(check_case(c, options));
  return report;
}

}  // namespace aga
