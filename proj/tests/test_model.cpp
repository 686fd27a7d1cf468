#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "aga/checkpoint.hpp"
#include "aga/errors.hpp"
#include "aga/model.hpp"
#include "aga/random.hpp"
#include "test_util.hpp"

using aga::AgaModel;
using aga::ModelConfig;
using aga::Parameters;
using aga::Tape;
using aga::Tensor;
using aga::Tensor64;

namespace {

ModelConfig small_config(aga::Extractor extractor = aga::Extractor::kCnn) {
  ModelConfig c;
  c.extractor = extractor;
  c.embed_dim = 5;
  c.max_len = 4;
  c.windows = {2, 3};
  c.filters = 3;
  c.hidden = 4;
  c.classes = 3;
  c.vocab_size = 9;
  c.epsilon = 0.25;
  c.seed = 17;
  return c;
}

void fill(Tensor& t, float v) {
  for (auto& x : t.mutable_values()) x = v;
}

std::vector<float> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

Tensor stats_for(const ModelConfig& c, aga::Rng& rng) {
  std::vector<float> v(c.classes * c.max_len);
  for (auto& x : v) x = static_cast<float>(rng.uniform(0, 1));
  return Tensor::from({c.classes, c.max_len}, v);
}

}  // namespace

TEST(Embed, ShapesAndLookup) {
  const auto c = small_config();
  const auto p = aga::init_parameters<float>(c);
  Tape<float> tape;
  const std::vector<int> one{3};
  EXPECT_EQ(aga::embed(tape, one, p).shape(), (aga::Shape{5, 1}));
  const std::vector<int> twice{4, 4};
  const auto x = aga::embed(tape, twice, p);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(x.at(r, 0), x.at(r, 1));
  const std::vector<int> bad{9};
  EXPECT_THROW(aga::embed(tape, bad, p), aga::IndexError);
}

TEST(Embed, RepeatedTokenGradientAccumulates) {
  const auto c = small_config();
  auto p = aga::init_parameters<float>(c);
  Tape<float> tape;
  const std::vector<int> twice{4, 4};
  tape.backward(tape.sum(aga::embed(tape, twice, p)));
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(p.embedding.grad()[4 * 5 + j], 2.0f);
  EXPECT_EQ(p.embedding.grad()[0], 0.0f);
}

TEST(Init, ShapesBoundsAndDeterminism) {
  const auto c = small_config();
  const auto a = aga::init_parameters<float>(c);
  const auto b = aga::init_parameters<float>(c);
  const auto na = a.named(), nb = b.named();
  ASSERT_EQ(na.size(), nb.size());
  for (std::size_t i = 0; i < na.size(); ++i) {
    EXPECT_EQ(na[i].first, nb[i].first);
    EXPECT_EQ(vals(na[i].second), vals(nb[i].second));
  }
  for (float v : a.embedding.values()) EXPECT_LE(std::abs(v), 0.05f);
  EXPECT_EQ(a.conv_filters[1].shape(), (aga::Shape{3, 3, 5}));
  EXPECT_EQ(a.semantic_weight.shape(), (aga::Shape{6, 6}));
  EXPECT_EQ(a.stats_weight.shape(), (aga::Shape{6, 3}));
  EXPECT_EQ(a.head_weights.back().shape(), (aga::Shape{3, 6}));
  for (float v : a.semantic_weight.values()) EXPECT_LE(std::abs(v), 1.0f / std::sqrt(6.0f));
  for (float v : a.semantic_bias.values()) EXPECT_EQ(v, 0.0f);
  auto other = c;
  other.seed = 18;
  EXPECT_NE(vals(aga::init_parameters<float>(other).embedding), vals(a.embedding));
}

TEST(Init, FrozenEmbeddingsAreNotTrainable) {
  auto c = small_config();
  c.freeze_embeddings = true;
  const auto p = aga::init_parameters<float>(c);
  EXPECT_FALSE(p.embedding.requires_grad());
  EXPECT_EQ(p.trainable().size(), p.named().size() - 1);
}

TEST(ExtractFeatures, CnnZeroWeightsGiveActivatedBias) {
  const auto c = small_config();
  auto p = aga::init_parameters<float>(c);
  for (auto& f : p.conv_filters) fill(f, 0.0f);
  fill(p.conv_biases[0], -0.5f);
  fill(p.conv_biases[1], 0.7f);
  Tape<float> tape;
  const std::vector<int> ids{2, 3, 4, 5};
  const auto feats = aga::extract_features(tape, aga::embed(tape, ids, p), p, c);
  ASSERT_EQ(feats.shape(), (aga::Shape{6, 4}));
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(feats.at(r, j), r < 3 ? 0.0f : 0.7f);
  }
}

TEST(ExtractFeatures, DefaultCnnHasThreeHundredRows) {
  ModelConfig c;
  c.vocab_size = 4;
  c.embed_dim = 6;
  EXPECT_EQ(c.feature_dim(), 300u);
  const auto p = aga::init_parameters<float>(c);
  Tape<float> tape;
  const std::vector<int> ids{0, 1, 2, 3, 2};
  EXPECT_EQ(aga::extract_features(tape, aga::embed(tape, ids, p), p, c).shape(), (aga::Shape{300, 5}));
}

TEST(ExtractFeatures, LstmZeroInputGivesZeroFeatures) {
  const auto c = small_config(aga::Extractor::kLstm);
  auto p = aga::init_parameters<float>(c);
  fill(p.embedding, 0.0f);
  Tape<float> tape;
  const std::vector<int> ids{1, 2, 3, 0};
  const auto feats = aga::extract_features(tape, aga::embed(tape, ids, p), p, c);
  EXPECT_EQ(feats.shape(), (aga::Shape{4, 4}));
  for (float v : feats.values()) EXPECT_EQ(v, 0.0f);
}

TEST(LstmStep, ZeroWeightsGiveZeroHidden) {
  Tape<float> tape;
  const aga::LstmState<float> prev{Tensor::zeros({2}), Tensor::zeros({2})};
  const auto next = aga::lstm_step(tape, prev, Tensor::from({3}, {1, 2, 3}), Tensor::zeros({8, 3}),
                                   Tensor::zeros({8, 2}), Tensor::zeros({8}));
  EXPECT_EQ(vals(next.hidden), (std::vector<float>{0, 0}));
}

TEST(LstmStep, SaturatedForgetKeepsCell) {
  Tape<double> tape;
  // gate order: input, forget, output, candidate
  std::vector<double> bias(8, 0.0);
  bias[0] = bias[1] = -100;  // input gate closed
  bias[2] = bias[3] = 100;   // forget gate open
  const aga::LstmState<double> prev{Tensor64::from({2}, {0.3, -1.2}), Tensor64::from({2}, {0.1, 0.2})};
  const auto next = aga::lstm_step(tape, prev, Tensor64::from({1}, {0.5}), Tensor64::zeros({8, 1}),
                                   Tensor64::zeros({8, 2}), Tensor64::from({8}, bias));
  EXPECT_NEAR(next.cell.at(0), 0.3, 1e-12);
  EXPECT_NEAR(next.cell.at(1), -1.2, 1e-12);
}

TEST(LstmStep, ShapeMismatchThrows) {
  Tape<float> tape;
  const aga::LstmState<float> prev{Tensor::zeros({2}), Tensor::zeros({2})};
  EXPECT_THROW(aga::lstm_step(tape, prev, Tensor::zeros({3}), Tensor::zeros({8, 4}), Tensor::zeros({8, 2}),
                              Tensor::zeros({8})),
               aga::DimensionError);
}

TEST(ProjectShared, IdentityAndZero) {
  Parameters<float> p;
  p.semantic_weight = Tensor::from({2, 2}, {1, 0, 0, 1});
  p.semantic_bias = Tensor::zeros({2});
  p.stats_weight = Tensor::from({2, 2}, {1, 0, 0, 1});
  p.stats_bias = Tensor::zeros({2});
  Tape<float> tape;
  const auto features = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto r = aga::project_shared(tape, features, Tensor::zeros({2, 3}), p);
  EXPECT_EQ(vals(r.semantic), vals(features));
  EXPECT_EQ(vals(r.stats), std::vector<float>(6, 0.0f));
  const auto one = aga::project_shared(tape, Tensor::zeros({2, 1}), Tensor::from({2, 1}, {0.4f, 0}), p);
  EXPECT_EQ(vals(one.stats), (std::vector<float>{0.4f, 0}));
  EXPECT_THROW(aga::project_shared(tape, features, Tensor::zeros({2, 2}), p), aga::DimensionError);
}

TEST(Valve, Examples) {
  EXPECT_EQ(aga::valve(0.5, 0.05), 0.5);
  EXPECT_EQ(aga::valve(0.56, 0.05), 0.0);
  EXPECT_EQ(aga::valve(0.45, 0.05), 0.45);
  for (double a : {1e-9, 0.1, 0.73, 0.999999}) EXPECT_EQ(aga::valve(a, 0.5), a);
}

TEST(AdaGate, ZeroSemanticPassesHalfStats) {
  Tape<float> tape;
  const auto stats = Tensor::from({1, 3}, {2, -4, 6});
  for (double eps : {0.0, 0.05, 0.5}) {
    EXPECT_EQ(vals(aga::adagate(tape, Tensor::zeros({1, 3}), stats, eps)), (std::vector<float>{1, -2, 3}));
  }
}

TEST(AdaGate, FullBandAndClosedBand) {
  Tape<double> tape;
  const auto sem = Tensor64::from({1, 3}, {-1.5, 0.3, 2.0});
  const auto stats = Tensor64::from({1, 3}, {1, 2, 3});
  const auto open = aga::adagate(tape, sem, stats, 0.5);
  const auto closed = aga::adagate(tape, sem, stats, 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    const double s = sem.at(j), sig = 1 / (1 + std::exp(-s));
    EXPECT_NEAR(open.at(j), std::max(s, 0.0) + sig * stats.at(j), 1e-15);
    EXPECT_EQ(closed.at(j), std::max(s, 0.0));
  }
  EXPECT_THROW(aga::adagate(tape, sem, Tensor64::zeros({3, 1}), 0.1), aga::DimensionError);
}

TEST(AttendPool, Examples) {
  Tape<double> tape;
  const auto c = Tensor64::from({2, 3}, {1, 2, 6, -3, 0, 3});
  const auto uniform = aga::attend_pool(tape, Tensor64::full({2, 3}, 0.7), c);
  EXPECT_NEAR(uniform.pooled.at(0), 3.0, 1e-12);
  EXPECT_NEAR(uniform.pooled.at(1), 0.0, 1e-12);

  const auto single = aga::attend_pool(tape, Tensor64::from({2, 1}, {5, -5}), Tensor64::from({2, 1}, {4, 9}));
  EXPECT_EQ(single.pooled.at(0), 4.0);
  EXPECT_EQ(single.pooled.at(1), 9.0);

  const auto weighted =
      aga::attend_pool(tape, Tensor64::from({1, 2}, {std::log(1.0), std::log(3.0)}), Tensor64::from({1, 2}, {10, 20}));
  EXPECT_NEAR(weighted.pooled.at(0), 17.5, 1e-12);
}

TEST(Classify, EvalModeAndZeroWeights) {
  const auto c = small_config();
  auto p = aga::init_parameters<float>(c);
  aga::DropoutSampler sampler(c.dropout, 3);
  Tape<float> tape;
  const auto a = Tensor::from({6}, {1, -1, 2, 0.5f, 3, -2});
  const auto eval = aga::classify(tape, a, p, &sampler, aga::Mode::kEval);
  const auto plain = aga::classify(tape, a, p, nullptr, aga::Mode::kTrain);
  EXPECT_EQ(vals(eval), vals(plain));
  fill(p.head_weights[0], 0.0f);
  EXPECT_EQ(vals(aga::classify(tape, a, p, &sampler, aga::Mode::kTrain)), std::vector<float>(3, 0.0f));
}

TEST(Forward, DeterministicInEvalMode) {
  const auto c = small_config();
  const AgaModel<float> model(c);
  aga::Rng rng(2);
  const auto stats = stats_for(c, rng);
  const std::vector<int> ids{2, 5, 8, 0};
  Tape<float> t1, t2;
  EXPECT_EQ(vals(model.forward(t1, ids, stats, aga::Mode::kEval).logits),
            vals(model.forward(t2, ids, stats, aga::Mode::kEval).logits));
}

TEST(Forward, ClosedValveEqualsZeroedStatistics) {
  for (auto extractor : {aga::Extractor::kCnn, aga::Extractor::kLstm}) {
    auto c = small_config(extractor);
    c.epsilon = 0.0;
    auto off = c;
    off.gi = false;
    const AgaModel<float> with(c);
    const AgaModel<float> without(off, with.params());
    aga::Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> ids(c.max_len);
      for (auto& id : ids) id = static_cast<int>(rng.below(c.vocab_size));
      const auto stats = stats_for(c, rng);
      Tape<float> t1, t2;
      const auto a = with.forward(t1, ids, stats, aga::Mode::kEval);
      const auto b = without.forward(t2, ids, stats, aga::Mode::kEval);
      EXPECT_EQ(vals(a.logits), vals(b.logits));
    }
  }
}

TEST(Forward, WideValveChangesLogits) {
  auto c = small_config();
  c.epsilon = 0.5;
  auto off = c;
  off.gi = false;
  const AgaModel<float> with(c);
  const AgaModel<float> without(off, with.params());
  aga::Rng rng(9);
  const auto stats = stats_for(c, rng);
  const std::vector<int> ids{2, 3, 4, 5};
  Tape<float> t1, t2;
  EXPECT_NE(vals(with.forward(t1, ids, stats, aga::Mode::kEval).logits),
            vals(without.forward(t2, ids, stats, aga::Mode::kEval).logits));
}

TEST(Forward, RejectsMismatchedStatistics) {
  const auto c = small_config();
  const AgaModel<float> model(c);
  Tape<float> tape;
  const std::vector<int> ids{2, 3, 4, 5};
  EXPECT_THROW(model.forward(tape, ids, Tensor::zeros({2, 4}), aga::Mode::kEval), aga::DimensionError);
}

TEST(Config, ValidationNamesKey) {
  auto c = small_config();
  c.epsilon = 0.6;
  try {
    c.validate();
    FAIL();
  } catch (const aga::ConfigError& e) {
    EXPECT_EQ(e.key(), "epsilon");
  }
  c = small_config();
  c.dropout.beta = 1.0;
  EXPECT_THROW(c.validate(), aga::ConfigError);
  c = small_config();
  c.dropout.c_sup = 0.5;
  EXPECT_THROW(c.validate(), aga::ConfigError);
}

TEST(Config, SettingsRoundTrip) {
  aga::RunConfig run;
  run.model = small_config(aga::Extractor::kLstm);
  run.model.epsilon = 0.05;
  run.train.lr = 3e-4;
  const auto settings = aga::run_settings(run);
  aga::RunConfig back;
  for (const auto& [k, v] : settings) aga::apply_setting(back, k, v);
  EXPECT_EQ(aga::run_settings(back), settings);
  EXPECT_THROW(aga::apply_setting(back, "nonsense", "1"), aga::ConfigError);
  EXPECT_THROW(aga::apply_setting(back, "epochs", "-3"), aga::ConfigError);
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  TempDir dir("ckpt");
  const auto c = small_config(aga::Extractor::kLstm);
  const auto p = aga::init_parameters<float>(c);
  aga::save_checkpoint(dir / "m.bin", c, {{"run", "x"}, {"labels", "a,b,c"}}, p);
  const auto loaded = aga::load_checkpoint(dir / "m.bin");
  EXPECT_EQ(aga::model_settings(loaded.config), aga::model_settings(c));
  EXPECT_EQ(loaded.meta.at("labels"), "a,b,c");
  const auto a = p.named(), b = loaded.params.named();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(a[i].second.shape(), b[i].second.shape());
    EXPECT_EQ(vals(a[i].second), vals(b[i].second));
  }
  EXPECT_EQ(read_text(dir / "m.bin").substr(0, 6), std::string("AGAGI\0", 6));
}

TEST(Checkpoint, TruncatedOrCorruptFilesRejected) {
  TempDir dir("ckpt");
  const auto c = small_config();
  aga::save_checkpoint(dir / "m.bin", c, {}, aga::init_parameters<float>(c));
  const std::string bytes = read_text(dir / "m.bin");
  write_text(dir / "short.bin", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(aga::load_checkpoint(dir / "short.bin"), aga::ParseError);
  write_text(dir / "long.bin", bytes + "x");
  EXPECT_THROW(aga::load_checkpoint(dir / "long.bin"), aga::ParseError);
  std::string bad = bytes;
  bad[0] = 'X';
  write_text(dir / "magic.bin", bad);
  EXPECT_THROW(aga::load_checkpoint(dir / "magic.bin"), aga::ParseError);
}

TEST(Embeddings, ImportOverwritesKnownRows) {
  TempDir dir("emb");
  const auto c = small_config();
  auto p = aga::init_parameters<float>(c);
  const std::vector<std::vector<std::string>> s{{"alpha", "beta"}};
  const auto vocab = aga::Vocab::build(s);
  write_text(dir / "e.txt", "3 5\nalpha 1 2 3 4 5\nzeta 0 0 0 0 0\nbeta 0.5 0.5 0.5 0.5 0.5\n");
  EXPECT_EQ(aga::import_embeddings(dir / "e.txt", vocab, p), 2u);
  const auto row = static_cast<std::size_t>(vocab.index("alpha"));
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(p.embedding.at(row, j), static_cast<float>(j + 1));
  write_text(dir / "bad.txt", "alpha 1 2 3\n");
  EXPECT_THROW(aga::import_embeddings(dir / "bad.txt", vocab, p), aga::ParseError);
}
