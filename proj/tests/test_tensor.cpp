#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "aga/errors.hpp"
#include "aga/random.hpp"
#include "aga/tensor.hpp"

using aga::Tape;
using aga::Tensor;
using aga::Tensor64;

namespace {

std::vector<float> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape<float> tape;
  const auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(vals(tape.matmul(eye, m)), (std::vector<float>{1, 2, 3, 4}));
}

TEST(Matmul, RowTimesColumn) {
  Tape<float> tape;
  const auto out = tape.matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4}));
  EXPECT_EQ(out.shape(), (aga::Shape{1, 1}));
  EXPECT_FLOAT_EQ(out.at(0), 11.0f);
}

TEST(Matmul, GradientOfSumIsOnesTimesBTransposed) {
  Tape<double> tape;
  auto a = Tensor64::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto b = Tensor64::from({3, 2}, {0.5, -1, 2, 0.25, -3, 4}, false);
  tape.backward(tape.sum(tape.matmul(a, b)));
  // d/dA_ij = sum_k B_jk
  const double row_sums[3] = {-0.5, 2.25, 1.0};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(a.grad()[i * 3 + j], row_sums[j]);
  }
}

TEST(Matmul, InnerMismatchThrows) {
  Tape<float> tape;
  EXPECT_THROW(tape.matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), aga::DimensionError);
}

TEST(Conv1d, ZeroInputGivesBias) {
  Tape<float> tape;
  const auto x = Tensor::zeros({3, 5});
  const auto f = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto out = tape.conv1d_same(x, f, Tensor::from({1}, {0.75f}));
  EXPECT_EQ(vals(out), std::vector<float>(5, 0.75f));
}

TEST(Conv1d, PointwiseScaling) {
  Tape<float> tape;
  const auto out = tape.conv1d_same(Tensor::from({1, 3}, {1, 2, 3}), Tensor::from({1, 1}, {2}), Tensor::from({1}, {0}));
  EXPECT_EQ(vals(out), (std::vector<float>{2, 4, 6}));
}

TEST(Conv1d, WindowOfThreeSumsNeighbours) {
  Tape<float> tape;
  const auto out =
      tape.conv1d_same(Tensor::from({1, 3}, {1, 2, 3}), Tensor::from({3, 1}, {1, 1, 1}), Tensor::from({1}, {0}));
  EXPECT_EQ(vals(out), (std::vector<float>{3, 6, 5}));
}

TEST(Conv1d, EvenWindowPadsOnTheLeft) {
  // h=2: floor(h/2) = 1 zero on the left, none on the right.
  Tape<float> tape;
  const auto out =
      tape.conv1d_same(Tensor::from({1, 3}, {1, 2, 3}), Tensor::from({2, 1}, {1, 10}), Tensor::from({1}, {0}));
  EXPECT_EQ(vals(out), (std::vector<float>{10, 21, 32}));
}

TEST(Conv1d, FilterBankStacksRows) {
  Tape<float> tape;
  const auto x = Tensor::from({1, 3}, {1, 2, 3});
  const auto bank = Tensor::from({2, 1, 1}, {2, -1});
  const auto out = tape.conv1d_same(x, bank, Tensor::from({2}, {0, 1}));
  EXPECT_EQ(out.shape(), (aga::Shape{2, 3}));
  EXPECT_EQ(vals(out), (std::vector<float>{2, 4, 6, 0, -1, -2}));
}

TEST(Conv1d, EmbeddingWidthMismatchThrows) {
  Tape<float> tape;
  EXPECT_THROW(tape.conv1d_same(Tensor::zeros({3, 4}), Tensor::zeros({2, 2}), Tensor::zeros({1})),
               aga::DimensionError);
}

TEST(Activations, Definitions) {
  Tape<double> tape;
  auto x = Tensor64::from({3}, {-1, 0, 3}, true);
  const auto s = tape.sigmoid(x);
  const auto r = tape.relu(x);
  EXPECT_DOUBLE_EQ(s.at(1), 0.5);
  EXPECT_DOUBLE_EQ(r.at(0), 0.0);
  EXPECT_DOUBLE_EQ(r.at(2), 3.0);
  EXPECT_DOUBLE_EQ(tape.tanh(x).at(1), 0.0);
  tape.backward(tape.sum(s));
  EXPECT_DOUBLE_EQ(x.grad()[1], 0.25);
}

TEST(Activations, ReluSubgradientAtZeroIsZero) {
  Tape<double> tape;
  auto x = Tensor64::from({1}, {0.0}, true);
  tape.backward(tape.sum(tape.relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Activations, SigmoidIsStableAtExtremes) {
  Tape<float> tape;
  const auto s = tape.sigmoid(Tensor::from({2}, {-1000, 1000}));
  EXPECT_EQ(s.at(0), 0.0f);
  EXPECT_EQ(s.at(1), 1.0f);
}

TEST(Activations, MonotoneOnGrid) {
  std::vector<float> grid;
  for (int i = -400; i <= 400; ++i) grid.push_back(static_cast<float>(i) / 40.0f);
  Tape<float> tape;
  const auto x = Tensor::from({grid.size()}, grid);
  for (const auto& out : {tape.sigmoid(x), tape.relu(x), tape.tanh(x)}) {
    for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_LE(out.at(i - 1), out.at(i));
  }
}

TEST(Softmax, UniformRow) {
  Tape<float> tape;
  const auto a = tape.softmax_over_positions(Tensor::zeros({1, 3}));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.at(j), 1.0 / 3.0, 1e-7);
}

TEST(Softmax, LargeOffsetDoesNotOverflow) {
  Tape<float> tape;
  const auto a = tape.softmax_over_positions(Tensor::from({1, 2}, {5, 1005}));
  EXPECT_TRUE(std::isfinite(a.at(0)));
  EXPECT_NEAR(a.at(0), 0.0, 1e-7);
  EXPECT_NEAR(a.at(1), 1.0, 1e-7);
}

TEST(Softmax, KnownValues) {
  Tape<float> tape;
  const auto a = tape.softmax_over_positions(Tensor::from({1, 3}, {1, 2, 3}));
  EXPECT_NEAR(a.at(0), 0.0900, 1e-4);
  EXPECT_NEAR(a.at(1), 0.2447, 1e-4);
  EXPECT_NEAR(a.at(2), 0.6652, 1e-4);
}

TEST(Softmax, RowsAreIndependentAndNormalized) {
  aga::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.below(6), m = 1 + rng.below(12);
    std::vector<float> v(d * m);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-20, 20));
    Tape<float> tape;
    const auto a = tape.softmax_over_positions(Tensor::from({d, m}, v));
    for (std::size_t r = 0; r < d; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        EXPECT_GE(a.at(r, j), 0.0f);
        EXPECT_LE(a.at(r, j), 1.0f);
        total += a.at(r, j);
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(CrossEntropy, UniformLogits) {
  Tape<float> tape;
  EXPECT_NEAR(tape.cross_entropy(Tensor::zeros({6}), 2).item(), std::log(6.0), 1e-6);
}

TEST(CrossEntropy, SaturatedMargin) {
  Tape<float> tape;
  EXPECT_NEAR(tape.cross_entropy(Tensor::from({3}, {0, 500, 0}), 1).item(), 0.0, 1e-6);
}

TEST(CrossEntropy, TwoClassValue) {
  Tape<float> tape;
  EXPECT_NEAR(tape.cross_entropy(Tensor::from({2}, {1, 2}), 0).item(), 1.3133, 1e-4);
}

TEST(CrossEntropy, LabelOutOfRangeThrows) {
  Tape<float> tape;
  EXPECT_THROW(tape.cross_entropy(Tensor::zeros({2}), 2), aga::IndexError);
}

TEST(CrossEntropy, MeanOverBatch) {
  Tape<double> tape;
  const Tensor64 losses[] = {tape.cross_entropy(Tensor64::from({2}, {1, 2}), 0),
                             tape.cross_entropy(Tensor64::zeros({2}), 1)};
  EXPECT_NEAR(tape.mean(losses).item(), (1.3132616875182228 + std::log(2.0)) / 2, 1e-12);
}

TEST(Backward, SumGivesOnes) {
  Tape<float> tape;
  auto x = Tensor::from({2, 2}, {3, -1, 4, 1}, true);
  tape.backward(tape.sum(x));
  EXPECT_EQ(std::vector<float>(x.grad().begin(), x.grad().end()), std::vector<float>(4, 1.0f));
}

TEST(Backward, SquareGivesTwiceInput) {
  Tape<float> tape;
  auto x = Tensor::from({2}, {1, 2}, true);
  tape.backward(tape.sum(tape.mul(x, x)));
  EXPECT_EQ(std::vector<float>(x.grad().begin(), x.grad().end()), (std::vector<float>{2, 4}));
}

TEST(Backward, NonScalarLossThrows) {
  Tape<float> tape;
  auto x = Tensor::from({2}, {1, 2}, true);
  EXPECT_THROW(tape.backward(tape.relu(x)), aga::ContractError);
}

TEST(Backward, GradientsAccumulateAcrossUses) {
  Tape<double> tape;
  auto x = Tensor64::from({1}, {3}, true);
  tape.backward(tape.sum(tape.add(tape.scale(x, 2.0), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
}

TEST(TapeStructure, InputsPrecedeEachNode) {
  Tape<float> tape;
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  auto b = Tensor::from({2}, {1, 1}, true);
  tape.sum(tape.relu(tape.add_column_bias(tape.matmul(a, a), b)));
  ASSERT_EQ(tape.size(), 4u);
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (int in : tape.node(i).inputs) EXPECT_LT(in, static_cast<int>(i));
  }
  EXPECT_EQ(tape.node(0).op, "matmul");
}

TEST(TapeStructure, ForwardIsBitDeterministic) {
  const auto run = [] {
    Tape<float> tape;
    const auto x = Tensor::from({2, 3}, {0.1f, -0.7f, 2.5f, 1.25f, -3.0f, 0.3f});
    return vals(tape.softmax_over_positions(tape.tanh(tape.matmul(Tensor::from({2, 2}, {1, 2, 3, 4}), x))));
  };
  EXPECT_EQ(run(), run());
}

TEST(Valve, BandPassesExactlyClosedInterval) {
  Tape<double> tape;
  auto x = Tensor64::from({5}, {0.44, 0.45, 0.5, 0.55, 0.56}, true);
  const auto y = tape.valve(x, 0.05);
  EXPECT_EQ(y.at(0), 0.0);
  EXPECT_EQ(y.at(1), 0.45);
  EXPECT_EQ(y.at(2), 0.5);
  EXPECT_EQ(y.at(3), 0.55);
  EXPECT_EQ(y.at(4), 0.0);
  tape.backward(tape.sum(y));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{0, 1, 1, 1, 0}));
}

TEST(Shapes, GatherColumnsAccumulatesRepeatedRows) {
  Tape<float> tape;
  auto table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  const std::vector<int> ids{2, 0, 2};
  const auto x = tape.gather_columns(table, ids);
  EXPECT_EQ(x.shape(), (aga::Shape{2, 3}));
  EXPECT_EQ(vals(x), (std::vector<float>{5, 1, 5, 6, 2, 6}));
  tape.backward(tape.sum(x));
  EXPECT_EQ(std::vector<float>(table.grad().begin(), table.grad().end()), (std::vector<float>{1, 1, 0, 0, 2, 2}));
  const std::vector<int> bad{3};
  EXPECT_THROW(tape.gather_columns(table, bad), aga::IndexError);
}

TEST(Shapes, ConcatStackSliceColumn) {
  Tape<float> tape;
  const auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  const auto v = Tensor::from({2}, {5, 6});
  const Tensor parts[] = {m, v};
  EXPECT_EQ(vals(tape.concat_rows(parts)), (std::vector<float>{1, 2, 3, 4, 5, 6}));
  const Tensor cols[] = {v, v};
  EXPECT_EQ(vals(tape.stack_columns(cols)), (std::vector<float>{5, 5, 6, 6}));
  EXPECT_EQ(vals(tape.column(m, 1)), (std::vector<float>{2, 4}));
  EXPECT_EQ(vals(tape.slice(v, 1, 1)), (std::vector<float>{6}));
  EXPECT_THROW(tape.slice(v, 1, 2), aga::DimensionError);
}

TEST(TensorBasics, FromChecksLength) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), aga::DimensionError);
  const auto t = Tensor::from({2, 3}, std::vector<float>(6, 1.0f), true);
  EXPECT_EQ(t.grad().size(), t.numel());
  const auto c = t.clone();
  EXPECT_FALSE(c.same_storage(t));
  EXPECT_EQ(vals(c), vals(t));
}
