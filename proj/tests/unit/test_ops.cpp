#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "dwt/errors.hpp"
#include "dwt/grad_check.hpp"
#include "dwt/ops.hpp"
#include "test_support.hpp"

namespace dwt {
namespace {

using testing::Gen;
using testing::to_vector;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Checks an op's backward rule against central differences on
/// loss = sum(op(inputs) * r) for a fixed random r.
void expect_fd_agrees(const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& op,
                      std::vector<Tensor<double>> inputs, std::uint64_t seed, double tolerance = 1e-6) {
  Gen gen(seed);
  const Tensor<double> probe_shape = op(inputs);
  const Tensor<double> r = gen.tensor<double>(probe_shape.shape());
  std::vector<NamedTensor<double>> named;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    inputs[i].set_requires_grad(true);
    named.push_back({"input" + std::to_string(i), inputs[i]});
  }
  GradCheckOptions options;
  options.step = 1e-4;
  options.stencil = Stencil::central4;
  const auto report = grad_check([&] { return sum(mul(op(inputs), r)); }, named, options);
  EXPECT_LT(report.max_relative_error(), tolerance);
}

// ---- layer_norm

TEST(LayerNorm, ConstantInputGivesZero) {
  const Tensor<double> x({3}, {1, 1, 1});
  const auto y = layer_norm(x, Tensor<double>::filled({3}, 1.0), Tensor<double>::zeros({3}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, MatchesScalarOracle) {
  const Tensor<double> x({3}, {1, 2, 3});
  const auto y = layer_norm(x, Tensor<double>::filled({3}, 1.0), Tensor<double>::zeros({3}));
  const double sigma = std::sqrt(2.0 / 3.0);
  const double expected[] = {-1.0 / (sigma + 1e-6), 0.0, 1.0 / (sigma + 1e-6)};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y.values()[i], expected[i], 1e-12);
  EXPECT_NEAR(y.values()[0], -1.2247, 1e-4);
}

TEST(LayerNorm, ZeroGainLeavesBias) {
  Gen gen(3);
  const auto y = layer_norm(gen.tensor<double>({3}), Tensor<double>::zeros({3}), Tensor<double>::filled({3}, 5.0));
  for (double v : y.values()) EXPECT_EQ(v, 5.0);
}

TEST(LayerNorm, AffineShapeMismatchIsConfigError) {
  EXPECT_THROW(layer_norm(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({2}), Tensor<double>::zeros({3})),
               ConfigError);
}

TEST(LayerNorm, PropertyUnitMomentsPerSlice) {
  Gen gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = gen.size(1, 4);
    const std::size_t d = gen.size(2, 9);
    const auto x = gen.tensor<double>({rows, d}, -5.0, 5.0);
    const auto y = layer_norm(x, Tensor<double>::filled({d}, 1.0), Tensor<double>::zeros({d}));
    for (std::size_t r = 0; r < rows; ++r) {
      double mu = 0.0, var = 0.0;
      for (std::size_t j = 0; j < d; ++j) mu += y.values()[r * d + j];
      mu /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j) var += std::pow(y.values()[r * d + j] - mu, 2);
      EXPECT_NEAR(mu, 0.0, 1e-6);
      EXPECT_NEAR(std::sqrt(var / static_cast<double>(d)), 1.0, 1e-4);
    }
  }
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
  Gen gen(5);
  expect_fd_agrees([](const auto& in) { return layer_norm(in[0], in[1], in[2]); },
                   {gen.tensor<double>({3, 5}), gen.tensor<double>({5}), gen.tensor<double>({5})}, 1);
}

TEST(LayerNorm, ConstantSliceBackwardIsFinite) {
  Tensor<double> x({4}, {2, 2, 2, 2}, true);
  sum(layer_norm(x, Tensor<double>::filled({4}, 1.0), Tensor<double>::zeros({4}))).backward();
  for (double g : x.grad()) EXPECT_TRUE(std::isfinite(g));
}

// ---- gelu

TEST(Gelu, ReferenceValues) {
  const auto y = gelu(Tensor<double>({3}, {0.0, 1.0, 10.0}));
  EXPECT_EQ(y.values()[0], 0.0);
  EXPECT_NEAR(y.values()[1], 0.5 * (1.0 + std::erf(1.0 / std::numbers::sqrt2)), 1e-15);
  EXPECT_NEAR(y.values()[1], 0.8413, 1e-4);
  EXPECT_NEAR(y.values()[2], 10.0, 1e-6);
}

TEST(Gelu, BackwardMatchesFiniteDifferences) {
  Gen gen(7);
  expect_fd_agrees([](const auto& in) { return gelu(in[0]); }, {gen.tensor<double>({12}, -3.0, 3.0)}, 2);
}

// ---- sigmoid

TEST(Sigmoid, ReferenceValuesAndSaturation) {
  const auto y = sigmoid(Tensor<double>({3}, {0.0, 40.0, -40.0}));
  EXPECT_EQ(y.values()[0], 0.5);
  EXPECT_NEAR(y.values()[1], 1.0, 1e-12);
  EXPECT_NEAR(y.values()[2], 0.0, 1e-12);
  EXPECT_GT(y.values()[2], 0.0);
}

TEST(Sigmoid, ExtremeInputsDoNotOverflow) {
  const auto y = sigmoid(Tensor<double>({2}, {1000.0, -1000.0}));
  EXPECT_EQ(y.values()[0], 1.0);
  EXPECT_EQ(y.values()[1], 0.0);
}

TEST(Sigmoid, PropertySymmetry) {
  Gen gen(13);
  const auto x = gen.tensor<double>({200}, -50.0, 50.0);
  const auto a = sigmoid(x);
  const auto b = sigmoid(scale(x, -1.0));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a.values()[i] + b.values()[i], 1.0, 1e-12);
}

TEST(Sigmoid, BackwardMatchesFiniteDifferences) {
  Gen gen(9);
  expect_fd_agrees([](const auto& in) { return sigmoid(in[0]); }, {gen.tensor<double>({10}, -4.0, 4.0)}, 3);
}

// ---- linear

TEST(Linear, IdentityWeight) {
  const auto y = linear(Tensor<double>({2}, {1, 0}), Tensor<double>({2, 2}, {1, 0, 0, 1}), Tensor<double>::zeros({2}));
  EXPECT_EQ(to_vector(y), (std::vector<double>{1, 0}));
}

TEST(Linear, HandMatrixProduct) {
  const auto y = linear(Tensor<double>({2}, {1, 1}), Tensor<double>({2, 2}, {1, 2, 3, 4}), Tensor<double>({2}, {1, 1}));
  EXPECT_EQ(to_vector(y), (std::vector<double>{5, 7}));
}

TEST(Linear, ZeroInputGivesBias) {
  Gen gen(1);
  const auto b = gen.tensor<double>({3});
  const auto y = linear(Tensor<double>::zeros({2, 4}), gen.tensor<double>({4, 3}), b);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(y.values()[r * 3 + j], b.values()[j]);
}

TEST(Linear, ExtentMismatchIsConfigError) {
  EXPECT_THROW(linear(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({4, 2}), Tensor<double>::zeros({2})),
               ConfigError);
  EXPECT_THROW(linear(Tensor<double>::zeros({2, 3}), Tensor<double>::zeros({3, 2}), Tensor<double>::zeros({3})),
               ConfigError);
}

TEST(Linear, BackwardMatchesFiniteDifferences) {
  Gen gen(15);
  expect_fd_agrees([](const auto& in) { return linear(in[0], in[1], in[2]); },
                   {gen.tensor<double>({2, 3, 4}), gen.tensor<double>({4, 5}), gen.tensor<double>({5})}, 4);
}

TEST(LinearTransposed, MatchesLinearWithTransposedWeight) {
  Gen gen(17);
  const auto x = gen.tensor<double>({3, 4});
  const auto e = gen.tensor<double>({5, 4});
  std::vector<double> wt(20);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) wt[j * 5 + i] = e.values()[i * 4 + j];
  const auto a = linear_transposed(x, e);
  const auto b = linear(x, Tensor<double>({4, 5}, wt), Tensor<double>{});
  EXPECT_LT(testing::max_abs_diff(a, b), 1e-14);
  expect_fd_agrees([](const auto& in) { return linear_transposed(in[0], in[1]); }, {x, e}, 5);
}

// ---- softmax

TEST(Softmax, ReferenceValues) {
  const auto u = softmax(Tensor<double>({3}, {0, 0, 0}));
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const auto big = softmax(Tensor<double>({2}, {1000, 0}));
  EXPECT_NEAR(big.values()[0], 1.0, 1e-12);
  EXPECT_NEAR(big.values()[1], 0.0, 1e-12);
  const auto l2 = softmax(Tensor<double>({2}, {std::log(2.0), 0}));
  EXPECT_NEAR(l2.values()[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(l2.values()[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, MaskedEntriesAreZeroAndAllMaskedSliceIsZero) {
  const Tensor<double> x({2, 3}, {0, -kInf, 0, -kInf, -kInf, -kInf});
  FiniteGuard::set_enabled(false);
  const auto y = softmax(x);
  FiniteGuard::set_enabled(true);
  EXPECT_EQ(to_vector(y), (std::vector<double>{0.5, 0.0, 0.5, 0.0, 0.0, 0.0}));
}

TEST(Softmax, PropertySumsToOneAndShiftInvariant) {
  Gen gen(19);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t rows = gen.size(1, 4);
    const std::size_t d = gen.size(1, 8);
    const auto x = gen.tensor<double>({rows, d}, -10.0, 10.0);
    const auto y = softmax(x);
    const double c = gen.real(-20.0, 20.0);
    std::vector<double> shifted = to_vector(x);
    for (auto& v : shifted) v += c;
    const auto ys = softmax(Tensor<double>({rows, d}, shifted));
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < d; ++j) total += y.values()[r * d + j];
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
    EXPECT_LT(testing::max_abs_diff(y, ys), 1e-6);
  }
}

TEST(Softmax, NonLastAxis) {
  const auto y = softmax(Tensor<double>({2, 2}, {std::log(2.0), 0, 0, 0}), 0);
  EXPECT_NEAR(y.values()[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(y.values()[2], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(y.values()[1], 0.5, 1e-15);
}

TEST(Softmax, BackwardMatchesFiniteDifferences) {
  Gen gen(21);
  expect_fd_agrees([](const auto& in) { return softmax(in[0]); }, {gen.tensor<double>({3, 4}, -2.0, 2.0)}, 6);
  expect_fd_agrees([](const auto& in) { return softmax(in[0], 0); }, {gen.tensor<double>({3, 4}, -2.0, 2.0)}, 7);
}

// ---- dropout

TEST(Dropout, ZeroRateAndInferenceAreIdentity) {
  Gen gen(23);
  const auto x = gen.tensor<double>({50});
  Rng rng(1);
  EXPECT_TRUE(dropout(x, 0.0, rng, true).is_same(x));
  EXPECT_TRUE(dropout(x, 0.5, rng, false).is_same(x));
}

TEST(Dropout, MonteCarloMeanIsPreserved) {
  const Tensor<double> x = Tensor<double>::filled({100}, 2.0);
  Rng rng(123);
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto y = dropout(x, 0.5, rng, true);
    for (double v : y.values()) total += v;
  }
  const double mean = total / (trials * 100.0);
  EXPECT_NEAR(mean, 2.0, 0.02 * 2.0);
}

TEST(Dropout, SurvivorsAreScaled) {
  const Tensor<double> x = Tensor<double>::filled({1000}, 1.0);
  Rng rng(5);
  const auto y = dropout(x, 0.2, rng, true);
  for (double v : y.values()) EXPECT_TRUE(v == 0.0 || v == 1.25);
}

TEST(Dropout, FixedSeedIsReproducible) {
  Gen gen(25);
  const auto x = gen.tensor<double>({300});
  Rng a(77), b(77);
  EXPECT_EQ(to_vector(dropout(x, 0.3, a, true)), to_vector(dropout(x, 0.3, b, true)));
}

TEST(Dropout, InvalidRateIsConfigError) {
  Rng rng(1);
  EXPECT_THROW(dropout(Tensor<double>::zeros({2}), 1.0, rng, true), ConfigError);
}

// ---- structural ops

TEST(Structural, ConcatLastOrderAndGradient) {
  const auto c = concat_last(Tensor<double>({1}, {1.0}), Tensor<double>({1}, {2.0}));
  EXPECT_EQ(to_vector(c), (std::vector<double>{1.0, 2.0}));
  Gen gen(27);
  expect_fd_agrees([](const auto& in) { return concat_last(in[0], in[1]); },
                   {gen.tensor<double>({2, 3}), gen.tensor<double>({2, 2})}, 8);
}

TEST(Structural, SplitMergeHeadsRoundTrip) {
  Gen gen(29);
  const auto x = gen.tensor<double>({2, 3, 8});
  const auto s = split_heads(x, 4);
  EXPECT_EQ(s.shape(), (Shape{8, 3, 2}));
  EXPECT_EQ(to_vector(merge_heads(s, 4)), to_vector(x));
  expect_fd_agrees([](const auto& in) { return split_heads(in[0], 2); }, {x}, 9);
}

TEST(Structural, BatchedMatmulBothLayouts) {
  Gen gen(31);
  const auto a = gen.tensor<double>({2, 3, 4});
  const auto b = gen.tensor<double>({2, 4, 5});
  const auto y = batched_matmul(a, b, false);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 4; ++k) acc += a.values()[n * 12 + i * 4 + k] * b.values()[n * 20 + k * 5 + j];
        EXPECT_NEAR(y.values()[n * 15 + i * 5 + j], acc, 1e-14);
      }
  expect_fd_agrees([](const auto& in) { return batched_matmul(in[0], in[1], false); }, {a, b}, 10);
  expect_fd_agrees([](const auto& in) { return batched_matmul(in[0], in[1], true); },
                   {gen.tensor<double>({2, 3, 4}), gen.tensor<double>({2, 5, 4})}, 11);
}

TEST(Structural, ElementwiseBackward) {
  Gen gen(33);
  const auto a = gen.tensor<double>({2, 3});
  const auto b = gen.tensor<double>({2, 3});
  expect_fd_agrees([](const auto& in) { return add(in[0], in[1]); }, {a, b}, 12);
  expect_fd_agrees([](const auto& in) { return sub(in[0], in[1]); }, {a, b}, 13);
  expect_fd_agrees([](const auto& in) { return mul(in[0], in[1]); }, {a, b}, 14);
  expect_fd_agrees([](const auto& in) { return scale(in[0], 2.5); }, {a}, 15);
  expect_fd_agrees([](const auto& in) { return add_broadcast(in[0], in[1]); }, {a, gen.tensor<double>({3})}, 16);
  expect_fd_agrees([](const auto& in) { return mean(in[0]); }, {a}, 17);
  expect_fd_agrees([](const auto& in) { return reshape(in[0], {3, 2}); }, {a}, 18);
}

TEST(Structural, ShapeMismatchIsConfigError) {
  EXPECT_THROW(add(Tensor<double>::zeros({2}), Tensor<double>::zeros({3})), ConfigError);
  EXPECT_THROW(concat_last(Tensor<double>::zeros({2, 1}), Tensor<double>::zeros({3, 1})), ConfigError);
  EXPECT_THROW(reshape(Tensor<double>::zeros({2, 3}), {4}), ConfigError);
  EXPECT_THROW(split_heads(Tensor<double>::zeros({1, 2, 6}), 4), ConfigError);
}

// ---- embedding

TEST(Embedding, LooksUpRowsAndAccumulatesGradients) {
  Tensor<double> table({3, 2}, {0, 1, 2, 3, 4, 5}, true);
  Tokens ids(1, 3);
  ids.ids = {2, 0, 2};
  const auto y = embedding(table, ids);
  EXPECT_EQ(to_vector(y), (std::vector<double>{4, 5, 0, 1, 4, 5}));
  sum(y).backward();
  EXPECT_EQ(std::vector<double>(table.grad().begin(), table.grad().end()), (std::vector<double>{1, 1, 0, 0, 2, 2}));
}

TEST(Embedding, OutOfRangeIdIsInputError) {
  Tokens ids(1, 1);
  ids.ids = {3};
  EXPECT_THROW(embedding(Tensor<double>::zeros({3, 2}), ids), InputError);
}

}  // namespace
}  // namespace dwt
