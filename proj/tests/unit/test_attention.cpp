#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "dwt/attention.hpp"
#include "dwt/errors.hpp"
#include "dwt/grad_check.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace dwt {
namespace {

using testing::Gen;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr const AttentionMask<double>* kNoMask = nullptr;

AttentionParams<double> random_params(std::size_t d, std::size_t heads, std::uint64_t seed) {
  ParamStore<double> store;
  Rng rng(seed);
  ParamFactory<double> f(store, rng);
  auto p = make_attention_params(f, "attn", d, heads);
  // Non-zero biases so the oracle exercises every term.
  Gen gen(seed + 1);
  for (Tensor<double>* b : {&p.b_q, &p.b_k, &p.b_v, &p.b_o}) {
    for (auto& v : b->mutable_values()) v = gen.real(-0.5, 0.5);
  }
  return p;
}

Tensor<double> identity(std::size_t d) {
  auto t = Tensor<double>::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) t.mutable_values()[i * d + i] = 1.0;
  return t;
}

TEST(CausalMask, SmallLengths) {
  const auto m1 = causal_mask<double>(1);
  EXPECT_EQ(m1.values, (std::vector<double>{0.0}));
  const auto m2 = causal_mask<double>(2);
  EXPECT_EQ(m2.values, (std::vector<double>{0.0, -kInf, 0.0, 0.0}));
  const auto m3 = causal_mask<double>(3);
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t permitted = 0;
    for (std::size_t j = 0; j < 3; ++j) permitted += m3.at(0, i, j) == 0.0;
    EXPECT_EQ(permitted, i + 1);
  }
  EXPECT_THROW(causal_mask<double>(0), ConfigError);
}

TEST(PaddingMask, BlocksPaddedKeysPerRow) {
  const auto m = padding_mask<double>(pack_rows({{3, 4, 5}, {3}}));
  EXPECT_EQ(m.batch, 2u);
  EXPECT_EQ(m.q_len, 1u);
  EXPECT_EQ(m.at(0, 7, 2), 0.0);
  EXPECT_EQ(m.at(1, 0, 0), 0.0);
  EXPECT_EQ(m.at(1, 0, 1), -kInf);
  const auto both = combine_masks(m, causal_mask<double>(3));
  EXPECT_EQ(both.at(0, 0, 1), -kInf);
  EXPECT_EQ(both.at(1, 2, 1), -kInf);
  EXPECT_EQ(both.at(0, 2, 1), 0.0);
}

TEST(Attention, SingleKeyReturnsProjectedValue) {
  Gen gen(1);
  const auto p = random_params(4, 2, 2);
  const auto q = gen.tensor<double>({1, 3, 4});
  const auto kv = gen.tensor<double>({1, 1, 4});
  const auto y = multi_head_attention(q, kv, kv, kNoMask, p);
  const auto expected = oracle::affine(oracle::affine(oracle::rows_of(kv, 1, 4), p.w_v, p.b_v), p.w_o, p.b_o);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(y.values()[i * 4 + j], expected[0][j], 1e-12);
}

TEST(Attention, IdenticalKeysShareWeightEqually) {
  AttentionParams<double> p;
  p.heads = 1;
  p.w_q = p.w_k = p.w_v = p.w_o = identity(2);
  p.b_q = p.b_k = p.b_v = p.b_o = Tensor<double>::zeros({2});
  const Tensor<double> q({1, 1, 2}, {0.3, -0.7});
  const Tensor<double> k({1, 2, 2}, {1.0, 2.0, 1.0, 2.0});
  const Tensor<double> v({1, 2, 2}, {1.0, 0.0, 0.0, 1.0});
  const auto y = multi_head_attention(q, k, v, kNoMask, p);
  EXPECT_NEAR(y.values()[0], 0.5, 1e-15);
  EXPECT_NEAR(y.values()[1], 0.5, 1e-15);
}

TEST(Attention, MatchesLoopOracle) {
  Gen gen(3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = random_params(4, 2, 10 + seed);
    const auto x = gen.tensor<double>({1, 3, 4});
    const auto y = multi_head_attention(x, x, x, kNoMask, p);
    const auto rows = oracle::rows_of(x, 3, 4);
    EXPECT_LT(oracle::max_abs_diff(oracle::attention(rows, rows, p), y), 1e-6);
  }
}

TEST(Attention, MaskedBatchMatchesLoopOracle) {
  Gen gen(5);
  const auto p = random_params(6, 3, 7);
  const auto q = gen.tensor<double>({2, 3, 6});
  const auto kv = gen.tensor<double>({2, 4, 6});
  const Tokens keys = pack_rows({{3, 3, 3, 3}, {3, 3}});
  const auto mask = padding_mask<double>(keys);
  const auto y = multi_head_attention(q, kv, kv, &mask, p);
  for (std::size_t b = 0; b < 2; ++b) {
    const auto expected = oracle::attention(oracle::rows_of(q, 3, 6, b * 18), oracle::rows_of(kv, 4, 6, b * 24), p,
                                            [&](std::size_t, std::size_t j) { return keys.at(b, j) == kPadId; });
    EXPECT_LT(oracle::max_abs_diff(expected, y, b * 18), 1e-6);
  }
}

TEST(Attention, SingleHeadEqualsDirectComputation) {
  Gen gen(9);
  const auto p = random_params(4, 1, 11);
  const auto x = gen.tensor<double>({1, 2, 4});
  const auto rows = oracle::rows_of(x, 2, 4);
  EXPECT_LT(oracle::max_abs_diff(oracle::attention(rows, rows, p), multi_head_attention(x, x, x, kNoMask, p)), 1e-12);
}

TEST(Attention, PermutingMaskedKeysChangesNothing) {
  Gen gen(13);
  const auto p = random_params(4, 2, 17);
  const auto q = gen.tensor<double>({1, 2, 4});
  auto kv = gen.tensor<double>({1, 5, 4});
  const Tokens keys = pack_rows({{3, 3, 0, 0, 0}});
  const auto mask = padding_mask<double>(keys);
  const auto before = multi_head_attention(q, kv, kv, &mask, p);
  // Rotate the three masked rows and scramble their contents.
  std::vector<double> values = testing::to_vector(kv);
  std::rotate(values.begin() + 8, values.begin() + 12, values.end());
  for (std::size_t i = 8; i < values.size(); ++i) values[i] += gen.real(-3.0, 3.0);
  const Tensor<double> permuted({1, 5, 4}, values);
  const auto after = multi_head_attention(q, permuted, permuted, &mask, p);
  EXPECT_LT(testing::max_abs_diff(before, after), 1e-6);
}

TEST(Attention, CausalOutputIgnoresLaterPositions) {
  Gen gen(19);
  const auto p = random_params(4, 2, 23);
  const auto mask = causal_mask<double>(4);
  const auto x = gen.tensor<double>({1, 4, 4});
  const auto before = multi_head_attention(x, x, x, &mask, p);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> values = testing::to_vector(x);
    for (std::size_t j = (i + 1) * 4; j < values.size(); ++j) values[j] += gen.real(-2.0, 2.0);
    const Tensor<double> changed({1, 4, 4}, values);
    const auto after = multi_head_attention(changed, changed, changed, &mask, p);
    for (std::size_t j = 0; j <= i * 4 + 3; ++j) EXPECT_NEAR(before.values()[j], after.values()[j], 1e-6);
  }
}

TEST(Attention, IndivisibleHeadsIsConfigError) {
  AttentionParams<double> p = random_params(4, 2, 1);
  p.heads = 3;
  const auto x = Tensor<double>::zeros({1, 1, 4});
  EXPECT_THROW(multi_head_attention(x, x, x, kNoMask, p), ConfigError);
  ParamStore<double> store;
  Rng rng(1);
  ParamFactory<double> f(store, rng);
  EXPECT_THROW(make_attention_params(f, "a", 5, 2), ConfigError);
}

TEST(Attention, ParameterCount) {
  ParamStore<double> store;
  Rng rng(1);
  ParamFactory<double> f(store, rng);
  make_attention_params(f, "a", 8, 2);
  EXPECT_EQ(store.element_count(), attention_param_count(8));
  EXPECT_EQ(attention_param_count(8), 4u * (8 * 8 + 8));
}

TEST(Attention, GradientMatchesFiniteDifferences) {
  Gen gen(29);
  auto p = random_params(4, 2, 31);
  auto x = gen.tensor<double>({2, 3, 4}, -1.0, 1.0, true);
  auto kv = gen.tensor<double>({2, 2, 4}, -1.0, 1.0, true);
  const auto r = gen.tensor<double>({2, 3, 4});
  const Tokens keys = pack_rows({{3, 3}, {3}});
  const auto mask = padding_mask<double>(keys);
  std::vector<NamedTensor<double>> named{{"x", x}, {"kv", kv}};
  for (auto* t : {&p.w_q, &p.b_q, &p.w_k, &p.b_k, &p.w_v, &p.b_v, &p.w_o, &p.b_o}) {
    t->set_requires_grad(true);
    named.push_back({"param" + std::to_string(named.size()), *t});
  }
  GradCheckOptions options;
  options.step = 1e-4;
  options.stencil = Stencil::central4;
  const auto report = grad_check([&] { return sum(mul(multi_head_attention(x, kv, kv, &mask, p), r)); }, named, options);
  EXPECT_LT(report.max_relative_error(), 1e-6);
}

TEST(Attention, AttentionDropoutOnlyWhenTraining) {
  Gen gen(37);
  const auto p = random_params(4, 2, 41);
  const auto x = gen.tensor<double>({1, 3, 4});
  Rng rng(5);
  const DropoutContext off{0.5, false, &rng};
  EXPECT_EQ(testing::to_vector(multi_head_attention(x, x, x, kNoMask, p, off)),
            testing::to_vector(multi_head_attention(x, x, x, kNoMask, p)));
  const DropoutContext on{0.5, true, &rng};
  EXPECT_GT(testing::max_abs_diff(multi_head_attention(x, x, x, kNoMask, p, on), multi_head_attention(x, x, x, kNoMask, p)),
            1e-6);
}

}  // namespace
}  // namespace dwt
