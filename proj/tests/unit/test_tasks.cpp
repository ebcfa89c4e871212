#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "dwt/errors.hpp"
#include "dwt/tasks.hpp"
#include "test_support.hpp"

namespace dwt {
namespace {

using testing::Gen;

/// Insertion sort, kept independent of the library's own ordering.
std::vector<int> sorted_oracle(std::vector<int> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    for (std::size_t j = i; j > 0 && v[j - 1] > v[j]; --j) std::swap(v[j - 1], v[j]);
  return v;
}

std::vector<int> payload_of(const Tokens& t, std::size_t r) {
  auto row = unpad_row(t, r);
  EXPECT_FALSE(row.empty());
  EXPECT_EQ(row.back(), kEosId);
  row.pop_back();
  return row;
}

TEST(TaskTarget, HandExamples) {
  EXPECT_EQ(task_target(TaskKind::copy, {5, 7, 3}), (std::vector<int>{5, 7, 3}));
  EXPECT_EQ(task_target(TaskKind::reverse, {5, 7, 3}), (std::vector<int>{3, 7, 5}));
  EXPECT_EQ(task_target(TaskKind::sort, {5, 7, 3}), (std::vector<int>{3, 5, 7}));
}

TEST(TaskTarget, SortMatchesComparisonOracle) {
  Gen gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = gen.payload(gen.size(1, 20), 16);
    EXPECT_EQ(task_target(TaskKind::sort, p), sorted_oracle(p));
  }
}

TEST(MakeBatch, LayoutOfSourceAndTargets) {
  const Batch b = make_batch(TaskKind::reverse, {{5, 7, 3}, {4}});
  EXPECT_EQ(b.src, pack_rows({{5, 7, 3, kEosId}, {4, kEosId}}));
  EXPECT_EQ(b.tgt_in, pack_rows({{kBosId, 3, 7, 5}, {kBosId, 4}}));
  EXPECT_EQ(b.tgt_out, pack_rows({{3, 7, 5, kEosId}, {4, kEosId}}));
}

TEST(GenBatch, PropertyValidityAndBounds) {
  Gen gen(3);
  for (int trial = 0; trial < 40; ++trial) {
    TaskConfig c;
    c.kind = static_cast<TaskKind>(gen.size(0, 2));
    c.vocab_size = gen.size(1, 20);
    c.min_len = gen.size(1, 6);
    c.max_len = c.min_len + gen.size(0, 10);
    c.batch_size = gen.size(1, 16);
    c.seed = gen.size(0, 1000);
    TaskStream stream(c);
    const Batch b = stream.next();
    ASSERT_EQ(b.src.rows, c.batch_size);
    std::size_t longest = 0;
    for (std::size_t r = 0; r < b.src.rows; ++r) {
      const auto src = payload_of(b.src, r);
      EXPECT_GE(src.size(), c.min_len);
      EXPECT_LE(src.size(), c.max_len);
      longest = std::max(longest, src.size() + 1);
      for (int id : src) {
        EXPECT_GE(id, kFirstPayloadId);
        EXPECT_LT(id, static_cast<int>(c.model_vocab_size()));
      }
      EXPECT_EQ(payload_of(b.tgt_out, r), task_target(c.kind, src));
      auto tin = unpad_row(b.tgt_in, r);
      EXPECT_EQ(tin.front(), kBosId);
      EXPECT_EQ(std::vector<int>(tin.begin() + 1, tin.end()), task_target(c.kind, src));
    }
    EXPECT_EQ(b.src.cols, longest);
  }
}

TEST(GenBatch, SameSeedSameStream) {
  TaskConfig c;
  c.kind = TaskKind::sort;
  c.seed = 9;
  TaskStream a(c), b(c);
  for (int i = 0; i < 5; ++i) {
    const Batch x = a.next();
    const Batch y = b.next();
    EXPECT_EQ(x.src, y.src);
    EXPECT_EQ(x.tgt_out, y.tgt_out);
  }
  c.seed = 10;
  EXPECT_NE(TaskStream(c).next().src, TaskStream(a.config()).next().src);
}

TEST(GenBatch, UniformPayloadSampling) {
  TaskConfig c;
  c.vocab_size = 4;
  c.batch_size = 64;
  TaskStream s(c);
  std::vector<double> counts(4, 0.0);
  double total = 0.0;
  for (int i = 0; i < 40; ++i) {
    const Batch b = s.next();
    for (int id : b.src.ids)
      if (id >= kFirstPayloadId) {
        counts[static_cast<std::size_t>(id - kFirstPayloadId)] += 1.0;
        total += 1.0;
      }
  }
  for (double n : counts) EXPECT_NEAR(n / total, 0.25, 0.02);
}

TEST(TaskConfig, ValidationAndParsing) {
  TaskConfig c;
  c.min_len = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.min_len = 5;
  c.max_len = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_task_kind("sort"), TaskKind::sort);
  EXPECT_EQ(parse_task_kind(to_string(TaskKind::reverse)), TaskKind::reverse);
  EXPECT_THROW(parse_task_kind("shuffle"), ConfigError);
  EXPECT_EQ(TaskConfig{}.model_vocab_size(), 19u);
}

TEST(SliceBatch, RepadsRows) {
  const Batch b = make_batch(TaskKind::copy, {{3, 4, 5, 6}, {7}, {8, 9}});
  const Batch s = slice_batch(b, 1, 3);
  EXPECT_EQ(s.src, pack_rows({{7, kEosId}, {8, 9, kEosId}}));
  EXPECT_EQ(s.tgt_in, pack_rows({{kBosId, 7}, {kBosId, 8, 9}}));
}

TEST(TokenAccuracy, HandCases) {
  const Tokens gold = pack_rows({{3, 4, 5, 0}});
  EXPECT_DOUBLE_EQ(token_accuracy(gold, gold), 1.0);
  EXPECT_DOUBLE_EQ(token_accuracy(pack_rows({{6, 6, 6, 6}}), gold), 0.0);
  // Half of four tokens match, one gold position is pad: 2 of 3 counted.
  EXPECT_DOUBLE_EQ(token_accuracy(pack_rows({{3, 4, 9, 9}}), gold), 2.0 / 3.0);
  EXPECT_THROW(token_accuracy(Tokens(1, 2), Tokens(1, 2)), InputError);
  EXPECT_THROW(token_accuracy(Tokens(1, 2), Tokens(1, 3)), InputError);
}

TEST(SeqAccuracy, HandCases) {
  const Tokens gold = pack_rows({{3, 4}, {5, 6}});
  EXPECT_DOUBLE_EQ(seq_accuracy(gold, gold), 1.0);
  EXPECT_DOUBLE_EQ(seq_accuracy(pack_rows({{3, 4}, {5, 7}}), gold), 0.5);
  const Tokens gold3 = pack_rows({{3, 4, 5}, {6}, {7, 8}});
  const Tokens pred3 = pack_rows({{3, 4, 6}, {6, 9, 9}, {8, 8}});
  EXPECT_DOUBLE_EQ(seq_accuracy(pred3, gold3), 1.0 / 3.0);
}

TEST(ExportBatch, LineFormat) {
  const Batch b = make_batch(TaskKind::reverse, {{5, 7}, {4}});
  std::ostringstream out;
  export_batch(b, out);
  EXPECT_EQ(out.str(), "5 7 2\t1 7 5 2\n4 2\t1 4 2\n");
}

}  // namespace
}  // namespace dwt
