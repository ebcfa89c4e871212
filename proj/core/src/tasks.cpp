#include "dwt/tasks.hpp"

#include <algorithm>
#include <ostream>
#include <string>

#include "dwt/errors.hpp"

namespace dwt {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::copy:
      return "copy";
    case TaskKind::reverse:
      return "reverse";
    case TaskKind::sort:
      break;
  }
  return "sort";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "copy") return TaskKind::copy;
  if (s == "reverse") return TaskKind::reverse;
  if (s == "sort") return TaskKind::sort;
  throw ConfigError("task must be copy, reverse or sort, got '" + std::string(s) + "'");
}

void TaskConfig::validate() const {
  if (vocab_size == 0) throw ConfigError("task_vocab must be positive");
  if (min_len == 0) throw ConfigError("min_len must be at least 1");
  if (max_len < min_len) throw ConfigError("max_len must be at least min_len");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

std::vector<int> task_target(TaskKind kind, std::vector<int> payload) {
  if (kind == TaskKind::reverse) std::reverse(payload.begin(), payload.end());
  if (kind == TaskKind::sort) std::sort(payload.begin(), payload.end());
  return payload;
}

Batch make_batch(TaskKind kind, const std::vector<std::vector<int>>& payloads) {
  std::vector<std::vector<int>> src, tgt_in, tgt_out;
  for (const auto& p : payloads) {
    std::vector<int> s = p;
    s.push_back(kEosId);
    const std::vector<int> target = task_target(kind, p);
    std::vector<int> in{kBosId};
    in.insert(in.end(), target.begin(), target.end());
    std::vector<int> out = target;
    out.push_back(kEosId);
    src.push_back(std::move(s));
    tgt_in.push_back(std::move(in));
    tgt_out.push_back(std::move(out));
  }
  return {pack_rows(src), pack_rows(tgt_in), pack_rows(tgt_out)};
}

Batch gen_batch(const TaskConfig& config, Rng& rng) {
  config.validate();
  std::vector<std::vector<int>> payloads(config.batch_size);
  const std::size_t span = config.max_len - config.min_len + 1;
  for (auto& p : payloads) {
    const std::size_t len = config.min_len + rng.below(span);
    p.resize(len);
    for (auto& id : p) id = kFirstPayloadId + static_cast<int>(rng.below(config.vocab_size));
  }
  return make_batch(config.kind, payloads);
}

Batch slice_batch(const Batch& batch, std::size_t begin, std::size_t end) {
  return {slice_rows(batch.src, begin, end), slice_rows(batch.tgt_in, begin, end),
          slice_rows(batch.tgt_out, begin, end)};
}

namespace {

void require_aligned(const Tokens& pred, const Tokens& gold) {
  if (pred.rows != gold.rows || pred.cols != gold.cols) {
    throw InputError("prediction and gold token matrices are not aligned");
  }
}

}  // namespace

double token_accuracy(const Tokens& pred, const Tokens& gold, int pad_id) {
  require_aligned(pred, gold);
  std::size_t total = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.ids.size(); ++i) {
    if (gold.ids[i] == pad_id) continue;
    ++total;
    hits += pred.ids[i] == gold.ids[i] ? 1 : 0;
  }
  if (total == 0) throw InputError("token_accuracy: no non-pad gold positions");
  return static_cast<double>(hits) / static_cast<double>(total);
}

double seq_accuracy(const Tokens& pred, const Tokens& gold, int pad_id) {
  require_aligned(pred, gold);
  if (gold.rows == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < gold.rows; ++r) {
    bool ok = true;
    for (std::size_t c = 0; c < gold.cols && ok; ++c) {
      if (gold.at(r, c) != pad_id && pred.at(r, c) != gold.at(r, c)) ok = false;
    }
    correct += ok ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(gold.rows);
}

void export_batch(const Batch& batch, std::ostream& out) {
  auto write = [&out](const std::vector<int>& ids) {
    for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
  };
  for (std::size_t r = 0; r < batch.src.rows; ++r) {
    write(unpad_row(batch.src, r));
    out << '\t';
    std::vector<int> tgt = unpad_row(batch.tgt_in, r);
    tgt.push_back(kEosId);
    write(tgt);
    out << '\n';
  }
}

}  // namespace dwt
