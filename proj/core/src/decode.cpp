#include "dwt/decode.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "dwt/errors.hpp"

namespace dwt {

double hypothesis_score(double log_prob, std::size_t length, bool length_norm) {
  if (!length_norm || length == 0) return log_prob;
  return log_prob / static_cast<double>(length);
}

Hypothesis greedy_search(const StepScorer& scorer, std::size_t max_len, int eos_id, bool length_norm) {
  Hypothesis h;
  for (std::size_t t = 0; t < max_len; ++t) {
    const auto lp = scorer({h.tokens}).front();
    const auto best = std::max_element(lp.begin(), lp.end());  // first maximum: lowest id
    const int token = static_cast<int>(best - lp.begin());
    h.tokens.push_back(token);
    h.log_prob += *best;
    if (token == eos_id) break;
  }
  h.score = hypothesis_score(h.log_prob, h.tokens.size(), length_norm);
  return h;
}

Hypothesis beam_search(const StepScorer& scorer, std::size_t beam, std::size_t max_len, int eos_id,
                       bool length_norm) {
  if (beam == 0) throw ConfigError("beam must be at least 1");
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> retired;
  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<std::vector<int>> prefixes;
    prefixes.reserve(live.size());
    for (const auto& h : live) prefixes.push_back(h.tokens);
    const auto lps = scorer(prefixes);

    // (cumulative log-prob, token, beam index)
    std::vector<std::tuple<double, int, std::size_t>> candidates;
    for (std::size_t b = 0; b < live.size(); ++b) {
      for (std::size_t v = 0; v < lps[b].size(); ++v) {
        candidates.emplace_back(live[b].log_prob + lps[b][v], static_cast<int>(v), b);
      }
    }
    const std::size_t keep = std::min(beam, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(keep), candidates.end(),
                      [](const auto& a, const auto& b) {
                        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
                        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
                        return std::get<2>(a) < std::get<2>(b);
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& [lp, token, b] = candidates[i];
      Hypothesis h{live[b].tokens, lp, 0.0};
      h.tokens.push_back(token);
      h.score = hypothesis_score(h.log_prob, h.tokens.size(), length_norm);
      (token == eos_id ? retired : next).push_back(std::move(h));
    }
    live = std::move(next);
  }
  for (auto& h : live) retired.push_back(std::move(h));
  if (retired.empty()) return Hypothesis{};
  const auto best = std::max_element(retired.begin(), retired.end(),
                                     [](const Hypothesis& a, const Hypothesis& b) { return a.score < b.score; });
  return *best;
}

namespace {

template <typename T>
EncoderOutput<T> repeat_encoding(const EncoderOutput<T>& enc, std::size_t times) {
  const std::size_t per_row = enc.states.size();
  std::vector<T> states(per_row * times);
  for (std::size_t r = 0; r < times; ++r)
    std::copy(enc.states.values().begin(), enc.states.values().end(), states.begin() + static_cast<long>(r * per_row));
  Shape shape = enc.states.shape();
  shape[0] = times;
  EncoderOutput<T> out;
  out.states = Tensor<T>(shape, std::move(states));
  out.pad_mask = enc.pad_mask;  // single row broadcasts over the batch
  return out;
}

}  // namespace

template <typename T>
StepScorer model_scorer(const Model<T>& model, const Tokens& src_row, DecodePath path) {
  if (src_row.rows != 1) throw InputError("model_scorer expects a single source row");
  std::shared_ptr<EncoderOutput<T>> cached;
  if (path == DecodePath::incremental) {
    NoGradGuard guard;
    cached = std::make_shared<EncoderOutput<T>>(encode(model, src_row, DropoutContext::inference()));
  }
  return [&model, src_row, cached](const std::vector<std::vector<int>>& prefixes) {
    NoGradGuard guard;
    const DropoutContext ctx = DropoutContext::inference();
    const EncoderOutput<T> single = cached ? *cached : encode(model, src_row, ctx);
    const EncoderOutput<T> enc = repeat_encoding(single, prefixes.size());
    const std::size_t len = prefixes.front().size() + 1;
    Tokens tgt_in(prefixes.size(), len);
    for (std::size_t r = 0; r < prefixes.size(); ++r) {
      tgt_in.at(r, 0) = kBosId;
      for (std::size_t t = 0; t + 1 < len; ++t) tgt_in.at(r, t + 1) = prefixes[r][t];
    }
    const Tensor<T> logits = decode(model, enc, tgt_in, ctx);
    const std::size_t vocab = logits.extent(-1);
    const auto lv = logits.values();
    std::vector<std::vector<double>> out(prefixes.size(), std::vector<double>(vocab));
    for (std::size_t r = 0; r < prefixes.size(); ++r) {
      const T* row = lv.data() + (r * len + len - 1) * vocab;
      double mx = row[0];
      for (std::size_t v = 1; v < vocab; ++v) mx = std::max(mx, static_cast<double>(row[v]));
      double total = 0.0;
      for (std::size_t v = 0; v < vocab; ++v) total += std::exp(static_cast<double>(row[v]) - mx);
      const double log_z = mx + std::log(total);
      for (std::size_t v = 0; v < vocab; ++v) out[r][v] = static_cast<double>(row[v]) - log_z;
    }
    return out;
  };
}

template <typename T>
std::vector<std::vector<int>> greedy_decode(const Model<T>& model, const Tokens& src, std::size_t max_len,
                                            DecodePath path) {
  std::vector<std::vector<int>> out;
  for (std::size_t r = 0; r < src.rows; ++r) {
    const Tokens row = slice_rows(src, r, r + 1);
    out.push_back(greedy_search(model_scorer(model, row, path), max_len, kEosId).tokens);
  }
  return out;
}

template <typename T>
std::vector<Hypothesis> beam_decode(const Model<T>& model, const Tokens& src, std::size_t beam,
                                    std::size_t max_len, bool length_norm) {
  std::vector<Hypothesis> out;
  for (std::size_t r = 0; r < src.rows; ++r) {
    const Tokens row = slice_rows(src, r, r + 1);
    out.push_back(beam_search(model_scorer(model, row, DecodePath::incremental), beam, max_len, kEosId, length_norm));
  }
  return out;
}

#define DWT_INSTANTIATE_DECODE(T)                                                              \
  template StepScorer model_scorer(const Model<T>&, const Tokens&, DecodePath);                \
  template std::vector<std::vector<int>> greedy_decode(const Model<T>&, const Tokens&,         \
                                                       std::size_t, DecodePath);               \
  template std::vector<Hypothesis> beam_decode(const Model<T>&, const Tokens&, std::size_t,    \
                                               std::size_t, bool);

DWT_INSTANTIATE_DECODE(float)
DWT_INSTANTIATE_DECODE(double)

#undef DWT_INSTANTIATE_DECODE

}  // namespace dwt
