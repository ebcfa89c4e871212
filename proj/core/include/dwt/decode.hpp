#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "dwt/model.hpp"

namespace dwt {

struct Hypothesis {
  std::vector<int> tokens;  // generated tokens, including the end symbol when emitted
  double log_prob = 0.0;
  double score = 0.0;
};

/// Log-probabilities over the vocabulary for the next token of every prefix.
/// Prefixes passed in one call always have equal length.
using StepScorer = std::function<std::vector<std::vector<double>>(const std::vector<std::vector<int>>&)>;

/// log_prob / length when length-normalised, log_prob otherwise.
double hypothesis_score(double log_prob, std::size_t length, bool length_norm);

/// Argmax continuation; ties go to the lower token id. Stops after `eos_id`
/// or `max_len` tokens.
Hypothesis greedy_search(const StepScorer& scorer, std::size_t max_len, int eos_id, bool length_norm = true);

/// Beam search. Each step expands every live hypothesis by every token and
/// keeps the `beam` best by cumulative log-probability, breaking ties by lower
/// token id and then lower beam index. Hypotheses ending in `eos_id` retire;
/// the returned hypothesis maximises hypothesis_score over retired and
/// length-capped ones (earliest retired wins ties).
Hypothesis beam_search(const StepScorer& scorer, std::size_t beam, std::size_t max_len, int eos_id,
                       bool length_norm = true);

/// incremental: encoder states computed once per sentence and reused.
/// full: encoder and decoder recomputed from scratch at every step.
enum class DecodePath { incremental, full };

/// Scorer for a single source sentence (a one-row token matrix).
template <typename T>
StepScorer model_scorer(const Model<T>& model, const Tokens& src_row, DecodePath path);

template <typename T>
std::vector<std::vector<int>> greedy_decode(const Model<T>& model, const Tokens& src, std::size_t max_len,
                                            DecodePath path = DecodePath::incremental);

template <typename T>
std::vector<Hypothesis> beam_decode(const Model<T>& model, const Tokens& src, std::size_t beam,
                                    std::size_t max_len, bool length_norm = true);

}  // namespace dwt
