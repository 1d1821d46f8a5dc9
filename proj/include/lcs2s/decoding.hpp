#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "lcs2s/errors.hpp"
#include "lcs2s/example.hpp"
#include "lcs2s/model.hpp"
#include "lcs2s/tensor.hpp"

namespace lcs2s {

template <typename Scalar>
struct Hypothesis {
  std::vector<int> tokens;  // ends with kStopId once finished
  double logprob = 0.0;     // sum of per-step log-probabilities
  std::vector<std::vector<double>> attention;  // one row per emitted token
  bool finished = false;
  Matrix<Scalar> h;  // 1 x H decoder state after the last token
  Matrix<Scalar> c;
};

namespace detail {

/// Encoded source kept as plain matrices so each decode step can run on a
/// fresh evaluation-only tape.
template <typename Scalar>
struct EncodedSource {
  Matrix<Scalar> memory;  // 1 x (L * 2H)
  int length = 0;
  Matrix<Scalar> h;
  Matrix<Scalar> c;
};

template <typename Scalar>
EncodedSource<Scalar> encode_source(const ModelParams<Scalar>& params, const std::vector<int>& src) {
  Tape<Scalar> tape(false);
  const std::vector<int>* one = &src;
  const EncoderOutput<Scalar> enc = encode(tape, params, std::span<const std::vector<int>>(one, 1));
  return {enc.memory.packed.value(), static_cast<int>(src.size()), enc.init.h.value(), enc.init.c.value()};
}

/// Log-probabilities over the target vocabulary for each hypothesis (rows),
/// with the new decoder states written back into `next`.
template <typename Scalar>
Matrix<Scalar> expand(const ModelParams<Scalar>& params, const EncodedSource<Scalar>& source,
                      const std::vector<Hypothesis<Scalar>>& hyps, int charge,
                      std::vector<Hypothesis<Scalar>>& next) {
  const auto k = static_cast<Index>(hyps.size());
  const Index hidden = params.config().hidden_dim;
  Matrix<Scalar> h(k, hidden);
  Matrix<Scalar> c(k, hidden);
  std::vector<int> prev;
  for (Index i = 0; i < k; ++i) {
    const auto& hyp = hyps[static_cast<std::size_t>(i)];
    h.row(i) = hyp.h;
    c.row(i) = hyp.c;
    prev.push_back(hyp.tokens.empty() ? kSosId : hyp.tokens.back());
  }
  Tape<Scalar> tape(false);
  AttentionMemory<Scalar> memory{tape.constant(source.memory.replicate(k, 1)),
                                 std::vector<int>(static_cast<std::size_t>(k), source.length)};
  const std::vector<int> charges(static_cast<std::size_t>(k), charge);
  const StepOutput<Scalar> step = decoder_step(tape, params, prev, {tape.constant(h), tape.constant(c)},
                                               charges, memory);
  next = hyps;
  for (Index i = 0; i < k; ++i) {
    auto& hyp = next[static_cast<std::size_t>(i)];
    hyp.h = step.state.h.value().row(i);
    hyp.c = step.state.c.value().row(i);
    std::vector<double> weights;
    if (step.attention.valid()) {
      const auto row = step.attention.value().row(i);
      weights.assign(row.data(), row.data() + row.size());
    }
    hyp.attention.push_back(std::move(weights));
  }
  return log_softmax(step.logits).value();
}

inline void check_decode_args(int beam_size, int max_len, int charge, int num_charges) {
  if (beam_size < 1) throw ContractError("beam size must be >= 1");
  if (max_len < 1) throw ContractError("max_len must be >= 1");
  if (charge < 0 || charge >= num_charges) {
    throw VocabError("charge id " + std::to_string(charge) + " outside [0, " + std::to_string(num_charges) + ")");
  }
}

}  // namespace detail

/// Beam search ranked by summed log-probability, no length normalisation.
///
/// Each step keeps the best (beam_size - finished) extensions of the live
/// hypotheses; extensions ending in the stop token are set aside as finished.
/// The step at max_len may only emit the stop token, so every hypothesis has
/// at most max_len tokens including the stop. Ties go to the earlier
/// hypothesis, then the lower token id.
template <typename Scalar>
Hypothesis<Scalar> beam_search(const ModelParams<Scalar>& params, const std::vector<int>& src, int charge,
                               int beam_size, int max_len = static_cast<int>(kMaxTargetLength)) {
  detail::check_decode_args(beam_size, max_len, charge, params.config().num_charges);
  const detail::EncodedSource<Scalar> source = detail::encode_source(params, src);

  struct Candidate {
    double score;
    int parent;
    int token;
  };

  std::vector<Hypothesis<Scalar>> live(1);
  live[0].h = source.h;
  live[0].c = source.c;
  std::vector<Hypothesis<Scalar>> finished;
  std::vector<Hypothesis<Scalar>> expanded;
  std::vector<Candidate> candidates;

  for (int step = 1; step <= max_len && !live.empty(); ++step) {
    const Matrix<Scalar> logp = detail::expand(params, source, live, charge, expanded);
    candidates.clear();
    for (int i = 0; i < static_cast<int>(live.size()); ++i) {
      const double base = live[static_cast<std::size_t>(i)].logprob;
      if (step == max_len) {
        candidates.push_back({base + static_cast<double>(logp(i, kStopId)), i, kStopId});
        continue;
      }
      for (int w = 0; w < logp.cols(); ++w) {
        candidates.push_back({base + static_cast<double>(logp(i, w)), i, w});
      }
    }
    const auto slots = std::min(candidates.size(), static_cast<std::size_t>(beam_size) - finished.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(slots),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });

    std::vector<Hypothesis<Scalar>> next_live;
    for (std::size_t n = 0; n < slots; ++n) {
      const Candidate& cand = candidates[n];
      Hypothesis<Scalar> hyp = expanded[static_cast<std::size_t>(cand.parent)];
      hyp.tokens.push_back(cand.token);
      hyp.logprob = cand.score;
      if (cand.token == kStopId) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
      } else {
        next_live.push_back(std::move(hyp));
      }
    }
    live = std::move(next_live);
    if (finished.size() >= static_cast<std::size_t>(beam_size)) break;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i) {
    if (finished[i].logprob > finished[best].logprob) best = i;
  }
  return finished[best];
}

/// Argmax decoding, ties to the lowest token id; the step at max_len is
/// forced to the stop token.
template <typename Scalar>
Hypothesis<Scalar> greedy_decode(const ModelParams<Scalar>& params, const std::vector<int>& src, int charge,
                                 int max_len = static_cast<int>(kMaxTargetLength)) {
  detail::check_decode_args(1, max_len, charge, params.config().num_charges);
  const detail::EncodedSource<Scalar> source = detail::encode_source(params, src);
  std::vector<Hypothesis<Scalar>> current(1);
  current[0].h = source.h;
  current[0].c = source.c;
  std::vector<Hypothesis<Scalar>> next;
  for (int step = 1; step <= max_len; ++step) {
    const Matrix<Scalar> logp = detail::expand(params, source, current, charge, next);
    int token = kStopId;
    if (step < max_len) {
      Index arg = 0;
      for (Index w = 1; w < logp.cols(); ++w) {
        if (logp(0, w) > logp(0, arg)) arg = w;
      }
      token = static_cast<int>(arg);
    }
    Hypothesis<Scalar>& hyp = next[0];
    hyp.tokens.push_back(token);
    hyp.logprob += static_cast<double>(logp(0, token));
    if (token == kStopId) {
      hyp.finished = true;
      return hyp;
    }
    current.swap(next);
  }
  return current[0];
}

/// Writes a |y| x |x| attention matrix as CSV: the first row holds the source
/// tokens, each following row starts with the emitted target token.
void write_attention_csv(const std::string& path, const std::vector<std::vector<double>>& attention,
                         const std::vector<std::string>& source_tokens,
                         const std::vector<std::string>& target_tokens);

template <typename Scalar>
void export_attention(const std::string& path, const Hypothesis<Scalar>& hyp,
                      const std::vector<std::string>& source_tokens,
                      const std::vector<std::string>& target_tokens) {
  write_attention_csv(path, hyp.attention, source_tokens, target_tokens);
}

}  // namespace lcs2s
