#pragma once

// Label-conditioned encoder-decoder with global attention.
//
// Encoder: one-layer bidirectional LSTM over source embeddings; position j is
// represented by [forward_j; backward_j]. The decoder LSTM starts from a tanh
// projection of [forward_last; backward_first] (separately for h and c).
//
// Each decoder step, for charge label v with embedding e_v:
//   h' = tanh([h_prev; e_v] W_merge + b_merge)        if the hidden merge is on
//   s  = LSTM(embed(y_prev), h', c_prev)
//   a  = softmax_j(s W_attn . m_j),  ctx = sum_j a_j m_j
//   p  = softmax(tanh([s; ctx; e_v] W_hidden) W_out)  (e_v only if injected)
//
// All weights act on row vectors (x W), so a batch is a stack of rows.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "lcs2s/errors.hpp"
#include "lcs2s/example.hpp"
#include "lcs2s/tensor.hpp"

namespace lcs2s {

/// Which charge-label injection points are active.
enum class LabelMode {
  full,        // hidden merge and output injection
  no_softmax,  // hidden merge only
  no_hidden,   // output injection only
  no_charge,   // neither
};

std::string to_string(LabelMode mode);
LabelMode parse_label_mode(std::string_view text);

struct ModelConfig {
  int src_vocab_size = 0;
  int tgt_vocab_size = 0;
  int num_charges = 0;  // includes the "others" bucket
  int embed_dim = 64;
  int label_embed_dim = 64;
  int hidden_dim = 128;
  LabelMode label_mode = LabelMode::full;
  bool attention_enabled = true;

  bool merges_hidden() const {
    return label_mode == LabelMode::full || label_mode == LabelMode::no_softmax;
  }
  bool injects_output() const {
    return label_mode == LabelMode::full || label_mode == LabelMode::no_hidden;
  }
  /// Width of [s; ctx; e_v] fed to the output layer.
  int output_input_width() const {
    return hidden_dim + (attention_enabled ? 2 * hidden_dim : 0) +
           (injects_output() ? label_embed_dim : 0);
  }

  /// Throws ContractError naming the first bad field.
  void validate() const;

  std::vector<std::pair<std::string, std::string>> to_fields() const;
  static ModelConfig from_fields(const std::map<std::string, std::string>& fields);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct LstmWeights {
  Parameter<Scalar> input;      // in x 4H, gate blocks ordered i, f, g, o
  Parameter<Scalar> recurrent;  // H x 4H
  Parameter<Scalar> bias;       // 1 x 4H
};

template <typename Scalar>
class ModelParams {
 public:
  using scalar_type = Scalar;

  ModelParams() = default;
  explicit ModelParams(const ModelConfig& config) : config_(config) {
    config.validate();
    const int e = config.embed_dim;
    const int l = config.label_embed_dim;
    const int h = config.hidden_dim;
    src_embedding = Parameter<Scalar>("src_embedding", config.src_vocab_size, e);
    tgt_embedding = Parameter<Scalar>("tgt_embedding", config.tgt_vocab_size, e);
    charge_embedding = Parameter<Scalar>("charge_embedding", config.num_charges, l);
    encoder_forward = make_lstm("encoder_forward", e, h);
    encoder_backward = make_lstm("encoder_backward", e, h);
    decoder = make_lstm("decoder", e, h);
    attention = Parameter<Scalar>("attention", h, 2 * h);
    output_hidden = Parameter<Scalar>("output_hidden", config.output_input_width(), h);
    output_projection = Parameter<Scalar>("output_projection", h, config.tgt_vocab_size);
    label_merge = Parameter<Scalar>("label_merge", h + l, h);
    label_merge_bias = Parameter<Scalar>("label_merge_bias", 1, h);
    init_projection = Parameter<Scalar>("init_projection", 2 * h, h);
    init_bias = Parameter<Scalar>("init_bias", 1, h);
  }

  const ModelConfig& config() const { return config_; }

  Parameter<Scalar> src_embedding;
  Parameter<Scalar> tgt_embedding;
  Parameter<Scalar> charge_embedding;
  LstmWeights<Scalar> encoder_forward;
  LstmWeights<Scalar> encoder_backward;
  LstmWeights<Scalar> decoder;
  Parameter<Scalar> attention;          // H x 2H bilinear score
  Parameter<Scalar> output_hidden;      // output_input_width x H
  Parameter<Scalar> output_projection;  // H x tgt_vocab
  Parameter<Scalar> label_merge;        // (H + label) x H
  Parameter<Scalar> label_merge_bias;   // 1 x H
  Parameter<Scalar> init_projection;    // 2H x H
  Parameter<Scalar> init_bias;          // 1 x H

  /// Every parameter, in checkpoint order.
  std::vector<Parameter<Scalar>*> parameters() {
    return {&src_embedding,
            &tgt_embedding,
            &charge_embedding,
            &encoder_forward.input,
            &encoder_forward.recurrent,
            &encoder_forward.bias,
            &encoder_backward.input,
            &encoder_backward.recurrent,
            &encoder_backward.bias,
            &decoder.input,
            &decoder.recurrent,
            &decoder.bias,
            &attention,
            &output_hidden,
            &output_projection,
            &label_merge,
            &label_merge_bias,
            &init_projection,
            &init_bias};
  }

  std::vector<const Parameter<Scalar>*> parameters() const {
    auto mutable_list = const_cast<ModelParams*>(this)->parameters();
    return {mutable_list.begin(), mutable_list.end()};
  }

  /// Uniform in [-range, range] from a seeded generator.
  void initialize_uniform(std::uint64_t seed, double range = 0.08) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-range, range);
    for (Parameter<Scalar>* p : parameters()) {
      for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = static_cast<Scalar>(dist(rng));
    }
  }

  void zero_grad() {
    for (Parameter<Scalar>* p : parameters()) p->zero_grad();
  }

  std::size_t num_weights() const {
    std::size_t n = 0;
    for (const Parameter<Scalar>* p : parameters()) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out(config_);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<Other>();
    return out;
  }

 private:
  static LstmWeights<Scalar> make_lstm(const std::string& prefix, int in, int hidden) {
    return {Parameter<Scalar>(prefix + ".input", in, 4 * hidden),
            Parameter<Scalar>(prefix + ".recurrent", hidden, 4 * hidden),
            Parameter<Scalar>(prefix + ".bias", 1, 4 * hidden)};
  }

  ModelConfig config_;
};

template <typename Scalar>
struct DecoderState {
  Var<Scalar> h;
  Var<Scalar> c;
};

/// Encoder states packed for attention: B x (L * 2H) plus each row's length.
template <typename Scalar>
struct AttentionMemory {
  Var<Scalar> packed;
  std::vector<int> lengths;
};

template <typename Scalar>
struct EncoderOutput {
  std::vector<Var<Scalar>> states;  // one B x 2H tensor per source position
  AttentionMemory<Scalar> memory;
  DecoderState<Scalar> init;
};

template <typename Scalar>
struct StepOutput {
  Var<Scalar> logits;     // B x tgt_vocab
  DecoderState<Scalar> state;
  Var<Scalar> attention;  // B x L; invalid when attention is disabled
};

namespace detail {

template <typename P>
using scalar_of = typename std::remove_const_t<P>::scalar_type;

template <typename P>
concept ModelParamsRef = std::is_same_v<std::remove_const_t<P>, ModelParams<scalar_of<P>>>;

template <typename Scalar>
Matrix<Scalar> mask_column(std::span<const int> lengths, std::size_t position) {
  Matrix<Scalar> mask(static_cast<Index>(lengths.size()), 1);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    mask(static_cast<Index>(b), 0) = static_cast<std::size_t>(lengths[b]) > position ? Scalar(1) : Scalar(0);
  }
  return mask;
}

inline void check_charges(std::span<const int> charges, int num_charges) {
  for (int v : charges) {
    if (v < 0 || v >= num_charges) {
      throw VocabError("charge id " + std::to_string(v) + " outside [0, " +
                       std::to_string(num_charges) + ")");
    }
  }
}

}  // namespace detail

/// One LSTM step on a batch of rows: x is B x in, h_prev and c_prev B x H.
template <typename Scalar, typename Weights>
DecoderState<Scalar> lstm_cell_step(Var<Scalar> x, Var<Scalar> h_prev, Var<Scalar> c_prev,
                                    Weights& weights) {
  Tape<Scalar>& tape = *x.tape();
  const Index hidden = weights.recurrent.rows();
  if (h_prev.cols() != hidden || c_prev.cols() != hidden) {
    throw ShapeError("lstm_cell_step: state " + shape_string(h_prev.rows(), h_prev.cols()) +
                     " / " + shape_string(c_prev.rows(), c_prev.cols()) + " vs hidden size " +
                     std::to_string(hidden));
  }
  Var<Scalar> gates = add_bias(matmul(x, tape.param(weights.input)) +
                                   matmul(h_prev, tape.param(weights.recurrent)),
                               tape.param(weights.bias));
  Var<Scalar> in_gate = sigmoid(tape.slice_cols(gates, 0, hidden));
  Var<Scalar> forget_gate = sigmoid(tape.slice_cols(gates, hidden, hidden));
  Var<Scalar> candidate = tanh(tape.slice_cols(gates, 2 * hidden, hidden));
  Var<Scalar> out_gate = sigmoid(tape.slice_cols(gates, 3 * hidden, hidden));
  Var<Scalar> c = forget_gate * c_prev + in_gate * candidate;
  Var<Scalar> h = out_gate * tanh(c);
  return {h, c};
}

/// Runs the bidirectional encoder over a batch of id sequences.
template <typename P>
  requires detail::ModelParamsRef<P>
EncoderOutput<detail::scalar_of<P>> encode(Tape<detail::scalar_of<P>>& tape, P& params,
                                           std::span<const std::vector<int>> sources) {
  using Scalar = detail::scalar_of<P>;
  using V = Var<Scalar>;
  if (sources.empty()) throw ContractError("encode: empty batch");
  std::vector<int> lengths;
  std::size_t max_len = 0;
  for (const auto& src : sources) {
    if (src.empty()) throw ContractError("encode: empty source sequence");
    if (src.size() > kMaxSourceLength) {
      throw ContractError("encode: source length " + std::to_string(src.size()) + " exceeds " +
                          std::to_string(kMaxSourceLength));
    }
    lengths.push_back(static_cast<int>(src.size()));
    max_len = std::max(max_len, src.size());
  }
  const auto batch = static_cast<Index>(sources.size());
  const Index hidden = params.config().hidden_dim;

  std::vector<V> embedded;
  std::vector<Matrix<Scalar>> masks;
  bool ragged = false;
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<int> ids;
    ids.reserve(sources.size());
    for (const auto& src : sources) ids.push_back(t < src.size() ? src[t] : kPadId);
    embedded.push_back(tape.gather(params.src_embedding, ids));
    masks.push_back(detail::mask_column<Scalar>(lengths, t));
    ragged = ragged || (masks.back().array() < Scalar(1)).any();
  }

  // Padded positions carry the previous state forward (and the backward pass
  // keeps its zero start state until a row's last real token).
  auto advance = [&](std::size_t t, DecoderState<Scalar> prev, auto& weights) {
    DecoderState<Scalar> next = lstm_cell_step(embedded[t], prev.h, prev.c, weights);
    if (ragged && (masks[t].array() < Scalar(1)).any()) {
      next.h = tape.blend(masks[t], next.h, prev.h);
      next.c = tape.blend(masks[t], next.c, prev.c);
    }
    return next;
  };

  const V zeros = tape.constant(Matrix<Scalar>::Zero(batch, hidden));
  std::vector<V> forward(max_len);
  std::vector<V> backward(max_len);
  DecoderState<Scalar> fwd{zeros, zeros};
  for (std::size_t t = 0; t < max_len; ++t) {
    fwd = advance(t, fwd, params.encoder_forward);
    forward[t] = fwd.h;
  }
  DecoderState<Scalar> bwd{zeros, zeros};
  for (std::size_t t = max_len; t-- > 0;) {
    bwd = advance(t, bwd, params.encoder_backward);
    backward[t] = bwd.h;
  }

  EncoderOutput<Scalar> out;
  for (std::size_t t = 0; t < max_len; ++t) out.states.push_back(concat({forward[t], backward[t]}));
  out.memory.packed = concat<Scalar>(std::span<const V>(out.states));
  out.memory.lengths = lengths;

  const V proj = tape.param(params.init_projection);
  const V bias = tape.param(params.init_bias);
  out.init.h = tanh(add_bias(matmul(concat({fwd.h, bwd.h}), proj), bias));
  out.init.c = tanh(add_bias(matmul(concat({fwd.c, bwd.c}), proj), bias));
  return out;
}

/// Bilinear global attention of decoder outputs over packed encoder states.
/// Returns (context B x 2H, weights B x L).
template <typename Scalar, typename Param>
std::pair<Var<Scalar>, Var<Scalar>> attend(Var<Scalar> query, const AttentionMemory<Scalar>& memory,
                                           Param& bilinear) {
  Tape<Scalar>& tape = *query.tape();
  Var<Scalar> projected = matmul(query, tape.param(bilinear));
  Var<Scalar> scores = tape.memory_scores(projected, memory.packed);
  Var<Scalar> weights = softmax(scores, std::span<const int>(memory.lengths));
  return {tape.memory_mix(weights, memory.packed), weights};
}

/// One decoder step for a batch of rows.
template <typename P>
  requires detail::ModelParamsRef<P>
StepOutput<detail::scalar_of<P>> decoder_step(Tape<detail::scalar_of<P>>& tape, P& params,
                                              std::span<const int> prev_tokens,
                                              const DecoderState<detail::scalar_of<P>>& state,
                                              std::span<const int> charges,
                                              const AttentionMemory<detail::scalar_of<P>>& memory) {
  using Scalar = detail::scalar_of<P>;
  using V = Var<Scalar>;
  const ModelConfig& config = params.config();
  if (prev_tokens.size() != charges.size() ||
      static_cast<Index>(prev_tokens.size()) != state.h.rows()) {
    throw ShapeError("decoder_step: " + std::to_string(prev_tokens.size()) + " tokens, " +
                     std::to_string(charges.size()) + " charges, state rows " +
                     std::to_string(state.h.rows()));
  }
  detail::check_charges(charges, config.num_charges);

  V label;
  if (config.merges_hidden() || config.injects_output()) {
    label = tape.gather(params.charge_embedding, charges);
  }
  V h_prev = state.h;
  if (config.merges_hidden()) {
    h_prev = tanh(add_bias(matmul(concat({h_prev, label}), tape.param(params.label_merge)),
                           tape.param(params.label_merge_bias)));
  }
  const V embedded = tape.gather(params.tgt_embedding, prev_tokens);
  const DecoderState<Scalar> next = lstm_cell_step(embedded, h_prev, state.c, params.decoder);

  StepOutput<Scalar> out;
  out.state = next;
  std::vector<V> features{next.h};
  if (config.attention_enabled) {
    auto [context, weights] = attend(next.h, memory, params.attention);
    features.push_back(context);
    out.attention = weights;
  }
  if (config.injects_output()) features.push_back(label);
  const V hidden = tanh(matmul(concat<Scalar>(std::span<const V>(features)),
                               tape.param(params.output_hidden)));
  out.logits = matmul(hidden, tape.param(params.output_projection));
  return out;
}

/// Gold-token log-probabilities under teacher forcing.
template <typename Scalar>
struct TeacherForced {
  Var<Scalar> logprobs;   // B x T, column t is log P(y_t | y_<t, x, v)
  Matrix<Scalar> mask;    // B x T, 1 on real target positions
  std::size_t tokens = 0; // number of real target positions
};

template <typename P>
  requires detail::ModelParamsRef<P>
TeacherForced<detail::scalar_of<P>> teacher_forced(Tape<detail::scalar_of<P>>& tape, P& params,
                                                   std::span<const Example> batch) {
  using Scalar = detail::scalar_of<P>;
  using V = Var<Scalar>;
  if (batch.empty()) throw ContractError("teacher_forced: empty batch");
  std::vector<std::vector<int>> sources;
  std::vector<int> charges;
  std::size_t max_len = 0;
  for (const Example& ex : batch) {
    if (ex.rationale.empty() || ex.rationale.back() != kStopId) {
      throw ContractError("teacher_forced: rationale must be nonempty and end with the stop token");
    }
    for (int y : ex.rationale) {
      if (y < 0 || y >= params.config().tgt_vocab_size) {
        throw VocabError("teacher_forced: target id " + std::to_string(y) + " outside [0, " +
                         std::to_string(params.config().tgt_vocab_size) + ")");
      }
    }
    sources.push_back(ex.fact);
    charges.push_back(ex.charge);
    max_len = std::max(max_len, ex.rationale.size());
  }
  detail::check_charges(charges, params.config().num_charges);
  const EncoderOutput<Scalar> encoded = encode(tape, params, std::span<const std::vector<int>>(sources));

  TeacherForced<Scalar> out;
  out.mask = Matrix<Scalar>::Zero(static_cast<Index>(batch.size()), static_cast<Index>(max_len));
  std::vector<V> columns;
  DecoderState<Scalar> state = encoded.init;
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<int> prev;
    std::vector<int> gold;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& y = batch[b].rationale;
      prev.push_back(t == 0 ? kSosId : (t - 1 < y.size() ? y[t - 1] : kPadId));
      const bool real = t < y.size();
      gold.push_back(real ? y[t] : kPadId);
      if (real) {
        out.mask(static_cast<Index>(b), static_cast<Index>(t)) = Scalar(1);
        ++out.tokens;
      }
    }
    const StepOutput<Scalar> step = decoder_step(tape, params, prev, state, charges, encoded.memory);
    columns.push_back(tape.pick(log_softmax(step.logits), gold));
    state = step.state;
  }
  out.logprobs = concat<Scalar>(std::span<const V>(columns));
  return out;
}

/// Per-token log P(y_t | y_<t, x, v) for one example, teacher forced.
template <typename Scalar>
std::vector<Scalar> forward_logprob(const ModelParams<Scalar>& params, const Example& example) {
  Tape<Scalar> tape(false);
  const auto result = teacher_forced(tape, params, std::span<const Example>(&example, 1));
  const Matrix<Scalar>& lp = result.logprobs.value();
  return std::vector<Scalar>(lp.data(), lp.data() + example.rationale.size());
}

}  // namespace lcs2s
