#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lcs2s/checkpoint.hpp"
#include "lcs2s/errors.hpp"
#include "lcs2s/example.hpp"
#include "lcs2s/model.hpp"
#include "lcs2s/tensor.hpp"

namespace lcs2s {

struct TrainConfig {
  int batch_size = 64;
  double init_lr = 3e-4;
  double lr_reduce_factor = 0.5;
  int check_interval_batches = 1000;
  int patience = 8;
  int max_target_len = static_cast<int>(kMaxTargetLength);
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 1;
  long max_batches = 0;  // 0: run until early stopping
  std::string checkpoint_path;  // best parameters are written here when set
  std::string log_path;         // check records are appended here when set

  void validate() const;
};

struct TrainLogRecord {
  long batch = 0;
  double loss = 0.0;
  double val_ppl = 0.0;
  double lr = 0.0;
  bool improved = false;

  /// batch=<n> loss=<f> val_ppl=<f> lr=<f> improved=<0|1>
  std::string to_line() const;
};

/// Truncates a rationale to max_len tokens, the last being the stop token.
std::vector<int> clip_target(const std::vector<int>& rationale, std::size_t max_len);

// ---- loss -------------------------------------------------------------------

/// Mean negative log-likelihood over the real (non-pad) target tokens.
template <typename P>
  requires detail::ModelParamsRef<P>
Var<detail::scalar_of<P>> nll_loss(Tape<detail::scalar_of<P>>& tape, P& params,
                                   std::span<const Example> batch) {
  using Scalar = detail::scalar_of<P>;
  if (batch.empty()) throw ContractError("nll_loss: empty batch");
  const TeacherForced<Scalar> tf = teacher_forced(tape, params, batch);
  const Matrix<Scalar> weights = tf.mask * (Scalar(-1) / static_cast<Scalar>(tf.tokens));
  return tape.weighted_sum(tf.logprobs, weights);
}

/// Total NLL and token count, summed in dataset order.
template <typename Scalar>
std::pair<double, std::size_t> total_nll(const ModelParams<Scalar>& params,
                                         std::span<const Example> data, int batch_size = 64) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(batch_size), data.size() - start);
    Tape<Scalar> tape(false);
    const TeacherForced<Scalar> tf = teacher_forced(tape, params, data.subspan(start, n));
    total -= static_cast<double>(tf.logprobs.value().cwiseProduct(tf.mask).sum());
    tokens += tf.tokens;
  }
  return {total, tokens};
}

/// exp(mean per-token NLL).
template <typename Scalar>
double perplexity(const ModelParams<Scalar>& params, std::span<const Example> data, int batch_size = 64) {
  if (data.empty()) throw ContractError("perplexity: empty dataset");
  const auto [total, tokens] = total_nll(params, data, batch_size);
  return std::exp(total / static_cast<double>(tokens));
}

// ---- optimiser --------------------------------------------------------------

template <typename Scalar>
struct AdamState {
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;
  long step = 0;
};

/// Adam with bias correction, preceded by global-norm gradient clipping.
template <typename Scalar>
class Adam {
 public:
  Adam(double beta1, double beta2, double eps, double clip_norm)
      : beta1_(beta1), beta2_(beta2), eps_(eps), clip_norm_(clip_norm) {}

  explicit Adam(const TrainConfig& config)
      : Adam(config.beta1, config.beta2, config.adam_eps, config.grad_clip_norm) {}

  /// Applies one update from the gradients held in each parameter.
  /// Returns the global gradient norm before clipping.
  double step(std::span<Parameter<Scalar>* const> params, double lr) {
    if (state_.m.empty()) {
      for (Parameter<Scalar>* p : params) {
        state_.m.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
        state_.v.push_back(Matrix<Scalar>::Zero(p->rows(), p->cols()));
      }
    }
    if (state_.m.size() != params.size()) {
      throw ContractError("Adam::step: parameter list changed between steps");
    }

    double squared = 0.0;
    for (const Parameter<Scalar>* p : params) {
      if (!p->grad.allFinite()) throw NumericError("non-finite gradient in parameter '" + p->name + "'");
      squared += static_cast<double>(p->grad.squaredNorm());
    }
    const double norm = std::sqrt(squared);
    const double clip = (clip_norm_ > 0.0 && norm > clip_norm_) ? clip_norm_ / norm : 1.0;

    ++state_.step;
    const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(state_.step));
    const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(state_.step));
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter<Scalar>& p = *params[i];
      const auto g = (p.grad.array() * static_cast<Scalar>(clip));
      state_.m[i].array() = b1 * state_.m[i].array() + (Scalar(1) - b1) * g;
      state_.v[i].array() = b2 * state_.v[i].array() + (Scalar(1) - b2) * g.square();
      const auto m_hat = state_.m[i].array() / static_cast<Scalar>(correction1);
      const auto v_hat = state_.v[i].array() / static_cast<Scalar>(correction2);
      p.value.array() -= static_cast<Scalar>(lr) * m_hat / (v_hat.sqrt() + static_cast<Scalar>(eps_));
    }
    return norm;
  }

  double step(std::vector<Parameter<Scalar>*> params, double lr) {
    return step(std::span<Parameter<Scalar>* const>(params), lr);
  }

  const AdamState<Scalar>& state() const { return state_; }

 private:
  double beta1_;
  double beta2_;
  double eps_;
  double clip_norm_;
  AdamState<Scalar> state_;
};

// ---- training loop ----------------------------------------------------------

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> best;
  double best_perplexity = std::numeric_limits<double>::infinity();
  std::vector<TrainLogRecord> log;
  long batches = 0;
};

void append_log_line(const std::string& path, const TrainLogRecord& record);

/// Teacher-forced training with Adam. Validation perplexity is measured every
/// check_interval_batches; an improvement (strictly lower) saves the
/// parameters, anything else multiplies the learning rate by
/// lr_reduce_factor. Stops after `patience` consecutive non-improvements or
/// at max_batches.
template <typename Scalar>
TrainResult<Scalar> train(std::span<const Example> train_set, std::span<const Example> dev_set,
                          const ModelConfig& model_config, const TrainConfig& config,
                          const std::function<void(const TrainLogRecord&)>& on_check = {}) {
  config.validate();
  if (train_set.empty() || dev_set.empty()) throw ContractError("train: empty train or dev set");

  auto prepare = [&](std::span<const Example> in) {
    std::vector<Example> out(in.begin(), in.end());
    for (Example& ex : out) ex.rationale = clip_target(ex.rationale, static_cast<std::size_t>(config.max_target_len));
    return out;
  };
  const std::vector<Example> train_data = prepare(train_set);
  const std::vector<Example> dev_data = prepare(dev_set);

  ModelParams<Scalar> params(model_config);
  params.initialize_uniform(config.seed);
  const auto slots = params.parameters();
  Adam<Scalar> adam(config);

  TrainResult<Scalar> result;
  result.best = params;
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double lr = config.init_lr;
  int misses = 0;
  double loss_sum = 0.0;
  long loss_count = 0;
  long batch_index = 0;
  std::vector<Example> batch;

  auto check = [&]() {
    TrainLogRecord record;
    record.batch = batch_index;
    record.loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    record.val_ppl = perplexity(params, std::span<const Example>(dev_data), config.batch_size);
    record.lr = lr;
    record.improved = record.val_ppl < result.best_perplexity;
    if (record.improved) {
      result.best_perplexity = record.val_ppl;
      result.best = params;
      if (!config.checkpoint_path.empty()) save_checkpoint(config.checkpoint_path, params);
      misses = 0;
    } else {
      ++misses;
      lr *= config.lr_reduce_factor;
    }
    result.log.push_back(record);
    if (!config.log_path.empty()) append_log_line(config.log_path, record);
    if (on_check) on_check(record);
    loss_sum = 0.0;
    loss_count = 0;
    return misses >= config.patience;
  };

  for (bool done = false; !done;) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size() && !done; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_data[order[i]]);

      params.zero_grad();
      {
        Tape<Scalar> tape(true);
        const Var<Scalar> loss = nll_loss(tape, params, std::span<const Example>(batch));
        tape.backward(loss);
        loss_sum += static_cast<double>(loss.value()(0, 0));
      }
      adam.step(slots, lr);
      ++loss_count;
      ++batch_index;

      const bool at_limit = config.max_batches > 0 && batch_index >= config.max_batches;
      if (batch_index % config.check_interval_batches == 0) {
        done = check() || at_limit;
      } else if (at_limit) {
        check();
        done = true;
      }
    }
  }
  result.batches = batch_index;
  return result;
}

}  // namespace lcs2s
