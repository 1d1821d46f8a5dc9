#pragma once

// Dense tensors on a reverse-mode gradient tape.
//
// Every tensor is a row-major Eigen matrix; a vector is a 1 x n matrix and a
// batch of vectors is a B x n matrix. Values are recorded on a Tape as the
// forward pass runs and Tape::backward replays the adjoints in exact reverse
// record order. Trainable weights live outside the tape in Parameter objects;
// the tape references their storage and accumulates straight into their grad.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lcs2s/errors.hpp"

namespace lcs2s {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline std::string shape_string(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

/// A named trainable weight with its gradient accumulator.
template <typename Scalar>
struct Parameter {
  using scalar_type = Scalar;

  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string param_name, Index rows, Index cols)
      : name(std::move(param_name)),
        value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)) {}

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
  Shape shape() const { return {value.rows(), value.cols()}; }
  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
class Tape;

/// Handle to a node recorded on a Tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;

  Tape<Scalar>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix<Scalar>& value() const { return tape_->value(*this); }
  const Matrix<Scalar>& grad() const { return tape_->grad(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Shape shape() const { return {rows(), cols()}; }
  bool requires_grad() const { return tape_->requires_grad(*this); }

 private:
  friend class Tape<Scalar>;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using V = Var<Scalar>;

  /// A tape built with record_gradients=false evaluates only; nothing is kept
  /// for a backward pass.
  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}

  // Closures capture `this`.
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Drops all activation records. Parameter values are untouched.
  void clear() { nodes_.clear(); }

  const Mat& value(V v) const {
    const Node& n = node(v);
    return n.external ? *n.external : n.value;
  }

  const Mat& grad(V v) const {
    const Node& n = node(v);
    if (n.sink) return n.sink->grad;
    if (n.grad.size() == 0) {
      empty_grad_ = Mat::Zero(value(v).rows(), value(v).cols());
      return empty_grad_;
    }
    return n.grad;
  }

  bool requires_grad(V v) const { return node(v).requires_grad; }

  // ---- leaves -------------------------------------------------------------

  V constant(Mat value) { return push(std::move(value), false, nullptr); }

  /// A leaf that gets its own gradient slot (for checking or input gradients).
  V variable(Mat value) { return push(std::move(value), recording_, nullptr); }

  /// References a trainable parameter; gradients flow into p.grad.
  V param(Parameter<Scalar>& p) {
    Node n;
    n.external = &p.value;
    n.requires_grad = recording_;
    n.sink = recording_ ? &p : nullptr;
    nodes_.push_back(std::move(n));
    return V(this, static_cast<int>(nodes_.size()) - 1);
  }

  /// Read-only parameter reference; never receives gradient.
  V param(const Parameter<Scalar>& p) {
    Node n;
    n.external = &p.value;
    nodes_.push_back(std::move(n));
    return V(this, static_cast<int>(nodes_.size()) - 1);
  }

  /// Embedding lookup: row ids[i] of the table becomes row i of the result.
  V gather(Parameter<Scalar>& table, std::span<const int> ids) {
    return gather_impl(table.value, recording_ ? &table : nullptr, ids, table.name);
  }
  V gather(const Parameter<Scalar>& table, std::span<const int> ids) {
    return gather_impl(table.value, nullptr, ids, table.name);
  }

  // ---- linear algebra -----------------------------------------------------

  V matmul(V a, V b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.cols() != bv.rows()) {
      throw ShapeError("matmul: inner dimensions differ: " + shape_string(av) + " x " +
                       shape_string(bv));
    }
    Mat out = av * bv;
    return record(std::move(out), {a, b}, [this, a, b](const Mat& g) {
      if (requires_grad(a)) slot(a).noalias() += g * value(b).transpose();
      if (requires_grad(b)) slot(b).noalias() += value(a).transpose() * g;
    });
  }

  V add(V a, V b) {
    require_same_shape("add", a, b);
    Mat out = value(a) + value(b);
    return record(std::move(out), {a, b}, [this, a, b](const Mat& g) {
      if (requires_grad(a)) slot(a) += g;
      if (requires_grad(b)) slot(b) += g;
    });
  }

  /// Adds a 1 x n bias row to every row of a. The only broadcast supported.
  V add_bias(V a, V bias) {
    const Mat& av = value(a);
    const Mat& bv = value(bias);
    if (bv.rows() != 1 || bv.cols() != av.cols()) {
      throw ShapeError("add_bias: bias " + shape_string(bv) + " does not fit rows of " +
                       shape_string(av));
    }
    Mat out = av.rowwise() + bv.row(0);
    return record(std::move(out), {a, bias}, [this, a, bias](const Mat& g) {
      if (requires_grad(a)) slot(a) += g;
      if (requires_grad(bias)) slot(bias) += g.colwise().sum();
    });
  }

  V mul(V a, V b) {
    require_same_shape("mul", a, b);
    Mat out = value(a).cwiseProduct(value(b));
    return record(std::move(out), {a, b}, [this, a, b](const Mat& g) {
      if (requires_grad(a)) slot(a) += g.cwiseProduct(value(b));
      if (requires_grad(b)) slot(b) += g.cwiseProduct(value(a));
    });
  }

  V scale(V a, Scalar factor) {
    Mat out = value(a) * factor;
    return record(std::move(out), {a}, [this, a, factor](const Mat& g) {
      if (requires_grad(a)) slot(a) += g * factor;
    });
  }

  V tanh(V a) {
    Mat out = value(a).array().tanh().matrix();
    const int self = next_id();
    return record(std::move(out), {a}, [this, a, self](const Mat& g) {
      if (!requires_grad(a)) return;
      const Mat& y = nodes_[self].value;
      slot(a).array() += g.array() * (Scalar(1) - y.array().square());
    });
  }

  V sigmoid(V a) {
    Mat out = (Scalar(1) / (Scalar(1) + (-value(a).array()).exp())).matrix();
    const int self = next_id();
    return record(std::move(out), {a}, [this, a, self](const Mat& g) {
      if (!requires_grad(a)) return;
      const Mat& y = nodes_[self].value;
      slot(a).array() += g.array() * y.array() * (Scalar(1) - y.array());
    });
  }

  /// Joins tensors along axis 1 (columns) or axis 0 (rows).
  V concat(std::span<const V> parts, int axis = 1) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
    const Mat& first = value(parts[0]);
    Index rows = 0;
    Index cols = 0;
    for (const V& p : parts) {
      const Mat& pv = value(p);
      if (axis == 1) {
        if (pv.rows() != first.rows()) {
          throw ShapeError("concat: row counts differ: " + shape_string(first) + " vs " +
                           shape_string(pv));
        }
        cols += pv.cols();
      } else {
        if (pv.cols() != first.cols()) {
          throw ShapeError("concat: column counts differ: " + shape_string(first) + " vs " +
                           shape_string(pv));
        }
        rows += pv.rows();
      }
    }
    if (axis == 1) rows = first.rows();
    else cols = first.cols();

    Mat out(rows, cols);
    Index offset = 0;
    for (const V& p : parts) {
      const Mat& pv = value(p);
      if (axis == 1) {
        out.middleCols(offset, pv.cols()) = pv;
        offset += pv.cols();
      } else {
        out.middleRows(offset, pv.rows()) = pv;
        offset += pv.rows();
      }
    }
    std::vector<V> inputs(parts.begin(), parts.end());
    return record(std::move(out), inputs, [this, inputs, axis](const Mat& g) {
      Index off = 0;
      for (const V& p : inputs) {
        const Index width = axis == 1 ? value(p).cols() : value(p).rows();
        if (requires_grad(p)) {
          if (axis == 1) slot(p) += g.middleCols(off, width);
          else slot(p) += g.middleRows(off, width);
        }
        off += width;
      }
    });
  }

  V concat(std::initializer_list<V> parts, int axis = 1) {
    return concat(std::span<const V>(parts.begin(), parts.size()), axis);
  }

  V slice_cols(V a, Index begin, Index count) {
    const Mat& av = value(a);
    if (begin < 0 || count < 0 || begin + count > av.cols()) {
      throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " +
                       std::to_string(begin + count) + ") outside " + shape_string(av));
    }
    Mat out = av.middleCols(begin, count);
    return record(std::move(out), {a}, [this, a, begin, count](const Mat& g) {
      if (requires_grad(a)) slot(a).middleCols(begin, count) += g;
    });
  }

  /// Tiles a single-row tensor into `count` identical rows.
  V repeat_rows(V a, Index count) {
    const Mat& av = value(a);
    if (av.rows() != 1) throw ShapeError("repeat_rows: expected one row, got " + shape_string(av));
    Mat out = av.replicate(count, 1);
    return record(std::move(out), {a}, [this, a](const Mat& g) {
      if (requires_grad(a)) slot(a) += g.colwise().sum();
    });
  }

  /// Row i of the result is row ids[i] of a.
  V select_rows(V a, std::span<const int> ids) {
    const Mat& av = value(a);
    Mat out(static_cast<Index>(ids.size()), av.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= av.rows()) {
        throw ShapeError("select_rows: row " + std::to_string(ids[i]) + " outside " +
                         shape_string(av));
      }
      out.row(static_cast<Index>(i)) = av.row(ids[i]);
    }
    std::vector<int> rows(ids.begin(), ids.end());
    return record(std::move(out), {a}, [this, a, rows](const Mat& g) {
      if (!requires_grad(a)) return;
      Mat& s = slot(a);
      for (std::size_t i = 0; i < rows.size(); ++i) s.row(rows[i]) += g.row(static_cast<Index>(i));
    });
  }

  /// mask(i) * a.row(i) + (1 - mask(i)) * b.row(i); mask is a constant column.
  V blend(const Mat& mask, V a, V b) {
    require_same_shape("blend", a, b);
    const Mat& av = value(a);
    if (mask.cols() != 1 || mask.rows() != av.rows()) {
      throw ShapeError("blend: mask " + shape_string(mask) + " does not fit " + shape_string(av));
    }
    Mat out = (mask.col(0).asDiagonal() * av) +
              ((Scalar(1) - mask.col(0).array()).matrix().asDiagonal() * value(b));
    return record(std::move(out), {a, b}, [this, a, b, mask](const Mat& g) {
      if (requires_grad(a)) slot(a) += mask.col(0).asDiagonal() * g;
      if (requires_grad(b)) slot(b) += (Scalar(1) - mask.col(0).array()).matrix().asDiagonal() * g;
    });
  }

  // ---- normalisation and reductions --------------------------------------

  /// Row-wise softmax. With row_lengths, row i only spans its first
  /// row_lengths[i] columns and the rest are exactly zero.
  V softmax(V a, std::span<const int> row_lengths = {}) {
    const Mat& av = value(a);
    require_finite("softmax", av, row_lengths);
    Mat out = Mat::Zero(av.rows(), av.cols());
    for (Index r = 0; r < av.rows(); ++r) {
      const Index n = active_width(av, row_lengths, r, "softmax");
      auto row = av.row(r).head(n);
      const Scalar peak = row.maxCoeff();
      out.row(r).head(n) = (row.array() - peak).exp().matrix();
      out.row(r).head(n) /= out.row(r).head(n).sum();
    }
    const int self = next_id();
    return record(std::move(out), {a}, [this, a, self](const Mat& g) {
      if (!requires_grad(a)) return;
      const Mat& y = nodes_[self].value;
      const auto inner = (g.cwiseProduct(y)).rowwise().sum();
      slot(a) += (y.array() * (g.colwise() - inner).array()).matrix();
    });
  }

  V log_softmax(V a) {
    const Mat& av = value(a);
    require_finite("log_softmax", av, {});
    Mat out(av.rows(), av.cols());
    for (Index r = 0; r < av.rows(); ++r) {
      const Scalar peak = av.row(r).maxCoeff();
      const Scalar log_norm = peak + std::log((av.row(r).array() - peak).exp().sum());
      out.row(r) = av.row(r).array() - log_norm;
    }
    const int self = next_id();
    return record(std::move(out), {a}, [this, a, self](const Mat& g) {
      if (!requires_grad(a)) return;
      const Mat probs = nodes_[self].value.array().exp().matrix();
      const auto total = g.rowwise().sum();
      slot(a) += g - (probs.array().colwise() * total.array()).matrix();
    });
  }

  /// Column cols[i] of row i, as a B x 1 column.
  V pick(V a, std::span<const int> cols) {
    const Mat& av = value(a);
    if (static_cast<Index>(cols.size()) != av.rows()) {
      throw ShapeError("pick: " + std::to_string(cols.size()) + " indices for " + shape_string(av));
    }
    Mat out(av.rows(), 1);
    for (Index r = 0; r < av.rows(); ++r) {
      const int c = cols[static_cast<std::size_t>(r)];
      if (c < 0 || c >= av.cols()) {
        throw ShapeError("pick: column " + std::to_string(c) + " outside " + shape_string(av));
      }
      out(r, 0) = av(r, c);
    }
    std::vector<int> idx(cols.begin(), cols.end());
    return record(std::move(out), {a}, [this, a, idx](const Mat& g) {
      if (!requires_grad(a)) return;
      Mat& s = slot(a);
      for (std::size_t r = 0; r < idx.size(); ++r) s(static_cast<Index>(r), idx[r]) += g(static_cast<Index>(r), 0);
    });
  }

  V sum(V a) {
    Mat out(1, 1);
    out(0, 0) = value(a).sum();
    return record(std::move(out), {a}, [this, a](const Mat& g) {
      if (requires_grad(a)) slot(a).array() += g(0, 0);
    });
  }

  /// Scalar sum of weights .* a with constant weights of the same shape.
  V weighted_sum(V a, const Mat& weights) {
    const Mat& av = value(a);
    if (weights.rows() != av.rows() || weights.cols() != av.cols()) {
      throw ShapeError("weighted_sum: weights " + shape_string(weights) + " vs " + shape_string(av));
    }
    Mat out(1, 1);
    out(0, 0) = av.cwiseProduct(weights).sum();
    return record(std::move(out), {a}, [this, a, weights](const Mat& g) {
      if (requires_grad(a)) slot(a) += weights * g(0, 0);
    });
  }

  // ---- attention primitives -----------------------------------------------
  //
  // A memory tensor packs L per-position vectors of width D side by side:
  // shape B x (L*D), position j occupying columns [j*D, (j+1)*D).

  /// scores(b, j) = query.row(b) . memory_j.row(b)
  V memory_scores(V query, V memory) {
    const Mat& q = value(query);
    const Mat& m = value(memory);
    const Index width = q.cols();
    if (m.rows() != q.rows() || width == 0 || m.cols() % width != 0) {
      throw ShapeError("memory_scores: query " + shape_string(q) + " vs memory " + shape_string(m));
    }
    const Index len = m.cols() / width;
    Mat out(q.rows(), len);
    for (Index b = 0; b < q.rows(); ++b) {
      const RowMap slots(m.row(b).data(), len, width);
      out.row(b).noalias() = (slots * q.row(b).transpose()).transpose();
    }
    return record(std::move(out), {query, memory}, [this, query, memory, len, width](const Mat& g) {
      const Mat& qv = value(query);
      const Mat& mv = value(memory);
      const bool gq = requires_grad(query);
      const bool gm = requires_grad(memory);
      for (Index b = 0; b < qv.rows(); ++b) {
        const RowMap slots(mv.row(b).data(), len, width);
        if (gq) slot(query).row(b).noalias() += g.row(b) * slots;
        if (gm) {
          MutRowMap dslots(slot(memory).row(b).data(), len, width);
          dslots.noalias() += g.row(b).transpose() * qv.row(b);
        }
      }
    });
  }

  /// context.row(b) = sum_j weights(b, j) * memory_j.row(b)
  V memory_mix(V weights, V memory) {
    const Mat& w = value(weights);
    const Mat& m = value(memory);
    const Index len = w.cols();
    if (m.rows() != w.rows() || len == 0 || m.cols() % len != 0) {
      throw ShapeError("memory_mix: weights " + shape_string(w) + " vs memory " + shape_string(m));
    }
    const Index width = m.cols() / len;
    Mat out(w.rows(), width);
    for (Index b = 0; b < w.rows(); ++b) {
      const RowMap slots(m.row(b).data(), len, width);
      out.row(b).noalias() = w.row(b) * slots;
    }
    return record(std::move(out), {weights, memory}, [this, weights, memory, len, width](const Mat& g) {
      const Mat& wv = value(weights);
      const Mat& mv = value(memory);
      const bool gw = requires_grad(weights);
      const bool gm = requires_grad(memory);
      for (Index b = 0; b < wv.rows(); ++b) {
        const RowMap slots(mv.row(b).data(), len, width);
        if (gw) slot(weights).row(b).noalias() += g.row(b) * slots.transpose();
        if (gm) {
          MutRowMap dslots(slot(memory).row(b).data(), len, width);
          dslots.noalias() += wv.row(b).transpose() * g.row(b);
        }
      }
    });
  }

  // ---- backward -------------------------------------------------------------

  /// Seeds d(loss)/d(loss) = 1 and replays adjoints newest to oldest.
  /// Parameter gradients accumulate; call zero_grad between steps.
  void backward(V loss) {
    const Mat& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward: loss must be a scalar, got " + shape_string(lv));
    }
    if (!recording_) throw ContractError("backward: tape was built without gradient recording");
    if (!requires_grad(loss)) return;
    slot(loss).array() += Scalar(1);
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.adjoint && n.grad.size() != 0) n.adjoint(n.grad);
    }
  }

 private:
  using RowMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using MutRowMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  struct Node {
    Mat value;
    Mat grad;
    const Mat* external = nullptr;
    Parameter<Scalar>* sink = nullptr;
    bool requires_grad = false;
    std::function<void(const Mat&)> adjoint;
  };

  const Node& node(V v) const {
    if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
      throw ContractError("tensor handle does not belong to this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id_)];
  }

  int next_id() const { return static_cast<int>(nodes_.size()); }

  V push(Mat value, bool requires_grad, std::function<void(const Mat&)> adjoint) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.adjoint = std::move(adjoint);
    nodes_.push_back(std::move(n));
    return V(this, next_id() - 1);
  }

  V record(Mat value, std::initializer_list<V> inputs, std::function<void(const Mat&)> adjoint) {
    return record(std::move(value), std::vector<V>(inputs), std::move(adjoint));
  }

  V record(Mat value, const std::vector<V>& inputs, std::function<void(const Mat&)> adjoint) {
    bool needs = false;
    if (recording_) {
      for (const V& in : inputs) needs = needs || requires_grad(in);
    }
    return push(std::move(value), needs, std::move(adjoint));
  }

  /// Gradient accumulator of a node, allocated on first touch.
  Mat& slot(V v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id_)];
    if (n.sink) return n.sink->grad;
    if (n.grad.size() == 0) {
      const Mat& val = n.external ? *n.external : n.value;
      n.grad = Mat::Zero(val.rows(), val.cols());
    }
    return n.grad;
  }

  V gather_impl(const Mat& table, Parameter<Scalar>* sink, std::span<const int> ids,
                const std::string& name) {
    Mat out(static_cast<Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= table.rows()) {
        throw VocabError("id " + std::to_string(ids[i]) + " outside table '" + name + "' with " +
                         std::to_string(table.rows()) + " rows");
      }
      out.row(static_cast<Index>(i)) = table.row(ids[i]);
    }
    if (sink == nullptr) return push(std::move(out), false, nullptr);
    std::vector<int> rows(ids.begin(), ids.end());
    return push(std::move(out), true, [sink, rows](const Mat& g) {
      for (std::size_t i = 0; i < rows.size(); ++i) sink->grad.row(rows[i]) += g.row(static_cast<Index>(i));
    });
  }

  void require_same_shape(const char* op, V a, V b) const {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
      throw ShapeError(std::string(op) + ": shapes differ: " + shape_string(av) + " vs " +
                       shape_string(bv));
    }
  }

  static Index active_width(const Mat& m, std::span<const int> lengths, Index row, const char* op) {
    if (lengths.empty()) {
      if (m.cols() < 1) throw ContractError(std::string(op) + ": empty row");
      return m.cols();
    }
    if (static_cast<Index>(lengths.size()) != m.rows()) {
      throw ShapeError(std::string(op) + ": " + std::to_string(lengths.size()) +
                       " row lengths for " + shape_string(m));
    }
    const Index n = lengths[static_cast<std::size_t>(row)];
    if (n < 1 || n > m.cols()) {
      throw ContractError(std::string(op) + ": row length " + std::to_string(n) + " outside [1, " +
                          std::to_string(m.cols()) + "]");
    }
    return n;
  }

  static void require_finite(const char* op, const Mat& m, std::span<const int> lengths) {
    for (Index r = 0; r < m.rows(); ++r) {
      const Index n = active_width(m, lengths, r, op);
      if (!m.row(r).head(n).allFinite()) {
        throw NumericError(std::string(op) + ": non-finite input in row " + std::to_string(r));
      }
    }
  }

  bool recording_;
  std::vector<Node> nodes_;
  mutable Mat empty_grad_;
};

// ---- free-function spelling --------------------------------------------------

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) { return a.tape()->matmul(a, b); }

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) { return a.tape()->add(a, b); }

/// Elementwise (Hadamard) product.
template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Var<Scalar> b) { return a.tape()->mul(a, b); }

template <typename Scalar>
Var<Scalar> operator*(Var<Scalar> a, Scalar k) { return a.tape()->scale(a, k); }

template <typename Scalar>
Var<Scalar> add_bias(Var<Scalar> a, Var<Scalar> bias) { return a.tape()->add_bias(a, bias); }

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) { return a.tape()->tanh(a); }

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) { return a.tape()->sigmoid(a); }

template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> a, std::span<const int> row_lengths = {}) {
  return a.tape()->softmax(a, row_lengths);
}

template <typename Scalar>
Var<Scalar> log_softmax(Var<Scalar> a) { return a.tape()->log_softmax(a); }

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) { return a.tape()->sum(a); }

template <typename Scalar>
Var<Scalar> concat(std::initializer_list<Var<Scalar>> parts, int axis = 1) {
  if (parts.size() == 0) throw ShapeError("concat: no inputs");
  return parts.begin()->tape()->concat(parts, axis);
}

template <typename Scalar>
Var<Scalar> concat(std::span<const Var<Scalar>> parts, int axis = 1) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  return parts.front().tape()->concat(parts, axis);
}

}  // namespace lcs2s
