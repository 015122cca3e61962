#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "seaget/rng.hpp"
#include "seaget/sparse.hpp"
#include "seaget/tensor.hpp"

namespace seaget {

/// Learnable tensor with its gradient accumulator. Owned by the model; the
/// tape only refers to it while a forward/backward pass is alive.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() noexcept { grad.fill(0.0); }
};

/// 1 = position participates, 0 = masked out.
using Mask = std::vector<std::uint8_t>;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as its tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// which is a topological order, so backward is a single reverse sweep.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(Parameter& p);
  /// Appends an op result. `inputs` decide whether the node needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  /// Gradient buffer of `v`, zero-initialized on first touch.
  Tensor& grad(Var v);
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1, sweeps the tape backwards, then adds each
  /// parameter node's gradient into Parameter::grad.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

namespace ad {

Var matmul(Var a, Var b);
/// Constant left operand; `a` must outlive the backward pass.
Var matmul(const Tensor& a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// x[m×n] + bias[1×n] broadcast over rows.
Var add_bias(Var x, Var bias);
Var leaky_relu(Var x, double slope = 0.2);
Var relu(Var x);
/// Column 0 passes through, every other column goes through sin.
Var periodic(Var x);
Var transpose(Var x);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var gather_rows(Var x, std::span<const std::size_t> ids);
/// out[i][j] = col[i] + row[j]
Var outer_sum(Var col, Var row);
/// Row-wise softmax with max subtraction. `allowed` (row-major, same shape)
/// excludes entries; a row with no allowed entry becomes all zeros.
Var softmax_rows(Var s, std::span<const std::uint8_t> allowed = {});
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var dropout(Var x, double p, bool training, Rng& rng);
/// Constant sparse matrix times x.
Var spmm(const CsrMatrix& a, Var x);
Var sum(Var x);
/// Mean over valid rows of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const std::size_t> targets,
                  std::span<const std::uint8_t> valid);
/// Mean over valid entries of (pred - target)^2.
Var mse(Var pred, const Tensor& target, std::span<const std::uint8_t> valid);

}  // namespace ad
}  // namespace seaget
