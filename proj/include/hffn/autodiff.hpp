#pragma once

// Reverse-mode differentiation over the tensor-core op set.
//
// A Tape records nodes in execution order, so every node's inputs precede it.
// Each node names its op; backward looks the op up in a registry of backward
// rules and fails loudly for ops without a rule.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hffn/tensor.hpp"

namespace hffn {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

/// Key identifying a differentiable leaf (a weight id, or an input slot).
using LeafKey = std::size_t;

/// Gradient per leaf key; shapes mirror the leaf values.
using Gradients = std::map<LeafKey, Tensor>;

/// Scalar attributes an op needs again in its backward rule.
struct OpAttrs {
  int stride = 1;
  int padding = 0;
  int kernel = 0;
  int begin = 0;
  int end = 0;
  double slope = 0.0;
  double factor = 1.0;
};

struct Node {
  std::string op;
  std::vector<std::size_t> inputs;
  Tensor value;
  OpAttrs attrs;
  std::optional<LeafKey> leaf;
};

/// Backward rule: given the node and dL/d(output), return dL/d(input_i) for
/// every input, in order.
using BackwardRule =
    std::function<std::vector<Tensor>(const Tape&, const Node&, const Tensor& grad_out)>;

/// Register (or replace) the backward rule for an op id. Built-in rules are
/// installed on first use of the registry.
void register_backward(const std::string& op, BackwardRule rule);
bool has_backward(const std::string& op);

class Tape {
 public:
  /// Differentiable leaf; backward reports its gradient under `key`.
  Var leaf(Tensor value, LeafKey key);
  /// Non-differentiable input.
  Var constant(Tensor value);
  /// Append an op node. Inputs must already be on this tape.
  Var record(std::string op, std::vector<Var> inputs, Tensor value, OpAttrs attrs = {});

  const Tensor& value(Var v) const;
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

  /// dL/d(leaf) for every leaf on the tape. `loss` must be a (1,1,1,1) node.
  Gradients backward(Var loss) const;

 private:
  std::size_t check(Var v) const;
  std::vector<Node> nodes_;
};

// Differentiable ops. Each computes its value with hffn::ops and records a
// node whose op id has a registered backward rule.
namespace ad {

Var conv2d(Var x, Var weight, Var bias, int stride, int padding);
Var conv_transpose2d(Var x, Var weight, Var bias, int stride);
Var depthwise_conv2d(Var x, Var weight, Var bias, int padding);
Var avg_pool2d(Var x, int kernel, int stride);
Var pixel_shuffle(Var x, int r);
Var channel_slice(Var x, int begin, int end);
Var channel_concat(const std::vector<Var>& parts);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var leaky_relu(Var a, double slope);
Var channel_contrast(Var x);
Var channel_scale(Var x, Var gate);
Var reflect_pad_br(Var x, int pad_h, int pad_w);
Var crop(Var x, int height, int width);
Var sum(Var a);
Var l1_loss(Var prediction, Var target);

}  // namespace ad

/// A function of one or more tensors built on a tape, returning any-shaped
/// output. Non-scalar outputs are contracted with a fixed random projection.
using TapeFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct FiniteDiffOptions {
  double step = 1e-5;
  double epsilon = 1e-12;
  std::uint64_t projection_seed = 0x5eed;
  /// Only coordinates in these points are perturbed; empty means all.
  std::vector<std::size_t> points_to_check;
};

/// One perturbed coordinate: leaf `point`, flat element `index`.
struct FiniteDiffEntry {
  std::size_t point = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct FiniteDiffReport {
  std::vector<FiniteDiffEntry> entries;
  double epsilon = 1e-12;

  double relative_error(const FiniteDiffEntry& e) const;
  /// Max over entries of relative_error.
  double max_relative() const;
  double max_absolute() const;
};

/// Every coordinate's analytic and central-difference derivative.
FiniteDiffReport finite_diff_report(const TapeFunction& f, std::span<const Tensor> points,
                                    const FiniteDiffOptions& options = {});

/// Max over coordinates of |analytic - central difference| / (|central difference| + eps).
/// Throws NumericError on non-finite values.
double finite_diff_check(const TapeFunction& f, std::span<const Tensor> points,
                         const FiniteDiffOptions& options = {});
double finite_diff_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point,
                         double step = 1e-5);

}  // namespace hffn
