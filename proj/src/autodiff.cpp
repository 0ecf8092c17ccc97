#include "hffn/autodiff.hpp"

#include <cmath>
#include <mutex>
#include <random>
#include <sstream>
#include <unordered_map>

#include "hffn/ops.hpp"

namespace hffn {
namespace {

using Registry = std::unordered_map<std::string, BackwardRule>;

const Tensor& in(const Tape& t, const Node& n, std::size_t i) {
  return t.node(n.inputs.at(i)).value;
}

void install_builtin_rules(Registry& r) {
  r["conv2d"] = [](const Tape& t, const Node& n, const Tensor& g) {
    auto gr = ops::conv2d_backward(g, in(t, n, 0), in(t, n, 1), n.attrs.stride, n.attrs.padding);
    return std::vector<Tensor>{std::move(gr.input), std::move(gr.weight), std::move(gr.bias)};
  };
  r["conv_transpose2d"] = [](const Tape& t, const Node& n, const Tensor& g) {
    auto gr = ops::conv_transpose2d_backward(g, in(t, n, 0), in(t, n, 1), n.attrs.stride);
    return std::vector<Tensor>{std::move(gr.input), std::move(gr.weight), std::move(gr.bias)};
  };
  r["depthwise_conv2d"] = [](const Tape& t, const Node& n, const Tensor& g) {
    auto gr = ops::depthwise_conv2d_backward(g, in(t, n, 0), in(t, n, 1), n.attrs.padding);
    return std::vector<Tensor>{std::move(gr.input), std::move(gr.weight), std::move(gr.bias)};
  };
  r["avg_pool2d"] = [](const Tape& t, const Node& n, const Tensor& g) {
    return std::vector<Tensor>{
        ops::avg_pool2d_backward(g, in(t, n, 0).shape(), n.attrs.kernel, n.attrs.stride)};
  };
  r["pixel_shuffle"] = [](const Tape&, const Node& n, const Tensor& g) {
    return std::vector<Tensor>{ops::pixel_unshuffle(g, n.attrs.kernel)};
  };
  r["channel_slice"] = [](const Tape& t, const Node& n, const Tensor& g) {
    const Tensor& x = in(t, n, 0);
    Tensor gx(x.shape());
    const std::size_t plane = x.shape().plane();
    for (int b = 0; b < x.batch(); ++b) {
      std::copy_n(g.plane(b, 0), plane * g.channels(), gx.plane(b, n.attrs.begin));
    }
    return std::vector<Tensor>{std::move(gx)};
  };
  r["channel_concat"] = [](const Tape& t, const Node& n, const Tensor& g) {
    std::vector<Tensor> out;
    int offset = 0;
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      const int c = in(t, n, i).channels();
      out.push_back(ops::channel_slice(g, offset, offset + c));
      offset += c;
    }
    return out;
  };
  r["add"] = [](const Tape&, const Node&, const Tensor& g) { return std::vector<Tensor>{g, g}; };
  r["sub"] = [](const Tape&, const Node&, const Tensor& g) {
    return std::vector<Tensor>{g, ops::scale(g, -1.0)};
  };
  r["mul"] = [](const Tape& t, const Node& n, const Tensor& g) {
    return std::vector<Tensor>{ops::mul(g, in(t, n, 1)), ops::mul(g, in(t, n, 0))};
  };
  r["scale"] = [](const Tape&, const Node& n, const Tensor& g) {
    return std::vector<Tensor>{ops::scale(g, n.attrs.factor)};
  };
  r["sigmoid"] = [](const Tape&, const Node& n, const Tensor& g) {
    Tensor gx(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = n.value[i];
      gx[i] = g[i] * s * (1.0 - s);
    }
    return std::vector<Tensor>{std::move(gx)};
  };
  r["leaky_relu"] = [](const Tape& t, const Node& n, const Tensor& g) {
    const Tensor& x = in(t, n, 0);
    Tensor gx(g.shape());
    // Subgradient at exactly 0 takes the positive-side slope.
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = x[i] >= 0 ? g[i] : g[i] * n.attrs.slope;
    return std::vector<Tensor>{std::move(gx)};
  };
  r["channel_contrast"] = [](const Tape& t, const Node& n, const Tensor& g) {
    return std::vector<Tensor>{ops::channel_contrast_backward(g, in(t, n, 0))};
  };
  r["channel_scale"] = [](const Tape& t, const Node& n, const Tensor& g) {
    const Tensor& x = in(t, n, 0);
    const Tensor& gate = in(t, n, 1);
    Tensor ggate(gate.shape());
    const std::size_t plane = x.shape().plane();
    for (int b = 0; b < x.batch(); ++b) {
      for (int c = 0; c < x.channels(); ++c) {
        const double* gp = g.plane(b, c);
        const double* xp = x.plane(b, c);
        double acc = 0.0;
        for (std::size_t k = 0; k < plane; ++k) acc += gp[k] * xp[k];
        ggate.at(b, c, 0, 0) = acc;
      }
    }
    return std::vector<Tensor>{ops::channel_scale(g, gate), std::move(ggate)};
  };
  r["reflect_pad_br"] = [](const Tape&, const Node& n, const Tensor& g) {
    return std::vector<Tensor>{ops::reflect_pad_br_backward(g, n.attrs.begin, n.attrs.end)};
  };
  r["crop"] = [](const Tape& t, const Node& n, const Tensor& g) {
    return std::vector<Tensor>{ops::crop_backward(g, in(t, n, 0).shape())};
  };
  r["sum"] = [](const Tape& t, const Node& n, const Tensor& g) {
    return std::vector<Tensor>{Tensor(in(t, n, 0).shape(), g.item())};
  };
  r["l1_loss"] = [](const Tape& t, const Node& n, const Tensor& g) {
    const Tensor& p = in(t, n, 0);
    const Tensor& y = in(t, n, 1);
    const double k = g.item() / static_cast<double>(p.size());
    Tensor gp(p.shape());
    // Subgradient of |d| at d == 0 is 0.
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - y[i];
      gp[i] = d > 0 ? k : (d < 0 ? -k : 0.0);
    }
    return std::vector<Tensor>{gp, ops::scale(gp, -1.0)};
  };
}

Registry& registry() {
  static Registry r = [] {
    Registry init;
    install_builtin_rules(init);
    return init;
  }();
  return r;
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

Tape& mutable_tape(Var v) { return *v.tape; }

}  // namespace

void register_backward(const std::string& op, BackwardRule rule) {
  std::lock_guard lock(registry_mutex());
  registry()[op] = std::move(rule);
}

bool has_backward(const std::string& op) {
  std::lock_guard lock(registry_mutex());
  return registry().contains(op);
}

Var Tape::leaf(Tensor value, LeafKey key) {
  nodes_.push_back(Node{"leaf", {}, std::move(value), {}, key});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", {}, std::move(value), {}, std::nullopt});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(std::string op, std::vector<Var> inputs, Tensor value, OpAttrs attrs) {
  std::vector<std::size_t> ids;
  ids.reserve(inputs.size());
  for (Var v : inputs) ids.push_back(check(v));
  nodes_.push_back(Node{std::move(op), std::move(ids), std::move(value), attrs, std::nullopt});
  return Var{this, nodes_.size() - 1};
}

std::size_t Tape::check(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw std::invalid_argument("tape: variable does not belong to this tape");
  }
  return v.id;
}

const Tensor& Tape::value(Var v) const { return nodes_[check(v)].value; }

Gradients Tape::backward(Var loss) const {
  const std::size_t root = check(loss);
  if (nodes_[root].value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     nodes_[root].value.shape().str());
  }

  std::vector<const BackwardRule*> rules(root + 1, nullptr);
  {
    std::lock_guard lock(registry_mutex());
    for (std::size_t i = 0; i <= root; ++i) {
      if (nodes_[i].inputs.empty()) continue;
      auto it = registry().find(nodes_[i].op);
      if (it == registry().end()) {
        throw std::logic_error("backward: no backward rule registered for op '" + nodes_[i].op +
                               "'");
      }
      rules[i] = &it->second;
    }
  }

  std::vector<std::optional<Tensor>> grads(root + 1);
  grads[root] = Tensor(nodes_[root].value.shape(), 1.0);
  for (std::size_t i = root + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!grads[i] || n.inputs.empty()) continue;
    std::vector<Tensor> input_grads = (*rules[i])(*this, n, *grads[i]);
    if (input_grads.size() != n.inputs.size()) {
      throw std::logic_error("backward: rule for '" + n.op + "' returned wrong arity");
    }
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      auto& slot = grads[n.inputs[k]];
      if (!slot) {
        slot = std::move(input_grads[k]);
      } else {
        slot = ops::add(*slot, input_grads[k]);
      }
    }
    grads[i].reset();
  }

  // Every leaf receives a gradient, zero when the loss does not depend on it.
  // Leaves sharing a key accumulate.
  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (!n.leaf) continue;
    Tensor g = (i <= root && grads[i]) ? std::move(*grads[i]) : Tensor(n.value.shape());
    auto it = out.find(*n.leaf);
    if (it == out.end()) {
      out.emplace(*n.leaf, std::move(g));
    } else {
      it->second = ops::add(it->second, g);
    }
  }
  return out;
}

namespace ad {

Var conv2d(Var x, Var weight, Var bias, int stride, int padding) {
  Tape& t = *x.tape;
  Tensor v = ops::conv2d(t.value(x), t.value(weight), t.value(bias), stride, padding);
  OpAttrs a;
  a.stride = stride;
  a.padding = padding;
  return mutable_tape(x).record("conv2d", {x, weight, bias}, std::move(v), a);
}

Var conv_transpose2d(Var x, Var weight, Var bias, int stride) {
  Tape& t = *x.tape;
  Tensor v = ops::conv_transpose2d(t.value(x), t.value(weight), t.value(bias), stride);
  OpAttrs a;
  a.stride = stride;
  return mutable_tape(x).record("conv_transpose2d", {x, weight, bias}, std::move(v), a);
}

Var depthwise_conv2d(Var x, Var weight, Var bias, int padding) {
  Tape& t = *x.tape;
  Tensor v = ops::depthwise_conv2d(t.value(x), t.value(weight), t.value(bias), padding);
  OpAttrs a;
  a.padding = padding;
  return mutable_tape(x).record("depthwise_conv2d", {x, weight, bias}, std::move(v), a);
}

Var avg_pool2d(Var x, int kernel, int stride) {
  OpAttrs a;
  a.kernel = kernel;
  a.stride = stride;
  return mutable_tape(x).record("avg_pool2d", {x}, ops::avg_pool2d(x.tape->value(x), kernel, stride),
                                a);
}

Var pixel_shuffle(Var x, int r) {
  OpAttrs a;
  a.kernel = r;
  return mutable_tape(x).record("pixel_shuffle", {x}, ops::pixel_shuffle(x.tape->value(x), r), a);
}

Var channel_slice(Var x, int begin, int end) {
  OpAttrs a;
  a.begin = begin;
  a.end = end;
  return mutable_tape(x).record("channel_slice", {x},
                                ops::channel_slice(x.tape->value(x), begin, end), a);
}

Var channel_concat(const std::vector<Var>& parts) {
  require_shape(!parts.empty(), "channel_concat", "no inputs");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (Var p : parts) values.push_back(p.tape->value(p));
  return mutable_tape(parts.front()).record("channel_concat", parts, ops::channel_concat(values));
}

Var add(Var a, Var b) {
  return mutable_tape(a).record("add", {a, b}, ops::add(a.tape->value(a), b.tape->value(b)));
}

Var sub(Var a, Var b) {
  return mutable_tape(a).record("sub", {a, b}, ops::sub(a.tape->value(a), b.tape->value(b)));
}

Var mul(Var a, Var b) {
  return mutable_tape(a).record("mul", {a, b}, ops::mul(a.tape->value(a), b.tape->value(b)));
}

Var scale(Var a, double factor) {
  OpAttrs attrs;
  attrs.factor = factor;
  return mutable_tape(a).record("scale", {a}, ops::scale(a.tape->value(a), factor), attrs);
}

Var sigmoid(Var a) {
  return mutable_tape(a).record("sigmoid", {a}, ops::sigmoid(a.tape->value(a)));
}

Var leaky_relu(Var a, double slope) {
  OpAttrs attrs;
  attrs.slope = slope;
  return mutable_tape(a).record("leaky_relu", {a}, ops::leaky_relu(a.tape->value(a), slope),
                                attrs);
}

Var channel_contrast(Var x) {
  return mutable_tape(x).record("channel_contrast", {x}, ops::channel_contrast(x.tape->value(x)));
}

Var channel_scale(Var x, Var gate) {
  return mutable_tape(x).record("channel_scale", {x, gate},
                                ops::channel_scale(x.tape->value(x), gate.tape->value(gate)));
}

Var reflect_pad_br(Var x, int pad_h, int pad_w) {
  OpAttrs a;
  a.begin = pad_h;
  a.end = pad_w;
  return mutable_tape(x).record("reflect_pad_br", {x},
                                ops::reflect_pad_br(x.tape->value(x), pad_h, pad_w), a);
}

Var crop(Var x, int height, int width) {
  return mutable_tape(x).record("crop", {x}, ops::crop(x.tape->value(x), height, width));
}

Var sum(Var a) {
  return mutable_tape(a).record("sum", {a}, Tensor::scalar(ops::sum(a.tape->value(a))));
}

Var l1_loss(Var prediction, Var target) {
  return mutable_tape(prediction)
      .record("l1_loss", {prediction, target},
              Tensor::scalar(ops::l1_mean(prediction.tape->value(prediction),
                                          target.tape->value(target))));
}

}  // namespace ad

namespace {

// Builds f on `tape` and contracts its output to a scalar. A non-scalar output
// is projected onto `projection`, which is drawn from `seed` when empty.
Var evaluate(const TapeFunction& f, std::span<const Tensor> points,
             std::optional<Tensor>& projection, Tape& tape, std::uint64_t seed) {
  std::vector<Var> leaves;
  leaves.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) leaves.push_back(tape.leaf(points[i], i));
  Var out = f(tape, leaves);
  const Tensor& v = tape.value(out);
  v.require_finite("finite_diff_check");
  if (v.size() == 1) return out;
  if (!projection) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor p(v.shape());
    for (double& x : p.data()) x = u(rng);
    projection = std::move(p);
  }
  return ad::sum(ad::mul(out, tape.constant(*projection)));
}

}  // namespace

double FiniteDiffReport::relative_error(const FiniteDiffEntry& e) const {
  return std::abs(e.analytic - e.numeric) / (std::abs(e.numeric) + epsilon);
}

double FiniteDiffReport::max_relative() const {
  double worst = 0.0;
  for (const FiniteDiffEntry& e : entries) worst = std::max(worst, relative_error(e));
  return worst;
}

double FiniteDiffReport::max_absolute() const {
  double worst = 0.0;
  for (const FiniteDiffEntry& e : entries) worst = std::max(worst, std::abs(e.analytic - e.numeric));
  return worst;
}

FiniteDiffReport finite_diff_report(const TapeFunction& f, std::span<const Tensor> points,
                                    const FiniteDiffOptions& options) {
  if (!(options.step > 0)) throw std::invalid_argument("finite_diff_check: step must be > 0");

  std::optional<Tensor> projection;
  Gradients analytic;
  {
    Tape tape;
    analytic = tape.backward(evaluate(f, points, projection, tape, options.projection_seed));
  }

  auto value_at = [&](const std::vector<Tensor>& pts) {
    Tape tape;
    return tape.value(evaluate(f, pts, projection, tape, options.projection_seed)).item();
  };

  std::vector<std::size_t> which = options.points_to_check;
  if (which.empty()) {
    for (std::size_t i = 0; i < points.size(); ++i) which.push_back(i);
  }

  FiniteDiffReport report;
  report.epsilon = options.epsilon;
  std::vector<Tensor> work(points.begin(), points.end());
  for (std::size_t p : which) {
    const Tensor& grad = analytic.at(p);
    for (std::size_t k = 0; k < work[p].size(); ++k) {
      const double orig = work[p][k];
      work[p][k] = orig + options.step;
      const double up = value_at(work);
      work[p][k] = orig - options.step;
      const double down = value_at(work);
      work[p][k] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      if (!std::isfinite(numeric) || !std::isfinite(grad[k])) {
        throw NumericError("finite_diff_check: non-finite derivative");
      }
      report.entries.push_back({p, k, grad[k], numeric});
    }
  }
  return report;
}

double finite_diff_check(const TapeFunction& f, std::span<const Tensor> points,
                         const FiniteDiffOptions& options) {
  return finite_diff_report(f, points, options).max_relative();
}

double finite_diff_check(const std::function<Var(Tape&, Var)>& f, const Tensor& point,
                         double step) {
  FiniteDiffOptions options;
  options.step = step;
  const Tensor pts[] = {point};
  return finite_diff_check([&](Tape& t, std::span<const Var> v) { return f(t, v[0]); }, pts,
                           options);
}

}  // namespace hffn
