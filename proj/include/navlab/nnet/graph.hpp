#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "navlab/nnet/params.hpp"
#include "navlab/nnet/tensor.hpp"

namespace navlab::nn {

struct Var {
  std::uint32_t id = 0;
};

/// Residual convention for the expectile loss. Intent: u = target - pred,
/// so tau > 0.5 pulls the prediction toward the upper expectile.
/// Literal: u = pred - target with the same indicator.
enum class ExpectileSign { Intent, Literal };

/// Single-use tape. Build the forward pass with the ops below, then call
/// backward() once on a 1x1 loss. Parameter gradients are accumulated into
/// the Gradients buffer passed at construction (frozen groups are skipped).
class Graph {
 public:
  explicit Graph(const ParamStore* params = nullptr, Gradients* grads = nullptr);

  Var input(Tensor value, std::string label = "input");
  Var param(ParamId id);
  Var param(std::string_view group, std::string_view name);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // row (1 x m) broadcast over a's rows
  Var affine(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }
  Var tanh(Var a);
  Var scale(Var a, double s);
  Var transpose(Var a);
  Var softmax_rows(Var a);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(Var a, Var b);
  Var mean_rows(Var a);
  Var gather_rows(Var table, std::vector<std::size_t> rows);
  Var reshape(Var a, std::size_t rows, std::size_t cols);

  /// Mean over rows of -log softmax(logits)[label].
  Var cross_entropy(Var logits, std::vector<int> labels);
  /// Mean squared error against a constant target of the same shape.
  Var mse(Var pred, const Tensor& target);
  /// |tau - 1(u < 0)| * u^2 for a 1x1 prediction.
  Var expectile(Var pred, double target, double tau, ExpectileSign sign = ExpectileSign::Intent);

  /// Escape hatch for ops defined outside this file. `backward` receives the
  /// output gradient and one (possibly null) gradient sink per input.
  using CustomBackward = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;
  Var custom(std::string op, std::vector<Var> inputs, Tensor value, CustomBackward backward);

  const Tensor& value(Var v) const;
  /// Gradient after backward(); zeros when the node took no gradient.
  Tensor grad(Var v) const;
  double scalar(Var v) const { return value(v)[0]; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Var loss);

 private:
  struct Node {
    std::string op;
    std::string label;
    Tensor own;
    const Tensor* ref = nullptr;
    Tensor grad;
    Tensor* param_grad = nullptr;  // slot in the Gradients buffer
    bool needs_grad = false;
    bool touched = false;
    std::function<void(Graph&, const Tensor&)> backward;
  };
  using Backward = std::function<void(Graph&, const Tensor& gout)>;

  Var push(std::string op, Tensor value, bool needs_grad, Backward backward);
  const Tensor& val(std::uint32_t id) const {
    const auto& n = nodes_[id];
    return n.ref ? *n.ref : n.own;
  }
  /// Gradient accumulator of a node, allocated on first use.
  Tensor& acc(std::uint32_t id);
  /// &acc(id) when the node takes gradient, else nullptr.
  Tensor* sink(std::uint32_t id) { return nodes_[id].needs_grad ? &acc(id) : nullptr; }

  const ParamStore* params_;
  Gradients* grads_;
  std::vector<Node> nodes_;
};

/// Learned projections of a single-head cross-attention block. The key
/// projection has no bias: it would add the same q.b to every score in a
/// row, which the row softmax cancels, so its gradient is identically zero.
struct AttentionParams {
  ParamId wq, bq, wk, wv, bv;
};

/// softmax((q Wq + bq)(k Wk)^T / sqrt(d)) (v Wv + bv).
Var cross_attention(Graph& g, Var queries, Var keys, Var values, const AttentionParams& p);

/// ln(1 + e^x) with the |x| > 20 branches.
double softplus(double x);
double expectile_loss(double pred, double target, double tau, ExpectileSign sign = ExpectileSign::Intent);

}  // namespace navlab::nn
