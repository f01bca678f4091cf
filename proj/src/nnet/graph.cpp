#include "navlab/nnet/graph.hpp"

#include <algorithm>
#include <cmath>

#include "navlab/common.hpp"

namespace navlab::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("graph: ") + what);
}

}  // namespace

Graph::Graph(const ParamStore* params, Gradients* grads) : params_(params), grads_(grads) { nodes_.reserve(64); }

Var Graph::push(std::string op, Tensor value, bool needs_grad, Backward backward) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  if (!value.all_finite()) {
    throw NumericError("non-finite value in node " + std::to_string(id) + " (" + op + ")");
  }
  Node n;
  n.op = std::move(op);
  n.own = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {id};
}

Tensor& Graph::acc(std::uint32_t id) {
  auto& n = nodes_[id];
  n.touched = true;
  if (n.param_grad) return *n.param_grad;
  if (n.grad.empty()) n.grad = Tensor::zeros_like(val(id));
  return n.grad;
}

const Tensor& Graph::value(Var v) const { return val(v.id); }

Tensor Graph::grad(Var v) const {
  const auto& n = nodes_[v.id];
  if (n.param_grad) return *n.param_grad;
  return n.grad.empty() ? Tensor::zeros_like(val(v.id)) : n.grad;
}

Var Graph::input(Tensor value, std::string label) {
  auto v = push("input", std::move(value), false, nullptr);
  nodes_[v.id].label = std::move(label);
  return v;
}

Var Graph::param(ParamId id) {
  require(params_ != nullptr, "param() needs a ParamStore");
  const auto& group = params_->groups()[id.group];
  Node n;
  n.op = "param";
  n.label = group.name + "/" + group.params[id.index].name;
  n.ref = &params_->value(id);
  if (grads_) n.param_grad = grads_->slot(id);
  n.needs_grad = n.param_grad != nullptr;
  nodes_.push_back(std::move(n));
  return {static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(std::string_view group, std::string_view name) { return param(params_->find(group, name)); }

Var Graph::matmul(Var a, Var b) {
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  require(A.cols() == B.rows(), "matmul shape mismatch");
  return push("matmul", nn::matmul(A, B), needs_grad(a) || needs_grad(b), [a, b](Graph& g, const Tensor& gout) {
    const auto& A = g.val(a.id);
    const auto& B = g.val(b.id);
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    if (Tensor* ga = g.sink(a.id)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += gout(i, j) * B(p, j);
          (*ga)(i, p) += s;
        }
      }
    }
    if (Tensor* gb = g.sink(b.id)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A(i, p);
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) (*gb)(p, j) += av * gout(i, j);
        }
      }
    }
  });
}

Var Graph::add(Var a, Var b) {
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  require(A.same_shape(B), "add shape mismatch");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return push("add", std::move(out), needs_grad(a) || needs_grad(b), [a, b](Graph& g, const Tensor& gout) {
    for (auto id : {a.id, b.id}) {
      if (Tensor* s = g.sink(id)) {
        for (std::size_t i = 0; i < gout.size(); ++i) (*s)[i] += gout[i];
      }
    }
  });
}

Var Graph::add_row(Var a, Var row) {
  const auto& A = val(a.id);
  const auto& R = val(row.id);
  require(R.rows() == 1 && R.cols() == A.cols(), "add_row shape mismatch");
  Tensor out = A;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += R[j];
  }
  return push("add_row", std::move(out), needs_grad(a) || needs_grad(row), [a, row](Graph& g, const Tensor& gout) {
    if (Tensor* s = g.sink(a.id)) {
      for (std::size_t i = 0; i < gout.size(); ++i) (*s)[i] += gout[i];
    }
    if (Tensor* s = g.sink(row.id)) {
      for (std::size_t i = 0; i < gout.rows(); ++i) {
        for (std::size_t j = 0; j < gout.cols(); ++j) (*s)[j] += gout(i, j);
      }
    }
  });
}

Var Graph::tanh(Var a) {
  Tensor out = val(a.id);
  for (auto& v : out.data()) v = std::tanh(v);
  const auto self = static_cast<std::uint32_t>(nodes_.size());
  return push("tanh", std::move(out), needs_grad(a), [a, self](Graph& g, const Tensor& gout) {
    Tensor* s = g.sink(a.id);
    const auto& y = g.val(self);
    for (std::size_t i = 0; i < gout.size(); ++i) (*s)[i] += gout[i] * (1.0 - y[i] * y[i]);
  });
}

Var Graph::scale(Var a, double k) {
  Tensor out = val(a.id);
  for (auto& v : out.data()) v *= k;
  return push("scale", std::move(out), needs_grad(a), [a, k](Graph& g, const Tensor& gout) {
    Tensor* s = g.sink(a.id);
    for (std::size_t i = 0; i < gout.size(); ++i) (*s)[i] += k * gout[i];
  });
}

Var Graph::transpose(Var a) {
  const auto& A = val(a.id);
  Tensor out(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) out(j, i) = A(i, j);
  }
  return push("transpose", std::move(out), needs_grad(a), [a](Graph& g, const Tensor& gout) {
    Tensor* s = g.sink(a.id);
    for (std::size_t i = 0; i < gout.rows(); ++i) {
      for (std::size_t j = 0; j < gout.cols(); ++j) (*s)(j, i) += gout(i, j);
    }
  });
}

Var Graph::softmax_rows(Var a) {
  Tensor out = val(a.id);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double mx = out(i, 0);
    for (std::size_t j = 1; j < out.cols(); ++j) mx = std::max(mx, out(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < out.cols(); ++j) z += out(i, j) = std::exp(out(i, j) - mx);
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) /= z;
  }
  const auto self = static_cast<std::uint32_t>(nodes_.size());
  return push("softmax_rows", std::move(out), needs_grad(a), [a, self](Graph& g, const Tensor& gout) {
    Tensor* s = g.sink(a.id);
    const auto& y = g.val(self);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += gout(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) (*s)(i, j) += y(i, j) * (gout(i, j) - dot);
    }
  });
}

Var Graph::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const std::size_t cols = val(parts[0].id).cols();
  std::size_t rows = 0;
  bool ng = false;
  for (auto p : parts) {
    require(val(p.id).cols() == cols, "concat_rows column mismatch");
    rows += val(p.id).rows();
    ng = ng || needs_grad(p);
  }
  Tensor out(rows, cols);
  std::size_t r0 = 0;
  for (auto p : parts) {
    const auto& P = val(p.id);
    std::copy(P.data().begin(), P.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(r0 * cols));
    r0 += P.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return push("concat_rows", std::move(out), ng, [ps](Graph& g, const Tensor& gout) {
    std::size_t off = 0;
    for (auto p : ps) {
      const std::size_t n = g.val(p.id).size();
      if (Tensor* s = g.sink(p.id)) {
        for (std::size_t i = 0; i < n; ++i) (*s)[i] += gout[off + i];
      }
      off += n;
    }
  });
}

Var Graph::concat_cols(Var a, Var b) {
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  require(A.rows() == B.rows(), "concat_cols row mismatch");
  const std::size_t ca = A.cols(), cb = B.cols();
  Tensor out(A.rows(), ca + cb);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < ca; ++j) out(i, j) = A(i, j);
    for (std::size_t j = 0; j < cb; ++j) out(i, ca + j) = B(i, j);
  }
  return push("concat_cols", std::move(out), needs_grad(a) || needs_grad(b), [a, b, ca, cb](Graph& g, const Tensor& gout) {
    if (Tensor* s = g.sink(a.id)) {
      for (std::size_t i = 0; i < gout.rows(); ++i) {
        for (std::size_t j = 0; j < ca; ++j) (*s)(i, j) += gout(i, j);
      }
    }
    if (Tensor* s = g.sink(b.id)) {
      for (std::size_t i = 0; i < gout.rows(); ++i) {
        for (std::size_t j = 0; j < cb; ++j) (*s)(i, j) += gout(i, ca + j);
      }
    }
  });
}

Var Graph::mean_rows(Var a) {
  const auto& A = val(a.id);
  require(A.rows() > 0, "mean_rows of empty tensor");
  Tensor out(1, A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) out[j] += A(i, j);
  }
  const double inv = 1.0 / static_cast<double>(A.rows());
  for (auto& v : out.data()) v *= inv;
  return push("mean_rows", std::move(out), needs_grad(a), [a, inv](Graph& g, const Tensor& gout) {
    Tensor* s = g.sink(a.id);
    for (std::size_t i = 0; i < s->rows(); ++i) {
      for (std::size_t j = 0; j < s->cols(); ++j) (*s)(i, j) += inv * gout[j];
    }
  });
}

Var Graph::gather_rows(Var table, std::vector<std::size_t> rows) {
  const auto& T = val(table.id);
  Tensor out(rows.size(), T.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < T.rows(), "gather_rows index out of range");
    for (std::size_t j = 0; j < T.cols(); ++j) out(i, j) = T(rows[i], j);
  }
  return push("gather_rows", std::move(out), needs_grad(table), [table, rows](Graph& g, const Tensor& gout) {
    Tensor* s = g.sink(table.id);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < gout.cols(); ++j) (*s)(rows[i], j) += gout(i, j);
    }
  });
}

Var Graph::reshape(Var a, std::size_t rows, std::size_t cols) {
  Tensor out = val(a.id);
  out.reshape(rows, cols);
  return push("reshape", std::move(out), needs_grad(a), [a](Graph& g, const Tensor& gout) {
    Tensor* s = g.sink(a.id);
    for (std::size_t i = 0; i < gout.size(); ++i) (*s)[i] += gout[i];
  });
}

Var Graph::cross_entropy(Var logits, std::vector<int> labels) {
  const auto& X = val(logits.id);
  require(labels.size() == X.rows(), "cross_entropy label count mismatch");
  Tensor probs(X.rows(), X.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < X.cols(), "cross_entropy label out of range");
    double mx = X(i, 0);
    for (std::size_t j = 1; j < X.cols(); ++j) mx = std::max(mx, X(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < X.cols(); ++j) z += probs(i, j) = std::exp(X(i, j) - mx);
    for (std::size_t j = 0; j < X.cols(); ++j) probs(i, j) /= z;
    loss += mx + std::log(z) - X(i, static_cast<std::size_t>(labels[i]));
  }
  const double inv = 1.0 / static_cast<double>(X.rows());
  Tensor out(1, 1, loss * inv);
  return push("cross_entropy", std::move(out), needs_grad(logits),
              [logits, labels = std::move(labels), probs = std::move(probs), inv](Graph& g, const Tensor& gout) {
                Tensor* s = g.sink(logits.id);
                const double k = gout[0] * inv;
                for (std::size_t i = 0; i < probs.rows(); ++i) {
                  for (std::size_t j = 0; j < probs.cols(); ++j) {
                    const double onehot = static_cast<int>(j) == labels[i] ? 1.0 : 0.0;
                    (*s)(i, j) += k * (probs(i, j) - onehot);
                  }
                }
              });
}

Var Graph::mse(Var pred, const Tensor& target) {
  const auto& P = val(pred.id);
  require(P.size() == target.size(), "mse size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) loss += (P[i] - target[i]) * (P[i] - target[i]);
  const double inv = 1.0 / static_cast<double>(P.size());
  return push("mse", Tensor(1, 1, loss * inv), needs_grad(pred), [pred, target, inv](Graph& g, const Tensor& gout) {
    Tensor* s = g.sink(pred.id);
    const auto& P = g.val(pred.id);
    for (std::size_t i = 0; i < P.size(); ++i) (*s)[i] += gout[0] * 2.0 * inv * (P[i] - target[i]);
  });
}

Var Graph::expectile(Var pred, double target, double tau, ExpectileSign sign) {
  const auto& P = val(pred.id);
  require(P.size() == 1, "expectile expects a scalar prediction");
  require(tau > 0.0 && tau < 1.0, "expectile tau outside (0,1)");
  const double p = P[0];
  return push("expectile", Tensor(1, 1, expectile_loss(p, target, tau, sign)), needs_grad(pred),
              [pred, target, tau, sign](Graph& g, const Tensor& gout) {
                const double p = g.val(pred.id)[0];
                // d/dp of w*u^2 where u = +-(target - p).
                const double u = sign == ExpectileSign::Intent ? target - p : p - target;
                const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
                const double du_dp = sign == ExpectileSign::Intent ? -1.0 : 1.0;
                (*g.sink(pred.id))[0] += gout[0] * 2.0 * w * u * du_dp;
              });
}

Var Graph::custom(std::string op, std::vector<Var> inputs, Tensor value, CustomBackward backward) {
  bool ng = false;
  for (auto v : inputs) ng = ng || needs_grad(v);
  return push(std::move(op), std::move(value), ng,
              [inputs = std::move(inputs), backward = std::move(backward)](Graph& g, const Tensor& gout) {
                std::vector<Tensor*> sinks;
                sinks.reserve(inputs.size());
                for (auto v : inputs) sinks.push_back(g.sink(v.id));
                backward(gout, sinks);
              });
}

void Graph::backward(Var loss) {
  require(val(loss.id).size() == 1, "backward() needs a scalar loss");
  if (!nodes_[loss.id].needs_grad) return;
  acc(loss.id)[0] += 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad || !n.touched || !n.backward) continue;
    n.backward(*this, n.grad);
    if (!n.grad.all_finite()) {
      throw NumericError("non-finite gradient at node " + std::to_string(i) + " (" + n.op + ")");
    }
  }
}

Var cross_attention(Graph& g, Var queries, Var keys, Var values, const AttentionParams& p) {
  const Var q = g.affine(queries, g.param(p.wq), g.param(p.bq));
  const Var k = g.matmul(keys, g.param(p.wk));
  const Var v = g.affine(values, g.param(p.wv), g.param(p.bv));
  const double d = static_cast<double>(g.value(q).cols());
  const Var scores = g.scale(g.matmul(q, g.transpose(k)), 1.0 / std::sqrt(d));
  return g.matmul(g.softmax_rows(scores), v);
}

double softplus(double x) {
  if (x > 20.0) return x + std::log1p(std::exp(-x));
  if (x < -20.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double expectile_loss(double pred, double target, double tau, ExpectileSign sign) {
  const double u = sign == ExpectileSign::Intent ? target - pred : pred - target;
  const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
  return w * u * u;
}

}  // namespace navlab::nn
