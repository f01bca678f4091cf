#include <doctest.h>

#include <cmath>
#include <sstream>

#include "navlab/common.hpp"
#include "navlab/nnet/gradcheck.hpp"
#include "navlab/nnet/graph.hpp"
#include "navlab/nnet/optim.hpp"
#include "support/oracles.hpp"

using namespace navlab;
using namespace navlab::oracle;
using namespace navlab::nn;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double a = 1.0) {
  Tensor t(r, c);
  for (auto& v : t.data()) v = (2.0 * uniform01(rng) - 1.0) * a;
  return t;
}

ParamStore attention_store(Rng& rng, std::size_t d) {
  ParamStore ps;
  ps.add_group("att");
  ps.add("att", "wq", random_tensor(rng, d, d));
  ps.add("att", "bq", random_tensor(rng, 1, d));
  ps.add("att", "wk", random_tensor(rng, d, d));
  ps.add("att", "wv", random_tensor(rng, d, d));
  ps.add("att", "bv", random_tensor(rng, 1, d));
  return ps;
}

AttentionParams ids(const ParamStore& ps) {
  return {ps.find("att", "wq"), ps.find("att", "bq"), ps.find("att", "wk"), ps.find("att", "wv"), ps.find("att", "bv")};
}

double log_sum_exp(const std::vector<double>& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

TEST_CASE("affine with half squared norm has the closed-form gradient") {
  Rng rng(1);
  ParamStore ps;
  ps.add_group("lin");
  const auto w = ps.add("lin", "w", random_tensor(rng, 3, 2));
  const Tensor x = random_tensor(rng, 1, 3);
  Gradients grads(ps);
  Graph g(&ps, &grads);
  const Var y = g.matmul(g.input(x), g.param(w));
  // Mean over two squares is exactly half the squared norm.
  g.backward(g.mse(y, Tensor(1, 2)));
  const Tensor yv = g.value(y);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(grads.get(w, i * 2 + j) == doctest::Approx(x[i] * yv[j]).epsilon(1e-12));
}

TEST_CASE("frozen groups receive no gradient and no update") {
  Rng rng(2);
  ParamStore ps;
  ps.add_group("a");
  ps.add_group("b", true);
  const auto wa = ps.add("a", "w", random_tensor(rng, 2, 2));
  const auto wb = ps.add("b", "w", random_tensor(rng, 2, 2));
  Gradients grads(ps);
  CHECK(grads.slot(wb) == nullptr);
  Graph g(&ps, &grads);
  const Var y = g.matmul(g.matmul(g.input(random_tensor(rng, 1, 2)), g.param(wa)), g.param(wb));
  g.backward(g.mse(y, Tensor(1, 2, 1.0)));
  for (std::size_t i = 0; i < 4; ++i) CHECK(grads.get(wb, i) == 0.0);
  const auto before = ps.checksum("b");
  const auto before_a = ps.checksum("a");
  Adam opt;
  opt.step(ps, grads);
  CHECK(ps.checksum("b") == before);
  CHECK(ps.checksum("a") != before_a);
}

TEST_CASE("optimizer examples") {
  ParamStore ps;
  ps.add_group("p");
  const auto w = ps.add("p", "w", Tensor::row_vector({1.0}));
  Gradients grads(ps);
  Adam opt(AdamConfig{0.1});
  opt.step(ps, grads);
  CHECK(ps.value(w)[0] == 1.0);  // zero gradient, zero move
  // f(w) = w^2 / 2 has gradient w.
  *grads.slot(w) = Tensor::row_vector({ps.value(w)[0]});
  opt.step(ps, grads);
  CHECK(std::abs(ps.value(w)[0]) < 1.0);

  ParamStore a = ps, b = ps;
  Adam oa(AdamConfig{0.1}), ob(AdamConfig{0.1});
  oa.step(a, grads);
  ob.step(b, grads);
  CHECK(a.checksum("p") == b.checksum("p"));
}

TEST_CASE("softmax rows sum to one and ignore row shifts") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor z = random_tensor(rng, 4, 7, 30.0);
    Tensor shifted = z;
    for (std::size_t r = 0; r < 4; ++r) {
      const double c = uniform01(rng) * 200 - 100;
      for (std::size_t k = 0; k < 7; ++k) shifted(r, k) += c;
    }
    Graph g;
    const Tensor a = g.value(g.softmax_rows(g.input(z)));
    const Tensor b = g.value(g.softmax_rows(g.input(shifted)));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 7; ++k) {
        s += a(r, k);
        CHECK(std::abs(a(r, k) - b(r, k)) <= 1e-12);
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("cross entropy equals a log-sum-exp oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor z = random_tensor(rng, 4, 4, 5.0);
    std::vector<int> labels(4);
    double want = 0;
    for (std::size_t r = 0; r < 4; ++r) {
      labels[r] = static_cast<int>(uniform_index(rng, 4));
      std::vector<double> row{z(r, 0), z(r, 1), z(r, 2), z(r, 3)};
      want += log_sum_exp(row) - row[labels[r]];
    }
    Graph g;
    CHECK(g.scalar(g.cross_entropy(g.input(z), labels)) == doctest::Approx(want / 4).epsilon(1e-12));
  }
}

TEST_CASE("softplus") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  for (double x : {-700.0, -50.0, -20.5, -1.0, 0.5, 19.9, 20.1, 50.0, 700.0}) {
    CHECK(softplus(x) > 0.0);
    CHECK(std::isfinite(softplus(x)));
  }
  CHECK(softplus(5.0) == doctest::Approx(std::log1p(std::exp(5.0))).epsilon(1e-14));
}

TEST_CASE("expectile loss and its minimizer") {
  for (double u : {-3.0, -0.5, 0.0, 0.7, 4.0}) CHECK(expectile_loss(0.0, u, 0.5) == 0.5 * u * u);
  const std::vector<double> ys{0, 0, 0, 10};
  for (auto [tau, want] : {std::pair{0.5, 2.5}, std::pair{0.9, 7.5}}) {
    auto total = [&](double m) {
      double s = 0;
      for (double y : ys) s += expectile_loss(m, y, tau);
      return s;
    };
    CHECK(std::abs(minimize_1d(total, -5, 15) - want) <= 1e-3);
  }
  // The literal sign convention mirrors the minimizer around the mean.
  auto literal = [&](double m) {
    double s = 0;
    for (double y : ys) s += expectile_loss(m, y, 0.9, ExpectileSign::Literal);
    return s;
  };
  CHECK(minimize_1d(literal, -5, 15) < 2.5);
}

TEST_CASE("cross attention examples") {
  Rng rng(5);
  const std::size_t d = 6;
  auto ps = attention_store(rng, d);
  const auto p = ids(ps);
  const Tensor q = random_tensor(rng, 3, d);
  const Tensor k1 = random_tensor(rng, 1, d);
  Tensor kk(2, d);
  for (std::size_t j = 0; j < d; ++j) kk(0, j) = kk(1, j) = k1[j];
  const Tensor v2 = random_tensor(rng, 2, d);
  {
    Graph g(&ps);
    const Tensor out = g.value(cross_attention(g, g.input(q), g.input(kk), g.input(v2), p));
    Graph h(&ps);
    const Var vproj = h.affine(h.input(v2), h.param(p.wv), h.param(p.bv));
    const Tensor mean = h.value(h.mean_rows(vproj));
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(out(r, j) - mean[j]) <= 1e-12);
  }
  {
    Graph g(&ps);
    const Tensor v1 = random_tensor(rng, 1, d);
    const Tensor out = g.value(cross_attention(g, g.input(q), g.input(k1), g.input(v1), p));
    const Tensor vp = g.value(g.affine(g.input(v1), g.param(p.wv), g.param(p.bv)));
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(out(r, j) - vp[j]) <= 1e-12);
  }
  {
    const Tensor k = random_tensor(rng, 5, d), v = random_tensor(rng, 5, d);
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    Tensor kp(5, d), vp(5, d);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        kp(i, j) = k(perm[i], j);
        vp(i, j) = v(perm[i], j);
      }
    Graph g(&ps);
    const Tensor a = g.value(cross_attention(g, g.input(q), g.input(k), g.input(v), p));
    const Tensor b = g.value(cross_attention(g, g.input(q), g.input(kp), g.input(vp), p));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  }
}

TEST_CASE("gradient check: affine-only graph is exact to rounding") {
  Rng rng(6);
  ParamStore ps;
  ps.add_group("lin");
  const auto w = ps.add("lin", "w", random_tensor(rng, 4, 3));
  const auto b = ps.add("lin", "b", random_tensor(rng, 1, 3));
  const Tensor x = random_tensor(rng, 2, 4);
  const auto report = grad_check(
      [&](Graph& g) { return g.mean_rows(g.reshape(g.affine(g.input(x), g.param(w), g.param(b)), 6, 1)); }, ps);
  CHECK(report.passed);
  CHECK(report.max_rel_err < 1e-8);
}

TEST_CASE("gradient check: random three-layer graph with attention") {
  Rng rng(7);
  const std::size_t d = 5;
  auto ps = attention_store(rng, d);
  ps.add_group("mlp");
  const auto w1 = ps.add("mlp", "w1", random_tensor(rng, d, 8));
  const auto b1 = ps.add("mlp", "b1", random_tensor(rng, 1, 8));
  const auto w2 = ps.add("mlp", "w2", random_tensor(rng, 8, 4));
  const auto b2 = ps.add("mlp", "b2", random_tensor(rng, 1, 4));
  const Tensor q = random_tensor(rng, 3, d), kv = random_tensor(rng, 4, d);
  const auto p = ids(ps);
  const auto original = ps.checksum("mlp");
  const auto report = grad_check(
      [&](Graph& g) {
        const Var a = cross_attention(g, g.input(q), g.input(kv), g.input(kv), p);
        const Var h = g.tanh(g.affine(a, g.param(w1), g.param(b1)));
        const Var z = g.affine(h, g.param(w2), g.param(b2));
        return g.add(g.cross_entropy(z, {0, 3, 1}), g.mse(g.transpose(z), Tensor(4, 3, 0.25)));
      },
      ps);
  CHECK(report.passed);
  CHECK(report.max_rel_err <= 1e-4);
  CHECK(ps.checksum("mlp") == original);
}

TEST_CASE("gradient check catches a corrupted backward rule") {
  Rng rng(8);
  ParamStore ps;
  ps.add_group("p");
  const auto w = ps.add("p", "w", random_tensor(rng, 1, 4));
  const auto report = grad_check(
      [&](Graph& g) {
        const Var x = g.param(w);
        Tensor sq = g.value(x);
        for (auto& v : sq.data()) v = v * v;
        // d(x^2)/dx is 2x; deliberately report 3x.
        const Var y = g.custom("bad_square", {x}, sq, [&, x](const Tensor& gout, std::span<Tensor* const> gin) {
          if (!gin[0]) return;
          for (std::size_t i = 0; i < gout.size(); ++i) (*gin[0])[i] += 3.0 * g.value(x)[i] * gout[i];
        });
        return g.mean_rows(g.reshape(y, 4, 1));
      },
      ps);
  CHECK_FALSE(report.passed);
}

TEST_CASE("non-finite values raise a numeric error naming the node") {
  Graph g;
  const Var a = g.input(Tensor::row_vector({1.0, 2.0}), "big");
  try {
    g.scale(a, std::numeric_limits<double>::infinity());
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("scale") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(9);
  ParamStore ps;
  ps.add_group("a");
  ps.add_group("b", true);
  ps.add("a", "w", random_tensor(rng, 3, 5));
  ps.add("b", "v", random_tensor(rng, 1, 7));
  std::stringstream buf;
  ps.write(buf);
  const auto back = ParamStore::read(buf);
  CHECK(back.checksum("a") == ps.checksum("a"));
  CHECK(back.checksum("b") == ps.checksum("b"));
  CHECK(back.group("b").frozen);
  CHECK_FALSE(back.group("a").frozen);
  std::stringstream bad("NOPE");
  CHECK_THROWS_AS(ParamStore::read(bad), FormatError);
}
