#include <cmath>
#include <numbers>

#include "doctest.h"
#include "seaget/autodiff.hpp"
#include "seaget/errors.hpp"
#include "seaget/optim.hpp"
#include "seaget/rng.hpp"
#include "seaget/sparse.hpp"
#include "support/gradcheck.hpp"
#include "support/op_cases.hpp"
#include "support/oracles.hpp"

using namespace seaget;
using seaget::testing::grad_check;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("matmul examples") {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(matmul(Tensor::identity(2), a) == a);
  CHECK(matmul(Tensor::from_rows({{1, 0}}), Tensor::from_rows({{2}, {5}})) == Tensor::from_rows({{2}}));

  Rng rng(7, RngStream::test);
  const Tensor x = random_tensor(rng, 3, 4);
  const Tensor y = random_tensor(rng, 4, 2);
  const Tensor got = matmul(x, y);
  const Tensor want = seaget::testing::naive_matmul(x, y);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("matmul shape error names both shapes") {
  try {
    matmul(Tensor(2, 3), Tensor(2, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("leaky_relu values and gradient") {
  Tape tape;
  Var y = ad::leaky_relu(tape.constant(Tensor::from_rows({{1.0, -1.0, 0.0}})), 0.2);
  CHECK(y.value() == Tensor::from_rows({{1.0, -0.2, 0.0}}));

  Parameter x("x", Tensor::from_rows({{-2.0}}));
  const auto r = grad_check({&x}, [&](Tape& t) { return ad::sum(ad::leaky_relu(t.param(x), 0.2)); });
  CHECK(x.grad(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(r.max_abs_error < 1e-6);
}

TEST_CASE("softmax_rows examples") {
  Tape tape;
  Var s = ad::softmax_rows(tape.constant(Tensor::from_rows({{0, 0, 0}, {1000, 0, 0}, {1, 2, 3}})));
  const Tensor& v = s.value();
  for (int j = 0; j < 3; ++j) CHECK(v(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(v(1, 0) == doctest::Approx(1.0));
  CHECK(v(1, 1) < 1e-300);
  CHECK(v.all_finite());
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(v(2, j) - std::exp(j + 1.0) / z) < 1e-12);
}

TEST_CASE("softmax_rows masked entries and fully masked rows") {
  Tape tape;
  const Mask allowed = {1, 0, 1, 0, 0, 0};
  Var s = ad::softmax_rows(tape.constant(Tensor::from_rows({{1, 5, 1}, {1, 2, 3}})), allowed);
  CHECK(s.value()(0, 0) == doctest::Approx(0.5));
  CHECK(s.value()(0, 1) == 0.0);
  for (int j = 0; j < 3; ++j) CHECK(s.value()(1, j) == 0.0);
}

TEST_CASE("layer_norm examples") {
  Tape tape;
  auto ln = [&](Tensor x, double gain, double bias) {
    Tensor g(1, x.cols(), gain), b(1, x.cols(), bias);
    return ad::layer_norm(tape.constant(std::move(x)), tape.constant(g), tape.constant(b)).value();
  };
  const Tensor constant = ln(Tensor::from_rows({{2, 2, 2}}), 1, 0);
  for (double v : constant.values()) CHECK(v == 0.0);
  const Tensor pair = ln(Tensor::from_rows({{1, 3}}), 1, 0);
  CHECK(pair(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(pair(0, 1) == doctest::Approx(1.0).epsilon(1e-4));
  const Tensor collapsed = ln(Tensor::from_rows({{4, -1, 7}}), 0, 5);
  for (double v : collapsed.values()) CHECK(v == 5.0);
  CHECK_THROWS_AS(ln(Tensor::from_rows({{1}}), 1, 0), ContractError);
}

TEST_CASE("dropout examples") {
  Rng rng(3, RngStream::dropout);
  Tape tape;
  Rng data(1, RngStream::test);
  Var x = tape.constant(random_tensor(data, 4, 5));
  CHECK(ad::dropout(x, 0.5, false, rng).value() == x.value());
  CHECK(ad::dropout(x, 0.0, true, rng).value() == x.value());
  CHECK_THROWS_AS(ad::dropout(x, 1.0, true, rng), ContractError);

  Var ones = tape.constant(Tensor(1, 100000, 1.0));
  const Tensor d = ad::dropout(ones, 0.3, true, rng).value();
  std::size_t survivors = 0;
  for (double v : d.values()) {
    if (v != 0.0) {
      ++survivors;
      CHECK(v == doctest::Approx(1.0 / 0.7));
    }
  }
  CHECK(std::abs(static_cast<double>(survivors) / 1e5 - 0.7) < 0.01);
}

TEST_CASE("cross_entropy examples") {
  Tape tape;
  const std::vector<std::size_t> targets = {2};
  const Mask valid = {1};
  CHECK(ad::cross_entropy(tape.constant(Tensor::from_rows({{0, 0, 800, 0}})), targets, valid).value()(0, 0) ==
        doctest::Approx(0.0));
  CHECK(ad::cross_entropy(tape.constant(Tensor(1, 4)), targets, valid).value()(0, 0) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));

  Rng rng(11, RngStream::test);
  const Tensor logits = random_tensor(rng, 3, 5, -3, 3);
  const std::vector<std::size_t> t3 = {4, 0, 2};
  const Mask m3 = {1, 0, 1};
  double want = 0.0;
  for (std::size_t r : {0u, 2u}) {
    double z = 0.0;
    for (std::size_t j = 0; j < 5; ++j) z += std::exp(logits(r, j));
    want += std::log(z) - logits(r, t3[r]);
  }
  want /= 2.0;
  CHECK(std::abs(ad::cross_entropy(tape.constant(logits), t3, m3).value()(0, 0) - want) < 1e-10);
  CHECK_THROWS_AS(ad::cross_entropy(tape.constant(logits), t3, Mask{0, 0, 0}), DegenerateError);
}

TEST_CASE("mse examples") {
  Tape tape;
  const Tensor t = Tensor::from_rows({{0.5}, {0.25}});
  CHECK(ad::mse(tape.constant(t), t, Mask{1, 1}).value()(0, 0) == 0.0);
  CHECK(ad::mse(tape.constant(Tensor::from_rows({{0.0}})), Tensor::from_rows({{2.0}}), Mask{1}).value()(0, 0) == 4.0);

  Rng rng(5, RngStream::test);
  const Tensor p = random_tensor(rng, 7, 1), q = random_tensor(rng, 7, 1);
  const Mask m = {1, 1, 0, 1, 1, 1, 0};
  double want = 0.0;
  for (std::size_t i = 0; i < 7; ++i)
    if (m[i]) want += (p[i] - q[i]) * (p[i] - q[i]);
  want /= 5.0;
  CHECK(std::abs(ad::mse(tape.constant(p), q, m).value()(0, 0) - want) < 1e-12);
  CHECK_THROWS_AS(ad::mse(tape.constant(p), q, Mask(7, 0)), DegenerateError);
}

TEST_CASE("backward examples") {
  Rng rng(2, RngStream::test);
  Parameter w("w", random_tensor(rng, 2, 3));
  {
    Tape tape;
    tape.backward(ad::sum(tape.param(w)));
  }
  for (double g : w.grad.values()) CHECK(g == 1.0);

  w.zero_grad();
  const Tensor x = Tensor::from_rows({{0.5}, {-1.5}, {2.0}});
  {
    Tape tape;
    tape.backward(ad::sum(ad::matmul(tape.param(w), tape.constant(x))));
  }
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(w.grad(r, c) == x(c, 0));

  Parameter unused("unused", random_tensor(rng, 2, 2));
  unused.zero_grad();
  Tape tape;
  Var loss = ad::sum(tape.param(w));
  tape.param(unused);
  tape.backward(loss);
  for (double g : unused.grad.values()) CHECK(g == 0.0);

  Tape other;
  CHECK_THROWS_AS(other.backward(other.param(w)), ContractError);
}

TEST_CASE("every differentiable op passes the finite-difference check") {
  const seaget::testing::OpSuite suite(19);
  CHECK(suite.cases().size() == 23);
  for (const auto& c : suite.cases()) {
    CAPTURE(c.name);
    const auto r = grad_check(c.params, c.loss);
    CAPTURE(r.worst);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("one-sided differences still catch a wrong backward") {
  Rng rng(23, RngStream::test);
  Parameter x("x", random_tensor(rng, 2, 3));
  // Forward x^2 with a backward that claims 3x.
  const auto wrong = [&](Tape& t) {
    Var v = t.param(x);
    Tensor sq = v.value();
    for (double& e : sq.values()) e *= e;
    Var y = t.record(std::move(sq), {v}, [v](Tape& tape, const Tensor& g) {
      Tensor& gx = tape.grad(v);
      const Tensor& xv = tape.value(v);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 3.0 * xv[i] * g[i];
    });
    return ad::sum(y);
  };
  CHECK(grad_check({&x}, wrong, 1e-4, 1e-6, true).max_rel_error > 0.3);

  // |x| has a kink at 0; a point 5e-5 away defeats the central difference only.
  Parameter k("k", Tensor::from_rows({{5e-5}}));
  const auto kinked = [&](Tape& t) { return ad::sum(ad::add(ad::relu(t.param(k)), ad::relu(ad::scale(t.param(k), -1.0)))); };
  const auto central = grad_check({&k}, kinked);
  const auto tolerant = grad_check({&k}, kinked, 1e-4, 1e-6, true);
  CHECK(central.max_rel_error > 0.1);
  CHECK(tolerant.max_rel_error < 1e-9);
  CHECK(tolerant.kink_entries == 1);
}

TEST_CASE("gather_rows rejects out-of-range ids") {
  Tape tape;
  const std::vector<std::size_t> ids = {3};
  CHECK_THROWS_AS(ad::gather_rows(tape.constant(Tensor(2, 2)), ids), ContractError);
}

TEST_CASE("adamw examples") {
  Parameter p("p", Tensor::from_rows({{1.0}}));
  std::vector<Parameter*> params = {&p};
  OptimizerState s;
  s.weight_decay = 0.0;
  p.zero_grad();
  adamw_step(params, s);
  CHECK(p.value(0, 0) == 1.0);
  CHECK(s.step == 1);

  OptimizerState decay;
  adamw_step(params, decay);
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 5e-7).epsilon(1e-15));

  Parameter w("w", Tensor::from_rows({{0.0}}));
  std::vector<Parameter*> wp = {&w};
  OptimizerState opt;
  opt.learning_rate = 0.05;
  double prev = 0.0;
  for (int i = 0; i < 50; ++i) {
    w.grad(0, 0) = 2.0 * (w.value(0, 0) - 3.0);
    adamw_step(wp, opt);
    CHECK(w.value(0, 0) > prev);
    CHECK(w.value(0, 0) < 3.0);
    prev = w.value(0, 0);
  }
}

TEST_CASE("adamw rejects a NaN gradient without touching parameters") {
  Parameter good("good", Tensor::from_rows({{1.0}}));
  Parameter bad("bad", Tensor::from_rows({{2.0}}));
  good.grad(0, 0) = 0.5;
  bad.grad(0, 0) = std::nan("");
  std::vector<Parameter*> params = {&good, &bad};
  OptimizerState s;
  try {
    adamw_step(params, s);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  CHECK(good.value(0, 0) == 1.0);
  CHECK(s.step == 0);
}

TEST_CASE("zero gradient decays by exactly 1 - lr*wd") {
  Rng rng(9, RngStream::test);
  Parameter p("p", random_tensor(rng, 3, 3));
  const Tensor before = p.value;
  p.zero_grad();
  std::vector<Parameter*> params = {&p};
  OptimizerState s;
  adamw_step(params, s);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(p.value[i] == before[i] * (1.0 - 1e-3 * 5e-4));
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(42, RngStream::shuffle), b(42, RngStream::shuffle), c(42, RngStream::dropout);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
  Rng u(1, RngStream::test);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(u.below(7) < 7);
  }
}

TEST_CASE("sparse matrix round trip and products") {
  Rng rng(4, RngStream::test);
  Tensor dense = random_tensor(rng, 5, 4);
  for (std::size_t i = 0; i < dense.size(); i += 3) dense[i] = 0.0;
  const CsrMatrix s = CsrMatrix::from_dense(dense);
  CHECK(s.to_dense() == dense);
  CHECK(s.transposed().to_dense() == dense.transposed());
  const Tensor x = random_tensor(rng, 4, 3);
  const Tensor got = spmm(s, x);
  const Tensor want = seaget::testing::naive_matmul(dense, x);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
  const CsrMatrix sq = spgemm(s, s.transposed());
  const Tensor want_sq = seaget::testing::naive_matmul(dense, dense.transposed());
  const Tensor got_sq = sq.to_dense();
  for (std::size_t i = 0; i < got_sq.size(); ++i) CHECK(got_sq[i] == doctest::Approx(want_sq[i]).epsilon(1e-14));
}
