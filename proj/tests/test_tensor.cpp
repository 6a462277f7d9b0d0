#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "stattn/error.hpp"
#include "stattn/ops.hpp"
#include "stattn/optim.hpp"

using namespace stattn;
using test_util::random_tensor;
using test_util::values;

namespace {

// Central differences of f around the entries of x, computed without the tape.
std::vector<double> numeric_grad(const std::function<double()>& f, Tensor& x, double step = 1e-5) {
  std::vector<double> out(x.numel());
  auto data = x.mutable_data();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double keep = data[i];
    data[i] = keep + step;
    const double up = f();
    data[i] = keep - step;
    const double down = f();
    data[i] = keep;
    out[i] = (up - down) / (2 * step);
  }
  return out;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul examples") {
  Tape tape(false);
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor m({2, 2}, {1, 2, 3, 4});
  CHECK(values(ops::matmul(tape, eye, m)) == std::vector<double>{1, 2, 3, 4});

  const Tensor p({2, 2}, {1, 0, 0, 0});
  const Tensor col({2, 1}, {5, 7});
  const Tensor r = ops::matmul(tape, p, col);
  CHECK(r.shape() == Shape{2, 1});
  CHECK(values(r) == std::vector<double>{5, 0});
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tape tape;
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  try {
    ops::matmul(tape, a, b);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradients match central differences") {
  std::mt19937_64 rng(11);
  Tensor a = random_tensor({3, 4}, rng, -1, 1, true);
  Tensor b = random_tensor({4, 2}, rng, -1, 1, true);
  const Tensor w = random_tensor({3, 2}, rng);
  auto loss_of = [&](Tape& tape) { return ops::sum(tape, ops::mul(tape, ops::matmul(tape, a, b), w)); };
  Tape tape;
  tape.backward(loss_of(tape));
  auto f = [&] {
    Tape t(false);
    return loss_of(t).item();
  };
  const auto ga = numeric_grad(f, a);
  const auto gb = numeric_grad(f, b);
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(rel_error(a.grad()[i], ga[i]) < 1e-6);
  for (std::size_t i = 0; i < gb.size(); ++i) CHECK(rel_error(b.grad()[i], gb[i]) < 1e-6);
}

TEST_CASE("softmax examples") {
  Tape tape(false);
  CHECK(values(ops::softmax(tape, Tensor({2}, {0, 0}), 1)) == std::vector<double>{0.5, 0.5});
  CHECK(values(ops::softmax(tape, Tensor({1}, {3.7}), 1)) == std::vector<double>{1.0});
  const auto s = values(ops::softmax(tape, Tensor({3}, {1, 2, 3}), 1));
  const double total = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(std::exp(i + 1.0) / total).epsilon(1e-12));
  CHECK(s[0] == doctest::Approx(0.0900).epsilon(5e-4));
  CHECK(s[1] == doctest::Approx(0.2447).epsilon(5e-4));
  CHECK(s[2] == doctest::Approx(0.6652).epsilon(5e-4));
}

TEST_CASE("softmax sums to one along either axis and survives large inputs") {
  std::mt19937_64 rng(3);
  Tape tape(false);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_tensor({4, 5}, rng, -700, 700);
    for (int axis : {0, 1}) {
      const Tensor s = ops::softmax(tape, x, axis);
      const std::size_t outer = axis == 1 ? 4 : 5, inner = axis == 1 ? 5 : 4;
      for (std::size_t o = 0; o < outer; ++o) {
        double total = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
          const double v = axis == 1 ? s.at(o, i) : s.at(i, o);
          CHECK(v >= 0.0);
          total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("softmax rejects non-finite input and honours the mask") {
  Tape tape(false);
  CHECK_THROWS_AS(ops::softmax(tape, Tensor({2}, {0.0, NAN}), 1), Error);
  const Tensor s = ops::softmax(tape, Tensor({3}, {5, 1, 1}), 1, {false, true, true});
  CHECK(values(s) == std::vector<double>{0.0, 0.5, 0.5});
  CHECK_THROWS_AS(ops::softmax(tape, Tensor({2}, {1, 1}), 1, {false, false}), Error);
}

TEST_CASE("pointwise examples") {
  Tape tape(false);
  CHECK(ops::sigmoid(tape, Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ops::tanh(tape, Tensor::scalar(0.0)).item() == 0.0);
  CHECK(ops::sigmoid(tape, Tensor::scalar(2.0)).item() == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  CHECK(ops::sigmoid(tape, Tensor::scalar(2.0)).item() == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(values(ops::relu(tape, Tensor({3}, {-1, 0, 2}))) == std::vector<double>{0, 0, 2});
  CHECK(values(ops::scale(tape, Tensor({2}, {1, -2}), 3.0)) == std::vector<double>{3, -6});
  CHECK_THROWS_AS(ops::add(tape, Tensor::zeros({2}), Tensor::zeros({3})), Error);
  CHECK_THROWS_AS(ops::mul(tape, Tensor::zeros({2, 1}), Tensor::zeros({1, 2})), Error);
  CHECK(values(ops::scale_by(tape, Tensor({2}, {1, 2}), Tensor::scalar(-1.5))) == std::vector<double>{-1.5, -3});
}

TEST_CASE("elementwise op gradients match central differences") {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({2, 3}, rng, -2, 2, true);
  Tensor y = random_tensor({2, 3}, rng, -2, 2, true);
  Tensor s = Tensor::scalar(0.7, true);
  const Tensor w = random_tensor({2, 3}, rng);
  auto loss_of = [&](Tape& t) {
    Tensor a = ops::mul(t, ops::sigmoid(t, x), ops::tanh(t, y));
    Tensor b = ops::sub(t, ops::scale_by(t, a, s), ops::scale(t, ops::relu(t, y), 0.3));
    return ops::sum(t, ops::mul(t, ops::add(t, a, b), w));
  };
  Tape tape;
  tape.backward(loss_of(tape));
  auto f = [&] {
    Tape t(false);
    return loss_of(t).item();
  };
  for (Tensor* p : {&x, &y, &s}) {
    const auto g = numeric_grad(f, *p);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(rel_error(p->grad()[i], g[i]) < 1e-6);
  }
}

TEST_CASE("backward examples") {
  Tensor x = Tensor::zeros({2, 3}, true);
  {
    Tape tape;
    tape.backward(ops::sum(tape, x));
    CHECK(values(Tensor({6}, {x.grad().begin(), x.grad().end()})) == std::vector<double>(6, 1.0));
  }
  Tensor z = Tensor::filled({4}, 2.0, true);
  {
    Tape tape;
    tape.backward(ops::sum(tape, ops::scale(tape, z, 0.0)));
    for (double g : z.grad()) CHECK(g == 0.0);
  }
  Tape tape;
  CHECK_THROWS_AS(tape.backward(ops::scale(tape, x, 2.0)), Error);
}

TEST_CASE("leaf gradients accumulate until zeroed") {
  Tensor x = Tensor({2}, {1, 2}, true);
  for (int pass = 1; pass <= 3; ++pass) {
    Tape tape;
    tape.backward(ops::sum(tape, ops::mul(tape, x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2.0 * pass));
    CHECK(x.grad()[1] == doctest::Approx(4.0 * pass));
  }
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward is deterministic") {
  std::mt19937_64 rng(8);
  Tensor a = random_tensor({4, 4}, rng, -1, 1, true);
  Tensor b = random_tensor({4, 4}, rng, -1, 1, true);
  auto grads = [&] {
    a.zero_grad();
    b.zero_grad();
    Tape tape;
    Tensor s = ops::softmax(tape, ops::matmul(tape, a, ops::tanh(tape, b)), 1);
    tape.backward(ops::sum(tape, ops::mul(tape, s, s)));
    std::vector<double> out(a.grad().begin(), a.grad().end());
    out.insert(out.end(), b.grad().begin(), b.grad().end());
    return out;
  };
  CHECK(grads() == grads());
}

TEST_CASE("replaying the same tape twice gives identical gradients") {
  Tensor x = Tensor({3}, {0.1, -0.4, 0.9}, true);
  Tape tape;
  const Tensor loss = ops::sum(tape, ops::tanh(tape, ops::mul(tape, x, x)));
  tape.backward(loss);
  const std::vector<double> first(x.grad().begin(), x.grad().end());
  x.zero_grad();
  tape.backward(loss);
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == first);
}

TEST_CASE("sgd_step examples") {
  Tensor p = Tensor::scalar(1.0, true);
  {
    Tape tape;
    tape.backward(ops::scale(tape, p, 2.0));
  }
  sgd_step({{"p", p}}, 0.1);
  CHECK(p.item() == doctest::Approx(0.8));
  CHECK(p.grad()[0] == 0.0);

  Tensor q = Tensor({3}, {0.25, -1.5, 3.0}, true);
  {
    Tape tape;
    tape.backward(ops::sum(tape, ops::mul(tape, q, q)));
  }
  const auto before = values(q);
  sgd_step({{"q", q}}, 0.0);
  CHECK(values(q) == before);

  Tensor bare = Tensor::scalar(1.0, true);
  CHECK_THROWS_AS(sgd_step({{"bare", bare}}, 0.1), Error);
}

TEST_CASE("sgd on (p - 3)^2 contracts monotonically toward 3") {
  Tensor p = Tensor::scalar(0.0, true);
  double expected = 0.0;
  double prev_gap = 3.0;
  for (int step = 0; step < 10; ++step) {
    Tape tape;
    Tensor d = ops::sub(tape, p, Tensor::scalar(3.0));
    tape.backward(ops::mul(tape, d, d));
    sgd_step({{"p", p}}, 0.1);
    expected = 0.8 * expected + 0.6;
    CHECK(p.item() == doctest::Approx(expected).epsilon(1e-12));
    const double gap = 3.0 - p.item();
    CHECK(gap > 0.0);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("grad_check examples") {
  std::mt19937_64 rng(2);
  Tensor w = random_tensor({3, 4}, rng, -1, 1, true);
  const Tensor x = random_tensor({4, 1}, rng);
  const Tensor r = random_tensor({3, 1}, rng);
  const auto report = grad_check(
      [&](Tape& t) { return ops::sum(t, ops::mul(t, ops::matmul(t, w, x), r)); }, {{"w", w}});
  REQUIRE(report.entries.size() == 1);
  CHECK(report.max_rel_error() < 1e-7);
  CHECK(report.passed());

  const auto empty = grad_check([](Tape& t) { return ops::sum(t, Tensor::scalar(2.0)); }, {});
  CHECK(empty.entries.empty());
  CHECK(empty.passed());
}

TEST_CASE("grad_check flags a wrong gradient") {
  // A parameter used through a non-differentiable copy gets no gradient, so
  // the analytic side is zero while the numeric side is not.
  Tensor w = Tensor({2}, {0.5, -0.3}, true);
  const auto report = grad_check(
      [&](Tape& t) {
        const Tensor detached(w.shape(), {w.data().begin(), w.data().end()});
        return ops::sum(t, ops::add(t, ops::mul(t, detached, detached), ops::scale(t, w, 0.0)));
      },
      {{"w", w}});
  CHECK_FALSE(report.passed());
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), Error);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 6);
  Tensor shared = t;
  Tensor copy = t.clone();
  shared.mutable_data()[0] = 9;
  CHECK(t.at(0) == 9);
  CHECK(copy.at(0) == 1);
  CHECK_FALSE(Tensor({1}, {INFINITY}).all_finite());
}

}  // TEST_SUITE
