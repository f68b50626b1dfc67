#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fairppm/autodiff.hpp"
#include "fairppm/error.hpp"

using namespace fairppm;
using namespace fairppm::nn;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

// Builds a scalar from parameters; `weights` fixes a random projection so every
// output entry contributes to the loss with a distinct coefficient.
using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

double eval(const Builder& f, const std::vector<Matrix>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.parameter(m));
  return tape.scalar(f(tape, vars));
}

// Max relative error between tape gradients and central differences.
double check_gradient(const Builder& f, std::vector<Matrix> inputs, double h = 1e-6) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.parameter(m));
  tape.backward(f(tape, vars));
  double worst = 0;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    const Matrix g = tape.grad(vars[p]);
    for (Eigen::Index k = 0; k < inputs[p].size(); ++k) {
      const double keep = inputs[p].data()[k];
      inputs[p].data()[k] = keep + h;
      const double up = eval(f, inputs);
      inputs[p].data()[k] = keep - h;
      const double down = eval(f, inputs);
      inputs[p].data()[k] = keep;
      worst = std::max(worst, rel_err(g.data()[k], (up - down) / (2 * h)));
    }
  }
  return worst;
}

Var project(Tape& tape, Var x, const Matrix& w) { return tape.sum(tape.mul(x, tape.constant(w))); }

}  // namespace

TEST_CASE("identity and square gradients") {
  Tape tape;
  Var w = tape.parameter(Matrix::Constant(1, 1, 3.0));
  tape.backward(w);
  CHECK(tape.grad(w)(0, 0) == 1.0);

  Tape t2;
  Var v = t2.parameter(Matrix::Constant(1, 1, 3.0));
  t2.backward(t2.mul(v, v));
  CHECK(t2.grad(v)(0, 0) == 6.0);
}

TEST_CASE("unused parameters get zero gradients and constants none") {
  Tape tape;
  Var used = tape.parameter(Matrix::Constant(2, 2, 1.0));
  Var unused = tape.parameter(Matrix::Constant(3, 1, 5.0));
  Var c = tape.constant(Matrix::Constant(2, 2, 2.0));
  tape.backward(tape.sum(tape.mul(used, c)));
  CHECK(tape.grad(unused).isZero());
  CHECK(tape.grad(unused).rows() == 3);
  CHECK(tape.grad(used).isApprox(Matrix::Constant(2, 2, 2.0)));
  CHECK_FALSE(tape.requires_grad(c));
}

TEST_CASE("backward visits each differentiable node once, in reverse") {
  Tape tape;
  Var a = tape.parameter(Matrix::Constant(1, 1, 0.5));
  Var b = tape.sigmoid(a);
  Var c = tape.mul(b, b);
  Var d = tape.add(c, b);
  tape.backward(d);
  // a is a leaf, so b, c and d propagate.
  CHECK(tape.backward_visits() == 3);
  const double s = 1.0 / (1.0 + std::exp(-0.5));
  CHECK(tape.grad(a)(0, 0) == doctest::Approx((2 * s + 1) * s * (1 - s)).epsilon(1e-14));
  // backward can be repeated: gradients are reset, not accumulated
  tape.backward(d);
  CHECK(tape.grad(a)(0, 0) == doctest::Approx((2 * s + 1) * s * (1 - s)).epsilon(1e-14));
}

TEST_CASE("shape errors") {
  Tape tape;
  Var a = tape.parameter(Matrix::Zero(2, 3));
  Var b = tape.parameter(Matrix::Zero(3, 2));
  CHECK_THROWS_AS(tape.add(a, b), ShapeError);
  CHECK_THROWS_AS(tape.matmul(a, a), ShapeError);
  CHECK_THROWS_AS(tape.slice_cols(a, 2, 2), ShapeError);
  CHECK_THROWS_AS(tape.gather_rows(a, {0, 2}), ShapeError);
  CHECK_THROWS_AS(tape.add_row(a, b), ShapeError);
}

TEST_CASE("every primitive matches central differences") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng() % 4);
    const Eigen::Index c = 1 + static_cast<Eigen::Index>(rng() % 4);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % 3);
    const Matrix wrc = random_matrix(rng, r, c);
    const Matrix wrk = random_matrix(rng, r, k);
    const Matrix wr2c = random_matrix(rng, r, 2 * c);
    std::vector<int> rows;
    for (Eigen::Index q = 0; q < r; ++q) rows.push_back(static_cast<int>(rng() % 3));
    std::vector<std::uint8_t> take(static_cast<std::size_t>(r));
    for (auto& t : take) t = rng() % 2;

    const Matrix A = random_matrix(rng, r, c), B = random_matrix(rng, r, c);
    const Matrix pos = random_matrix(rng, r, c, 0.2, 2.0);
    const Matrix M = random_matrix(rng, c, k);
    const Matrix row = random_matrix(rng, 1, c);
    const Matrix table = random_matrix(rng, 3, c);
    const Matrix inner = random_matrix(rng, r, c, -0.4, 0.4);

    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.add(v[0], v[1]), wrc); }, {A, B}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.sub(v[0], v[1]), wrc); }, {A, B}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.mul(v[0], v[1]), wrc); }, {A, B}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.matmul(v[0], v[1]), wrk); }, {A, M}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.add_row(v[0], v[1]), wrc); }, {A, row}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.affine(v[0], -2.5, 0.3), wrc); }, {A}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.sigmoid(v[0]), wrc); }, {A}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.tanh(v[0]), wrc); }, {A}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.log(v[0]), wrc); }, {pos}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.exp(v[0]), wrc); }, {A}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.clamp(v[0], -0.5, 0.5), wrc); }, {inner}) <
          1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.gather_rows(v[0], rows), wrc); }, {table}) <
          1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.concat_cols({v[0], v[1]}), wr2c); }, {A, B}) <
          1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.slice_cols(t.concat_cols({v[0], v[1]}), 1, c), wrc); },
                         {A, B}) < 1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return project(t, t.select_rows(take, v[0], v[1]), wrc); }, {A, B}) <
          1e-6);
    CHECK(check_gradient([&](Tape& t, auto& v) { return t.mean(t.mul(v[0], v[0])); }, {A}) < 1e-6);
  }
}

TEST_CASE("clamp passes gradient inside and blocks it outside") {
  Tape tape;
  Matrix x(1, 3);
  x << -2.0, 0.1, 2.0;
  Var v = tape.parameter(x);
  tape.backward(tape.sum(tape.clamp(v, -1.0, 1.0)));
  CHECK(tape.grad(v)(0, 0) == 0.0);
  CHECK(tape.grad(v)(0, 1) == 1.0);
  CHECK(tape.grad(v)(0, 2) == 0.0);
}

TEST_CASE("custom nodes receive the upstream gradient") {
  Tape tape;
  Var x = tape.parameter(Matrix::Constant(1, 1, 2.0));
  // f(x) = x^3 implemented as a custom node
  Var y = tape.custom({x}, Matrix::Constant(1, 1, 8.0), [x](Tape& t, const Matrix& up) {
    t.accumulate(x, up * 12.0);
  });
  tape.backward(tape.affine(y, 0.5, 0.0));
  CHECK(tape.grad(x)(0, 0) == 6.0);
}
