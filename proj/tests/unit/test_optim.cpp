#include <doctest.h>

#include <cmath>
#include <random>

#include "fairppm/optim.hpp"

using namespace fairppm::nn;

TEST_CASE("zero gradients only apply decoupled decay") {
  Matrix w = Matrix::Constant(2, 3, 0.7);
  AdamWState state;
  adamw_step({&w}, {Matrix::Zero(2, 3)}, state, 0.001);
  CHECK(w.isApprox(Matrix::Constant(2, 3, 0.7 * (1 - 1e-5)), 1e-15));
  CHECK(state.step == 1);
}

TEST_CASE("first step moves each weight by about lr against the gradient sign") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix w(1, 1), g(1, 1);
    w(0, 0) = u(rng);
    g(0, 0) = u(rng);
    if (std::abs(g(0, 0)) < 1e-3) continue;
    const double before = w(0, 0);
    AdamWState state;
    adamw_step({&w}, {g}, state, 0.01, cfg);
    CHECK(w(0, 0) - before == doctest::Approx(-0.01 * (g(0, 0) > 0 ? 1 : -1)).epsilon(1e-5));
  }
}

TEST_CASE("AdamW descends on w^2") {
  Matrix w = Matrix::Constant(1, 1, 1.0);
  AdamWState state;
  double prev = 1.0;
  for (int k = 0; k < 10; ++k) {
    adamw_step({&w}, {2.0 * w}, state, 0.1);
    CHECK(std::abs(w(0, 0)) < prev);
    prev = std::abs(w(0, 0));
  }
}

TEST_CASE("plateau scheduler") {
  PlateauScheduler improving(0.001);
  for (int k = 0; k < 40; ++k) CHECK(improving.step(1.0 - 0.01 * k) == 0.001);

  // the first epoch sets the reference; ten more without improvement reduce
  PlateauScheduler flat(0.001);
  for (int k = 0; k < 10; ++k) CHECK(flat.step(0.5) == 0.001);
  CHECK(flat.step(0.5) == doctest::Approx(0.00075));
  for (int k = 0; k < 9; ++k) flat.step(0.5);
  CHECK(flat.lr() == doctest::Approx(0.00075));
  CHECK(flat.step(0.5) == doctest::Approx(0.0005625));

  // an improvement of exactly 0.001 does not count
  PlateauScheduler edge(0.001);
  edge.step(1.0);
  for (int k = 0; k < 9; ++k) edge.step(0.999);
  CHECK(edge.step(0.999) == doctest::Approx(0.00075));

  // small gains below the margin do not move the reference either
  PlateauScheduler creep(0.001);
  creep.step(1.0);
  for (int k = 1; k <= 9; ++k) creep.step(1.0 - 0.0005 * k);
  CHECK(creep.step(1.0 - 0.0005 * 10) == 0.001);  // 0.005 below the reference: improvement
}

TEST_CASE("early stopping") {
  EarlyStopping flat(20);
  flat.step(1.0);
  int epochs = 1;
  while (!flat.should_stop()) {
    flat.step(1.0);
    ++epochs;
  }
  CHECK(epochs == 21);
  CHECK(flat.best_epoch() == 1);
  CHECK_FALSE(flat.hit_cap());

  EarlyStopping improving(20);
  for (int k = 0; k < 299; ++k) {
    CHECK(improving.step(1.0 / (k + 1)));
    CHECK_FALSE(improving.should_stop());
  }
  improving.step(1e-9);
  CHECK(improving.should_stop());
  CHECK(improving.hit_cap());
  CHECK(improving.epoch() == 300);

  // strict improvement resets the counter
  EarlyStopping reset(3, 100);
  reset.step(1.0);
  reset.step(1.0);
  reset.step(1.0);
  CHECK(reset.step(0.999999));
  reset.step(1.0);
  reset.step(1.0);
  CHECK_FALSE(reset.should_stop());
  reset.step(1.0);
  CHECK(reset.should_stop());
  CHECK(reset.best_epoch() == 4);
}

TEST_CASE("optimizer config JSON round-trip") {
  AdamWConfig cfg;
  cfg.beta1 = 0.8;
  cfg.weight_decay = 0.0;
  const auto back = AdamWConfig::from_json(cfg.to_json());
  CHECK(back.beta1 == 0.8);
  CHECK(back.weight_decay == 0.0);
  CHECK(back.beta2 == 0.999);
}
