#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fairppm/error.hpp"
#include "fairppm/transport.hpp"

using namespace fairppm;
using transport::SinkhornConfig;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// W1 through the quantile functions: integral over u of |Qa(u) - Qb(u)|,
// piecewise constant between the breakpoints k/n and l/m.
double quantile_w1(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> cuts{0.0, 1.0};
  for (std::size_t k = 1; k < a.size(); ++k) cuts.push_back(double(k) / double(a.size()));
  for (std::size_t k = 1; k < b.size(); ++k) cuts.push_back(double(k) / double(b.size()));
  std::sort(cuts.begin(), cuts.end());
  double total = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k], hi = cuts[k + 1];
    if (hi <= lo) continue;
    const double mid = 0.5 * (lo + hi);
    const double qa = a[std::min(a.size() - 1, std::size_t(mid * double(a.size())))];
    const double qb = b[std::min(b.size() - 1, std::size_t(mid * double(b.size())))];
    total += std::abs(qa - qb) * (hi - lo);
  }
  return total;
}

struct Dense {
  double value = 0;
  int iterations = 0;
};

double lse(const std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

// Straightforward log-domain Sinkhorn on the full n x m cost matrix, with the
// same argument convention (shorter sample first, then lexicographically
// smaller sorted sample) and the same stopping rule.
Dense dense_sinkhorn(std::vector<double> a, std::vector<double> b, const SinkhornConfig& cfg) {
  auto sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (a.size() > b.size() || (a.size() == b.size() && sb < sa)) std::swap(a, b);
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<double>> D(n, std::vector<double>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) D[i][j] = std::abs(a[i] - b[j]) / cfg.epsilon;
  const double la = -std::log(double(n)), lb = -std::log(double(m));

  std::vector<double> alpha(n), beta(m, lb), next(n), tmp;
  auto row_update = [&](std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      tmp.assign(m, 0);
      for (std::size_t j = 0; j < m; ++j) tmp[j] = beta[j] - D[i][j];
      out[i] = la - lse(tmp);
    }
  };
  row_update(alpha);
  Dense out;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      tmp.assign(n, 0);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = alpha[i] - D[i][j];
      beta[j] = lb - lse(tmp);
    }
    row_update(next);
    double viol = 0;
    for (std::size_t i = 0; i < n; ++i) viol += std::abs(std::exp(alpha[i] - next[i]) - 1.0) / double(n);
    out.iterations = k;
    if (cfg.convergence_tol > 0 && viol < cfg.convergence_tol) break;
    if (k < cfg.max_iters) alpha = next;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.value += std::exp(alpha[i] + beta[j] - D[i][j]) * std::abs(a[i] - b[j]);
  return out;
}

}  // namespace

TEST_CASE("exact W1 on small examples") {
  std::vector<double> a{0.2}, b{0.7};
  CHECK(transport::exact_w1_1d(a, b) == doctest::Approx(0.5).epsilon(1e-15));
  std::vector<double> c{0.1, 0.3}, d{0.2, 0.6};
  CHECK(transport::exact_w1_1d(c, d) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(transport::exact_w1_1d(c, c) == 0.0);
  CHECK_THROWS_AS(transport::exact_w1_1d({}, d), ShapeError);
}

TEST_CASE("exact W1 matches sorted matching and the quantile integral") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 60);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::size_t(size(rng));
    auto a = uniform(rng, n);
    if (trial % 2 == 0) {
      auto b = uniform(rng, n);
      auto sa = a, sb = b;
      std::sort(sa.begin(), sa.end());
      std::sort(sb.begin(), sb.end());
      double mean = 0;
      for (std::size_t k = 0; k < n; ++k) mean += std::abs(sa[k] - sb[k]) / double(n);
      CHECK(std::abs(transport::exact_w1_1d(a, b) - mean) < 1e-12);
    } else {
      auto b = uniform(rng, std::size_t(size(rng)));
      CHECK(std::abs(transport::exact_w1_1d(a, b) - quantile_w1(a, b)) < 1e-12);
    }
  }
}

TEST_CASE("sinkhorn forced plan and identity bound") {
  SinkhornConfig cfg;
  for (double eps : {0.1, 0.01, 0.001}) {
    cfg.epsilon = eps;
    auto r = transport::sinkhorn(std::vector<double>{0.2}, std::vector<double>{0.7}, cfg);
    CHECK(std::abs(r.value - 0.5) < 1e-12);
    CHECK(r.converged);
  }
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = uniform(rng, 1 + trial % 40);
    cfg.epsilon = trial % 2 ? 0.01 : 0.05;
    auto r = transport::sinkhorn(a, a, cfg);
    CHECK(r.value >= 0.0);
    CHECK(r.value <= cfg.epsilon * std::log(double(a.size())) + 1e-6);
  }
}

TEST_CASE("sinkhorn agrees with the dense log-domain oracle") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 40);
  const double eps_values[] = {0.1, 0.03, 0.01};
  for (int trial = 0; trial < 120; ++trial) {
    SinkhornConfig cfg;
    cfg.epsilon = eps_values[trial % 3];
    auto a = uniform(rng, std::size_t(size(rng)));
    auto b = uniform(rng, std::size_t(size(rng)), 0.2, 0.9);
    if (trial % 10 == 0) b = a;  // ties everywhere
    if (trial % 10 == 1) b.assign(b.size(), 0.5);
    const auto fast = transport::sinkhorn(a, b, cfg);
    const auto dense = dense_sinkhorn(a, b, cfg);
    CHECK(fast.iterations == dense.iterations);
    CHECK(std::abs(fast.value - dense.value) <= 1e-10 * std::max(1.0, dense.value));
  }
}

TEST_CASE("sinkhorn is symmetric and translation invariant") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> size(1, 80);
  for (int trial = 0; trial < 100; ++trial) {
    SinkhornConfig cfg;
    cfg.epsilon = trial % 2 ? 0.01 : 0.003;
    auto a = uniform(rng, std::size_t(size(rng)));
    auto b = uniform(rng, trial % 5 == 0 ? a.size() : std::size_t(size(rng)));
    const double ab = transport::sinkhorn(a, b, cfg).value;
    CHECK(std::abs(ab - transport::sinkhorn(b, a, cfg).value) <= 1e-9);
    const double shift = std::uniform_real_distribution<double>(-3.0, 3.0)(rng);
    for (auto& x : a) x += shift;
    for (auto& x : b) x += shift;
    CHECK(std::abs(ab - transport::sinkhorn(a, b, cfg).value) <= 1e-9);
  }
}

TEST_CASE("sinkhorn approaches exact W1 as epsilon shrinks") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = uniform(rng, 30), b = uniform(rng, 30);
    const double exact = transport::exact_w1_1d(a, b);
    double prev = INFINITY;
    for (double eps : {0.1, 0.01, 0.001}) {
      // At eps = 1e-3 the marginal violation decays slowly, but the cost is
      // already close to its limit long before the tolerance is reached.
      SinkhornConfig cfg{eps, 20000, 1e-9};
      const auto r = transport::sinkhorn(a, b, cfg);
      const double err = std::abs(r.value - exact);
      CHECK(err <= prev + 1e-6);
      prev = err;
    }
    CHECK(prev / exact < 0.05);
  }
}

TEST_CASE("sinkhorn tracks a shift of one well-separated sample") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = uniform(rng, 20, 0.0, 0.2), b = uniform(rng, 25, 0.5, 0.7);
    const double delta = std::uniform_real_distribution<double>(0.05, 0.2)(rng);
    SinkhornConfig cfg;
    const double before = transport::sinkhorn(a, b, cfg).value;
    for (auto& x : b) x += delta;
    const double after = transport::sinkhorn(a, b, cfg).value;
    CHECK(std::abs((after - before) - delta) <= 0.1 * delta);
  }
}

TEST_CASE("sinkhorn gradients match central differences of the dense oracle") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> size(1, 8);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    // A fixed iteration count keeps the map smooth under perturbation.
    SinkhornConfig cfg{trial % 2 ? 0.1 : 0.03, 60, 0.0};
    auto a = uniform(rng, std::size_t(size(rng)));
    auto b = uniform(rng, std::size_t(size(rng)));
    const auto r = transport::sinkhorn(a, b, cfg, true);
    REQUIRE(r.grad_a.size() == a.size());
    REQUIRE(r.grad_b.size() == b.size());
    auto fd = [&](std::vector<double>& v, std::size_t k) {
      const double keep = v[k];
      v[k] = keep + h;
      const double up = dense_sinkhorn(a, b, cfg).value;
      v[k] = keep - h;
      const double down = dense_sinkhorn(a, b, cfg).value;
      v[k] = keep;
      return (up - down) / (2 * h);
    };
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(rel_err(r.grad_a[k], fd(a, k)) < 1e-4);
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(rel_err(r.grad_b[k], fd(b, k)) < 1e-4);
  }
}

TEST_CASE("sinkhorn on the tape scales its gradient by the upstream adjoint") {
  nn::Tape tape;
  nn::Matrix va(3, 1), vb(2, 1);
  va << 0.1, 0.4, 0.35;
  vb << 0.8, 0.6;
  auto a = tape.parameter(va);
  auto b = tape.parameter(vb);
  SinkhornConfig cfg;
  transport::SinkhornResult info;
  auto d = transport::sinkhorn_distance(tape, a, b, cfg, &info);
  auto loss = tape.affine(d, 3.0, 0.0);
  tape.backward(loss);
  const auto direct = transport::sinkhorn(std::vector<double>{0.1, 0.4, 0.35}, std::vector<double>{0.8, 0.6}, cfg, true);
  CHECK(tape.scalar(d) == direct.value);
  for (int k = 0; k < 3; ++k) CHECK(tape.grad(a)(k, 0) == doctest::Approx(3 * direct.grad_a[std::size_t(k)]));
  for (int k = 0; k < 2; ++k) CHECK(tape.grad(b)(k, 0) == doctest::Approx(3 * direct.grad_b[std::size_t(k)]));
}

TEST_CASE("sinkhorn reports errors and non-convergence") {
  SinkhornConfig cfg;
  CHECK_THROWS_AS(transport::sinkhorn(std::vector<double>{NAN}, std::vector<double>{0.1}, cfg), NumericError);
  CHECK_THROWS_AS(transport::sinkhorn(std::vector<double>{}, std::vector<double>{0.1}, cfg), ShapeError);
  cfg.epsilon = 0;
  CHECK_THROWS_AS(transport::sinkhorn(std::vector<double>{0.1}, std::vector<double>{0.1}, cfg), ConfigError);

  std::mt19937_64 rng(1);
  auto a = uniform(rng, 50), b = uniform(rng, 50);
  SinkhornConfig tight{1e-3, 3, 1e-12};
  const auto r = transport::sinkhorn(a, b, tight);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
  CHECK(std::isfinite(r.value));
  CHECK(r.marginal_error > 1e-12);
}
