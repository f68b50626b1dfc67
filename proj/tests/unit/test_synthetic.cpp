#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fairppm/error.hpp"
#include "fairppm/synthetic.hpp"

using namespace fairppm;

namespace {

struct Counts {
  double n0 = 0, n1 = 0, pos0 = 0, pos1 = 0;
  double table[2][2] = {{0, 0}, {0, 0}};  // [protected][gender]
};

bool has(const Trace& t, const std::string& activity) {
  return std::any_of(t.events.begin(), t.events.end(), [&](const Event& e) { return e.activity == activity; });
}

Counts count(const EventLog& log, const BiasSpec& spec) {
  Counts c;
  for (const auto& t : log.traces) {
    const bool s = std::get<bool>(t.static_attrs.at("case:protected"));
    const bool g = std::get<bool>(t.static_attrs.at("case:gender"));
    const bool y = has(t, spec.target_activity);
    (s ? c.n1 : c.n0) += 1;
    (s ? c.pos1 : c.pos0) += y;
    c.table[s][g] += 1;
  }
  return c;
}

// Pearson chi-square statistic of a 2x2 contingency table.
double chi_square(const double t[2][2]) {
  const double n = t[0][0] + t[0][1] + t[1][0] + t[1][1];
  double stat = 0;
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const double expected = (t[r][0] + t[r][1]) * (t[0][c] + t[1][c]) / n;
      stat += (t[r][c] - expected) * (t[r][c] - expected) / expected;
    }
  }
  return stat;
}

}  // namespace

TEST_CASE("group proportion and positive rates follow the spec") {
  for (auto spec : {BiasSpec::hiring_high(), BiasSpec::hiring_medium(), BiasSpec::hiring_low()}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto log = generate_synthetic_log(spec, seed);
      const auto c = count(log, spec);
      CHECK(log.traces.size() == spec.cases);
      CHECK(std::abs(c.n1 / (c.n0 + c.n1) - spec.p_protected) <= 0.02);
      CHECK(std::abs(c.pos0 / c.n0 - spec.rate_s0) <= 0.02);
      CHECK(std::abs(c.pos1 / c.n1 - spec.rate_s1) <= 0.02);
    }
  }
}

TEST_CASE("hiring_high statistics at 10,000 cases") {
  auto spec = BiasSpec::hiring_high();
  spec.cases = 10000;
  const auto c = count(generate_synthetic_log(spec, 17), spec);
  CHECK(c.pos0 / c.n0 == doctest::Approx(0.49).epsilon(0.02));
  CHECK(c.pos1 / c.n1 == doctest::Approx(0.11).epsilon(0.05));
}

TEST_CASE("equal rates give labels without group disparity") {
  auto spec = BiasSpec::hiring_high();
  spec.rate_s0 = spec.rate_s1 = 0.4;
  const auto c = count(generate_synthetic_log(spec, 5), spec);
  CHECK(std::abs(c.pos0 / c.n0 - c.pos1 / c.n1) < 0.01);
}

TEST_CASE("proxy independence and correlation") {
  auto spec = BiasSpec::hiring_high();
  spec.proxy_strength = 0.0;
  auto c = count(generate_synthetic_log(spec, 23), spec);
  // 6.635 is the chi-square(1) critical value at alpha = 0.01.
  CHECK(chi_square(c.table) < 6.635);

  spec.proxy_strength = 0.5;
  c = count(generate_synthetic_log(spec, 23), spec);
  CHECK(chi_square(c.table) > 6.635);
  CHECK(c.table[1][1] / c.n1 > c.table[0][1] / c.n0);
}

TEST_CASE("control flow reaches the target exactly for positive cases") {
  auto spec = BiasSpec::hiring_low();
  spec.cases = 300;
  const auto log = generate_synthetic_log(spec, 8);
  for (const auto& t : log.traces) {
    const bool pos = has(t, spec.target_activity);
    CHECK(pos != has(t, spec.reject_activity));
    CHECK(t.events.front().activity == spec.activities[0]);
    for (std::size_t k = 1; k < t.events.size(); ++k) CHECK(t.events[k - 1].timestamp <= t.events[k].timestamp);
  }
}

TEST_CASE("generation is deterministic per seed") {
  auto spec = BiasSpec::hiring_medium();
  spec.cases = 100;
  CHECK(generate_synthetic_log(spec, 4) == generate_synthetic_log(spec, 4));
  CHECK_FALSE(generate_synthetic_log(spec, 4) == generate_synthetic_log(spec, 5));
}

TEST_CASE("infeasible specs are rejected") {
  auto spec = BiasSpec::hiring_high();
  spec.rate_s1 = 1.2;
  CHECK_THROWS_AS(generate_synthetic_log(spec, 1), SpecError);
  CHECK_THROWS_AS(BiasSpec::from_json({{"rate_s0", -0.1}}), SpecError);
  CHECK_THROWS_AS(BiasSpec::from_json({{"preset", "nope"}}), SpecError);
  CHECK(BiasSpec::from_json({{"preset", "hiring_low"}, {"cases", 50}}).cases == 50);
}
