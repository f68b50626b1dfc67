#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fairppm/encoding.hpp"
#include "fairppm/error.hpp"
#include "fairppm/eventlog.hpp"
#include "fairppm/synthetic.hpp"

using namespace fairppm;

namespace {

Schema toy_schema() {
  Schema s;
  s["resource"] = AttrInfo{AttrKind::categorical, false};
  s["case:protected"] = AttrInfo{AttrKind::boolean, true};
  s["case:age"] = AttrInfo{AttrKind::numeric, true};
  return s;
}

RawPrefixSample sample(const std::vector<std::string>& acts, double age, bool prot = false, int y = 0) {
  RawPrefixSample s;
  s.case_id = "c";
  for (std::size_t k = 0; k < acts.size(); ++k) {
    Event e{"c", acts[k], static_cast<Instant>(k), {}};
    e.attrs["resource"] = std::string("R") + std::to_string(k % 2);
    s.events.push_back(e);
  }
  s.static_attrs["case:protected"] = prot;
  s.static_attrs["case:age"] = age;
  s.outcome = y;
  s.sensitive = prot ? 1 : 0;
  return s;
}

const CategoricalFeature& cat_feature(const EncoderSpec& spec, const std::string& name) {
  for (const auto& f : spec.categorical)
    if (f.name == name) return f;
  FAIL("missing categorical feature " << name);
  throw;
}

std::ptrdiff_t num_index(const EncoderSpec& spec, const std::string& name) {
  for (std::size_t k = 0; k < spec.numeric.size(); ++k)
    if (spec.numeric[k].name == name) return static_cast<std::ptrdiff_t>(k);
  return -1;
}

EncoderSpec toy_fit(bool drop = false) {
  std::vector<RawPrefixSample> train{sample({"A", "B"}, 10, true), sample({"C"}, 30, false), sample({"A"}, 20)};
  return fit_encoder(train, toy_schema(), 6, drop, "case:protected");
}

}  // namespace

TEST_CASE("vocabulary sizes and embedding widths") {
  const auto spec = toy_fit();
  const auto& act = cat_feature(spec, kActivityFeature);
  CHECK(act.vocab_size() == 3);
  CHECK(act.embedding_dim == 2);
  for (const auto& [label, idx] : act.vocab) CHECK(idx >= 1);
  CHECK(spec.categorical.front().name == kActivityFeature);
  CHECK(num_index(spec, "case:protected") >= 0);
}

TEST_CASE("numeric channels are min-max scaled and clamped") {
  const auto spec = toy_fit();
  const auto k = num_index(spec, "case:age");
  REQUIRE(k >= 0);
  CHECK(encode(spec, sample({"A"}, 20)).num[k][0] == doctest::Approx(0.5));
  CHECK(encode(spec, sample({"A"}, 50)).num[k][0] == 1.0);
  CHECK(encode(spec, sample({"A"}, -5)).num[k][0] == 0.0);
}

TEST_CASE("drop_sensitive removes the attribute but keeps s") {
  const auto spec = toy_fit(true);
  CHECK(num_index(spec, "case:protected") < 0);
  for (const auto& f : spec.categorical) CHECK(f.name != "case:protected");
  const auto e = encode(spec, sample({"A"}, 20, true));
  CHECK(e.s == 1);
}

TEST_CASE("padding, truncation and OOV") {
  const auto spec = toy_fit();
  const auto& act = cat_feature(spec, kActivityFeature);
  auto e = encode(spec, sample({"A", "B"}, 20));
  CHECK(e.mask == std::vector<std::uint8_t>{1, 1, 0, 0, 0, 0});
  CHECK(e.cat[0][2] == 0);
  for (const auto& ch : e.num) CHECK(ch[5] == 0.0);

  e = encode(spec, sample({"A", "A", "A", "B", "C", "A", "B", "C", "A"}, 20));
  CHECK(e.length() == 6);
  // events 4..9 (1-based) are kept
  CHECK(decode_label(act, e.cat[0][0]) == "B");
  CHECK(decode_label(act, e.cat[0][5]) == "A");

  e = encode(spec, sample({"Z", "A"}, 20));
  CHECK(e.cat[0][0] == 0);
  CHECK(decode_label(act, e.cat[0][1]) == "A");
}

TEST_CASE("constant numeric feature warns and encodes as 0") {
  std::vector<RawPrefixSample> train{sample({"A"}, 7), sample({"B"}, 7)};
  const auto spec = fit_encoder(train, toy_schema(), 4, false, "case:protected");
  CHECK_FALSE(spec.warnings.empty());
  CHECK(encode(spec, sample({"A"}, 9)).num[num_index(spec, "case:age")][0] == 0.0);
  CHECK_THROWS_AS(fit_encoder({}, toy_schema(), 4, false, "case:protected"), ConfigError);
}

TEST_CASE("encoder spec JSON round-trip") {
  const auto spec = toy_fit();
  CHECK(EncoderSpec::from_json(spec.to_json()) == spec);
  CHECK_THROWS_AS(EncoderSpec::from_json(nlohmann::json{{"max_len", "x"}}), ArtifactError);
}

TEST_CASE("encoding properties on random synthetic prefixes") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    BiasSpec bias = BiasSpec::hiring_high();
    bias.cases = 30;
    const auto log = generate_synthetic_log(bias, seed);
    const auto samples = extract_prefixes(log, bias.target_activity, "case:protected", 10);
    const std::size_t max_len = 1 + seed % 7;
    const bool drop = seed % 2 == 1;
    const auto spec = fit_encoder(samples, log.schema, max_len, drop, "case:protected");

    for (const auto& f : spec.categorical) {
      CHECK(f.embedding_dim == static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(f.vocab_size())))));
      CHECK((f.name != "case:protected" || !drop));
    }
    for (const auto& f : spec.numeric) {
      CHECK(f.min <= f.max);
      CHECK((f.name != "case:protected" || !drop));
    }

    const auto& act = spec.categorical.front();
    for (const auto& s : samples) {
      const auto e = encode(spec, s);
      CHECK(e == encode(spec, s));
      const std::size_t L = std::min(s.events.size(), max_len);
      CHECK(e.length() == L);
      CHECK(std::count(e.mask.begin(), e.mask.end(), 1) == static_cast<long>(L));
      for (std::size_t t = 0; t < max_len; ++t) {
        CHECK(e.mask[t] == (t < L ? 1 : 0));
        for (const auto& ch : e.num) {
          CHECK(ch[t] >= 0.0);
          CHECK(ch[t] <= 1.0);
          if (t >= L) CHECK(ch[t] == 0.0);
        }
        for (const auto& ch : e.cat)
          if (t >= L) CHECK(ch[t] == 0);
        if (t < L) {
          // in-vocabulary labels decode back to the source event
          const auto& ev = s.events[s.events.size() - L + t];
          CHECK(decode_label(act, e.cat[0][t]) == ev.activity);
        }
      }
      CHECK(e.y == s.outcome);
      CHECK(e.s == s.sensitive);
    }
  }
}
