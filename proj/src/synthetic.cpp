#include "fairppm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fairppm/error.hpp"

namespace fairppm {

void BiasSpec::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (cases == 0) throw SpecError("bias spec: cases must be positive");
  if (activities.size() < 4) throw SpecError("bias spec: need a start, a screening and at least two middle activities");
  if (!in_unit(p_protected)) throw SpecError("bias spec: p_protected outside [0,1]");
  if (!in_unit(rate_s0)) throw SpecError("bias spec: rate_s0 outside [0,1]");
  if (!in_unit(rate_s1)) throw SpecError("bias spec: rate_s1 outside [0,1]");
  if (!in_unit(proxy_strength)) throw SpecError("bias spec: proxy_strength outside [0,1]");
  if (!in_unit(flow_signal)) throw SpecError("bias spec: flow_signal outside [0,1]");
  if (!in_unit(early_reject)) throw SpecError("bias spec: early_reject outside [0,1]");
  for (const auto& a : {target_activity, reject_activity, close_activity}) {
    if (a.empty()) throw SpecError("bias spec: activity names must be nonempty");
    if (std::find(activities.begin(), activities.end(), a) != activities.end()) {
      throw SpecError("bias spec: '" + a + "' must not appear in the activity alphabet");
    }
  }
}

BiasSpec BiasSpec::from_json(const nlohmann::json& j) {
  BiasSpec s;
  if (j.contains("preset")) {
    const auto name = j.at("preset").get<std::string>();
    if (name == "hiring_high") s = hiring_high();
    else if (name == "hiring_medium") s = hiring_medium();
    else if (name == "hiring_low") s = hiring_low();
    else throw SpecError("bias spec: unknown preset '" + name + "'");
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "preset") continue;
    else if (key == "cases") s.cases = v.get<std::size_t>();
    else if (key == "activities") s.activities = v.get<std::vector<std::string>>();
    else if (key == "target_activity") s.target_activity = v.get<std::string>();
    else if (key == "reject_activity") s.reject_activity = v.get<std::string>();
    else if (key == "close_activity") s.close_activity = v.get<std::string>();
    else if (key == "p_protected") s.p_protected = v.get<double>();
    else if (key == "rate_s0") s.rate_s0 = v.get<double>();
    else if (key == "rate_s1") s.rate_s1 = v.get<double>();
    else if (key == "proxy_strength") s.proxy_strength = v.get<double>();
    else if (key == "flow_signal") s.flow_signal = v.get<double>();
    else if (key == "early_reject") s.early_reject = v.get<double>();
    else throw SpecError("bias spec: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

nlohmann::json BiasSpec::to_json() const {
  return {{"cases", cases},
          {"activities", activities},
          {"target_activity", target_activity},
          {"reject_activity", reject_activity},
          {"close_activity", close_activity},
          {"p_protected", p_protected},
          {"rate_s0", rate_s0},
          {"rate_s1", rate_s1},
          {"proxy_strength", proxy_strength},
          {"flow_signal", flow_signal},
          {"early_reject", early_reject}};
}

BiasSpec BiasSpec::hiring_high() {
  BiasSpec s;
  s.p_protected = 0.20;
  s.rate_s0 = 0.49;
  s.rate_s1 = 0.11;
  return s;
}

BiasSpec BiasSpec::hiring_medium() {
  BiasSpec s;
  s.p_protected = 0.16;
  s.rate_s0 = 0.51;
  s.rate_s1 = 0.22;
  return s;
}

BiasSpec BiasSpec::hiring_low() {
  BiasSpec s;
  s.p_protected = 0.09;
  s.rate_s0 = 0.51;
  s.rate_s1 = 0.36;
  return s;
}

namespace {

// Marks round(p * n) of the indices in `pool` as true.
void assign_exact(std::vector<std::size_t> pool, double p, std::vector<bool>& flag, std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  const std::size_t k = std::min(pool.size(), round_half_up(p * static_cast<double>(pool.size())));
  for (std::size_t i = 0; i < k; ++i) flag[pool[i]] = true;
}

}  // namespace

EventLog generate_synthetic_log(const BiasSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const std::size_t n = spec.cases;

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<bool> protected_flag(n, false), positive(n, false);
  assign_exact(all, spec.p_protected, protected_flag, rng);
  std::vector<std::size_t> g0, g1;
  for (std::size_t i = 0; i < n; ++i) (protected_flag[i] ? g1 : g0).push_back(i);
  assign_exact(g0, spec.rate_s0, positive, rng);
  assign_exact(g1, spec.rate_s1, positive, rng);

  const std::vector<std::string> middle(spec.activities.begin() + 2, spec.activities.end());
  const std::size_t half = middle.size() / 2;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> steps(1, 4);
  std::uniform_int_distribution<int> gap_minutes(5, 600);
  std::uniform_int_distribution<int> resource(1, 6);
  std::uniform_int_distribution<int> age(20, 64);

  auto pick_middle = [&](bool pos) -> const std::string& {
    if (unit(rng) < spec.flow_signal) {
      const std::size_t lo = pos ? 0 : half;
      const std::size_t hi = pos ? half : middle.size();
      return middle[lo + static_cast<std::size_t>(unit(rng) * static_cast<double>(hi - lo)) % (hi - lo)];
    }
    return middle[static_cast<std::size_t>(unit(rng) * static_cast<double>(middle.size())) % middle.size()];
  };

  EventLog log;
  log.schema["resource"] = {AttrKind::categorical, false};
  log.schema["case:protected"] = {AttrKind::boolean, true};
  log.schema["case:gender"] = {AttrKind::boolean, true};
  log.schema["case:age"] = {AttrKind::numeric, true};

  const Instant base = *parse_iso8601("2024-01-01T08:00:00Z");
  constexpr Instant kMinute = 60LL * 1000000;
  log.traces.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = positive[i];
    const bool prot = protected_flag[i];
    Trace t;
    t.case_id = "case_" + std::to_string(i + 1);
    const bool gender = unit(rng) < spec.proxy_strength ? prot : unit(rng) < 0.5;
    t.static_attrs["case:protected"] = prot;
    t.static_attrs["case:gender"] = gender;
    t.static_attrs["case:age"] = static_cast<double>(age(rng));

    std::vector<std::string> flow{spec.activities[0], spec.activities[1]};
    if (!pos && unit(rng) < spec.early_reject) {
      flow.push_back(spec.reject_activity);
    } else {
      const int k = steps(rng);
      for (int s = 0; s < k; ++s) flow.push_back(pick_middle(pos));
      if (pos) {
        flow.push_back(spec.target_activity);
        flow.push_back(spec.close_activity);
      } else {
        flow.push_back(spec.reject_activity);
      }
    }

    Instant ts = base + static_cast<Instant>(i) * 30 * kMinute;
    for (const auto& act : flow) {
      ts += gap_minutes(rng) * kMinute;
      Event e{t.case_id, act, ts, {}};
      e.attrs["resource"] = "R" + std::to_string(resource(rng));
      t.events.push_back(std::move(e));
    }
    log.traces.push_back(std::move(t));
  }
  return log;
}

}  // namespace fairppm
