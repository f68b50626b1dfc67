#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairppm/eventlog.hpp"

namespace fairppm {

// Parameters of the built-in hiring-style process generator.
//
// Every case starts with activities[0] followed by activities[1]; the middle of
// the case draws 1-4 steps from activities[2..]. The first half of that pool is
// favoured by positive cases and the second half by negative cases, with
// `flow_signal` the probability that a step is drawn from the favoured half.
// Positive cases then execute the target activity and `close_activity`;
// negative cases end with `reject_activity` (some directly after screening).
//
// Group sizes and per-group positive counts are allocated exactly
// (round-half-up), so empirical rates match the spec up to rounding.
struct BiasSpec {
  std::size_t cases = 2000;
  std::vector<std::string> activities = {"Hand In Job Application", "Application Screening",
                                         "Conduct Interview",       "Coding Interview",
                                         "Background Check",        "Telephonic Screening",
                                         "Video Screening",         "Request Documents"};
  std::string target_activity = "Make Job Offer";
  std::string reject_activity = "Send Rejection Letter";
  std::string close_activity = "Close Case";
  double p_protected = 0.20;
  double rate_s0 = 0.49;
  double rate_s1 = 0.11;
  // Probability that the `case:gender` proxy copies `case:protected`;
  // otherwise it is an independent fair coin.
  double proxy_strength = 0.5;
  double flow_signal = 0.6;
  double early_reject = 0.35;

  void validate() const;
  static BiasSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Group statistics shaped after the hiring logs at three bias levels.
  static BiasSpec hiring_high();
  static BiasSpec hiring_medium();
  static BiasSpec hiring_low();
};

// Attributes: dynamic `resource` (categorical); static `case:protected`
// (boolean, the sensitive attribute), `case:gender` (boolean proxy) and
// `case:age` (numeric, independent of everything else).
EventLog generate_synthetic_log(const BiasSpec& spec, std::uint64_t seed);

}  // namespace fairppm
