#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fairppm/timestamp.hpp"

namespace fairppm {

enum class AttrKind { categorical, numeric, boolean };

std::string_view to_string(AttrKind kind);
AttrKind attr_kind_from_string(std::string_view name);

using AttrValue = std::variant<std::string, double, bool>;
using AttrMap = std::map<std::string, AttrValue>;

// Static (case-level) attribute columns carry this prefix, e.g. `case:protected`.
inline constexpr std::string_view kStaticPrefix = "case:";

inline bool is_static_attr(std::string_view name) { return name.starts_with(kStaticPrefix); }

struct AttrInfo {
  AttrKind kind = AttrKind::categorical;
  bool is_static = false;
  bool operator==(const AttrInfo&) const = default;
};

using Schema = std::map<std::string, AttrInfo>;

struct Event {
  std::string case_id;
  std::string activity;
  Instant timestamp = 0;
  AttrMap attrs;  // dynamic attributes; missing values are absent
  bool operator==(const Event&) const = default;
};

struct Trace {
  std::string case_id;
  std::vector<Event> events;  // ascending timestamp
  AttrMap static_attrs;
  bool operator==(const Trace&) const = default;
};

struct EventLog {
  std::vector<Trace> traces;
  Schema schema;
  bool operator==(const EventLog&) const = default;
};

// One prefix with the label of its source case and the case's sensitive group.
struct RawPrefixSample {
  std::string case_id;
  std::vector<Event> events;
  AttrMap static_attrs;
  int outcome = 0;
  int sensitive = 0;
};

// Column mapping for CSV ingestion. Attribute columns without an explicit kind
// are inferred: boolean if every value is TRUE/FALSE, numeric if every value
// parses as a number, categorical otherwise.
struct SchemaConfig {
  std::string case_column = "case_id";
  std::string activity_column = "activity";
  std::string timestamp_column = "timestamp";
  std::map<std::string, AttrKind> kinds;

  static SchemaConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

EventLog parse_event_log(std::istream& in, const SchemaConfig& config);
EventLog parse_event_log(const std::filesystem::path& path, const SchemaConfig& config);

// Writes the canonical CSV layout read by parse_event_log. Re-parsing the
// output with a default SchemaConfig plus the log's kinds yields an equal log.
void write_event_log(std::ostream& out, const EventLog& log);
void write_event_log(const std::filesystem::path& path, const EventLog& log);
SchemaConfig schema_config_for(const EventLog& log);

struct OutcomeCut {
  int outcome = 0;
  std::size_t cut = 0;  // events at index >= cut never enter a prefix
  bool operator==(const OutcomeCut&) const = default;
};

OutcomeCut label_and_cut(const Trace& trace, std::string_view target_activity);

// Prefixes of lengths 1..min(cut, max_gen_len) for each trace, in trace order
// then length order. Traces with no usable prefix are skipped.
std::vector<RawPrefixSample> extract_prefixes(const EventLog& log, std::string_view target_activity,
                                              const std::string& sensitive_attr, std::size_t max_gen_len);

// Case-level partition; the test side receives round-half-up(fraction * cases).
std::pair<EventLog, EventLog> split_cases(const EventLog& log, double test_fraction, std::uint64_t seed);

// Sample-level partition of already extracted prefixes.
std::pair<std::vector<RawPrefixSample>, std::vector<RawPrefixSample>> validation_split(
    const std::vector<RawPrefixSample>& samples, double fraction, std::uint64_t seed);

// Prefix-level statistics reported per split: count, % positive, % S1, and
// % positive within S0 and S1.
struct PrefixSummary {
  std::size_t prefixes = 0;
  double pct_positive = 0;
  double pct_s1 = 0;
  double pct_s0_positive = 0;
  double pct_s1_positive = 0;
};

PrefixSummary summarize(const std::vector<RawPrefixSample>& samples);
nlohmann::json to_json(const PrefixSummary& s);

std::size_t round_half_up(double x);

}  // namespace fairppm
