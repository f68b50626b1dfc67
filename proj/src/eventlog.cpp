#include "fairppm/eventlog.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_map>

#include "fairppm/csv.hpp"
#include "fairppm/error.hpp"

namespace fairppm {

std::string_view to_string(AttrKind kind) {
  switch (kind) {
    case AttrKind::categorical:
      return "categorical";
    case AttrKind::numeric:
      return "numeric";
    case AttrKind::boolean:
      return "boolean";
  }
  return "categorical";
}

AttrKind attr_kind_from_string(std::string_view name) {
  if (name == "categorical") return AttrKind::categorical;
  if (name == "numeric") return AttrKind::numeric;
  if (name == "boolean") return AttrKind::boolean;
  throw ConfigError("unknown attribute kind '" + std::string(name) + "'");
}

SchemaConfig SchemaConfig::from_json(const nlohmann::json& j) {
  SchemaConfig cfg;
  if (!j.is_object()) throw ConfigError("schema must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "case_column") {
      cfg.case_column = value.get<std::string>();
    } else if (key == "activity_column") {
      cfg.activity_column = value.get<std::string>();
    } else if (key == "timestamp_column") {
      cfg.timestamp_column = value.get<std::string>();
    } else if (key == "kinds") {
      for (const auto& [attr, kind] : value.items()) cfg.kinds[attr] = attr_kind_from_string(kind.get<std::string>());
    } else {
      throw ConfigError("schema: unknown key '" + key + "'");
    }
  }
  return cfg;
}

nlohmann::json SchemaConfig::to_json() const {
  nlohmann::json kinds_json = nlohmann::json::object();
  for (const auto& [attr, kind] : kinds) kinds_json[attr] = std::string(to_string(kind));
  return {{"case_column", case_column},
          {"activity_column", activity_column},
          {"timestamp_column", timestamp_column},
          {"kinds", kinds_json}};
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::optional<bool> parse_bool(std::string_view s) {
  const std::string l = lower(s);
  if (l == "true") return true;
  if (l == "false") return false;
  return std::nullopt;
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

AttrKind infer_kind(const std::vector<csv::Record>& rows, std::size_t col) {
  bool all_bool = true, all_num = true, any = false;
  for (const auto& r : rows) {
    const std::string& v = r.fields[col];
    if (v.empty()) continue;
    any = true;
    if (all_bool && !parse_bool(v)) all_bool = false;
    if (all_num && !parse_number(v)) all_num = false;
    if (!all_bool && !all_num) break;
  }
  if (!any) return AttrKind::categorical;
  if (all_bool) return AttrKind::boolean;
  if (all_num) return AttrKind::numeric;
  return AttrKind::categorical;
}

AttrValue parse_value(const std::string& raw, AttrKind kind, const std::string& column, std::size_t line) {
  switch (kind) {
    case AttrKind::boolean: {
      if (auto b = parse_bool(raw)) return *b;
      if (raw == "1") return true;
      if (raw == "0") return false;
      throw ParseError("column '" + column + "': '" + raw + "' is not a boolean", line);
    }
    case AttrKind::numeric: {
      if (auto v = parse_number(raw)) return *v;
      throw ParseError("column '" + column + "': '" + raw + "' is not numeric", line);
    }
    case AttrKind::categorical:
      return raw;
  }
  return raw;
}

std::string value_to_string(const AttrValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* d = std::get_if<double>(&v)) return csv::format_double(*d);
  return std::get<bool>(v) ? "TRUE" : "FALSE";
}

}  // namespace

EventLog parse_event_log(std::istream& in, const SchemaConfig& config) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw SchemaError("event log is empty (no header row)");

  const auto& cols = header->fields;
  auto find_col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) throw SchemaError("missing required column '" + name + "'");
    return static_cast<std::size_t>(it - cols.begin());
  };
  const std::size_t case_col = find_col(config.case_column);
  const std::size_t act_col = find_col(config.activity_column);
  const std::size_t ts_col = find_col(config.timestamp_column);

  std::vector<csv::Record> rows;
  while (auto rec = reader.next()) {
    if (rec->fields.size() != cols.size()) {
      throw ParseError("expected " + std::to_string(cols.size()) + " fields, got " +
                           std::to_string(rec->fields.size()),
                       rec->line);
    }
    rows.push_back(std::move(*rec));
  }

  EventLog log;
  std::vector<std::pair<std::size_t, std::string>> attr_cols;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c == case_col || c == act_col || c == ts_col) continue;
    const std::string& name = cols[c];
    if (log.schema.count(name)) throw SchemaError("duplicate column '" + name + "'");
    AttrInfo info;
    auto explicit_kind = config.kinds.find(name);
    info.kind = explicit_kind != config.kinds.end() ? explicit_kind->second : infer_kind(rows, c);
    info.is_static = is_static_attr(name);
    log.schema[name] = info;
    attr_cols.emplace_back(c, name);
  }
  for (const auto& [name, kind] : config.kinds) {
    (void)kind;
    if (!log.schema.count(name)) throw SchemaError("schema names column '" + name + "' which is not in the file");
  }

  std::unordered_map<std::string, std::size_t> trace_of_case;
  // File line of the row that defined each trace's static attributes.
  std::vector<std::size_t> static_line;
  for (const auto& row : rows) {
    const std::string& case_id = row.fields[case_col];
    const std::string& activity = row.fields[act_col];
    if (case_id.empty()) throw ParseError("empty case id", row.line);
    if (activity.empty()) throw ParseError("empty activity", row.line);
    auto ts = parse_iso8601(row.fields[ts_col]);
    if (!ts) throw ParseError("unparseable timestamp '" + row.fields[ts_col] + "'", row.line);

    Event ev{case_id, activity, *ts, {}};
    AttrMap statics;
    for (const auto& [c, name] : attr_cols) {
      const std::string& raw = row.fields[c];
      if (raw.empty()) continue;
      AttrValue v = parse_value(raw, log.schema[name].kind, name, row.line);
      if (is_static_attr(name)) {
        statics.emplace(name, std::move(v));
      } else {
        ev.attrs.emplace(name, std::move(v));
      }
    }

    auto [it, inserted] = trace_of_case.try_emplace(case_id, log.traces.size());
    if (inserted) {
      log.traces.push_back(Trace{case_id, {}, std::move(statics)});
      static_line.push_back(row.line);
    } else if (log.traces[it->second].static_attrs != statics) {
      throw ConsistencyError("case '" + case_id + "': static attributes differ between line " +
                             std::to_string(static_line[it->second]) + " and line " + std::to_string(row.line));
    }
    log.traces[it->second].events.push_back(std::move(ev));
  }

  for (auto& t : log.traces) {
    std::stable_sort(t.events.begin(), t.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  }
  return log;
}

EventLog parse_event_log(const std::filesystem::path& path, const SchemaConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open event log '" + path.string() + "'");
  return parse_event_log(in, config);
}

void write_event_log(std::ostream& out, const EventLog& log) {
  std::vector<std::string> dynamic_cols, static_cols;
  for (const auto& [name, info] : log.schema) (info.is_static ? static_cols : dynamic_cols).push_back(name);

  std::vector<std::string> header{"case_id", "activity", "timestamp"};
  header.insert(header.end(), dynamic_cols.begin(), dynamic_cols.end());
  header.insert(header.end(), static_cols.begin(), static_cols.end());
  csv::write_row(out, header);

  std::vector<std::string> row;
  for (const auto& t : log.traces) {
    for (const auto& e : t.events) {
      row.assign({e.case_id, e.activity, format_iso8601(e.timestamp)});
      for (const auto& name : dynamic_cols) {
        auto it = e.attrs.find(name);
        row.push_back(it == e.attrs.end() ? "" : value_to_string(it->second));
      }
      for (const auto& name : static_cols) {
        auto it = t.static_attrs.find(name);
        row.push_back(it == t.static_attrs.end() ? "" : value_to_string(it->second));
      }
      csv::write_row(out, row);
    }
  }
}

void write_event_log(const std::filesystem::path& path, const EventLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write event log '" + path.string() + "'");
  write_event_log(out, log);
}

SchemaConfig schema_config_for(const EventLog& log) {
  SchemaConfig cfg;
  for (const auto& [name, info] : log.schema) cfg.kinds[name] = info.kind;
  return cfg;
}

OutcomeCut label_and_cut(const Trace& trace, std::string_view target_activity) {
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    if (trace.events[i].activity == target_activity) return {1, i};
  }
  return {0, trace.events.size()};
}

std::vector<RawPrefixSample> extract_prefixes(const EventLog& log, std::string_view target_activity,
                                              const std::string& sensitive_attr, std::size_t max_gen_len) {
  auto info = log.schema.find(sensitive_attr);
  if (info == log.schema.end()) throw SchemaError("sensitive attribute '" + sensitive_attr + "' is not in the log");
  if (!info->second.is_static || info->second.kind != AttrKind::boolean) {
    throw SchemaError("sensitive attribute '" + sensitive_attr + "' must be a static boolean attribute");
  }

  std::vector<RawPrefixSample> samples;
  for (const auto& t : log.traces) {
    auto s = t.static_attrs.find(sensitive_attr);
    if (s == t.static_attrs.end()) {
      throw ConsistencyError("case '" + t.case_id + "': missing sensitive attribute '" + sensitive_attr + "'");
    }
    const int sensitive = std::get<bool>(s->second) ? 1 : 0;
    const auto [outcome, cut] = label_and_cut(t, target_activity);
    const std::size_t longest = std::min(cut, max_gen_len);
    for (std::size_t len = 1; len <= longest; ++len) {
      samples.push_back(RawPrefixSample{t.case_id,
                                        std::vector<Event>(t.events.begin(), t.events.begin() + len),
                                        t.static_attrs, outcome, sensitive});
    }
  }
  return samples;
}

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

namespace {

std::size_t holdout_size(std::size_t total, double fraction) {
  return std::clamp<std::size_t>(round_half_up(fraction * static_cast<double>(total)), 1, total - 1);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

std::pair<EventLog, EventLog> split_cases(const EventLog& log, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw SplitError("test fraction must lie in (0, 1)");
  const std::size_t n = log.traces.size();
  if (n < 2) throw SplitError("need at least 2 cases to split, got " + std::to_string(n));

  const auto idx = shuffled_indices(n, seed);
  std::vector<bool> in_test(n, false);
  const std::size_t n_test = holdout_size(n, test_fraction);
  for (std::size_t i = 0; i < n_test; ++i) in_test[idx[i]] = true;

  EventLog train{{}, log.schema}, test{{}, log.schema};
  for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test : train).traces.push_back(log.traces[i]);
  return {std::move(train), std::move(test)};
}

std::pair<std::vector<RawPrefixSample>, std::vector<RawPrefixSample>> validation_split(
    const std::vector<RawPrefixSample>& samples, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw SplitError("validation fraction must lie in (0, 1)");
  const std::size_t n = samples.size();
  if (n < 2) throw SplitError("need at least 2 samples to split, got " + std::to_string(n));

  const auto idx = shuffled_indices(n, seed);
  std::vector<bool> in_valid(n, false);
  const std::size_t n_valid = holdout_size(n, fraction);
  for (std::size_t i = 0; i < n_valid; ++i) in_valid[idx[i]] = true;

  std::vector<RawPrefixSample> train, valid;
  train.reserve(n - n_valid);
  valid.reserve(n_valid);
  for (std::size_t i = 0; i < n; ++i) (in_valid[i] ? valid : train).push_back(samples[i]);
  return {std::move(train), std::move(valid)};
}

PrefixSummary summarize(const std::vector<RawPrefixSample>& samples) {
  PrefixSummary s;
  s.prefixes = samples.size();
  std::size_t pos = 0, s1 = 0, s0_pos = 0, s1_pos = 0;
  for (const auto& x : samples) {
    pos += x.outcome;
    s1 += x.sensitive;
    if (x.outcome) (x.sensitive ? s1_pos : s0_pos) += 1;
  }
  auto pct = [](std::size_t num, std::size_t den) { return den ? 100.0 * num / den : 0.0; };
  s.pct_positive = pct(pos, samples.size());
  s.pct_s1 = pct(s1, samples.size());
  s.pct_s0_positive = pct(s0_pos, samples.size() - s1);
  s.pct_s1_positive = pct(s1_pos, s1);
  return s;
}

nlohmann::json to_json(const PrefixSummary& s) {
  return {{"prefixes", s.prefixes},
          {"pct_positive", s.pct_positive},
          {"pct_s1", s.pct_s1},
          {"pct_s0_positive", s.pct_s0_positive},
          {"pct_s1_positive", s.pct_s1_positive}};
}

}  // namespace fairppm
