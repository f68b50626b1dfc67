#include "fairppm/csv.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "fairppm/error.hpp"

namespace fairppm::csv {

std::optional<Record> Reader::next() {
  std::string raw;
  while (true) {
    if (!std::getline(in_, raw)) return std::nullopt;
    ++line_;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty() || raw.front() == '#') continue;
    break;
  }

  Record rec;
  rec.line = line_;
  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i >= raw.size()) {
      if (!in_quotes) break;
      // quoted field spans a line break
      std::string more;
      if (!std::getline(in_, more)) throw ParseError("unterminated quoted field", rec.line);
      ++line_;
      if (!more.empty() && more.back() == '\r') more.pop_back();
      field.push_back('\n');
      raw = std::move(more);
      i = 0;
      continue;
    }
    const char c = raw[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < raw.size() && raw[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      if (!field.empty() || was_quoted) throw ParseError("unexpected quote inside field", rec.line);
      in_quotes = true;
      was_quoted = true;
    } else if (c == ',') {
      rec.fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
    ++i;
  }
  rec.fields.push_back(std::move(field));
  return rec;
}

std::string quote(std::string_view field) {
  // A leading '#' would otherwise read back as a comment line.
  if (field.find_first_of(",\"\n\r") == std::string_view::npos && !field.starts_with('#')) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, end);
}

}  // namespace fairppm::csv
