#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fairppm::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the record starts
};

// Streaming reader for comma-separated, `"`-quoted UTF-8 text (RFC 4180 quoting,
// CRLF or LF line endings). Lines starting with '#' outside a record are skipped.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::optional<Record> next();

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::string quote(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace fairppm::csv
