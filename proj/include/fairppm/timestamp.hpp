#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fairppm {

// Microseconds since 1970-01-01T00:00:00Z.
using Instant = std::int64_t;

// Accepts `YYYY-MM-DD`, optionally followed by `T` or a space and
// `HH:MM[:SS[.fraction]]`, optionally followed by `Z` or a `+HH:MM` / `-HHMM`
// offset. Naive times are taken as UTC.
std::optional<Instant> parse_iso8601(std::string_view text);

// Always UTC with a `Z` suffix; the fraction is printed only when non-zero.
std::string format_iso8601(Instant t);

}  // namespace fairppm
