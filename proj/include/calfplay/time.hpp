#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace calfplay {

/// Naive local-time instant, milliseconds since the civil epoch
/// 1970-01-01 00:00:00. No timezone handling anywhere in the pipeline:
/// camera overlays, filenames and annotations all share the same local
/// clock.
struct Timestamp {
    std::int64_t ms = 0;

    friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

inline Timestamp operator+(Timestamp t, std::int64_t delta_ms) {
    return Timestamp{t.ms + delta_ms};
}
inline std::int64_t operator-(Timestamp a, Timestamp b) { return a.ms - b.ms; }

/// Annotation-relative time in tenths of a second. Kept integral so the
/// 0.1 s resolution of the event logs is exact.
using Decisecs = std::int64_t;

constexpr std::int64_t ms_per_decisec = 100;

Timestamp make_timestamp(int year, int month, int day, int hour, int minute,
                         int second, int millisecond = 0);

/// Parses "YYYY-MM-DD HH:MM:SS" (the canonical overlay format).
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Parses "YYYY-MM-DDTHH:MM:SS.mmmZ" as written by the metadata table.
std::optional<Timestamp> parse_timestamp_iso(std::string_view text);

/// "YYYY-MM-DD HH:MM:SS"
std::string format_timestamp(Timestamp t);

/// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string format_timestamp_iso(Timestamp t);

/// Parses a decimal seconds value ("120.0", "3661.5") into deciseconds,
/// rounding anything beyond the first fractional digit to the nearest
/// tenth. Returns nullopt on malformed input.
std::optional<Decisecs> parse_decisecs(std::string_view text);

/// Renders deciseconds as "S.s" with exactly one fractional digit.
std::string format_decisecs(Decisecs ds);

}  // namespace calfplay
