#pragma once

#include <compare>
#include <cstdint>

namespace errsense {

/// Milliseconds since the start of a run.  Everything in the pipeline is
/// stamped with one of these; wall-clock time never appears.
struct Timestamp {
    std::int64_t millis = 0;

    friend constexpr auto operator<=>(Timestamp, Timestamp) = default;
};

/// Signed millisecond span.
using Duration = std::int64_t;

constexpr Duration operator-(Timestamp a, Timestamp b) { return a.millis - b.millis; }
constexpr Timestamp operator+(Timestamp t, Duration d) { return Timestamp{t.millis + d}; }
constexpr Timestamp operator-(Timestamp t, Duration d) { return Timestamp{t.millis - d}; }

constexpr double to_seconds(Duration d) { return static_cast<double>(d) / 1000.0; }

}  // namespace errsense
