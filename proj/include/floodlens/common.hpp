#pragma once
// Shared primitives: error type, local-day arithmetic, fixed formatting, small
// text helpers used by every module.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens {

// Fatal problem with input data or a violated operation precondition.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Days since 1970-01-01 in the configured local offset.
using Day = std::int32_t;

// Seconds since the Unix epoch, UTC.
using Instant = std::int64_t;

constexpr std::int64_t kSecondsPerDay = 86400;

// Inclusive day range.
struct DayRange {
    Day first = 0;
    Day last = 0;

    std::size_t length() const { return static_cast<std::size_t>(last - first + 1); }
    bool contains(Day d) const { return d >= first && d <= last; }
    bool contains(const DayRange& other) const { return other.first >= first && other.last <= last; }
    bool operator==(const DayRange&) const = default;
};

struct DayBucketing {
    int tz_offset_hours = -6;

    Day day_of(Instant t) const;
    int local_hour(Instant t) const;
    Instant day_start(Day d) const;
};

struct LatLon {
    double lat = 0;
    double lon = 0;
    bool operator==(const LatLon&) const = default;
};

struct GeoBox {
    double lat_min = 0, lat_max = 0, lon_min = 0, lon_max = 0;

    bool contains(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
    }
    void validate() const;
};

// "YYYY-MM-DDTHH:MM:SSZ"
std::optional<Instant> parse_instant(std::string_view s);
std::string format_instant(Instant t);

// "YYYY-MM-DD" <-> day index
std::optional<Day> parse_date(std::string_view s);
std::string format_date(Day d);

// "A:B" inclusive ISO range; throws DataError on malformed input or A > B.
DayRange parse_day_range(std::string_view s);
std::string format_day_range(const DayRange& r);

// "lat_min,lat_max,lon_min,lon_max"
GeoBox parse_geo_box(std::string_view s);

// Fixed-point formatting; negative zero prints as zero.
std::string format_fixed(double v, int decimals = 6);
// Shortest decimal that round-trips to the same double.
std::string format_shortest(double v);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// FNV-1a 64, hex encoded.
std::string digest_hex(std::string_view bytes);

} // namespace floodlens
