#include "floodlens/common.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace floodlens {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

bool parse_fixed_digits(std::string_view s, int& out) {
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return !s.empty();
}

std::optional<std::int64_t> civil_days(int y, int m, int d) {
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd}.time_since_epoch().count();
}

} // namespace

Day DayBucketing::day_of(Instant t) const {
    return static_cast<Day>(floor_div(t + std::int64_t{tz_offset_hours} * 3600, kSecondsPerDay));
}

int DayBucketing::local_hour(Instant t) const {
    const std::int64_t local = t + std::int64_t{tz_offset_hours} * 3600;
    const std::int64_t sod = local - floor_div(local, kSecondsPerDay) * kSecondsPerDay;
    return static_cast<int>(sod / 3600);
}

Instant DayBucketing::day_start(Day d) const {
    return std::int64_t{d} * kSecondsPerDay - std::int64_t{tz_offset_hours} * 3600;
}

void GeoBox::validate() const {
    if (!(lat_min <= lat_max) || !(lon_min <= lon_max))
        throw DataError("bounding box must satisfy lat_min <= lat_max and lon_min <= lon_max");
    if (lat_min < -90 || lat_max > 90 || lon_min < -180 || lon_max > 180)
        throw DataError("bounding box outside latitude [-90, 90] or longitude [-180, 180]");
}

std::optional<Instant> parse_instant(std::string_view s) {
    // 2009-11-03T14:00:00Z
    if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':' ||
        s[19] != 'Z')
        return std::nullopt;
    int y, mo, d, h, mi, se;
    if (!parse_fixed_digits(s.substr(0, 4), y) || !parse_fixed_digits(s.substr(5, 2), mo) ||
        !parse_fixed_digits(s.substr(8, 2), d) || !parse_fixed_digits(s.substr(11, 2), h) ||
        !parse_fixed_digits(s.substr(14, 2), mi) || !parse_fixed_digits(s.substr(17, 2), se))
        return std::nullopt;
    if (h > 23 || mi > 59 || se > 59) return std::nullopt;
    const auto days = civil_days(y, mo, d);
    if (!days) return std::nullopt;
    return *days * kSecondsPerDay + h * 3600 + mi * 60 + se;
}

std::string format_instant(Instant t) {
    using namespace std::chrono;
    const std::int64_t days = floor_div(t, kSecondsPerDay);
    const std::int64_t sod = t - days * kSecondsPerDay;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(sod / 3600), static_cast<int>(sod % 3600 / 60), static_cast<int>(sod % 60));
    return buf;
}

std::optional<Day> parse_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    int y, m, d;
    if (!parse_fixed_digits(s.substr(0, 4), y) || !parse_fixed_digits(s.substr(5, 2), m) ||
        !parse_fixed_digits(s.substr(8, 2), d))
        return std::nullopt;
    const auto days = civil_days(y, m, d);
    if (!days) return std::nullopt;
    return static_cast<Day>(*days);
}

std::string format_date(Day d) {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{std::chrono::days{d}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

DayRange parse_day_range(std::string_view s) {
    const auto colon = s.find(':');
    if (colon == std::string_view::npos)
        throw DataError("day range must be A:B, got '" + std::string(s) + "'");
    const auto a = parse_date(s.substr(0, colon));
    const auto b = parse_date(s.substr(colon + 1));
    if (!a || !b) throw DataError("bad date in range '" + std::string(s) + "'");
    if (*a > *b) throw DataError("day range start after end: '" + std::string(s) + "'");
    return {*a, *b};
}

std::string format_day_range(const DayRange& r) { return format_date(r.first) + ":" + format_date(r.last); }

GeoBox parse_geo_box(std::string_view s) {
    const auto parts = split(s, ',');
    if (parts.size() != 4) throw DataError("box must be lat_min,lat_max,lon_min,lon_max");
    double v[4];
    for (int i = 0; i < 4; ++i) {
        const auto d = parse_double(trim(parts[i]));
        if (!d) throw DataError("bad number in box '" + std::string(s) + "'");
        v[i] = *d;
    }
    GeoBox box{v[0], v[1], v[2], v[3]};
    box.validate();
    return box;
}

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string out = buf;
    if (out[0] == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
    return out;
}

std::string format_shortest(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + path);
}

std::string digest_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace floodlens
