#pragma once
// Gridded precipitation: frame ingestion, window accumulation, per-tower daily
// sampling and the rain-peak to activity-peak lag.

#include "floodlens/activity.hpp"
#include "floodlens/cdr_ingest.hpp"
#include "floodlens/common.hpp"
#include "floodlens/raster.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens::rain {

inline constexpr double kDefaultCellDeg = 0.25;
inline constexpr std::int64_t kDefaultTimestepS = 3 * 3600;

// Frame f covers [instants[f], instants[f] + timestep_s).
struct RainGrid {
    raster::GridGeometry geom;
    std::int64_t timestep_s = kDefaultTimestepS;
    std::vector<Instant> instants;
    std::vector<std::vector<double>> frames;

    Instant begin() const { return instants.front(); }
    Instant end() const { return instants.back() + timestep_s; }
    void validate() const;
};

// Half-open [start, end).
struct TimeWindow {
    Instant start = 0;
    Instant end = 0;
};

TimeWindow window_for_days(const DayRange& days, const DayBucketing& bucketing);

// Index file lines `frame_instant_iso,path`; relative paths resolve against the index directory.
RainGrid load_rain_grid(const std::string& index_path);
std::string format_rain_index(std::span<const Instant> instants, std::span<const std::string> paths);

// Cellwise sum of the frames intersecting window. The window must lie within
// the frame coverage. Cells run in parallel; each cell sums frames in order.
std::vector<double> accumulate(const RainGrid& grid, const TimeWindow& window);

namespace serial {
std::vector<double> accumulate(const RainGrid& grid, const TimeWindow& window);
} // namespace serial

struct CellIndex {
    std::size_t row = 0;
    std::size_t col = 0;
    bool clamped = false;  // point lay outside the grid extent
};

// Nearest cell center per axis; exact midpoints go to the lower index.
CellIndex nearest_cell(const raster::GridGeometry& geom, const LatLon& p);

struct RainSeries {
    std::string bts_id;
    Day start_day = 0;
    std::vector<double> daily_mm;
    bool out_of_extent = false;

    DayRange range() const { return {start_day, start_day + static_cast<Day>(daily_mm.size()) - 1}; }
    double at(Day d) const { return daily_mm[static_cast<std::size_t>(d - start_day)]; }
};

// Frames summed into local days by their start instant.
RainSeries sample_at_site(const RainGrid& grid, const cdr::BtsSite& site, const DayBucketing& bucketing);

// argmax_day(z) - argmax_day(rain) inside window, earliest day on ties.
int peak_lag(const activity::ZScoreSeries& z, const RainSeries& rain, const DayRange& window);

struct LagEntry {
    std::string bts_id;
    Day rain_peak = 0;
    Day z_peak = 0;
    int lag = 0;
};

struct LagReport {
    std::vector<LagEntry> towers;
    double median_lag = 0;
};

double median(std::vector<int> values);

LagReport lag_report(std::span<const activity::ZScoreSeries> z, std::span<const RainSeries> rain,
                     std::span<const std::string> towers, const DayRange& window);

// CSV `bts_id,day_iso,value`
std::string export_rain_series_csv(std::span<const RainSeries> series);
std::vector<RainSeries> parse_rain_series_csv(std::string_view text);
// CSV `bts_id,rain_peak_day,z_peak_day,lag`
std::string export_lag_csv(const LagReport& report);

} // namespace floodlens::rain
