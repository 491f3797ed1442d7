#pragma once
// Impact map: per-tower fusion of the event-window anomaly peak, flood
// proximity, administrative region and affected-population figures. Also the
// |z| time-lapse frames.

#include "floodlens/activity.hpp"
#include "floodlens/cdr_ingest.hpp"
#include "floodlens/common.hpp"
#include "floodlens/geo.hpp"
#include "floodlens/raster.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens::impact {

struct AffectedRow {
    std::string region_id;
    std::int64_t affected_population = 0;
    std::int64_t camps = 0;
    bool operator==(const AffectedRow&) const = default;
};

// CSV `region_id,affected_population,camps`
std::vector<AffectedRow> parse_affected_csv(std::string_view text);
std::string export_affected_csv(std::span<const AffectedRow> rows);

struct ImpactRecord {
    std::string bts_id;
    double lat = 0;
    double lon = 0;
    std::optional<double> max_z;      // signed maximum over the event window; empty without a series
    std::optional<Day> day_of_max;
    std::optional<double> max_abs_z;  // maximum of |z| over the same window
    std::optional<double> shared_day_z;
    bool in_flood = false;
    std::optional<std::string> region_id;
    std::optional<std::int64_t> affected_population;
    std::optional<std::int64_t> camps;

    bool operator==(const ImpactRecord&) const = default;
};

struct ImpactOptions {
    double d_max_m = geo::kDefaultFloodDistanceM;
    std::optional<double> shared_day_threshold;  // enables the shared critical day
};

struct ImpactMap {
    std::vector<ImpactRecord> records;           // registry order (bts_id ascending)
    std::optional<Day> shared_day;
    std::vector<std::string> unmatched_rows;     // affected-table regions with no polygon
    std::vector<std::string> missing_series;     // towers without a z-series
};

ImpactMap build_impact_map(std::span<const activity::ZScoreSeries> zseries, const cdr::BtsRegistry& registry,
                           const raster::FloodMask& flood_mask, std::span<const geo::RegionPolygon> regions,
                           std::span<const AffectedRow> affected, const DayRange& event_window,
                           const ImpactOptions& options = {});

// Day in window maximizing the number of towers with z >= threshold; earliest on ties.
Day shared_critical_day(std::span<const activity::ZScoreSeries> zseries, const DayRange& window, double threshold);

// Tower points sorted by bts_id, then cell polygons when a diagram is given.
std::string export_geojson(std::span<const ImpactRecord> records, const geo::VoronoiDiagram* cells = nullptr);
std::vector<ImpactRecord> parse_impact_geojson(std::string_view text);

struct FrameValue {
    std::string bts_id;
    double abs_z = 0;
};

struct Frame {
    Day day = 0;
    std::vector<FrameValue> values;
};

// One frame per day of |z|, towers in series order; every series must cover the range.
std::vector<Frame> timelapse_frames(std::span<const activity::ZScoreSeries> zseries, const DayRange& days);

// CSV `bts_id,abs_z`
std::string export_frame_csv(const Frame& frame);
std::string frame_file_name(Day day);  // frame_YYYY-MM-DD.csv

} // namespace floodlens::impact
