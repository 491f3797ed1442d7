#pragma once
// One function per CLI stage. The pipeline calls the same functions, and
// stages only talk to each other through files in the output directory.

#include "floodlens/activity.hpp"
#include "floodlens/common.hpp"
#include "floodlens/home_antenna.hpp"
#include "floodlens/raster.hpp"

#include <optional>
#include <string>

namespace floodlens::cli {

// Malformed flag values; reported as usage errors.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ThresholdGrid {
    double lo = 0, hi = 20, step = 0.5;
};

ThresholdGrid parse_threshold_grid(const std::string& s);  // "lo:hi:step"

namespace files {
inline constexpr const char* kCleanCdr = "ingest/cdr_clean.csv";
inline constexpr const char* kDiagnostics = "ingest/diagnostics.csv";
inline constexpr const char* kQuarantine = "ingest/quarantine.csv";
inline constexpr const char* kActivity = "activity.csv";
inline constexpr const char* kZscore = "zscore.csv";
inline constexpr const char* kBaseline = "baseline.csv";
inline constexpr const char* kExceedanceBl = "exceedance_bl.csv";
inline constexpr const char* kExceedanceEvent = "exceedance_event.csv";
inline constexpr const char* kHotTowers = "hot_towers.csv";
inline constexpr const char* kHat = "hat.csv";
inline constexpr const char* kPopulation = "population.csv";
inline constexpr const char* kCensusFit = "census_fit.json";
inline constexpr const char* kVoronoi = "voronoi.geojson";
inline constexpr const char* kFloodMask = "flood_mask.asc";
inline constexpr const char* kRainSeries = "rain_series.csv";
inline constexpr const char* kRainAccumulated = "rain_accumulated.asc";
inline constexpr const char* kLag = "lag.csv";
inline constexpr const char* kLagSummary = "lag_summary.json";
inline constexpr const char* kImpact = "impact.geojson";
inline constexpr const char* kTimelapseDir = "timelapse";
inline constexpr const char* kRunMetadata = "run_metadata.json";
} // namespace files

struct IngestArgs {
    std::string cdr, bts, out = ".";
    std::optional<GeoBox> bbox;  // default: bounding box of the registry
    bool strict = false;
};
void run_ingest(const IngestArgs& a);

struct ActivityArgs {
    std::string cdr, bts, out = ".";
    int tz = -6;
    std::optional<DayRange> span;
};
void run_activity(const ActivityArgs& a);

struct ZscoreArgs {
    std::string activity, out = ".";
    DayRange bl;
    double z_max = activity::kDefaultZMax;
};
void run_zscore(const ZscoreArgs& a);

struct ExceedanceArgs {
    std::string zscore, out = ".";
    DayRange bl, event;
    ThresholdGrid grid;
    std::size_t k = activity::kDefaultHotTowers;
    double z_max = activity::kDefaultZMax;
};
void run_exceedance(const ExceedanceArgs& a);

struct HatArgs {
    std::string cdr, out = ".";
    int tz = -6;
    DayRange bl;
    hat::NightWindow night;
};
void run_hat(const HatArgs& a);

struct CensusArgs {
    std::string hat, bts, regions, census, out = ".";
};
void run_census_compare(const CensusArgs& a);

struct VoronoiArgs {
    std::string bts, out = ".";
    std::optional<GeoBox> clip;  // default: registry bounding box padded by 0.05 degrees
};
void run_voronoi(const VoronoiArgs& a);

struct SegmentArgs {
    std::string pre, post, out = ".";
    raster::SegmentParams params;
};
void run_segment(const SegmentArgs& a);

struct RainArgs {
    std::string index, bts, out = ".";
    int tz = -6;
    DayRange window;
};
void run_rain(const RainArgs& a);

struct LagArgs {
    std::string zscore, rain_series, hot, out = ".";
    DayRange event;
    double z_max = activity::kDefaultZMax;
};
void run_lag(const LagArgs& a);

struct ImpactArgs {
    std::string zscore, bts, mask, regions, affected, out = ".";
    DayRange event;
    double d_max_m = 5000;
    double z_max = activity::kDefaultZMax;
    std::optional<double> shared_day_threshold;
    std::optional<GeoBox> clip;
};
void run_impact(const ImpactArgs& a);

struct TimelapseArgs {
    std::string zscore, out = ".";
    DayRange days;
    double z_max = activity::kDefaultZMax;
};
void run_timelapse(const TimelapseArgs& a);

struct SynthArgs {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::string out;
};
void run_synth(const SynthArgs& a);

struct PipelineArgs {
    std::string scenario;
    std::string out;  // default: <scenario>/out
    std::optional<int> tz;
    std::optional<DayRange> bl, event, rain_window;
    double z_max = activity::kDefaultZMax;
    hat::NightWindow night;
    std::size_t k = activity::kDefaultHotTowers;
    raster::SegmentParams segment;
    double d_max_m = 5000;
    ThresholdGrid grid;
    std::optional<double> shared_day_threshold;
};
void run_pipeline(const PipelineArgs& a);

// Default baseline: the 31 days before the event window.
DayRange default_baseline(const DayRange& event);

} // namespace floodlens::cli
