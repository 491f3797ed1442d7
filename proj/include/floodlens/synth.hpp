#pragma once
// Deterministic synthetic flood scenarios: tower registry, regions, census,
// CDR log realizing pre-drawn daily counts, rain frames, pre/post rasters and
// a manifest of everything planted.

#include "floodlens/activity.hpp"
#include "floodlens/cdr_ingest.hpp"
#include "floodlens/common.hpp"
#include "floodlens/geo.hpp"
#include "floodlens/home_antenna.hpp"
#include "floodlens/impact.hpp"
#include "floodlens/rainfall.hpp"
#include "floodlens/raster.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens::synth {

struct ScenarioConfig {
    std::uint64_t rng_seed = 20091103;
    int tz_offset_hours = -6;
    Day first_day = 0;  // inclusive scenario span
    Day last_day = 0;
    DayRange bl_window;
    DayRange event_window;
    GeoBox study_box{17.3, 18.65, -94.2, -91.0};

    std::size_t n_bts = 40;
    std::size_t n_phones = 20000;
    double base_rate_min = 80;  // per-tower mean daily unique phones
    double base_rate_max = 200;
    std::array<double, 7> weekly{1.0, 1.0, 1.0, 1.0, 1.05, 0.9, 0.85};  // Monday first
    double visitor_fraction = 0.2;
    double repeat_call_prob = 0.1;

    std::vector<std::string> spike_towers;
    double spike_factor = 4;
    Day spike_start = 0;
    int spike_duration = 1;

    std::vector<std::string> outage_towers;
    std::optional<DayRange> outage_days;

    double rain_center_lat = 18.0;
    double rain_center_lon = -93.2;
    Day rain_peak_day = 0;
    int rain_days = 3;  // odd; centered on the peak day
    double rain_magnitude_mm = 800;
    double rain_sigma_deg = 1.0;
    double rain_temporal_sigma_h = 18;
    double rain_cell_deg = rain::kDefaultCellDeg;

    double flood_cell_deg = 0.01;
    std::size_t flood_row0 = 30;
    std::size_t flood_col0 = 70;
    std::size_t flood_rows = 60;
    std::size_t flood_cols = 80;
    double flood_increment = 1.0;
    double flood_noise = 0.2;

    std::vector<hat::CensusRow> census;          // empty: drawn from the seed
    std::vector<impact::AffectedRow> affected;  // defaults to the 2009 municipal figures
};

// Tabasco-like defaults: Oct 2009 to Jan 2010, six spiked towers four days after the rain peak.
ScenarioConfig default_config();

// Flat JSON object; omitted fields keep their defaults. Errors name the field.
ScenarioConfig parse_config_json(std::string_view text);
std::string config_to_json(const ScenarioConfig& config);
void validate(const ScenarioConfig& config);

// Region names of the 4x3 region grid, row-major from the south-west.
const std::vector<std::string>& region_names();

// Multinomial allocation of n items over weights, drawn item by item.
std::vector<std::int64_t> multinomial_counts(std::span<const double> weights, std::size_t n, std::uint64_t seed);

struct Bundle {
    ScenarioConfig config;
    cdr::BtsRegistry registry;
    std::vector<cdr::CdrRecord> records;
    std::vector<geo::RegionPolygon> regions;
    std::vector<hat::CensusRow> census;
    std::vector<impact::AffectedRow> affected;
    rain::RainGrid rain;
    raster::Raster flood_pre;
    raster::Raster flood_post;
    raster::FloodMask planted_flood;
    std::vector<activity::ActivitySeries> truth_counts;
    std::vector<std::string> phone_home;  // home tower per phone index
    std::string manifest;                 // JSON
};

Bundle generate(const ScenarioConfig& config);

// cdr.csv, bts.csv, regions.geojson, census.csv, affected.csv, rain/index.csv
// with frames, flood_pre.asc, flood_post.asc, truth_counts.csv, config.json,
// manifest.json.
void write_bundle(const Bundle& bundle, const std::string& dir);

} // namespace floodlens::synth
