#pragma once
// Home antenna tower (the tower a phone uses most at night during the
// baseline), per-region CDR population and the census regression.

#include "floodlens/cdr_ingest.hpp"
#include "floodlens/common.hpp"
#include "floodlens/geo.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens::hat {

inline constexpr std::string_view kUnassigned = "unassigned";

// Inclusive local hours; start > end wraps past midnight (20..6 = 20:00-06:59).
struct NightWindow {
    int start_hour = 20;
    int end_hour = 6;

    bool contains(int hour) const;
    void validate() const;
};

NightWindow parse_night_window(std::string_view s);  // "20-6"
std::string format_night_window(const NightWindow& w);

struct HatAssignment {
    std::map<std::string, std::string, std::less<>> phone_to_bts;
    NightWindow night;
    DayRange bl_window;
};

// Origin events credit origin_bts, received events credit dest_bts when
// present. HAT = most credited tower, smallest bts_id on ties. Phones without
// night events inside bl_window are omitted.
HatAssignment assign_hat(std::span<const cdr::CdrRecord> records, const DayBucketing& bucketing,
                         const NightWindow& night, const DayRange& bl_window);

namespace serial {
HatAssignment assign_hat(std::span<const cdr::CdrRecord> records, const DayBucketing& bucketing,
                         const NightWindow& night, const DayRange& bl_window);
} // namespace serial

// Streaming variant for large logs.
class HatAccumulator {
public:
    HatAccumulator(DayBucketing bucketing, NightWindow night, DayRange bl_window);

    void add(const cdr::CdrView& record);
    void add(std::span<const cdr::CdrView> records);
    HatAssignment finish() const;

private:
    void credit(std::string_view phone, std::string_view bts);

    DayBucketing bucketing_;
    NightWindow night_;
    DayRange bl_window_;
    std::map<std::string, std::map<std::string, std::int64_t, std::less<>>, std::less<>> counts_;
};

struct RegionPopulation {
    std::string region_id;
    std::int64_t cdr_count = 0;
    std::optional<std::int64_t> census_count;
};

struct PopulationEstimate {
    std::vector<RegionPopulation> regions;  // input order
    std::int64_t unassigned = 0;           // HAT outside every region or not in the registry
};

PopulationEstimate estimate_population(const HatAssignment& hat, const cdr::BtsRegistry& registry,
                                       std::span<const geo::RegionPolygon> regions);

struct CensusRow {
    std::string region_id;
    std::int64_t population = 0;
};

// CSV `region_id,population`
std::vector<CensusRow> parse_census_csv(std::string_view text);
std::string export_census_csv(std::span<const CensusRow> rows);

// Sets census_count where the region appears in the table; returns table ids with no region.
std::vector<std::string> join_census(PopulationEstimate& pops, std::span<const CensusRow> census);

struct RegionRatio {
    std::string region_id;
    double ratio = 0;  // cdr_count / census_count
};

struct CensusFit {
    double slope = 0;      // census = slope * cdr + intercept
    double intercept = 0;
    double r_squared = 0;  // squared Pearson correlation
    std::vector<RegionRatio> ratios;
    double ratio_cv = 0;  // population std / mean of ratios
};

// Uses regions with a census count. Fewer than 3, a non-positive census or a
// zero variance on either axis is fatal.
CensusFit compare_census(std::span<const RegionPopulation> pops);

// CSV `phone_id,bts_id`
std::string export_hat_csv(const HatAssignment& hat);
HatAssignment parse_hat_csv(std::string_view text);
// CSV `region_id,cdr_count,census_count,ratio`; the unassigned bucket is the last row.
std::string export_population_csv(const PopulationEstimate& pops);
std::string export_census_fit_json(const CensusFit& fit);

} // namespace floodlens::hat
