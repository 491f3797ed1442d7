#pragma once
// Per-tower daily activity x(t) = unique phones placing or receiving calls,
// baseline statistics, the BTS variation z-score and its summaries.

#include "floodlens/cdr_ingest.hpp"
#include "floodlens/common.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace floodlens::activity {

inline constexpr double kDefaultZMax = 100.0;
inline constexpr std::size_t kDefaultHotTowers = 6;

struct ActivitySeries {
    std::string bts_id;
    Day start_day = 0;
    std::vector<std::int64_t> values;  // one per consecutive day, zeros for silent days

    DayRange range() const { return {start_day, start_day + static_cast<Day>(values.size()) - 1}; }
    std::int64_t at(Day d) const { return values[static_cast<std::size_t>(d - start_day)]; }
    bool operator==(const ActivitySeries&) const = default;
};

struct BaselineStats {
    std::string bts_id;
    double mu = 0;
    double sigma = 0;  // population standard deviation
    std::size_t n_days = 0;
    bool degenerate = false;
};

struct ZScoreSeries {
    std::string bts_id;
    Day start_day = 0;
    std::vector<double> z;
    double clamp = kDefaultZMax;
    bool degenerate = false;  // sigma was zero; off-mean days sit at +-clamp

    DayRange range() const { return {start_day, start_day + static_cast<Day>(z.size()) - 1}; }
    double at(Day d) const { return z[static_cast<std::size_t>(d - start_day)]; }
};

struct Peak {
    double value = 0;
    Day day = 0;
};

struct TowerMax {
    std::string bts_id;
    double max_z = 0;
};

struct ExceedancePoint {
    double threshold = 0;
    double percent = 0;
};

// Streaming unique-phone counter. State grows with distinct
// (tower, day, phone) triples, never with the number of records.
class ActivityAccumulator {
public:
    ActivityAccumulator(const cdr::BtsRegistry& registry, DayBucketing bucketing);

    void add(const cdr::CdrView& record);
    void add(std::span<const cdr::CdrView> records);
    void add(const cdr::CdrRecord& record);

    // One series per registry tower over span (default: observed day range).
    std::vector<ActivitySeries> finish(std::optional<DayRange> span = std::nullopt) const;

    std::size_t distinct_entries() const { return keys_.size(); }
    std::size_t distinct_phones() const { return phones_.size(); }
    std::optional<DayRange> observed_range() const;

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
    };

    void insert(std::string_view phone, std::string_view bts, Day day);
    std::uint32_t phone_id(std::string_view phone);

    const cdr::BtsRegistry* registry_;
    DayBucketing bucketing_;
    std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> towers_;
    std::unordered_map<std::string, std::uint32_t, Hash, std::equal_to<>> phones_;
    std::unordered_set<std::uint64_t> keys_;
    bool have_day_ = false;
    Day bias_ = 0;
    Day min_day_ = 0;
    Day max_day_ = 0;
};

// x_b(d) = |origin phones on b during d  U  dest phones with dest_bts = b during d|.
// Records naming towers outside the registry do not contribute for those towers.
std::vector<ActivitySeries> compute_activity(std::span<const cdr::CdrRecord> records, const cdr::BtsRegistry& registry,
                                             const DayBucketing& bucketing,
                                             std::optional<DayRange> span = std::nullopt);

namespace serial {
std::vector<ActivitySeries> compute_activity(std::span<const cdr::CdrRecord> records, const cdr::BtsRegistry& registry,
                                             const DayBucketing& bucketing,
                                             std::optional<DayRange> span = std::nullopt);
} // namespace serial

BaselineStats baseline_stats(const ActivitySeries& series, const DayRange& bl_window);

ZScoreSeries zscore_series(const ActivitySeries& series, const BaselineStats& stats, double z_max = kDefaultZMax);

// Baseline + z-score for every series, parallel across towers.
std::vector<ZScoreSeries> zscore_all(std::span<const ActivitySeries> series, const DayRange& bl_window,
                                     double z_max = kDefaultZMax, std::vector<BaselineStats>* stats_out = nullptr);

// Maximum z within window; the earliest day wins ties.
Peak max_metric(const ZScoreSeries& series, const DayRange& window);

std::vector<TowerMax> tower_maxima(std::span<const ZScoreSeries> series, const DayRange& window);

// percent(v) = 100 * |{b : max_b >= v}| / N
std::vector<ExceedancePoint> exceedance_curve(std::span<const double> maxima, std::span<const double> thresholds);

// Evenly spaced thresholds from lo to hi inclusive.
std::vector<double> threshold_grid(double lo, double hi, double step);

// Sorted by max_z descending, then bts_id ascending; first min(k, N).
std::vector<std::string> top_k_hot(std::span<const TowerMax> maxima, std::size_t k = kDefaultHotTowers);

// CSV `bts_id,day_iso,value`
std::string export_activity_csv(std::span<const ActivitySeries> series);
std::vector<ActivitySeries> parse_activity_csv(std::string_view text);
std::string export_zscore_csv(std::span<const ZScoreSeries> series);
std::vector<ZScoreSeries> parse_zscore_csv(std::string_view text, double z_max = kDefaultZMax);
// CSV `bts_id,mu,sigma,n_days,degenerate`
std::string export_baseline_csv(std::span<const BaselineStats> stats);
// CSV `threshold,percent`
std::string export_exceedance_csv(std::span<const ExceedancePoint> curve);

} // namespace floodlens::activity
