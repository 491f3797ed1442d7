#include "floodlens/activity.hpp"

#include "floodlens/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace floodlens::activity {

namespace {

constexpr std::uint32_t kMaxTowers = 1u << 16;
constexpr Day kDayBiasHalf = 1 << 15;

std::uint64_t pack_key(std::uint32_t tower, std::uint32_t day_offset, std::uint32_t phone) {
    return (std::uint64_t{tower} << 48) | (std::uint64_t{day_offset} << 32) | phone;
}

void check_registry_size(const cdr::BtsRegistry& registry) {
    if (registry.size() >= kMaxTowers) throw DataError("registry too large for activity counting");
}

std::vector<ActivitySeries> empty_series(const cdr::BtsRegistry& registry, const DayRange& span) {
    std::vector<ActivitySeries> out;
    out.reserve(registry.size());
    for (const auto& s : registry.sites()) out.push_back({s.bts_id, span.first, std::vector<std::int64_t>(span.length(), 0)});
    return out;
}

double mean_of(std::span<const double> v) {
    double sum = 0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

} // namespace

ActivityAccumulator::ActivityAccumulator(const cdr::BtsRegistry& registry, DayBucketing bucketing)
    : registry_(&registry), bucketing_(bucketing) {
    check_registry_size(registry);
    for (std::size_t i = 0; i < registry.size(); ++i)
        towers_.emplace(registry.sites()[i].bts_id, static_cast<std::uint32_t>(i));
}

std::uint32_t ActivityAccumulator::phone_id(std::string_view phone) {
    if (auto it = phones_.find(phone); it != phones_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(phones_.size());
    phones_.emplace(std::string(phone), id);
    return id;
}

void ActivityAccumulator::insert(std::string_view phone, std::string_view bts, Day day) {
    const auto tower = towers_.find(bts);
    if (tower == towers_.end()) return;
    if (!have_day_) {
        have_day_ = true;
        bias_ = day - kDayBiasHalf;
        min_day_ = max_day_ = day;
    }
    const std::int64_t offset = std::int64_t{day} - bias_;
    if (offset < 0 || offset >= (std::int64_t{1} << 16)) throw DataError("record days span more than 89 years");
    min_day_ = std::min(min_day_, day);
    max_day_ = std::max(max_day_, day);
    keys_.insert(pack_key(tower->second, static_cast<std::uint32_t>(offset), phone_id(phone)));
}

void ActivityAccumulator::add(const cdr::CdrView& r) {
    const Day day = bucketing_.day_of(r.timestamp);
    insert(r.origin_id, r.origin_bts, day);
    if (!r.dest_bts.empty()) insert(r.dest_id, r.dest_bts, day);
}

void ActivityAccumulator::add(std::span<const cdr::CdrView> records) {
    for (const auto& r : records) add(r);
}

void ActivityAccumulator::add(const cdr::CdrRecord& r) {
    const Day day = bucketing_.day_of(r.timestamp);
    insert(r.origin_id, r.origin_bts, day);
    if (r.dest_bts) insert(r.dest_id, *r.dest_bts, day);
}

std::optional<DayRange> ActivityAccumulator::observed_range() const {
    if (!have_day_) return std::nullopt;
    return DayRange{min_day_, max_day_};
}

std::vector<ActivitySeries> ActivityAccumulator::finish(std::optional<DayRange> span) const {
    if (!span) span = observed_range();
    if (!span) return {};
    auto out = empty_series(*registry_, *span);
    for (const std::uint64_t key : keys_) {
        const auto tower = static_cast<std::size_t>(key >> 48);
        const Day day = bias_ + static_cast<Day>((key >> 32) & 0xFFFF);
        if (span->contains(day)) ++out[tower].values[static_cast<std::size_t>(day - span->first)];
    }
    return out;
}

std::vector<ActivitySeries> compute_activity(std::span<const cdr::CdrRecord> records, const cdr::BtsRegistry& registry,
                                             const DayBucketing& bucketing, std::optional<DayRange> span) {
    check_registry_size(registry);
    const std::size_t n = records.size();
    const int workers = parallel::worker_count();

    // Resolve towers and days once; -1 marks an unknown or absent tower.
    std::vector<std::int32_t> origin_idx(n), dest_idx(n);
    std::vector<Day> days(n);
    Day lo = std::numeric_limits<Day>::max();
    Day hi = std::numeric_limits<Day>::min();
#pragma omp parallel for schedule(static) num_threads(workers) reduction(min : lo) reduction(max : hi)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        const auto o = registry.index_of(r.origin_bts);
        const auto d = r.dest_bts ? registry.index_of(*r.dest_bts) : std::nullopt;
        origin_idx[static_cast<std::size_t>(i)] = o ? static_cast<std::int32_t>(*o) : -1;
        dest_idx[static_cast<std::size_t>(i)] = d ? static_cast<std::int32_t>(*d) : -1;
        const Day day = bucketing.day_of(r.timestamp);
        days[static_cast<std::size_t>(i)] = day;
        if (o || d) {
            lo = std::min(lo, day);
            hi = std::max(hi, day);
        }
    }
    if (!span) {
        if (lo > hi) return {};
        span = DayRange{lo, hi};
    }
    if (span->length() >= (std::size_t{1} << 16)) throw DataError("activity span too long");

    auto out = empty_series(registry, *span);

    // Each worker owns the towers with index % workers == rank, so the count
    // rows it writes are disjoint from every other worker's.
#pragma omp parallel num_threads(workers)
    {
        const auto n_workers = static_cast<std::size_t>(omp_get_num_threads());
        const auto rank = static_cast<std::size_t>(omp_get_thread_num());
        std::unordered_map<std::string_view, std::uint32_t> phones;
        std::unordered_set<std::uint64_t> keys;
        auto credit = [&](std::int32_t tower, std::string_view phone, Day day) {
            if (tower < 0 || static_cast<std::size_t>(tower) % n_workers != rank || !span->contains(day)) return;
            const auto [it, inserted] = phones.try_emplace(phone, static_cast<std::uint32_t>(phones.size()));
            const auto key = pack_key(static_cast<std::uint32_t>(tower), static_cast<std::uint32_t>(day - span->first), it->second);
            if (keys.insert(key).second) ++out[static_cast<std::size_t>(tower)].values[static_cast<std::size_t>(day - span->first)];
        };
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = records[i];
            credit(origin_idx[i], r.origin_id, days[i]);
            credit(dest_idx[i], r.dest_id, days[i]);
        }
    }
    return out;
}

namespace serial {

std::vector<ActivitySeries> compute_activity(std::span<const cdr::CdrRecord> records, const cdr::BtsRegistry& registry,
                                             const DayBucketing& bucketing, std::optional<DayRange> span) {
    std::map<std::pair<std::size_t, Day>, std::set<std::string>> phones;
    std::optional<DayRange> observed;
    auto credit = [&](const std::string& phone, std::string_view bts, Day day) {
        const auto idx = registry.index_of(bts);
        if (!idx) return;
        observed = observed ? DayRange{std::min(observed->first, day), std::max(observed->last, day)} : DayRange{day, day};
        phones[{*idx, day}].insert(phone);
    };
    for (const auto& r : records) {
        const Day day = bucketing.day_of(r.timestamp);
        credit(r.origin_id, r.origin_bts, day);
        if (r.dest_bts) credit(r.dest_id, *r.dest_bts, day);
    }
    if (!span) span = observed;
    if (!span) return {};
    auto out = empty_series(registry, *span);
    for (const auto& [key, set] : phones)
        if (span->contains(key.second))
            out[key.first].values[static_cast<std::size_t>(key.second - span->first)] = static_cast<std::int64_t>(set.size());
    return out;
}

} // namespace serial

BaselineStats baseline_stats(const ActivitySeries& series, const DayRange& bl_window) {
    if (series.values.empty() || !series.range().contains(bl_window))
        throw DataError("baseline window " + format_day_range(bl_window) + " outside series of " + series.bts_id);
    if (bl_window.length() < 2) throw DataError("baseline window must span at least 2 days");

    std::vector<double> window;
    window.reserve(bl_window.length());
    for (Day d = bl_window.first; d <= bl_window.last; ++d) window.push_back(static_cast<double>(series.at(d)));
    const double mu = mean_of(window);
    double ss = 0;
    for (double x : window) ss += (x - mu) * (x - mu);
    const double sigma = std::sqrt(ss / static_cast<double>(window.size()));
    return {series.bts_id, mu, sigma, window.size(), sigma == 0.0};
}

ZScoreSeries zscore_series(const ActivitySeries& series, const BaselineStats& stats, double z_max) {
    if (series.bts_id != stats.bts_id)
        throw DataError("baseline for " + stats.bts_id + " applied to series of " + series.bts_id);
    if (!(z_max > 0)) throw DataError("z_max must be positive");
    ZScoreSeries out{series.bts_id, series.start_day, {}, z_max, stats.degenerate};
    out.z.reserve(series.values.size());
    for (const auto v : series.values) {
        const double x = static_cast<double>(v);
        double z;
        if (stats.degenerate)
            z = x == stats.mu ? 0.0 : (x > stats.mu ? z_max : -z_max);
        else
            z = std::clamp((x - stats.mu) / stats.sigma, -z_max, z_max);
        out.z.push_back(z);
    }
    return out;
}

std::vector<ZScoreSeries> zscore_all(std::span<const ActivitySeries> series, const DayRange& bl_window, double z_max,
                                     std::vector<BaselineStats>* stats_out) {
    std::vector<ZScoreSeries> out(series.size());
    std::vector<BaselineStats> stats(series.size());
    std::string error;
    const int workers = parallel::worker_count();
#pragma omp parallel for schedule(dynamic, 8) num_threads(workers)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(series.size()); ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            stats[k] = baseline_stats(series[k], bl_window);
            out[k] = zscore_series(series[k], stats[k], z_max);
        } catch (const DataError& e) {
#pragma omp critical(floodlens_zscore_error)
            if (error.empty()) error = e.what();
        }
    }
    if (!error.empty()) throw DataError(error);
    if (stats_out) *stats_out = std::move(stats);
    return out;
}

Peak max_metric(const ZScoreSeries& series, const DayRange& window) {
    if (window.first > window.last) throw DataError("empty window");
    if (series.z.empty() || !series.range().contains(window))
        throw DataError("window " + format_day_range(window) + " outside z-series of " + series.bts_id);
    Peak best{series.at(window.first), window.first};
    for (Day d = window.first + 1; d <= window.last; ++d)
        if (series.at(d) > best.value) best = {series.at(d), d};
    return best;
}

std::vector<TowerMax> tower_maxima(std::span<const ZScoreSeries> series, const DayRange& window) {
    std::vector<TowerMax> out;
    out.reserve(series.size());
    for (const auto& s : series) out.push_back({s.bts_id, max_metric(s, window).value});
    return out;
}

std::vector<ExceedancePoint> exceedance_curve(std::span<const double> maxima, std::span<const double> thresholds) {
    if (maxima.empty()) throw DataError("exceedance curve needs at least one tower maximum");
    std::vector<double> sorted(maxima.begin(), maxima.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    std::vector<ExceedancePoint> out;
    out.reserve(thresholds.size());
    for (double v : thresholds) {
        const auto at_or_above = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), v);
        out.push_back({v, 100.0 * static_cast<double>(at_or_above) / n});
    }
    return out;
}

std::vector<double> threshold_grid(double lo, double hi, double step) {
    if (!(step > 0) || !(lo <= hi)) throw DataError("threshold grid needs lo <= hi and step > 0");
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    return out;
}

std::vector<std::string> top_k_hot(std::span<const TowerMax> maxima, std::size_t k) {
    if (k == 0) throw DataError("k must be at least 1");
    std::vector<TowerMax> sorted(maxima.begin(), maxima.end());
    std::sort(sorted.begin(), sorted.end(), [](const TowerMax& a, const TowerMax& b) {
        if (a.max_z != b.max_z) return a.max_z > b.max_z;
        return a.bts_id < b.bts_id;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, sorted.size()); ++i) out.push_back(sorted[i].bts_id);
    return out;
}

namespace {

template <class Row>
std::map<std::string, std::vector<std::pair<Day, Row>>> parse_daily_rows(std::string_view text, auto parse_value) {
    std::map<std::string, std::vector<std::pair<Day, Row>>> rows;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line == "bts_id,day_iso,value") continue;
        const auto f = split(line, ',');
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (f.size() != 3) throw DataError(where + "expected bts_id,day_iso,value");
        const auto day = parse_date(f[1]);
        if (!day) throw DataError(where + "bad date");
        const std::optional<Row> value = parse_value(f[2]);
        if (!value) throw DataError(where + "bad value");
        rows[std::string(f[0])].emplace_back(*day, *value);
    }
    for (auto& [id, v] : rows) {
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i].first != v[i - 1].first + 1) throw DataError("non-contiguous days in series " + id);
    }
    return rows;
}

} // namespace

std::string export_activity_csv(std::span<const ActivitySeries> series) {
    std::string out = "bts_id,day_iso,value\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.values.size(); ++i)
            out += s.bts_id + "," + format_date(s.start_day + static_cast<Day>(i)) + "," + std::to_string(s.values[i]) + "\n";
    return out;
}

std::vector<ActivitySeries> parse_activity_csv(std::string_view text) {
    const auto rows = parse_daily_rows<std::int64_t>(text, [](std::string_view s) -> std::optional<std::int64_t> {
        const auto v = parse_int(s);
        if (!v || *v < 0) return std::nullopt;
        return v;
    });
    std::vector<ActivitySeries> out;
    for (const auto& [id, v] : rows) {
        ActivitySeries s{id, v.front().first, {}};
        for (const auto& [d, x] : v) s.values.push_back(x);
        out.push_back(std::move(s));
    }
    return out;
}

std::string export_zscore_csv(std::span<const ZScoreSeries> series) {
    std::string out = "bts_id,day_iso,value\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.z.size(); ++i)
            out += s.bts_id + "," + format_date(s.start_day + static_cast<Day>(i)) + "," + format_shortest(s.z[i]) + "\n";
    return out;
}

std::vector<ZScoreSeries> parse_zscore_csv(std::string_view text, double z_max) {
    const auto rows = parse_daily_rows<double>(text, [](std::string_view s) { return parse_double(s); });
    std::vector<ZScoreSeries> out;
    for (const auto& [id, v] : rows) {
        ZScoreSeries s{id, v.front().first, {}, z_max, false};
        for (const auto& [d, z] : v) s.z.push_back(z);
        out.push_back(std::move(s));
    }
    return out;
}

std::string export_baseline_csv(std::span<const BaselineStats> stats) {
    std::string out = "bts_id,mu,sigma,n_days,degenerate\n";
    for (const auto& s : stats)
        out += s.bts_id + "," + format_fixed(s.mu) + "," + format_fixed(s.sigma) + "," + std::to_string(s.n_days) + "," +
               (s.degenerate ? "1" : "0") + "\n";
    return out;
}

std::string export_exceedance_csv(std::span<const ExceedancePoint> curve) {
    std::string out = "threshold,percent\n";
    for (const auto& p : curve) out += format_fixed(p.threshold) + "," + format_fixed(p.percent) + "\n";
    return out;
}

} // namespace floodlens::activity
