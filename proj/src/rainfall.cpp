#include "floodlens/rainfall.hpp"

#include "floodlens/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

namespace floodlens::rain {

namespace {

void check_window(const RainGrid& grid, const TimeWindow& w) {
    if (grid.frames.empty()) throw DataError("rain grid has no frames");
    if (!(w.start < w.end)) throw DataError("empty accumulation window");
    if (w.start < grid.begin() || w.end > grid.end())
        throw DataError("accumulation window " + format_instant(w.start) + " .. " + format_instant(w.end) +
                        " outside frame range");
}

bool intersects(const RainGrid& grid, std::size_t f, const TimeWindow& w) {
    return grid.instants[f] < w.end && grid.instants[f] + grid.timestep_s > w.start;
}

std::size_t nearest_index(double offset_cells, std::size_t n, bool& clamped) {
    if (offset_cells < -0.5 || offset_cells > static_cast<double>(n) - 0.5) clamped = true;
    const double i = std::ceil(offset_cells - 0.5);
    if (i <= 0) return 0;
    if (i >= static_cast<double>(n - 1)) return n - 1;
    return static_cast<std::size_t>(i);
}

template <class Values>
Day argmax_day(const Values& at, const DayRange& window) {
    Day best = window.first;
    double best_v = at(window.first);
    for (Day d = window.first + 1; d <= window.last; ++d)
        if (at(d) > best_v) best_v = at(d), best = d;
    return best;
}

} // namespace

void RainGrid::validate() const {
    geom.validate();
    if (frames.empty()) throw DataError("rain grid has no frames");
    if (frames.size() != instants.size()) throw DataError("rain grid frame/instant count mismatch");
    if (timestep_s <= 0) throw DataError("rain grid timestep must be positive");
    for (std::size_t f = 0; f < frames.size(); ++f) {
        if (frames[f].size() != geom.size()) throw DataError("rain frame geometry mismatch");
        if (f > 0 && instants[f] - instants[f - 1] != timestep_s)
            throw DataError("rain frames must be strictly increasing and uniformly spaced");
    }
}

TimeWindow window_for_days(const DayRange& days, const DayBucketing& bucketing) {
    return {bucketing.day_start(days.first), bucketing.day_start(days.last + 1)};
}

RainGrid load_rain_grid(const std::string& index_path) {
    const std::string text = read_file(index_path);
    const auto dir = std::filesystem::path(index_path).parent_path();
    RainGrid grid;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line == "frame_instant_iso,path") continue;
        const auto f = split(line, ',');
        const std::string where = "rain index line " + std::to_string(line_no) + ": ";
        if (f.size() != 2) throw DataError(where + "expected frame_instant_iso,path");
        const auto t = parse_instant(trim(f[0]));
        if (!t) throw DataError(where + "bad instant");
        std::filesystem::path p(std::string(trim(f[1])));
        if (p.is_relative()) p = dir / p;
        const auto frame = raster::read_ascii_grid(p.string());
        if (grid.frames.empty())
            grid.geom = frame.geom;
        else if (!(frame.geom == grid.geom))
            throw DataError(where + "frame geometry differs from the first frame");
        for (double v : frame.values)
            if (!std::isfinite(v) || v < 0) throw DataError(where + "precipitation must be finite and non-negative");
        grid.instants.push_back(*t);
        grid.frames.push_back(frame.values);
    }
    if (grid.frames.empty()) throw DataError("rain index lists no frames: " + index_path);
    grid.timestep_s = grid.instants.size() > 1 ? grid.instants[1] - grid.instants[0] : kDefaultTimestepS;
    grid.validate();
    return grid;
}

std::string format_rain_index(std::span<const Instant> instants, std::span<const std::string> paths) {
    std::string out = "frame_instant_iso,path\n";
    for (std::size_t i = 0; i < instants.size(); ++i) out += format_instant(instants[i]) + "," + paths[i] + "\n";
    return out;
}

std::vector<double> accumulate(const RainGrid& grid, const TimeWindow& window) {
    check_window(grid, window);
    std::vector<std::size_t> selected;
    for (std::size_t f = 0; f < grid.frames.size(); ++f)
        if (intersects(grid, f, window)) selected.push_back(f);
    std::vector<double> out(grid.geom.size(), 0.0);
    const int workers = parallel::worker_count();
#pragma omp parallel for schedule(static) num_threads(workers)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(out.size()); ++i) {
        double acc = 0;
        for (const auto f : selected) acc += grid.frames[f][static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

namespace serial {

std::vector<double> accumulate(const RainGrid& grid, const TimeWindow& window) {
    check_window(grid, window);
    std::vector<double> out(grid.geom.size(), 0.0);
    for (std::size_t f = 0; f < grid.frames.size(); ++f) {
        if (!intersects(grid, f, window)) continue;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += grid.frames[f][i];
    }
    return out;
}

} // namespace serial

CellIndex nearest_cell(const raster::GridGeometry& geom, const LatLon& p) {
    CellIndex out;
    out.row = nearest_index((p.lat - geom.lat0) / geom.cell_deg, geom.nrows, out.clamped);
    out.col = nearest_index((p.lon - geom.lon0) / geom.cell_deg, geom.ncols, out.clamped);
    return out;
}

RainSeries sample_at_site(const RainGrid& grid, const cdr::BtsSite& site, const DayBucketing& bucketing) {
    if (grid.frames.empty()) throw DataError("rain grid has no frames");
    const auto cell = nearest_cell(grid.geom, {site.lat, site.lon});
    const auto idx = grid.geom.index(cell.row, cell.col);
    const Day first = bucketing.day_of(grid.instants.front());
    const Day last = bucketing.day_of(grid.instants.back());
    RainSeries out{site.bts_id, first, std::vector<double>(static_cast<std::size_t>(last - first + 1), 0.0), cell.clamped};
    for (std::size_t f = 0; f < grid.frames.size(); ++f)
        out.daily_mm[static_cast<std::size_t>(bucketing.day_of(grid.instants[f]) - first)] += grid.frames[f][idx];
    return out;
}

int peak_lag(const activity::ZScoreSeries& z, const RainSeries& rain, const DayRange& window) {
    if (z.z.empty() || !z.range().contains(window))
        throw DataError("event window " + format_day_range(window) + " not covered by z-series of " + z.bts_id);
    if (rain.daily_mm.empty() || !rain.range().contains(window))
        throw DataError("event window " + format_day_range(window) + " not covered by rain series of " + rain.bts_id);
    const Day z_peak = argmax_day([&](Day d) { return z.at(d); }, window);
    const Day r_peak = argmax_day([&](Day d) { return rain.at(d); }, window);
    return z_peak - r_peak;
}

double median(std::vector<int> values) {
    if (values.empty()) throw DataError("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return (static_cast<double>(values[n / 2 - 1]) + static_cast<double>(values[n / 2])) / 2.0;
}

LagReport lag_report(std::span<const activity::ZScoreSeries> z, std::span<const RainSeries> rain,
                     std::span<const std::string> towers, const DayRange& window) {
    std::map<std::string_view, const activity::ZScoreSeries*> z_by_id;
    std::map<std::string_view, const RainSeries*> rain_by_id;
    for (const auto& s : z) z_by_id[s.bts_id] = &s;
    for (const auto& s : rain) rain_by_id[s.bts_id] = &s;
    LagReport report;
    std::vector<int> lags;
    for (const auto& id : towers) {
        const auto zi = z_by_id.find(id);
        const auto ri = rain_by_id.find(id);
        if (zi == z_by_id.end()) throw DataError("no z-series for tower " + id);
        if (ri == rain_by_id.end()) throw DataError("no rain series for tower " + id);
        const int lag = peak_lag(*zi->second, *ri->second, window);
        const auto& zs = *zi->second;
        const auto& rs = *ri->second;
        const Day z_peak = argmax_day([&](Day d) { return zs.at(d); }, window);
        const Day r_peak = argmax_day([&](Day d) { return rs.at(d); }, window);
        report.towers.push_back({id, r_peak, z_peak, lag});
        lags.push_back(lag);
    }
    report.median_lag = median(lags);
    return report;
}

std::string export_rain_series_csv(std::span<const RainSeries> series) {
    std::string out = "bts_id,day_iso,value\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.daily_mm.size(); ++i)
            out += s.bts_id + "," + format_date(s.start_day + static_cast<Day>(i)) + "," + format_shortest(s.daily_mm[i]) + "\n";
    return out;
}

std::vector<RainSeries> parse_rain_series_csv(std::string_view text) {
    // Same row layout as z-score series.
    const auto rows = activity::parse_zscore_csv(text);
    std::vector<RainSeries> out;
    for (const auto& r : rows) {
        for (double v : r.z)
            if (v < 0) throw DataError("negative precipitation in series " + r.bts_id);
        out.push_back({r.bts_id, r.start_day, r.z, false});
    }
    return out;
}

std::string export_lag_csv(const LagReport& report) {
    std::string out = "bts_id,rain_peak_day,z_peak_day,lag\n";
    for (const auto& e : report.towers)
        out += e.bts_id + "," + format_date(e.rain_peak) + "," + format_date(e.z_peak) + "," + std::to_string(e.lag) + "\n";
    return out;
}

} // namespace floodlens::rain
