#include "floodlens/impact.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace floodlens::impact {

namespace {

std::string json_string(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

template <class T, class F>
std::string or_null(const std::optional<T>& v, F&& fmt) {
    return v ? fmt(*v) : std::string("null");
}

std::string number(double v) { return format_fixed(v); }

template <class T>
std::optional<T> optional_field(const nlohmann::json& props, const char* key) {
    if (!props.contains(key) || props[key].is_null()) return std::nullopt;
    return props[key].get<T>();
}

} // namespace

std::vector<AffectedRow> parse_affected_csv(std::string_view text) {
    std::vector<AffectedRow> rows;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line == "region_id,affected_population,camps") continue;
        const auto f = split(line, ',');
        const std::string where = "affected line " + std::to_string(line_no) + ": ";
        if (f.size() != 3 || trim(f[0]).empty()) throw DataError(where + "expected region_id,affected_population,camps");
        const auto pop = parse_int(trim(f[1]));
        const auto camps = parse_int(trim(f[2]));
        if (!pop || *pop < 0 || !camps || *camps < 0) throw DataError(where + "counts must be non-negative integers");
        rows.push_back({std::string(trim(f[0])), *pop, *camps});
    }
    return rows;
}

std::string export_affected_csv(std::span<const AffectedRow> rows) {
    std::string out = "region_id,affected_population,camps\n";
    for (const auto& r : rows) out += r.region_id + "," + std::to_string(r.affected_population) + "," + std::to_string(r.camps) + "\n";
    return out;
}

Day shared_critical_day(std::span<const activity::ZScoreSeries> zseries, const DayRange& window, double threshold) {
    Day best = window.first;
    long best_n = -1;
    for (Day d = window.first; d <= window.last; ++d) {
        long n = 0;
        for (const auto& s : zseries) {
            if (!s.range().contains(d)) throw DataError("window " + format_day_range(window) + " not covered by z-series of " + s.bts_id);
            if (s.at(d) >= threshold) ++n;
        }
        if (n > best_n) best = d, best_n = n;
    }
    return best;
}

ImpactMap build_impact_map(std::span<const activity::ZScoreSeries> zseries, const cdr::BtsRegistry& registry,
                           const raster::FloodMask& flood_mask, std::span<const geo::RegionPolygon> regions,
                           std::span<const AffectedRow> affected, const DayRange& event_window,
                           const ImpactOptions& options) {
    if (event_window.first > event_window.last) throw DataError("event window is empty");
    std::map<std::string_view, const activity::ZScoreSeries*> by_id;
    for (const auto& s : zseries) by_id[s.bts_id] = &s;
    std::map<std::string_view, const AffectedRow*> table;
    for (const auto& row : affected) table[row.region_id] = &row;

    ImpactMap out;
    for (const auto& row : affected) {
        const bool known = std::any_of(regions.begin(), regions.end(),
                                       [&](const geo::RegionPolygon& r) { return r.region_id == row.region_id; });
        if (!known) out.unmatched_rows.push_back(row.region_id);
    }
    if (options.shared_day_threshold) {
        std::vector<activity::ZScoreSeries> present;
        for (const auto& site : registry.sites())
            if (auto it = by_id.find(site.bts_id); it != by_id.end()) present.push_back(*it->second);
        if (!present.empty()) out.shared_day = shared_critical_day(present, event_window, *options.shared_day_threshold);
    }

    const geo::FloodProximity proximity(flood_mask);
    for (const auto& site : registry.sites()) {
        ImpactRecord rec;
        rec.bts_id = site.bts_id;
        rec.lat = site.lat;
        rec.lon = site.lon;
        if (auto it = by_id.find(site.bts_id); it != by_id.end()) {
            const auto& s = *it->second;
            const auto peak = activity::max_metric(s, event_window);
            rec.max_z = peak.value;
            rec.day_of_max = peak.day;
            double m = 0;
            for (Day d = event_window.first; d <= event_window.last; ++d) m = std::max(m, std::abs(s.at(d)));
            rec.max_abs_z = m;
            if (out.shared_day) rec.shared_day_z = s.at(*out.shared_day);
        } else {
            out.missing_series.push_back(site.bts_id);
        }
        rec.in_flood = proximity.near({site.lat, site.lon}, options.d_max_m);
        if (const auto r = geo::region_of({site.lat, site.lon}, regions)) {
            rec.region_id = regions[*r].region_id;
            if (auto it = table.find(*rec.region_id); it != table.end()) {
                rec.affected_population = it->second->affected_population;
                rec.camps = it->second->camps;
            }
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

std::string export_geojson(std::span<const ImpactRecord> records, const geo::VoronoiDiagram* cells) {
    if (records.empty()) throw DataError("impact map has no records");
    std::vector<const ImpactRecord*> sorted;
    for (const auto& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->bts_id < b->bts_id; });

    const auto as_int = [](std::int64_t v) { return std::to_string(v); };
    std::string out = "{\"type\":\"FeatureCollection\",\"features\":[\n";
    bool first = true;
    for (const auto* r : sorted) {
        if (!first) out += ",\n";
        first = false;
        out += "{\"type\":\"Feature\",\"properties\":{";
        out += "\"bts_id\":" + json_string(r->bts_id) + ",\"kind\":\"tower\"";
        out += ",\"lat\":" + number(r->lat) + ",\"lon\":" + number(r->lon);
        out += ",\"max_z\":" + or_null(r->max_z, number);
        out += ",\"day_of_max\":" + or_null(r->day_of_max, [](Day d) { return json_string(format_date(d)); });
        out += ",\"max_abs_z\":" + or_null(r->max_abs_z, number);
        out += ",\"shared_day_z\":" + or_null(r->shared_day_z, number);
        out += std::string(",\"in_flood\":") + (r->in_flood ? "true" : "false");
        out += ",\"region_id\":" + or_null(r->region_id, [](const std::string& s) { return json_string(s); });
        out += ",\"affected_population\":" + or_null(r->affected_population, as_int);
        out += ",\"camps\":" + or_null(r->camps, as_int);
        out += "},\"geometry\":{\"type\":\"Point\",\"coordinates\":[" + number(r->lon) + "," + number(r->lat) + "]}}";
    }
    if (cells) {
        for (const auto& cell : cells->cells) {
            const auto ring = geo::cell_ring(*cells, cell);
            if (ring.empty()) continue;
            out += ",\n{\"type\":\"Feature\",\"properties\":{\"bts_id\":" + json_string(cell.bts_id) +
                   ",\"kind\":\"cell\"},\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[[";
            for (std::size_t i = 0; i < ring.size(); ++i)
                out += (i ? ",[" : "[") + number(ring[i].lon) + "," + number(ring[i].lat) + "]";
            out += "]]}}";
        }
    }
    out += "\n]}\n";
    return out;
}

std::vector<ImpactRecord> parse_impact_geojson(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("impact GeoJSON: ") + e.what());
    }
    if (!doc.contains("features") || !doc["features"].is_array()) throw DataError("impact GeoJSON has no features");
    std::vector<ImpactRecord> out;
    try {
        for (const auto& f : doc["features"]) {
            const auto& p = f.at("properties");
            if (p.value("kind", "") != "tower") continue;
            ImpactRecord r;
            r.bts_id = p.at("bts_id").get<std::string>();
            r.lat = p.at("lat").get<double>();
            r.lon = p.at("lon").get<double>();
            r.max_z = optional_field<double>(p, "max_z");
            if (const auto d = optional_field<std::string>(p, "day_of_max")) {
                r.day_of_max = parse_date(*d);
                if (!r.day_of_max) throw DataError("impact GeoJSON: bad day_of_max for " + r.bts_id);
            }
            r.max_abs_z = optional_field<double>(p, "max_abs_z");
            r.shared_day_z = optional_field<double>(p, "shared_day_z");
            r.in_flood = p.at("in_flood").get<bool>();
            r.region_id = optional_field<std::string>(p, "region_id");
            r.affected_population = optional_field<std::int64_t>(p, "affected_population");
            r.camps = optional_field<std::int64_t>(p, "camps");
            out.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("impact GeoJSON: ") + e.what());
    }
    return out;
}

std::vector<Frame> timelapse_frames(std::span<const activity::ZScoreSeries> zseries, const DayRange& days) {
    if (days.first > days.last) throw DataError("time-lapse range is empty");
    for (const auto& s : zseries)
        if (s.z.empty() || !s.range().contains(days))
            throw DataError("time-lapse range " + format_day_range(days) + " not covered by z-series of " + s.bts_id);
    std::vector<Frame> frames;
    for (Day d = days.first; d <= days.last; ++d) {
        Frame f{d, {}};
        for (const auto& s : zseries) f.values.push_back({s.bts_id, std::abs(s.at(d))});
        frames.push_back(std::move(f));
    }
    return frames;
}

std::string export_frame_csv(const Frame& frame) {
    std::string out = "bts_id,abs_z\n";
    for (const auto& v : frame.values) out += v.bts_id + "," + format_fixed(v.abs_z) + "\n";
    return out;
}

std::string frame_file_name(Day day) { return "frame_" + format_date(day) + ".csv"; }

} // namespace floodlens::impact
