#include "floodlens/geo.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace floodlens::geo {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kEdgeEps = 1e-12;

bool on_segment(const LatLon& p, const LatLon& a, const LatLon& b) {
    const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    if (std::abs(cross) > kEdgeEps) return false;
    return p.lon >= std::min(a.lon, b.lon) - kEdgeEps && p.lon <= std::max(a.lon, b.lon) + kEdgeEps &&
           p.lat >= std::min(a.lat, b.lat) - kEdgeEps && p.lat <= std::max(a.lat, b.lat) + kEdgeEps;
}

LatLon read_position(const nlohmann::json& pos) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
        throw DataError("invalid polygon: coordinate must be [lon, lat]");
    return {pos[1].get<double>(), pos[0].get<double>()};
}

} // namespace

double haversine_m(const LatLon& a, const LatLon& b) {
    const double dlat = (b.lat - a.lat) * kDeg;
    const double dlon = (b.lon - a.lon) * kDeg;
    const double s1 = std::sin(dlat / 2);
    const double s2 = std::sin(dlon / 2);
    const double h = s1 * s1 + std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

std::string nearest_site(const LatLon& point, const cdr::BtsRegistry& registry) {
    if (registry.empty()) throw DataError("nearest_site on an empty registry");
    // Sites are sorted by id, so a strict comparison keeps the smallest id on ties.
    const cdr::BtsSite* best = nullptr;
    double best_d = 0;
    for (const auto& s : registry.sites()) {
        const double d = haversine_m(point, {s.lat, s.lon});
        if (!best || d < best_d) {
            best = &s;
            best_d = d;
        }
    }
    return best->bts_id;
}

void RegionPolygon::validate() const {
    if (region_id.empty()) throw DataError("invalid polygon: empty region_id");
    if (rings.empty()) throw DataError("invalid polygon " + region_id + ": no rings");
    for (const auto& ring : rings) {
        if (ring.size() < 4) throw DataError("invalid polygon " + region_id + ": ring needs at least 4 vertices");
        if (!(ring.front() == ring.back())) throw DataError("invalid polygon " + region_id + ": ring not closed");
        for (const auto& p : ring)
            if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || std::abs(p.lat) > 90 || std::abs(p.lon) > 180)
                throw DataError("invalid polygon " + region_id + ": coordinate out of range");
    }
}

bool point_in_region(const LatLon& p, const RegionPolygon& polygon) {
    bool inside = false;
    for (const auto& ring : polygon.rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const auto& a = ring[i];
            const auto& b = ring[i + 1];
            if (on_segment(p, a, b)) return true;
            if ((a.lat > p.lat) != (b.lat > p.lat)) {
                const double x = a.lon + (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat);
                if (p.lon < x) inside = !inside;
            }
        }
    }
    return inside;
}

std::optional<std::size_t> region_of(const LatLon& point, std::span<const RegionPolygon> regions) {
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (point_in_region(point, regions[i])) return i;
    return std::nullopt;
}

std::vector<RegionPolygon> parse_regions_geojson(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("regions GeoJSON: ") + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") || !doc["features"].is_array())
        throw DataError("regions GeoJSON must be a FeatureCollection");
    std::vector<RegionPolygon> out;
    for (const auto& f : doc["features"]) {
        const auto& props = f.value("properties", nlohmann::json::object());
        if (!props.contains("region_id") || !props["region_id"].is_string())
            throw DataError("invalid polygon: feature without string region_id");
        RegionPolygon poly;
        poly.region_id = props["region_id"].get<std::string>();
        if (props.contains("name") && props["name"].is_string()) poly.name = props["name"].get<std::string>();
        const auto& geom = f.value("geometry", nlohmann::json::object());
        if (geom.value("type", "") != "Polygon" || !geom.contains("coordinates") || !geom["coordinates"].is_array())
            throw DataError("invalid polygon " + poly.region_id + ": geometry must be a Polygon");
        for (const auto& ring : geom["coordinates"]) {
            if (!ring.is_array()) throw DataError("invalid polygon " + poly.region_id + ": ring must be an array");
            std::vector<LatLon> pts;
            for (const auto& pos : ring) pts.push_back(read_position(pos));
            poly.rings.push_back(std::move(pts));
        }
        poly.validate();
        out.push_back(std::move(poly));
    }
    return out;
}

std::string export_regions_geojson(std::span<const RegionPolygon> regions) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& r : regions) {
        nlohmann::json rings = nlohmann::json::array();
        for (const auto& ring : r.rings) {
            nlohmann::json pts = nlohmann::json::array();
            for (const auto& p : ring) pts.push_back({p.lon, p.lat});
            rings.push_back(std::move(pts));
        }
        features.push_back({{"type", "Feature"},
                            {"properties", {{"region_id", r.region_id}, {"name", r.name}}},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", std::move(rings)}}}});
    }
    nlohmann::json doc = {{"type", "FeatureCollection"}, {"features", std::move(features)}};
    return doc.dump(1) + "\n";
}

FloodProximity::FloodProximity(const raster::FloodMask& mask) : geom_(mask.geom), mask_(mask) {
    for (std::size_t r = 0; r < geom_.nrows; ++r)
        for (std::size_t c = 0; c < geom_.ncols; ++c)
            if (mask.at(r, c)) centers_.push_back(geom_.center(r, c));
    // Rows ascend northward, so centers are already ordered by latitude.
}

bool FloodProximity::near(const LatLon& site, double d_max_m) const {
    if (centers_.empty()) return false;

    // Inside a flooded cell (extent inclusive).
    const double half = geom_.cell_deg / 2;
    const auto fr = std::floor((site.lat - geom_.lat0) / geom_.cell_deg + 0.5);
    const auto fc = std::floor((site.lon - geom_.lon0) / geom_.cell_deg + 0.5);
    for (double r = fr - 1; r <= fr + 1; ++r) {
        for (double c = fc - 1; c <= fc + 1; ++c) {
            if (r < 0 || c < 0 || r >= static_cast<double>(geom_.nrows) || c >= static_cast<double>(geom_.ncols)) continue;
            const auto rr = static_cast<std::size_t>(r), cc = static_cast<std::size_t>(c);
            if (!mask_.at(rr, cc)) continue;
            const auto center = geom_.center(rr, cc);
            if (std::abs(site.lat - center.lat) <= half && std::abs(site.lon - center.lon) <= half) return true;
        }
    }

    // Great-circle distance is at least R * |dlat|, which bounds the latitude band to scan.
    const double band = d_max_m / kEarthRadiusM / kDeg + 1e-9;
    auto lo = std::lower_bound(centers_.begin(), centers_.end(), site.lat - band,
                               [](const LatLon& p, double v) { return p.lat < v; });
    for (auto it = lo; it != centers_.end() && it->lat <= site.lat + band; ++it)
        if (haversine_m(site, *it) <= d_max_m) return true;
    return false;
}

bool near_flood(const LatLon& site, const raster::FloodMask& mask, double d_max_m) {
    return FloodProximity(mask).near(site, d_max_m);
}

} // namespace floodlens::geo
