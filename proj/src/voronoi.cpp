#include "floodlens/geo.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace floodlens::geo {

namespace {

using Vec3 = std::array<double, 3>;
using Point = LocalProjection::Point;

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kInsideTolM = 1e-7;

Vec3 unit_vector(const LatLon& p) {
    const double phi = p.lat * kDeg, lam = p.lon * kDeg;
    return {std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam), std::sin(phi)};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

// Keeps the part of a convex polygon where a*x + b*y + c >= 0.
std::vector<Point> clip_half_plane(const std::vector<Point>& poly, const std::array<double, 3>& h) {
    std::vector<Point> out;
    const auto f = [&](const Point& p) { return h[0] * p.x + h[1] * p.y + h[2]; };
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % poly.size()];
        const double fp = f(p), fq = f(q);
        if (fp >= 0) out.push_back(p);
        if ((fp >= 0) != (fq >= 0)) {
            const double t = fp / (fp - fq);
            out.push_back({p.x + (q.x - p.x) * t, p.y + (q.y - p.y) * t});
        }
    }
    return out;
}

bool convex_contains(const std::vector<Point>& poly, const Point& p) {
    if (poly.size() < 3) return false;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % poly.size()];
        const double ex = b.x - a.x, ey = b.y - a.y;
        const double len = std::hypot(ex, ey);
        if (len == 0) continue;
        const double cross = ex * (p.y - a.y) - ey * (p.x - a.x);
        if (cross / len < -kInsideTolM) return false;
    }
    return true;
}

std::string coord(double lon, double lat) { return "[" + format_fixed(lon) + "," + format_fixed(lat) + "]"; }

} // namespace

LocalProjection::LocalProjection(const LatLon& center) : center_(center) {
    const double phi = center.lat * kDeg, lam = center.lon * kDeg;
    c_ = unit_vector(center);
    east_ = {-std::sin(lam), std::cos(lam), 0.0};
    north_ = {-std::sin(phi) * std::cos(lam), -std::sin(phi) * std::sin(lam), std::cos(phi)};
}

LocalProjection::Point LocalProjection::forward(const LatLon& p) const {
    const Vec3 u = unit_vector(p);
    const double d = dot(u, c_);
    if (d <= 1e-6) throw DataError("point too far from projection center");
    return {kEarthRadiusM * dot(u, east_) / d, kEarthRadiusM * dot(u, north_) / d};
}

LatLon LocalProjection::inverse(const Point& p) const {
    Vec3 v;
    for (int k = 0; k < 3; ++k) v[k] = c_[k] + p.x / kEarthRadiusM * east_[k] + p.y / kEarthRadiusM * north_[k];
    const double n = std::sqrt(dot(v, v));
    return {std::asin(v[2] / n) / kDeg, std::atan2(v[1], v[0]) / kDeg};
}

std::array<double, 3> LocalProjection::bisector(const LatLon& near_site, const LatLon& far_site) const {
    const Vec3 a = unit_vector(near_site), b = unit_vector(far_site);
    const Vec3 w = {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
    // A plane point (x, y) is the direction c + (x/R) e + (y/R) n; closer to
    // near_site iff that direction has a non-negative dot product with w.
    return {dot(east_, w), dot(north_, w), kEarthRadiusM * dot(c_, w)};
}

LatLon registry_centroid(const cdr::BtsRegistry& registry) {
    if (registry.empty()) throw DataError("centroid of an empty registry");
    Vec3 sum{0, 0, 0};
    for (const auto& s : registry.sites()) {
        const auto u = unit_vector({s.lat, s.lon});
        for (int k = 0; k < 3; ++k) sum[k] += u[k];
    }
    const double n = std::sqrt(dot(sum, sum));
    if (n == 0) throw DataError("registry centroid undefined");
    return {std::asin(sum[2] / n) / kDeg, std::atan2(sum[1], sum[0]) / kDeg};
}

std::optional<std::string> VoronoiDiagram::cell_containing(const LatLon& point) const {
    const auto p = projection.forward(point);
    for (const auto& cell : cells)
        if (convex_contains(cell.polygon, p)) return cell.bts_id;
    return std::nullopt;
}

VoronoiDiagram voronoi_cells(const cdr::BtsRegistry& registry, const GeoBox& clip_box) {
    if (registry.empty()) throw DataError("voronoi_cells needs at least one site");
    clip_box.validate();
    for (const auto& s : registry.sites())
        if (!clip_box.contains(s.lat, s.lon)) throw DataError("clip box does not contain site " + s.bts_id);

    VoronoiDiagram out;
    out.clip = clip_box;
    out.projection = LocalProjection(registry_centroid(registry));

    // Parallels are curved under the projection; bound the box by sampling its edges.
    constexpr int kSamples = 64;
    out.x_min = out.y_min = std::numeric_limits<double>::infinity();
    out.x_max = out.y_max = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kSamples; ++i) {
        const double t = static_cast<double>(i) / kSamples;
        const double lat = clip_box.lat_min + t * (clip_box.lat_max - clip_box.lat_min);
        const double lon = clip_box.lon_min + t * (clip_box.lon_max - clip_box.lon_min);
        for (const LatLon& q : {LatLon{lat, clip_box.lon_min}, LatLon{lat, clip_box.lon_max},
                                LatLon{clip_box.lat_min, lon}, LatLon{clip_box.lat_max, lon}}) {
            const auto p = out.projection.forward(q);
            out.x_min = std::min(out.x_min, p.x);
            out.x_max = std::max(out.x_max, p.x);
            out.y_min = std::min(out.y_min, p.y);
            out.y_max = std::max(out.y_max, p.y);
        }
    }
    const double pad = 1.0 + 1e-3 * std::max(out.x_max - out.x_min, out.y_max - out.y_min);
    out.x_min -= pad, out.x_max += pad, out.y_min -= pad, out.y_max += pad;

    std::vector<const cdr::BtsSite*> sites;
    for (const auto& s : registry.sites()) {
        const auto dup = std::find_if(sites.begin(), sites.end(),
                                      [&](const cdr::BtsSite* o) { return o->lat == s.lat && o->lon == s.lon; });
        if (dup != sites.end()) {
            out.warnings.push_back(s.bts_id + " merged into " + (*dup)->bts_id + " (identical coordinates)");
            continue;
        }
        sites.push_back(&s);
    }

    const std::vector<Point> rect = {{out.x_min, out.y_min}, {out.x_max, out.y_min}, {out.x_max, out.y_max}, {out.x_min, out.y_max}};
    for (const auto* s : sites) {
        std::vector<Point> poly = rect;
        for (const auto* o : sites) {
            if (o == s) continue;
            poly = clip_half_plane(poly, out.projection.bisector({s->lat, s->lon}, {o->lat, o->lon}));
            if (poly.empty()) break;
        }
        out.cells.push_back({s->bts_id, std::move(poly)});
    }
    return out;
}

std::vector<LatLon> cell_ring(const VoronoiDiagram& diagram, const VoronoiCell& cell) {
    std::vector<LatLon> ring;
    if (cell.polygon.empty()) return ring;
    for (std::size_t i = 0; i <= cell.polygon.size(); ++i)
        ring.push_back(diagram.projection.inverse(cell.polygon[i % cell.polygon.size()]));
    return ring;
}

std::string export_cells_geojson(const VoronoiDiagram& diagram) {
    std::string out = "{\"type\":\"FeatureCollection\",\"features\":[\n";
    bool first = true;
    for (const auto& cell : diagram.cells) {
        if (cell.polygon.empty()) continue;
        if (!first) out += ",\n";
        first = false;
        out += "{\"type\":\"Feature\",\"properties\":{\"bts_id\":" + nlohmann::json(cell.bts_id).dump() +
               ",\"kind\":\"cell\"},\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[[";
        const auto ring = cell_ring(diagram, cell);
        for (std::size_t i = 0; i < ring.size(); ++i) {
            if (i) out += ",";
            out += coord(ring[i].lon, ring[i].lat);
        }
        out += "]]}}";
    }
    out += "\n]}\n";
    return out;
}

} // namespace floodlens::geo
