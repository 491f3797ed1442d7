#pragma once
// Geometry kernel: great-circle distance, nearest tower, administrative
// polygons, flood proximity and Voronoi tower cells.

#include "floodlens/cdr_ingest.hpp"
#include "floodlens/common.hpp"
#include "floodlens/raster.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens::geo {

inline constexpr double kEarthRadiusM = 6371008.8;
inline constexpr double kDefaultFloodDistanceM = 5000.0;

double haversine_m(const LatLon& a, const LatLon& b);

// Site minimizing great-circle distance; ties go to the smallest bts_id.
std::string nearest_site(const LatLon& point, const cdr::BtsRegistry& registry);

struct RegionPolygon {
    std::string region_id;
    std::string name;
    std::vector<std::vector<LatLon>> rings;  // outer ring first, then holes; each closed

    void validate() const;
};

// Even-odd rule over all rings; points on an edge count as inside.
bool point_in_region(const LatLon& point, const RegionPolygon& polygon);

// First region (in input order) containing the point.
std::optional<std::size_t> region_of(const LatLon& point, std::span<const RegionPolygon> regions);

// FeatureCollection of Polygon features with a string `region_id` property
// (and optional `name`). Coordinates are [lon, lat].
std::vector<RegionPolygon> parse_regions_geojson(std::string_view text);
std::string export_regions_geojson(std::span<const RegionPolygon> regions);

// Flooded-cell centers indexed by latitude for repeated proximity queries.
class FloodProximity {
public:
    explicit FloodProximity(const raster::FloodMask& mask);

    // True iff the site lies inside a flooded cell or within d_max_m of a flooded cell center.
    bool near(const LatLon& site, double d_max_m) const;
    bool empty() const { return centers_.empty(); }

private:
    raster::GridGeometry geom_;
    raster::FloodMask mask_;
    std::vector<LatLon> centers_;  // sorted by latitude
};

bool near_flood(const LatLon& site, const raster::FloodMask& mask, double d_max_m = kDefaultFloodDistanceM);

// Gnomonic projection about a center point; great circles map to straight lines.
class LocalProjection {
public:
    LocalProjection() = default;
    explicit LocalProjection(const LatLon& center);

    struct Point {
        double x = 0;  // meters east on the tangent plane
        double y = 0;  // meters north
    };

    Point forward(const LatLon& p) const;
    LatLon inverse(const Point& p) const;
    const LatLon& center() const { return center_; }

    // Coefficients (a, b, c) such that a*x + b*y + c >= 0 iff the point is at
    // least as close (great-circle) to `near_site` as to `far_site`.
    std::array<double, 3> bisector(const LatLon& near_site, const LatLon& far_site) const;

private:
    LatLon center_;
    std::array<double, 3> c_{}, east_{}, north_{};
};

struct VoronoiCell {
    std::string bts_id;
    std::vector<LocalProjection::Point> polygon;  // convex, counter-clockwise, not closed
};

struct VoronoiDiagram {
    LocalProjection projection;
    GeoBox clip;
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;  // planar clip rectangle
    std::vector<VoronoiCell> cells;
    std::vector<std::string> warnings;

    // bts_id of the first cell containing the point (boundary inclusive).
    std::optional<std::string> cell_containing(const LatLon& point) const;
};

// Cells of the registry sites, clipped to the planar rectangle enclosing
// clip_box. Sites sharing coordinates are merged under the smallest id.
VoronoiDiagram voronoi_cells(const cdr::BtsRegistry& registry, const GeoBox& clip_box);

// Centroid of the registry's unit position vectors.
LatLon registry_centroid(const cdr::BtsRegistry& registry);

// Closed ring of a cell in geographic coordinates.
std::vector<LatLon> cell_ring(const VoronoiDiagram& diagram, const VoronoiCell& cell);

std::string export_cells_geojson(const VoronoiDiagram& diagram);

} // namespace floodlens::geo
