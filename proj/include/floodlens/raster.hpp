#pragma once
// Single-band rasters, binary flood masks and the flood segmentation chain:
// Gaussian smoothing, differencing, seed thresholding and geodesic
// reconstruction of the seeds inside the change mask.
//
// Cell (0,0) is the south-west corner of the grid; row index grows northward.
// Grids are exchanged as ESRI ASCII text (rows written north to south).

#include "floodlens/common.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens::raster {

struct GridGeometry {
    std::size_t nrows = 0;
    std::size_t ncols = 0;
    double lat0 = 0;  // center of cell (0,0)
    double lon0 = 0;
    double cell_deg = 0;

    std::size_t size() const { return nrows * ncols; }
    std::size_t index(std::size_t row, std::size_t col) const { return row * ncols + col; }
    LatLon center(std::size_t row, std::size_t col) const {
        return {lat0 + static_cast<double>(row) * cell_deg, lon0 + static_cast<double>(col) * cell_deg};
    }
    void validate() const;
    bool operator==(const GridGeometry&) const = default;
};

struct Raster {
    GridGeometry geom;
    std::vector<double> values;

    double at(std::size_t row, std::size_t col) const { return values[geom.index(row, col)]; }
    double& at(std::size_t row, std::size_t col) { return values[geom.index(row, col)]; }
};

struct FloodMask {
    GridGeometry geom;
    std::vector<std::uint8_t> values;  // 0 or 1

    std::uint8_t at(std::size_t row, std::size_t col) const { return values[geom.index(row, col)]; }
    std::size_t count() const;
    bool operator==(const FloodMask&) const = default;
};

enum class Connectivity { Four = 4, Eight = 8 };

Connectivity connectivity_from(int n);

Raster make_raster(const GridGeometry& geom, double fill = 0.0);
FloodMask make_mask(const GridGeometry& geom);

Raster parse_ascii_grid(std::string_view text);
Raster read_ascii_grid(const std::string& path);
std::string format_ascii_grid(const Raster& raster);
FloodMask parse_ascii_mask(std::string_view text);
std::string format_ascii_mask(const FloodMask& mask);

// Separable Gaussian, kernel radius ceil(3 sigma), renormalized weights,
// clamp-to-edge borders. Rows run in parallel; every output cell is summed in
// the same order as the serial version, so results are bit-identical.
Raster gaussian_smooth(const Raster& raster, double sigma_px);

std::vector<double> gaussian_kernel(double sigma_px);

// Cellwise post - pre.
Raster difference(const Raster& post, const Raster& pre);

FloodMask threshold(const Raster& raster, double t);

struct Reconstruction {
    FloodMask mask;
    std::size_t dropped_seeds = 0;  // seed cells outside the mask
};

// Union of mask components (under the given connectivity) that contain a seed.
// Queue-based propagation from the seeds.
Reconstruction geodesic_reconstruct(const FloodMask& seeds, const FloodMask& mask, Connectivity connectivity);

// Same result by iterated conditional dilation to a fixpoint; row-parallel sweeps.
FloodMask reconstruct_by_dilation(const FloodMask& seeds, const FloodMask& mask, Connectivity connectivity);

// Removes connected components smaller than min_area cells.
FloodMask remove_small_components(const FloodMask& mask, std::size_t min_area, Connectivity connectivity);

struct SegmentParams {
    double sigma_px = 1.0;
    double t_seed = 0.6;
    double t_mask = 0.4;
    Connectivity connectivity = Connectivity::Eight;
    std::size_t min_area = 4;
};

// smooth(pre), smooth(post) -> difference -> seeds (>= t_seed), mask (>= t_mask)
// -> reconstruction -> small-component removal.
FloodMask segment_flood(const Raster& pre, const Raster& post, const SegmentParams& params = {});

namespace serial {
Raster gaussian_smooth(const Raster& raster, double sigma_px);
FloodMask reconstruct_by_dilation(const FloodMask& seeds, const FloodMask& mask, Connectivity connectivity);
} // namespace serial

} // namespace floodlens::raster
