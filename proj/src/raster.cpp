#include "floodlens/raster.hpp"

#include "floodlens/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <limits>

namespace floodlens::raster {

namespace {

void require_same_geometry(const GridGeometry& a, const GridGeometry& b, const char* what) {
    if (!(a == b)) throw DataError(std::string(what) + ": grid geometry mismatch");
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

struct GridText {
    GridGeometry geom;
    std::vector<std::string_view> tokens;  // values, file order (north row first)
    std::optional<double> nodata;
};

GridText tokenize_grid(std::string_view text) {
    GridText out;
    std::optional<double> ncols, nrows, x, y, cell;
    bool x_corner = false, y_corner = false;
    std::size_t pos = 0;

    // Header lines are "key value"; the first line starting with a number ends the header.
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        const std::size_t next = nl == std::string_view::npos ? text.size() : nl + 1;
        if (line.empty()) {
            pos = next;
            continue;
        }
        if (!std::isalpha(static_cast<unsigned char>(line.front()))) break;
        const auto sp = line.find_first_of(" \t");
        if (sp == std::string_view::npos) throw DataError("ascii grid: header line without value");
        const auto key = lower(line.substr(0, sp));
        const auto value = parse_double(trim(line.substr(sp + 1)));
        if (!value) throw DataError("ascii grid: bad value for " + key);
        if (key == "ncols") ncols = value;
        else if (key == "nrows") nrows = value;
        else if (key == "xllcenter") x = value;
        else if (key == "yllcenter") y = value;
        else if (key == "xllcorner") x = value, x_corner = true;
        else if (key == "yllcorner") y = value, y_corner = true;
        else if (key == "cellsize") cell = value;
        else if (key == "nodata_value") out.nodata = value;
        else throw DataError("ascii grid: unknown header key " + key);
        pos = next;
    }
    if (!ncols || !nrows || !x || !y || !cell) throw DataError("ascii grid: incomplete header");
    if (*ncols < 1 || *nrows < 1 || *ncols != std::floor(*ncols) || *nrows != std::floor(*nrows))
        throw DataError("ascii grid: ncols/nrows must be positive integers");
    out.geom.ncols = static_cast<std::size_t>(*ncols);
    out.geom.nrows = static_cast<std::size_t>(*nrows);
    out.geom.cell_deg = *cell;
    out.geom.lon0 = x_corner ? *x + *cell / 2 : *x;
    out.geom.lat0 = y_corner ? *y + *cell / 2 : *y;
    out.geom.validate();

    const auto body = text.substr(pos);
    std::size_t i = 0;
    out.tokens.reserve(out.geom.size());
    while (i < body.size()) {
        while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
        if (i >= body.size()) break;
        std::size_t j = i;
        while (j < body.size() && !std::isspace(static_cast<unsigned char>(body[j]))) ++j;
        out.tokens.push_back(body.substr(i, j - i));
        i = j;
    }
    if (out.tokens.size() != out.geom.size())
        throw DataError("ascii grid: expected " + std::to_string(out.geom.size()) + " values, got " +
                        std::to_string(out.tokens.size()));
    return out;
}

std::string format_header(const GridGeometry& g) {
    return "ncols " + std::to_string(g.ncols) + "\nnrows " + std::to_string(g.nrows) + "\nxllcenter " +
           format_shortest(g.lon0) + "\nyllcenter " + format_shortest(g.lat0) + "\ncellsize " +
           format_shortest(g.cell_deg) + "\n";
}

template <class Cell>
void for_each_neighbor(const GridGeometry& g, std::size_t r, std::size_t c, Connectivity conn, Cell&& fn) {
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (conn == Connectivity::Four && dr != 0 && dc != 0) continue;
            const auto rr = static_cast<std::ptrdiff_t>(r) + dr;
            const auto cc = static_cast<std::ptrdiff_t>(c) + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(g.nrows) || cc >= static_cast<std::ptrdiff_t>(g.ncols))
                continue;
            fn(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
        }
    }
}

void check_finite(const Raster& raster) {
    for (double v : raster.values)
        if (!std::isfinite(v)) throw DataError("raster contains non-finite values");
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
    if (i < 0) return 0;
    if (i >= static_cast<std::ptrdiff_t>(n)) return n - 1;
    return static_cast<std::size_t>(i);
}

void smooth_row_h(const Raster& in, Raster& out, const std::vector<double>& w, std::size_t r) {
    const auto& g = in.geom;
    const auto radius = static_cast<std::ptrdiff_t>(w.size() / 2);
    for (std::size_t c = 0; c < g.ncols; ++c) {
        double acc = 0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k)
            acc += w[static_cast<std::size_t>(k + radius)] *
                   in.values[g.index(r, clamp_index(static_cast<std::ptrdiff_t>(c) + k, g.ncols))];
        out.values[g.index(r, c)] = acc;
    }
}

void smooth_row_v(const Raster& in, Raster& out, const std::vector<double>& w, std::size_t r) {
    const auto& g = in.geom;
    const auto radius = static_cast<std::ptrdiff_t>(w.size() / 2);
    for (std::size_t c = 0; c < g.ncols; ++c) {
        double acc = 0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k)
            acc += w[static_cast<std::size_t>(k + radius)] *
                   in.values[g.index(clamp_index(static_cast<std::ptrdiff_t>(r) + k, g.nrows), c)];
        out.values[g.index(r, c)] = acc;
    }
}

// One Jacobi sweep; returns whether any cell was added.
bool dilation_sweep_row(const FloodMask& cur, FloodMask& next, const FloodMask& mask, Connectivity conn, std::size_t r) {
    const auto& g = mask.geom;
    bool changed = false;
    for (std::size_t c = 0; c < g.ncols; ++c) {
        const auto i = g.index(r, c);
        if (cur.values[i] || !mask.values[i]) {
            next.values[i] = cur.values[i];
            continue;
        }
        bool hit = false;
        for_each_neighbor(g, r, c, conn, [&](std::size_t rr, std::size_t cc) { hit = hit || cur.values[g.index(rr, cc)]; });
        next.values[i] = hit ? 1 : 0;
        changed = changed || hit;
    }
    return changed;
}

FloodMask seeds_in_mask(const FloodMask& seeds, const FloodMask& mask) {
    FloodMask cur = seeds;
    for (std::size_t i = 0; i < cur.values.size(); ++i) cur.values[i] = seeds.values[i] && mask.values[i];
    return cur;
}

} // namespace

void GridGeometry::validate() const {
    if (nrows == 0 || ncols == 0) throw DataError("grid must have positive nrows and ncols");
    if (!(cell_deg > 0) || !std::isfinite(cell_deg)) throw DataError("grid cell size must be positive");
    if (!std::isfinite(lat0) || !std::isfinite(lon0)) throw DataError("grid origin must be finite");
}

std::size_t FloodMask::count() const {
    std::size_t n = 0;
    for (auto v : values) n += v;
    return n;
}

Connectivity connectivity_from(int n) {
    if (n == 4) return Connectivity::Four;
    if (n == 8) return Connectivity::Eight;
    throw DataError("connectivity must be 4 or 8");
}

Raster make_raster(const GridGeometry& geom, double fill) { return {geom, std::vector<double>(geom.size(), fill)}; }

FloodMask make_mask(const GridGeometry& geom) { return {geom, std::vector<std::uint8_t>(geom.size(), 0)}; }

Raster parse_ascii_grid(std::string_view text) {
    const auto grid = tokenize_grid(text);
    Raster out = make_raster(grid.geom);
    const auto& g = grid.geom;
    for (std::size_t k = 0; k < grid.tokens.size(); ++k) {
        const std::size_t file_row = k / g.ncols;
        const std::size_t col = k % g.ncols;
        const auto v = parse_double(grid.tokens[k]);
        if (!v) throw DataError("ascii grid: bad cell value '" + std::string(grid.tokens[k]) + "'");
        out.at(g.nrows - 1 - file_row, col) =
            grid.nodata && *v == *grid.nodata ? std::numeric_limits<double>::quiet_NaN() : *v;
    }
    return out;
}

Raster read_ascii_grid(const std::string& path) { return parse_ascii_grid(read_file(path)); }

std::string format_ascii_grid(const Raster& raster) {
    const auto& g = raster.geom;
    std::string out = format_header(g);
    for (std::size_t k = 0; k < g.nrows; ++k) {
        const std::size_t r = g.nrows - 1 - k;
        for (std::size_t c = 0; c < g.ncols; ++c) {
            if (c) out += ' ';
            out += format_shortest(raster.at(r, c));
        }
        out += '\n';
    }
    return out;
}

FloodMask parse_ascii_mask(std::string_view text) {
    const auto grid = tokenize_grid(text);
    FloodMask out = make_mask(grid.geom);
    const auto& g = grid.geom;
    for (std::size_t k = 0; k < grid.tokens.size(); ++k) {
        const auto t = grid.tokens[k];
        if (t != "0" && t != "1") throw DataError("mask values must be 0 or 1");
        out.values[g.index(g.nrows - 1 - k / g.ncols, k % g.ncols)] = t == "1" ? 1 : 0;
    }
    return out;
}

std::string format_ascii_mask(const FloodMask& mask) {
    const auto& g = mask.geom;
    std::string out = format_header(g);
    out.reserve(out.size() + g.size() * 2);
    for (std::size_t k = 0; k < g.nrows; ++k) {
        const std::size_t r = g.nrows - 1 - k;
        for (std::size_t c = 0; c < g.ncols; ++c) {
            if (c) out += ' ';
            out += mask.at(r, c) ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

std::vector<double> gaussian_kernel(double sigma_px) {
    if (!(sigma_px > 0) || !std::isfinite(sigma_px)) throw DataError("sigma_px must be positive");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma_px));
    std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma_px * sigma_px));
        w[static_cast<std::size_t>(k + radius)] = v;
        sum += v;
    }
    for (auto& v : w) v /= sum;
    return w;
}

Raster gaussian_smooth(const Raster& raster, double sigma_px) {
    check_finite(raster);
    const auto w = gaussian_kernel(sigma_px);
    Raster tmp = make_raster(raster.geom), out = make_raster(raster.geom);
    const auto rows = static_cast<std::ptrdiff_t>(raster.geom.nrows);
    const int workers = parallel::worker_count();
#pragma omp parallel num_threads(workers)
    {
#pragma omp for schedule(static)
        for (std::ptrdiff_t r = 0; r < rows; ++r) smooth_row_h(raster, tmp, w, static_cast<std::size_t>(r));
#pragma omp for schedule(static)
        for (std::ptrdiff_t r = 0; r < rows; ++r) smooth_row_v(tmp, out, w, static_cast<std::size_t>(r));
    }
    return out;
}

Raster difference(const Raster& post, const Raster& pre) {
    require_same_geometry(post.geom, pre.geom, "difference");
    Raster out = make_raster(post.geom);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = post.values[i] - pre.values[i];
    return out;
}

FloodMask threshold(const Raster& raster, double t) {
    FloodMask out = make_mask(raster.geom);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = raster.values[i] >= t ? 1 : 0;
    return out;
}

Reconstruction geodesic_reconstruct(const FloodMask& seeds, const FloodMask& mask, Connectivity connectivity) {
    require_same_geometry(seeds.geom, mask.geom, "geodesic_reconstruct");
    const auto& g = mask.geom;
    Reconstruction out{make_mask(g), 0};
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!seeds.values[i]) continue;
        if (!mask.values[i]) {
            ++out.dropped_seeds;
            continue;
        }
        out.mask.values[i] = 1;
        queue.push_back(i);
    }
    while (!queue.empty()) {
        const auto i = queue.front();
        queue.pop_front();
        for_each_neighbor(g, i / g.ncols, i % g.ncols, connectivity, [&](std::size_t r, std::size_t c) {
            const auto j = g.index(r, c);
            if (mask.values[j] && !out.mask.values[j]) {
                out.mask.values[j] = 1;
                queue.push_back(j);
            }
        });
    }
    return out;
}

FloodMask reconstruct_by_dilation(const FloodMask& seeds, const FloodMask& mask, Connectivity connectivity) {
    require_same_geometry(seeds.geom, mask.geom, "reconstruct_by_dilation");
    FloodMask cur = seeds_in_mask(seeds, mask);
    FloodMask next = cur;
    const auto rows = static_cast<std::ptrdiff_t>(mask.geom.nrows);
    const int workers = parallel::worker_count();
    bool changed = true;
    while (changed) {
        changed = false;
#pragma omp parallel for schedule(static) num_threads(workers) reduction(|| : changed)
        for (std::ptrdiff_t r = 0; r < rows; ++r)
            changed = dilation_sweep_row(cur, next, mask, connectivity, static_cast<std::size_t>(r)) || changed;
        std::swap(cur, next);
    }
    return cur;
}

FloodMask remove_small_components(const FloodMask& mask, std::size_t min_area, Connectivity connectivity) {
    const auto& g = mask.geom;
    FloodMask out = make_mask(g);
    std::vector<std::uint8_t> visited(g.size(), 0);
    std::vector<std::size_t> component;
    for (std::size_t start = 0; start < g.size(); ++start) {
        if (!mask.values[start] || visited[start]) continue;
        component.clear();
        component.push_back(start);
        visited[start] = 1;
        for (std::size_t k = 0; k < component.size(); ++k) {
            const auto i = component[k];
            for_each_neighbor(g, i / g.ncols, i % g.ncols, connectivity, [&](std::size_t r, std::size_t c) {
                const auto j = g.index(r, c);
                if (mask.values[j] && !visited[j]) {
                    visited[j] = 1;
                    component.push_back(j);
                }
            });
        }
        if (component.size() >= min_area)
            for (auto i : component) out.values[i] = 1;
    }
    return out;
}

FloodMask segment_flood(const Raster& pre, const Raster& post, const SegmentParams& params) {
    if (!(params.t_mask < params.t_seed)) throw DataError("segmentation requires t_mask < t_seed");
    require_same_geometry(post.geom, pre.geom, "segment_flood");
    const auto diff = difference(gaussian_smooth(post, params.sigma_px), gaussian_smooth(pre, params.sigma_px));
    const auto seeds = threshold(diff, params.t_seed);
    const auto mask = threshold(diff, params.t_mask);
    const auto grown = geodesic_reconstruct(seeds, mask, params.connectivity);
    return remove_small_components(grown.mask, params.min_area, params.connectivity);
}

namespace serial {

Raster gaussian_smooth(const Raster& raster, double sigma_px) {
    check_finite(raster);
    const auto w = gaussian_kernel(sigma_px);
    Raster tmp = make_raster(raster.geom), out = make_raster(raster.geom);
    for (std::size_t r = 0; r < raster.geom.nrows; ++r) smooth_row_h(raster, tmp, w, r);
    for (std::size_t r = 0; r < raster.geom.nrows; ++r) smooth_row_v(tmp, out, w, r);
    return out;
}

FloodMask reconstruct_by_dilation(const FloodMask& seeds, const FloodMask& mask, Connectivity connectivity) {
    require_same_geometry(seeds.geom, mask.geom, "reconstruct_by_dilation");
    FloodMask cur = seeds_in_mask(seeds, mask);
    FloodMask next = cur;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t r = 0; r < mask.geom.nrows; ++r)
            changed = dilation_sweep_row(cur, next, mask, connectivity, r) || changed;
        std::swap(cur, next);
    }
    return cur;
}

} // namespace serial

} // namespace floodlens::raster
