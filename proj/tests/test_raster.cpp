#include <doctest.h>

#include "floodlens/parallel.hpp"
#include "floodlens/raster.hpp"
#include "helpers.hpp"

#include <cmath>
#include <queue>
#include <random>

using namespace floodlens;
using namespace floodlens::raster;

namespace {

const GridGeometry kGeom{30, 40, 18.0, -93.5, 0.01};

Raster random_raster(std::mt19937_64& rng, const GridGeometry& g) {
    std::uniform_real_distribution<double> u(0, 1);
    auto r = make_raster(g);
    for (auto& v : r.values) v = u(rng);
    return r;
}

FloodMask random_mask(std::mt19937_64& rng, const GridGeometry& g, double p) {
    std::bernoulli_distribution b(p);
    auto m = make_mask(g);
    for (auto& v : m.values) v = b(rng);
    return m;
}

// Dense 2-D convolution with the outer-product kernel and clamped borders.
Raster dense_convolve(const Raster& in, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const long rad = static_cast<long>(k.size() / 2);
    const long nr = static_cast<long>(in.geom.nrows), nc = static_cast<long>(in.geom.ncols);
    auto out = make_raster(in.geom);
    for (long r = 0; r < nr; ++r) {
        for (long c = 0; c < nc; ++c) {
            long double acc = 0;
            for (long dr = -rad; dr <= rad; ++dr) {
                for (long dc = -rad; dc <= rad; ++dc) {
                    const long rr = std::clamp(r + dr, 0L, nr - 1), cc = std::clamp(c + dc, 0L, nc - 1);
                    acc += static_cast<long double>(k[dr + rad]) * k[dc + rad] *
                           in.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
                }
            }
            out.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = static_cast<double>(acc);
        }
    }
    return out;
}

// Union of mask components touching a seed, by explicit component labeling.
FloodMask label_oracle(const FloodMask& seeds, const FloodMask& mask, Connectivity conn) {
    const auto& g = mask.geom;
    std::vector<int> label(g.size(), -1);
    std::vector<bool> seeded;
    int next = 0;
    for (std::size_t start = 0; start < g.size(); ++start) {
        if (!mask.values[start] || label[start] >= 0) continue;
        bool has_seed = false;
        std::queue<std::size_t> q;
        q.push(start);
        label[start] = next;
        while (!q.empty()) {
            const auto i = q.front();
            q.pop();
            if (seeds.values[i]) has_seed = true;
            const long r = static_cast<long>(i / g.ncols), c = static_cast<long>(i % g.ncols);
            for (long dr = -1; dr <= 1; ++dr) {
                for (long dc = -1; dc <= 1; ++dc) {
                    if (!dr && !dc) continue;
                    if (conn == Connectivity::Four && dr && dc) continue;
                    const long rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= static_cast<long>(g.nrows) || cc >= static_cast<long>(g.ncols))
                        continue;
                    const auto j = g.index(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
                    if (mask.values[j] && label[j] < 0) {
                        label[j] = next;
                        q.push(j);
                    }
                }
            }
        }
        seeded.push_back(has_seed);
        ++next;
    }
    auto out = make_mask(g);
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = label[i] >= 0 && seeded[static_cast<std::size_t>(label[i])];
    return out;
}

FloodMask mask_from(const std::vector<int>& v, std::size_t nrows, std::size_t ncols) {
    auto m = make_mask({nrows, ncols, 0, 0, 1});
    for (std::size_t i = 0; i < v.size(); ++i) m.values[i] = static_cast<std::uint8_t>(v[i]);
    return m;
}

} // namespace

TEST_CASE("gaussian kernel") {
    const auto k = gaussian_kernel(1.0);
    CHECK(k.size() == 7);
    double s = 0;
    for (double w : k) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(k[3] > k[2]);
    CHECK(k[0] == k[6]);
    CHECK_THROWS_AS(gaussian_kernel(0), DataError);
}

TEST_CASE("separable smoothing matches a dense convolution") {
    std::mt19937_64 rng(5);
    const auto in = random_raster(rng, kGeom);
    for (double sigma : {0.7, 1.0, 2.5}) {
        const auto fast = gaussian_smooth(in, sigma);
        const auto dense = dense_convolve(in, sigma);
        for (std::size_t i = 0; i < in.values.size(); ++i) REQUIRE(std::abs(fast.values[i] - dense.values[i]) < 1e-12);
    }
}

TEST_CASE("smoothing an interior impulse preserves its mass") {
    auto in = make_raster(kGeom);
    in.at(15, 20) = 1000;
    const auto out = gaussian_smooth(in, 1.5);
    double s = 0;
    for (double v : out.values) s += v;
    CHECK(std::abs(s - 1000) < 1e-9);
    CHECK(out.at(15, 20) == out.values[kGeom.index(15, 20)]);
    CHECK(out.at(14, 20) == doctest::Approx(out.at(16, 20)).epsilon(1e-14));
}

TEST_CASE("parallel smoothing is bit-identical to serial") {
    std::mt19937_64 rng(6);
    const auto in = random_raster(rng, {97, 131, 0, 0, 1});
    const auto ser = serial::gaussian_smooth(in, 1.3);
    for (int w : {1, 2, 5}) {
        parallel::ScopedWorkers scoped(w);
        CHECK(gaussian_smooth(in, 1.3).values == ser.values);
    }
}

TEST_CASE("reconstruction on a 1x5 strip") {
    const auto mask = mask_from({1, 1, 0, 1, 1}, 1, 5);
    const auto seeds = mask_from({0, 1, 0, 0, 0}, 1, 5);
    const auto r = geodesic_reconstruct(seeds, mask, Connectivity::Four);
    CHECK(r.mask.values == std::vector<std::uint8_t>{1, 1, 0, 0, 0});
    CHECK(r.dropped_seeds == 0);

    const auto stray = mask_from({0, 0, 1, 0, 0}, 1, 5);
    CHECK(geodesic_reconstruct(stray, mask, Connectivity::Four).dropped_seeds == 1);
}

TEST_CASE("diagonal neighbours join only under 8-connectivity") {
    const auto mask = mask_from({1, 0, 0, 1}, 2, 2);
    const auto seeds = mask_from({1, 0, 0, 0}, 2, 2);
    CHECK(geodesic_reconstruct(seeds, mask, Connectivity::Four).mask.count() == 1);
    CHECK(geodesic_reconstruct(seeds, mask, Connectivity::Eight).mask.count() == 2);
}

TEST_CASE("reconstruction matches component labeling and dilation") {
    std::mt19937_64 rng(123);
    const GridGeometry g{50, 50, 0, 0, 1};
    for (int trial = 0; trial < 40; ++trial) {
        const auto mask = random_mask(rng, g, 0.45 + 0.005 * trial);
        const auto seeds = random_mask(rng, g, 0.01);
        for (auto conn : {Connectivity::Four, Connectivity::Eight}) {
            const auto want = label_oracle(seeds, mask, conn);
            const auto geo = geodesic_reconstruct(seeds, mask, conn).mask;
            REQUIRE(geo == want);
            REQUIRE(reconstruct_by_dilation(seeds, mask, conn) == want);
            REQUIRE(serial::reconstruct_by_dilation(seeds, mask, conn) == want);
        }
    }
}

TEST_CASE("reconstruction properties") {
    std::mt19937_64 rng(9);
    const GridGeometry g{40, 40, 0, 0, 1};
    for (int trial = 0; trial < 20; ++trial) {
        const auto mask = random_mask(rng, g, 0.55);
        const auto seeds = random_mask(rng, g, 0.01);
        auto more = seeds;
        const auto extra = random_mask(rng, g, 0.01);
        for (std::size_t i = 0; i < more.values.size(); ++i) more.values[i] |= extra.values[i];
        const auto a = geodesic_reconstruct(seeds, mask, Connectivity::Eight).mask;
        const auto b = geodesic_reconstruct(more, mask, Connectivity::Eight).mask;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            CHECK(a.values[i] <= mask.values[i]);  // subset of mask
            CHECK(a.values[i] <= b.values[i]);     // monotone in seeds
        }
        // Idempotent.
        CHECK(geodesic_reconstruct(a, mask, Connectivity::Eight).mask == a);
    }
}

TEST_CASE("small components are removed") {
    const auto m = mask_from({1, 1, 0, 0, 1,
                              1, 1, 0, 0, 0,
                              0, 0, 0, 1, 1},
                             3, 5);
    const auto out = remove_small_components(m, 3, Connectivity::Four);
    CHECK(out.count() == 4);
    CHECK(remove_small_components(m, 1, Connectivity::Four) == m);
}

TEST_CASE("segmentation recovers a planted region and drops seedless ones") {
    const GridGeometry g{60, 60, 18, -93, 0.01};
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0, 0.2);
    auto pre = make_raster(g);
    for (auto& v : pre.values) v = noise(rng);
    auto post = pre;
    // Strong planted flood: increment 1.0 over a 12x15 block.
    for (std::size_t r = 10; r < 22; ++r)
        for (std::size_t c = 20; c < 35; ++c) post.at(r, c) += 1.0;
    // A weak patch above t_mask everywhere but nowhere above t_seed.
    for (std::size_t r = 40; r < 52; ++r)
        for (std::size_t c = 40; c < 52; ++c) post.at(r, c) += 0.5;

    SegmentParams p;
    p.sigma_px = 0.3;
    const auto m = segment_flood(pre, post, p);
    auto planted = make_mask(g);
    for (std::size_t r = 10; r < 22; ++r)
        for (std::size_t c = 20; c < 35; ++c) planted.values[g.index(r, c)] = 1;
    CHECK(m == planted);
}

TEST_CASE("ASCII grid round trip") {
    std::mt19937_64 rng(77);
    auto r = random_raster(rng, kGeom);
    r.values[3] = -0.0;
    r.values[4] = 1e-300;
    const auto text = format_ascii_grid(r);
    CHECK(text.rfind("ncols 40\nnrows 30\n", 0) == 0);
    const auto back = parse_ascii_grid(text);
    CHECK(back.geom == r.geom);
    for (std::size_t i = 0; i < r.values.size(); ++i) CHECK(back.values[i] == r.values[i]);
    CHECK(format_ascii_grid(back) == text);

    const auto m = random_mask(rng, kGeom, 0.3);
    CHECK(parse_ascii_mask(format_ascii_mask(m)) == m);
    CHECK_THROWS_AS(parse_ascii_grid("ncols 2\nnrows 1\nxllcenter 0\nyllcenter 0\ncellsize 1\n1\n"), DataError);
    CHECK_THROWS_AS(difference(r, make_raster({2, 2, 0, 0, 1})), DataError);
}

TEST_CASE("north row is written first") {
    auto r = make_raster({2, 1, 0, 0, 1});
    r.at(0, 0) = 1;  // south
    r.at(1, 0) = 2;  // north
    const auto text = format_ascii_grid(r);
    CHECK(text.substr(text.size() - 4) == "2\n1\n");
}
