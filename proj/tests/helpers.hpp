#pragma once
// Small fixtures shared by the unit tests.

#include "floodlens/cdr_ingest.hpp"
#include "floodlens/common.hpp"

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace floodlens::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
    const char* root = std::getenv("FLOODLENS_TEST_TMP");
    auto dir = std::filesystem::path(root ? root : std::filesystem::temp_directory_path().string()) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Instant at(const char* iso) { return *parse_instant(iso); }
inline Day day(const char* iso) { return *parse_date(iso); }

inline cdr::BtsRegistry random_registry(std::mt19937_64& rng, std::size_t n, const GeoBox& box) {
    std::uniform_real_distribution<double> lat(box.lat_min, box.lat_max), lon(box.lon_min, box.lon_max);
    std::vector<cdr::BtsSite> sites;
    for (std::size_t i = 0; i < n; ++i) sites.push_back({"B" + std::to_string(100 + i), lat(rng), lon(rng)});
    return cdr::BtsRegistry(std::move(sites));
}

// Records over a handful of phones and towers, spread over a few days, with
// repeats, self-loops and missing destination towers.
inline std::vector<cdr::CdrRecord> random_records(std::mt19937_64& rng, std::size_t n, std::size_t phones,
                                                  const std::vector<std::string>& towers, Instant t0, int days) {
    std::uniform_int_distribution<std::size_t> phone(0, phones - 1), tower(0, towers.size() - 1);
    std::uniform_int_distribution<Instant> offset(0, static_cast<Instant>(days) * kSecondsPerDay - 1);
    std::uniform_int_distribution<int> coin(0, 9);
    std::vector<cdr::CdrRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        cdr::CdrRecord r;
        r.origin_id = "p" + std::to_string(phone(rng));
        r.dest_id = coin(rng) == 0 ? r.origin_id : "p" + std::to_string(phone(rng));
        r.timestamp = t0 + offset(rng);
        r.duration_s = coin(rng) * 30;
        r.origin_bts = towers[tower(rng)];
        const int c = coin(rng);
        if (c == 0) r.dest_bts = std::nullopt;
        else if (c < 4) r.dest_bts = r.origin_bts;
        else r.dest_bts = towers[tower(rng)];
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace floodlens::testing
