// Serial reference vs OpenMP kernel. The argument is the worker count for the
// parallel variant.

#include "floodlens/activity.hpp"
#include "floodlens/cdr_ingest.hpp"
#include "floodlens/home_antenna.hpp"
#include "floodlens/parallel.hpp"
#include "floodlens/rainfall.hpp"
#include "floodlens/raster.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace floodlens;

namespace {

const Instant kT0 = 1254376800;  // 2009-10-01T06:00:00Z

const cdr::BtsRegistry& registry() {
    static const cdr::BtsRegistry reg = [] {
        std::vector<cdr::BtsSite> sites;
        for (int i = 0; i < 100; ++i) sites.push_back({"B" + std::to_string(100 + i), 17.5 + 0.01 * i, -93.5 + 0.01 * i});
        return cdr::BtsRegistry(std::move(sites));
    }();
    return reg;
}

const std::vector<cdr::CdrRecord>& records() {
    static const auto recs = [] {
        std::mt19937_64 rng(1);
        std::uniform_int_distribution<int> phone(0, 9999), tower(100, 199);
        std::uniform_int_distribution<Instant> off(0, 60 * kSecondsPerDay - 1);
        std::vector<cdr::CdrRecord> out;
        for (int i = 0; i < 400000; ++i)
            out.push_back({"p" + std::to_string(phone(rng)), "p" + std::to_string(phone(rng)), kT0 + off(rng), 60,
                           "B" + std::to_string(tower(rng)), "B" + std::to_string(tower(rng))});
        return out;
    }();
    return recs;
}

const std::string& cdr_text() {
    static const std::string text = cdr::export_cdr(records());
    return text;
}

const raster::Raster& image() {
    static const auto r = [] {
        auto out = raster::make_raster({1000, 1000, 17, -94, 0.001});
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0, 1);
        for (auto& v : out.values) v = u(rng);
        return out;
    }();
    return r;
}

std::pair<raster::FloodMask, raster::FloodMask> masks() {
    auto mask = raster::make_mask(image().geom), seeds = raster::make_mask(image().geom);
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        mask.values[i] = image().values[i] < 0.6;
        seeds.values[i] = image().values[i] < 0.002;
    }
    return {mask, seeds};
}

const rain::RainGrid& rain_grid() {
    static const auto g = [] {
        rain::RainGrid out;
        out.geom = {100, 100, 17, -94, 0.1};
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0, 2);
        for (int f = 0; f < 8 * 30; ++f) {
            out.instants.push_back(kT0 + f * out.timestep_s);
            std::vector<double> frame(out.geom.size());
            for (auto& v : frame) v = u(rng);
            out.frames.push_back(std::move(frame));
        }
        return out;
    }();
    return g;
}

const DayRange kBl{*parse_date("2009-10-01"), *parse_date("2009-10-31")};

template <class F>
void run_parallel(benchmark::State& state, F&& f) {
    parallel::ScopedWorkers w(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(f());
}

template <class F>
void run_serial(benchmark::State& state, F&& f) {
    for (auto _ : state) benchmark::DoNotOptimize(f());
}

void BM_parse_serial(benchmark::State& s) { run_serial(s, [] { return cdr::serial::parse_cdr_text(cdr_text()); }); }
void BM_parse_parallel(benchmark::State& s) { run_parallel(s, [] { return cdr::parse_cdr_text(cdr_text()); }); }

void BM_activity_serial(benchmark::State& s) {
    run_serial(s, [] { return activity::serial::compute_activity(records(), registry(), DayBucketing{-6}); });
}
void BM_activity_parallel(benchmark::State& s) {
    run_parallel(s, [] { return activity::compute_activity(records(), registry(), DayBucketing{-6}); });
}

void BM_hat_serial(benchmark::State& s) {
    run_serial(s, [] { return hat::serial::assign_hat(records(), DayBucketing{-6}, {}, kBl); });
}
void BM_hat_parallel(benchmark::State& s) {
    run_parallel(s, [] { return hat::assign_hat(records(), DayBucketing{-6}, {}, kBl); });
}

void BM_smooth_serial(benchmark::State& s) { run_serial(s, [] { return raster::serial::gaussian_smooth(image(), 2.0); }); }
void BM_smooth_parallel(benchmark::State& s) { run_parallel(s, [] { return raster::gaussian_smooth(image(), 2.0); }); }

void BM_reconstruct_serial(benchmark::State& s) {
    const auto [mask, seeds] = masks();
    run_serial(s, [&] { return raster::serial::reconstruct_by_dilation(seeds, mask, raster::Connectivity::Eight); });
}
void BM_reconstruct_parallel(benchmark::State& s) {
    const auto [mask, seeds] = masks();
    run_parallel(s, [&] { return raster::reconstruct_by_dilation(seeds, mask, raster::Connectivity::Eight); });
}

const rain::TimeWindow kRainWindow{kT0, kT0 + 30 * kSecondsPerDay};
void BM_rain_serial(benchmark::State& s) { run_serial(s, [] { return rain::serial::accumulate(rain_grid(), kRainWindow); }); }
void BM_rain_parallel(benchmark::State& s) { run_parallel(s, [] { return rain::accumulate(rain_grid(), kRainWindow); }); }

} // namespace

#define WORKERS Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)

BENCHMARK(BM_parse_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_parse_parallel)->WORKERS;
BENCHMARK(BM_activity_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_activity_parallel)->WORKERS;
BENCHMARK(BM_hat_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_hat_parallel)->WORKERS;
BENCHMARK(BM_smooth_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_smooth_parallel)->WORKERS;
BENCHMARK(BM_reconstruct_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reconstruct_parallel)->WORKERS;
BENCHMARK(BM_rain_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rain_parallel)->WORKERS;

BENCHMARK_MAIN();
