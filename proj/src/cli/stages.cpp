#include "stages.hpp"

#include "floodlens/cdr_ingest.hpp"
#include "floodlens/geo.hpp"
#include "floodlens/impact.hpp"
#include "floodlens/rainfall.hpp"
#include "floodlens/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>

namespace floodlens::cli {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& rel) { return (fs::path(dir) / rel).string(); }

void put(const std::string& dir, const std::string& rel, std::string_view content) { write_file(join(dir, rel), content); }

GeoBox registry_box(const cdr::BtsRegistry& registry, double pad) {
    if (registry.empty()) throw DataError("empty tower registry");
    GeoBox b{90, -90, 180, -180};
    for (const auto& s : registry.sites()) {
        b.lat_min = std::min(b.lat_min, s.lat), b.lat_max = std::max(b.lat_max, s.lat);
        b.lon_min = std::min(b.lon_min, s.lon), b.lon_max = std::max(b.lon_max, s.lon);
    }
    b.lat_min = std::max(-90.0, b.lat_min - pad), b.lat_max = std::min(90.0, b.lat_max + pad);
    b.lon_min = std::max(-180.0, b.lon_min - pad), b.lon_max = std::min(180.0, b.lon_max + pad);
    return b;
}

constexpr double kClipPadDeg = 0.05;

std::string export_hot_csv(std::span<const std::string> ids, std::span<const activity::TowerMax> maxima) {
    std::string out = "rank,bts_id,max_z\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = std::find_if(maxima.begin(), maxima.end(), [&](const auto& m) { return m.bts_id == ids[i]; });
        out += std::to_string(i + 1) + "," + ids[i] + "," + format_fixed(it->max_z) + "\n";
    }
    return out;
}

std::vector<std::string> parse_hot_csv(std::string_view text) {
    std::vector<std::string> ids;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line == "rank,bts_id,max_z") continue;
        const auto f = split(line, ',');
        if (f.size() != 3 || f[1].empty()) throw DataError("hot towers line " + std::to_string(line_no) + ": expected rank,bts_id,max_z");
        ids.emplace_back(f[1]);
    }
    if (ids.empty()) throw DataError("hot towers file lists no towers");
    return ids;
}

std::string lag_summary_json(const rain::LagReport& r, const DayRange& event) {
    nlohmann::json j;
    j["event_window"] = format_day_range(event);
    j["median_lag_days"] = r.median_lag;
    j["towers"] = nlohmann::json::array();
    for (const auto& e : r.towers)
        j["towers"].push_back({{"bts_id", e.bts_id}, {"lag", e.lag}, {"rain_peak_day", format_date(e.rain_peak)},
                               {"z_peak_day", format_date(e.z_peak)}});
    return j.dump(2) + "\n";
}

} // namespace

ThresholdGrid parse_threshold_grid(const std::string& s) {
    const auto f = split(s, ':');
    if (f.size() != 3) throw UsageError("thresholds must look like lo:hi:step, got " + s);
    const auto lo = parse_double(f[0]), hi = parse_double(f[1]), step = parse_double(f[2]);
    if (!lo || !hi || !step || !(*step > 0) || *hi < *lo) throw UsageError("thresholds must look like lo:hi:step with step > 0, got " + s);
    return {*lo, *hi, *step};
}

DayRange default_baseline(const DayRange& event) { return {event.first - 31, event.first - 1}; }

void run_ingest(const IngestArgs& a) {
    const auto registry = cdr::parse_bts_registry(a.bts);
    const auto parsed = cdr::parse_cdr_file(a.cdr, {a.strict});
    const auto box = a.bbox ? *a.bbox : registry_box(registry, 0.0);
    const auto filtered = cdr::filter_bbox(parsed.records, registry, box);
    put(a.out, files::kCleanCdr, cdr::export_cdr(filtered.kept));
    put(a.out, files::kDiagnostics, cdr::export_diagnostics(parsed.diagnostics));
    put(a.out, files::kQuarantine, cdr::export_cdr(filtered.quarantined));
    std::cout << "ingest: " << parsed.data_lines << " lines, " << filtered.kept.size() << " kept, "
              << parsed.diagnostics.size() << " malformed, " << filtered.quarantined.size() << " quarantined\n";
}

void run_activity(const ActivityArgs& a) {
    const auto registry = cdr::parse_bts_registry(a.bts);
    activity::ActivityAccumulator acc(registry, DayBucketing{a.tz});
    std::size_t bad = 0;
    const auto stats = cdr::stream_cdr_file(
        a.cdr, {}, [&](std::span<const cdr::CdrView> batch) { acc.add(batch); }, [&](const cdr::Diagnostic&) { ++bad; });
    if (!a.span && !acc.observed_range()) throw DataError("no records touch a registered tower in " + a.cdr);
    const auto series = acc.finish(a.span);
    put(a.out, files::kActivity, activity::export_activity_csv(series));
    std::cout << "activity: " << stats.records << " records, " << bad << " malformed, " << series.size() << " towers\n";
}

void run_zscore(const ZscoreArgs& a) {
    const auto series = activity::parse_activity_csv(read_file(a.activity));
    std::vector<activity::BaselineStats> stats;
    const auto z = activity::zscore_all(series, a.bl, a.z_max, &stats);
    put(a.out, files::kZscore, activity::export_zscore_csv(z));
    put(a.out, files::kBaseline, activity::export_baseline_csv(stats));
    const auto degenerate = std::count_if(stats.begin(), stats.end(), [](const auto& s) { return s.degenerate; });
    std::cout << "zscore: " << z.size() << " towers, " << degenerate << " degenerate baselines\n";
}

void run_exceedance(const ExceedanceArgs& a) {
    const auto z = activity::parse_zscore_csv(read_file(a.zscore), a.z_max);
    const auto thresholds = activity::threshold_grid(a.grid.lo, a.grid.hi, a.grid.step);
    const auto bl_max = activity::tower_maxima(z, a.bl);
    const auto ev_max = activity::tower_maxima(z, a.event);
    std::vector<double> bl_values, ev_values;
    for (const auto& m : bl_max) bl_values.push_back(m.max_z);
    for (const auto& m : ev_max) ev_values.push_back(m.max_z);
    put(a.out, files::kExceedanceBl, activity::export_exceedance_csv(activity::exceedance_curve(bl_values, thresholds)));
    put(a.out, files::kExceedanceEvent, activity::export_exceedance_csv(activity::exceedance_curve(ev_values, thresholds)));
    const auto hot = activity::top_k_hot(ev_max, a.k);
    put(a.out, files::kHotTowers, export_hot_csv(hot, ev_max));
    std::cout << "exceedance: hot towers";
    for (const auto& id : hot) std::cout << ' ' << id;
    std::cout << '\n';
}

void run_hat(const HatArgs& a) {
    hat::HatAccumulator acc(DayBucketing{a.tz}, a.night, a.bl);
    cdr::stream_cdr_file(a.cdr, {}, [&](std::span<const cdr::CdrView> batch) { acc.add(batch); });
    const auto assignment = acc.finish();
    put(a.out, files::kHat, hat::export_hat_csv(assignment));
    std::cout << "hat: " << assignment.phone_to_bts.size() << " phones assigned\n";
}

void run_census_compare(const CensusArgs& a) {
    const auto assignment = hat::parse_hat_csv(read_file(a.hat));
    const auto registry = cdr::parse_bts_registry(a.bts);
    const auto regions = geo::parse_regions_geojson(read_file(a.regions));
    const auto census = hat::parse_census_csv(read_file(a.census));
    auto pops = hat::estimate_population(assignment, registry, regions);
    for (const auto& id : hat::join_census(pops, census)) std::cerr << "warning: census region " << id << " has no polygon\n";
    put(a.out, files::kPopulation, hat::export_population_csv(pops));
    const auto fit = hat::compare_census(pops.regions);
    put(a.out, files::kCensusFit, hat::export_census_fit_json(fit));
    std::cout << "census-compare: r_squared " << format_fixed(fit.r_squared) << ", ratio_cv " << format_fixed(fit.ratio_cv) << '\n';
}

void run_voronoi(const VoronoiArgs& a) {
    const auto registry = cdr::parse_bts_registry(a.bts);
    const auto diagram = geo::voronoi_cells(registry, a.clip ? *a.clip : registry_box(registry, kClipPadDeg));
    for (const auto& w : diagram.warnings) std::cerr << "warning: " << w << '\n';
    put(a.out, files::kVoronoi, geo::export_cells_geojson(diagram));
    std::cout << "voronoi: " << diagram.cells.size() << " cells\n";
}

void run_segment(const SegmentArgs& a) {
    const auto pre = raster::read_ascii_grid(a.pre);
    const auto post = raster::read_ascii_grid(a.post);
    const auto mask = raster::segment_flood(pre, post, a.params);
    put(a.out, files::kFloodMask, raster::format_ascii_mask(mask));
    std::cout << "segment: " << mask.count() << " flooded cells\n";
}

void run_rain(const RainArgs& a) {
    const auto grid = rain::load_rain_grid(a.index);
    const auto registry = cdr::parse_bts_registry(a.bts);
    const DayBucketing bucketing{a.tz};
    std::vector<rain::RainSeries> series;
    for (const auto& s : registry.sites()) {
        series.push_back(rain::sample_at_site(grid, s, bucketing));
        if (series.back().out_of_extent) std::cerr << "warning: tower " << s.bts_id << " outside the rain grid, using the nearest edge cell\n";
    }
    put(a.out, files::kRainSeries, rain::export_rain_series_csv(series));
    const auto total = rain::accumulate(grid, rain::window_for_days(a.window, bucketing));
    put(a.out, files::kRainAccumulated, raster::format_ascii_grid({grid.geom, total}));
    std::cout << "rain: " << grid.frames.size() << " frames, max accumulation "
              << format_fixed(*std::max_element(total.begin(), total.end())) << " mm\n";
}

void run_lag(const LagArgs& a) {
    const auto z = activity::parse_zscore_csv(read_file(a.zscore), a.z_max);
    const auto rain_series = rain::parse_rain_series_csv(read_file(a.rain_series));
    const auto towers = parse_hot_csv(read_file(a.hot));
    const auto report = rain::lag_report(z, rain_series, towers, a.event);
    put(a.out, files::kLag, rain::export_lag_csv(report));
    put(a.out, files::kLagSummary, lag_summary_json(report, a.event));
    std::cout << "lag: median " << format_shortest(report.median_lag) << " days over " << report.towers.size() << " towers\n";
}

void run_impact(const ImpactArgs& a) {
    const auto z = activity::parse_zscore_csv(read_file(a.zscore), a.z_max);
    const auto registry = cdr::parse_bts_registry(a.bts);
    const auto mask = raster::parse_ascii_mask(read_file(a.mask));
    const auto regions = geo::parse_regions_geojson(read_file(a.regions));
    const auto affected = impact::parse_affected_csv(read_file(a.affected));
    impact::ImpactOptions opts;
    opts.d_max_m = a.d_max_m;
    opts.shared_day_threshold = a.shared_day_threshold;
    const auto map = impact::build_impact_map(z, registry, mask, regions, affected, a.event, opts);
    for (const auto& id : map.unmatched_rows) std::cerr << "warning: affected-table region " << id << " matches no polygon\n";
    for (const auto& id : map.missing_series) std::cerr << "warning: tower " << id << " has no z-series\n";
    const auto diagram = geo::voronoi_cells(registry, a.clip ? *a.clip : registry_box(registry, kClipPadDeg));
    put(a.out, files::kImpact, impact::export_geojson(map.records, &diagram));
    const auto flooded = std::count_if(map.records.begin(), map.records.end(), [](const auto& r) { return r.in_flood; });
    std::cout << "impact: " << map.records.size() << " towers, " << flooded << " near flooding";
    if (map.shared_day) std::cout << ", shared critical day " << format_date(*map.shared_day);
    std::cout << '\n';
}

void run_timelapse(const TimelapseArgs& a) {
    const auto z = activity::parse_zscore_csv(read_file(a.zscore), a.z_max);
    const auto frames = impact::timelapse_frames(z, a.days);
    for (const auto& f : frames) put(a.out, join(files::kTimelapseDir, impact::frame_file_name(f.day)), impact::export_frame_csv(f));
    std::cout << "timelapse: " << frames.size() << " frames\n";
}

void run_synth(const SynthArgs& a) {
    auto config = a.config ? synth::parse_config_json(read_file(*a.config)) : synth::default_config();
    if (a.seed) config.rng_seed = *a.seed;
    const auto bundle = synth::generate(config);
    synth::write_bundle(bundle, a.out);
    std::cout << "synth: " << bundle.records.size() << " records, " << bundle.registry.size() << " towers -> " << a.out << '\n';
}

void run_pipeline(const PipelineArgs& a) {
    const std::string in = a.scenario;
    const std::string out = a.out.empty() ? join(in, "out") : a.out;
    const auto config_path = join(in, "config.json");
    std::optional<synth::ScenarioConfig> scenario;
    if (fs::exists(config_path)) scenario = synth::parse_config_json(read_file(config_path));

    const int tz = a.tz ? *a.tz : scenario ? scenario->tz_offset_hours : -6;
    if (!a.event && !scenario) throw UsageError("--event is required when the scenario has no config.json");
    const DayRange event = a.event ? *a.event : scenario->event_window;
    const DayRange bl = a.bl ? *a.bl : scenario && !a.event ? scenario->bl_window : default_baseline(event);
    DayRange rain_window = event;
    if (a.rain_window)
        rain_window = *a.rain_window;
    else if (scenario)
        rain_window = {scenario->rain_peak_day - (scenario->rain_days - 1) / 2, scenario->rain_peak_day + (scenario->rain_days - 1) / 2};

    const auto cdr_path = join(in, "cdr.csv"), bts = join(in, "bts.csv"), regions = join(in, "regions.geojson");
    const auto census = join(in, "census.csv"), affected = join(in, "affected.csv"), rain_index = join(in, "rain/index.csv");
    const auto pre = join(in, "flood_pre.asc"), post = join(in, "flood_post.asc");
    for (const auto& p : {cdr_path, bts, regions, census, affected, rain_index, pre, post})
        if (!fs::exists(p)) throw DataError("missing input " + p);

    const auto clean = join(out, files::kCleanCdr);
    const auto zscore = join(out, files::kZscore);
    run_ingest({cdr_path, bts, out, std::nullopt, false});
    run_activity({clean, bts, out, tz, std::nullopt});
    run_zscore({join(out, files::kActivity), out, bl, a.z_max});
    run_exceedance({zscore, out, bl, event, a.grid, a.k, a.z_max});
    run_hat({clean, out, tz, bl, a.night});
    run_census_compare({join(out, files::kHat), bts, regions, census, out});
    run_voronoi({bts, out, std::nullopt});
    run_segment({pre, post, out, a.segment});
    run_rain({rain_index, bts, out, tz, rain_window});
    run_lag({zscore, join(out, files::kRainSeries), join(out, files::kHotTowers), out, event, a.z_max});
    run_impact({zscore, bts, join(out, files::kFloodMask), regions, affected, out, event, a.d_max_m, a.z_max,
                a.shared_day_threshold, std::nullopt});
    run_timelapse({zscore, out, event, a.z_max});

    nlohmann::json meta;
    meta["tool"] = "floodlens";
    meta["config"] = {{"tz_offset_hours", tz},
                      {"bl_window", format_day_range(bl)},
                      {"event_window", format_day_range(event)},
                      {"rain_window", format_day_range(rain_window)},
                      {"z_max", a.z_max},
                      {"night_window", hat::format_night_window(a.night)},
                      {"k_hot", a.k},
                      {"sigma_px", a.segment.sigma_px},
                      {"t_seed", a.segment.t_seed},
                      {"t_mask", a.segment.t_mask},
                      {"connectivity", static_cast<int>(a.segment.connectivity)},
                      {"min_area", a.segment.min_area},
                      {"d_max_m", a.d_max_m},
                      {"thresholds", {a.grid.lo, a.grid.hi, a.grid.step}},
                      {"shared_day_threshold", a.shared_day_threshold ? nlohmann::json(*a.shared_day_threshold) : nlohmann::json(nullptr)}};
    nlohmann::json digests;
    for (const auto& rel : {"cdr.csv", "bts.csv", "regions.geojson", "census.csv", "affected.csv", "rain/index.csv",
                            "flood_pre.asc", "flood_post.asc"})
        digests[rel] = digest_hex(read_file(join(in, rel)));
    meta["inputs_fnv1a64"] = digests;
    put(out, files::kRunMetadata, meta.dump(2) + "\n");
    std::cout << "pipeline: outputs in " << out << '\n';
}

} // namespace floodlens::cli
