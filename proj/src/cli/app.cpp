#include "floodlens/cli.hpp"

#include "floodlens/parallel.hpp"
#include "stages.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>

namespace floodlens::cli {

namespace {

DayRange window_flag(const std::string& flag, const std::string& value) {
    try {
        return parse_day_range(value);
    } catch (const DataError& e) {
        throw UsageError(flag + ": " + e.what());
    }
}

std::optional<DayRange> optional_window(const std::string& flag, const std::string& value) {
    if (value.empty()) return std::nullopt;
    return window_flag(flag, value);
}

std::optional<GeoBox> optional_box(const std::string& flag, const std::string& value) {
    if (value.empty()) return std::nullopt;
    try {
        return parse_geo_box(value);
    } catch (const DataError& e) {
        throw UsageError(flag + ": " + e.what());
    }
}

hat::NightWindow night_flag(const std::string& value) {
    try {
        return hat::parse_night_window(value);
    } catch (const DataError& e) {
        throw UsageError(std::string("--night: ") + e.what());
    }
}

raster::Connectivity connectivity_flag(int n) {
    try {
        return raster::connectivity_from(n);
    } catch (const DataError& e) {
        throw UsageError(std::string("--connectivity: ") + e.what());
    }
}

struct SegmentFlags {
    double sigma = 1.0, t_seed = 0.6, t_mask = 0.4;
    int connectivity = 8;
    std::size_t min_area = 4;

    void attach(CLI::App* sub) {
        sub->add_option("--sigma", sigma, "Gaussian smoothing sigma in pixels")->capture_default_str();
        sub->add_option("--t-seed", t_seed, "seed threshold on the difference image")->capture_default_str();
        sub->add_option("--t-mask", t_mask, "mask threshold on the difference image")->capture_default_str();
        sub->add_option("--connectivity", connectivity, "4 or 8")->capture_default_str();
        sub->add_option("--min-area", min_area, "smallest kept component, in cells")->capture_default_str();
    }
    raster::SegmentParams params() const {
        return {sigma, t_seed, t_mask, connectivity_flag(connectivity), min_area};
    }
};

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"floodlens: flood characterization from call-detail records, rainfall grids and rasters"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: FLOODLENS_THREADS or all cores)");

    std::function<void()> action;
    const auto add = [&](const char* name, const char* help) { return app.add_subcommand(name, help); };

    // ingest
    IngestArgs ingest;
    std::string ingest_bbox;
    {
        auto* s = add("ingest", "validate a CDR log, quarantine unknown towers and filter to a bounding box");
        s->add_option("--cdr", ingest.cdr, "CDR CSV")->required();
        s->add_option("--bts", ingest.bts, "tower registry CSV")->required();
        s->add_option("--bbox", ingest_bbox, "lat_min,lat_max,lon_min,lon_max (default: registry extent)");
        s->add_flag("--strict", ingest.strict, "fail on the first malformed line");
        s->add_option("--out", ingest.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                ingest.bbox = optional_box("--bbox", ingest_bbox);
                run_ingest(ingest);
            };
        });
    }

    // activity
    ActivityArgs activity_args;
    std::string activity_span;
    {
        auto* s = add("activity", "daily unique phones per tower");
        s->add_option("--cdr", activity_args.cdr, "CDR CSV")->required();
        s->add_option("--bts", activity_args.bts, "tower registry CSV")->required();
        s->add_option("--tz-offset-hours,--tz", activity_args.tz, "local offset from UTC in hours")->capture_default_str();
        s->add_option("--span", activity_span, "YYYY-MM-DD:YYYY-MM-DD (default: observed days)");
        s->add_option("--out", activity_args.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                activity_args.span = optional_window("--span", activity_span);
                run_activity(activity_args);
            };
        });
    }

    // zscore
    ZscoreArgs zscore_args;
    std::string zscore_bl;
    {
        auto* s = add("zscore", "baseline statistics and the BTS variation z-score");
        s->add_option("--activity", zscore_args.activity, "activity CSV")->required();
        s->add_option("--bl", zscore_bl, "baseline window YYYY-MM-DD:YYYY-MM-DD")->required();
        s->add_option("--z-max", zscore_args.z_max, "clamp for |z|")->capture_default_str();
        s->add_option("--out", zscore_args.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                zscore_args.bl = window_flag("--bl", zscore_bl);
                run_zscore(zscore_args);
            };
        });
    }

    // exceedance
    ExceedanceArgs exc;
    std::string exc_bl, exc_event, exc_grid = "0:20:0.5";
    {
        auto* s = add("exceedance", "exceedance curves for the baseline and event windows, hot towers");
        s->add_option("--zscore", exc.zscore, "z-score CSV")->required();
        s->add_option("--bl", exc_bl, "baseline window (default: 31 days before the event)");
        s->add_option("--event", exc_event, "event window")->required();
        s->add_option("--thresholds", exc_grid, "lo:hi:step")->capture_default_str();
        s->add_option("--k", exc.k, "number of hot towers")->capture_default_str();
        s->add_option("--out", exc.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                exc.event = window_flag("--event", exc_event);
                exc.bl = exc_bl.empty() ? default_baseline(exc.event) : window_flag("--bl", exc_bl);
                exc.grid = parse_threshold_grid(exc_grid);
                if (exc.k == 0) throw UsageError("--k must be positive");
                run_exceedance(exc);
            };
        });
    }

    // hat
    HatArgs hat_args;
    std::string hat_bl, hat_night = "20-6";
    {
        auto* s = add("hat", "home antenna tower per phone");
        s->add_option("--cdr", hat_args.cdr, "CDR CSV")->required();
        s->add_option("--tz-offset-hours,--tz", hat_args.tz, "local offset from UTC in hours")->capture_default_str();
        s->add_option("--bl", hat_bl, "baseline window")->required();
        s->add_option("--night", hat_night, "inclusive local hours, start-end")->capture_default_str();
        s->add_option("--out", hat_args.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                hat_args.bl = window_flag("--bl", hat_bl);
                hat_args.night = night_flag(hat_night);
                run_hat(hat_args);
            };
        });
    }

    // census-compare
    CensusArgs census_args;
    {
        auto* s = add("census-compare", "per-region CDR population against the census");
        s->add_option("--hat", census_args.hat, "HAT CSV")->required();
        s->add_option("--bts", census_args.bts, "tower registry CSV")->required();
        s->add_option("--regions", census_args.regions, "regions GeoJSON")->required();
        s->add_option("--census", census_args.census, "census CSV")->required();
        s->add_option("--out", census_args.out, "output directory")->capture_default_str();
        s->callback([&] { action = [&] { run_census_compare(census_args); }; });
    }

    // voronoi
    VoronoiArgs vor;
    std::string vor_clip;
    {
        auto* s = add("voronoi", "tower cells as GeoJSON");
        s->add_option("--bts", vor.bts, "tower registry CSV")->required();
        s->add_option("--clip", vor_clip, "lat_min,lat_max,lon_min,lon_max (default: registry extent + 0.05 deg)");
        s->add_option("--out", vor.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                vor.clip = optional_box("--clip", vor_clip);
                run_voronoi(vor);
            };
        });
    }

    // segment
    SegmentArgs seg;
    SegmentFlags seg_flags;
    {
        auto* s = add("segment", "flood mask from pre/post water-index rasters");
        s->add_option("--pre", seg.pre, "pre-event ESRI ASCII grid")->required();
        s->add_option("--post", seg.post, "post-event ESRI ASCII grid")->required();
        seg_flags.attach(s);
        s->add_option("--out", seg.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                seg.params = seg_flags.params();
                run_segment(seg);
            };
        });
    }

    // rain
    RainArgs rain_args;
    std::string rain_window;
    {
        auto* s = add("rain", "per-tower daily rainfall and window accumulation");
        s->add_option("--rain-index", rain_args.index, "frame index CSV")->required();
        s->add_option("--bts", rain_args.bts, "tower registry CSV")->required();
        s->add_option("--tz-offset-hours,--tz", rain_args.tz, "local offset from UTC in hours")->capture_default_str();
        s->add_option("--window", rain_window, "accumulation window")->required();
        s->add_option("--out", rain_args.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                rain_args.window = window_flag("--window", rain_window);
                run_rain(rain_args);
            };
        });
    }

    // lag
    LagArgs lag_args;
    std::string lag_event;
    {
        auto* s = add("lag", "rain peak to activity peak lag for the hot towers");
        s->add_option("--zscore", lag_args.zscore, "z-score CSV")->required();
        s->add_option("--rain-series", lag_args.rain_series, "rain series CSV")->required();
        s->add_option("--hot", lag_args.hot, "hot towers CSV")->required();
        s->add_option("--event", lag_event, "event window")->required();
        s->add_option("--out", lag_args.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                lag_args.event = window_flag("--event", lag_event);
                run_lag(lag_args);
            };
        });
    }

    // impact
    ImpactArgs imp;
    std::string imp_event, imp_clip;
    std::optional<double> imp_shared;
    {
        auto* s = add("impact", "impact map GeoJSON");
        s->add_option("--zscore", imp.zscore, "z-score CSV")->required();
        s->add_option("--bts", imp.bts, "tower registry CSV")->required();
        s->add_option("--mask", imp.mask, "flood mask ESRI ASCII grid")->required();
        s->add_option("--regions", imp.regions, "regions GeoJSON")->required();
        s->add_option("--affected", imp.affected, "affected-population CSV")->required();
        s->add_option("--event", imp_event, "event window")->required();
        s->add_option("--d-max", imp.d_max_m, "flood proximity distance in meters")->capture_default_str();
        s->add_option("--shared-day", imp_shared, "also pick the day with most towers at z >= this threshold");
        s->add_option("--clip", imp_clip, "cell clip box (default: registry extent + 0.05 deg)");
        s->add_option("--out", imp.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                imp.event = window_flag("--event", imp_event);
                imp.clip = optional_box("--clip", imp_clip);
                imp.shared_day_threshold = imp_shared;
                if (!(imp.d_max_m >= 0)) throw UsageError("--d-max must be non-negative");
                run_impact(imp);
            };
        });
    }

    // timelapse
    TimelapseArgs tl;
    std::string tl_days;
    {
        auto* s = add("timelapse", "one |z| frame per day");
        s->add_option("--zscore", tl.zscore, "z-score CSV")->required();
        s->add_option("--days", tl_days, "day range")->required();
        s->add_option("--out", tl.out, "output directory")->capture_default_str();
        s->callback([&] {
            action = [&] {
                tl.days = window_flag("--days", tl_days);
                run_timelapse(tl);
            };
        });
    }

    // synth
    SynthArgs syn;
    std::string syn_config;
    std::optional<std::uint64_t> syn_seed;
    {
        auto* s = add("synth", "generate a synthetic scenario bundle");
        s->add_option("--config", syn_config, "scenario config JSON (default: built-in scenario)");
        s->add_option("--seed", syn_seed, "override rng_seed");
        s->add_option("--out", syn.out, "bundle directory")->required();
        s->callback([&] {
            action = [&] {
                if (!syn_config.empty()) syn.config = syn_config;
                syn.seed = syn_seed;
                run_synth(syn);
            };
        });
    }

    // pipeline
    PipelineArgs pipe;
    std::string pipe_bl, pipe_event, pipe_rain, pipe_night = "20-6", pipe_grid = "0:20:0.5";
    std::optional<int> pipe_tz;
    std::optional<double> pipe_shared;
    SegmentFlags pipe_seg;
    {
        auto* s = add("pipeline", "run every stage over a scenario directory");
        s->add_option("--scenario", pipe.scenario, "scenario directory")->required();
        s->add_option("--out", pipe.out, "output directory (default: <scenario>/out)");
        s->add_option("--tz-offset-hours,--tz", pipe_tz, "local offset from UTC in hours (default: scenario config or -6)");
        s->add_option("--bl", pipe_bl, "baseline window");
        s->add_option("--event", pipe_event, "event window");
        s->add_option("--rain-window", pipe_rain, "rain accumulation window");
        s->add_option("--z-max", pipe.z_max, "clamp for |z|")->capture_default_str();
        s->add_option("--night", pipe_night, "inclusive local night hours")->capture_default_str();
        s->add_option("--k", pipe.k, "number of hot towers")->capture_default_str();
        pipe_seg.attach(s);
        s->add_option("--d-max", pipe.d_max_m, "flood proximity distance in meters")->capture_default_str();
        s->add_option("--thresholds", pipe_grid, "lo:hi:step")->capture_default_str();
        s->add_option("--shared-day", pipe_shared, "shared critical day threshold");
        s->callback([&] {
            action = [&] {
                pipe.tz = pipe_tz;
                pipe.bl = optional_window("--bl", pipe_bl);
                pipe.event = optional_window("--event", pipe_event);
                pipe.rain_window = optional_window("--rain-window", pipe_rain);
                pipe.night = night_flag(pipe_night);
                pipe.segment = pipe_seg.params();
                pipe.grid = parse_threshold_grid(pipe_grid);
                pipe.shared_day_threshold = pipe_shared;
                if (pipe.k == 0) throw UsageError("--k must be positive");
                run_pipeline(pipe);
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const auto extras = app.remaining();
        if (app.get_subcommands().empty() && !extras.empty() && extras.front().rfind('-', 0) != 0)
            std::cerr << "error: unknown subcommand: " << extras.front() << "\n\n" << app.help();
        else
            std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    if (threads < 0) {
        std::cerr << "error: --threads must be positive\n";
        return 1;
    }
    parallel::ScopedWorkers workers(threads);
    try {
        action();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace floodlens::cli
