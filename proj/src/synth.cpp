#include "floodlens/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <unordered_set>

namespace floodlens::synth {

namespace {

using Json = nlohmann::json;
using Rng = std::mt19937_64;

// Independent stream per generation stage, so changing one stage leaves the others intact.
Rng stream(std::uint64_t seed, std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
    return Rng(seq);
}

enum Stream : std::uint32_t { kTowers = 1, kCensus, kPhones, kRates, kCounts, kCalls, kFlood };

[[noreturn]] void bad_field(std::string_view field, std::string_view why) {
    throw DataError("invalid config: field " + std::string(field) + ": " + std::string(why));
}

Day date_or_throw(std::string_view field, std::string_view s) {
    const auto d = parse_date(s);
    if (!d) bad_field(field, "expected YYYY-MM-DD");
    return *d;
}

DayRange range_or_throw(std::string_view field, std::string_view s) {
    try {
        return parse_day_range(s);
    } catch (const DataError& e) {
        bad_field(field, e.what());
    }
}

std::string tower_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%03zu", i + 1);
    return buf;
}

std::string phone_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "P%07zu", i + 1);
    return buf;
}

double micro(double v) { return std::round(v * 1e6) / 1e6; }

// Monday = 0.
int weekday(Day d) { return static_cast<int>(((d + 3) % 7 + 7) % 7); }

std::optional<std::size_t> tower_index(std::string_view id, std::size_t n_bts) {
    for (std::size_t i = 0; i < n_bts; ++i)
        if (tower_id(i) == id) return i;
    return std::nullopt;
}

raster::GridGeometry grid_over(const GeoBox& box, double cell) {
    raster::GridGeometry g;
    g.cell_deg = cell;
    g.nrows = static_cast<std::size_t>(std::ceil((box.lat_max - box.lat_min) / cell - 1e-9));
    g.ncols = static_cast<std::size_t>(std::ceil((box.lon_max - box.lon_min) / cell - 1e-9));
    g.lat0 = box.lat_min + cell / 2;
    g.lon0 = box.lon_min + cell / 2;
    return g;
}

DayRange rain_window(const ScenarioConfig& c) {
    return {c.rain_peak_day - (c.rain_days - 1) / 2, c.rain_peak_day + (c.rain_days - 1) / 2};
}

GeoBox region_box(const GeoBox& study, std::size_t i) {
    const double dlat = (study.lat_max - study.lat_min) / 3, dlon = (study.lon_max - study.lon_min) / 4;
    const auto row = static_cast<double>(i / 4), col = static_cast<double>(i % 4);
    return {study.lat_min + row * dlat, study.lat_min + (row + 1) * dlat, study.lon_min + col * dlon,
            study.lon_min + (col + 1) * dlon};
}

struct Call {
    std::size_t a, b;
};

} // namespace

const std::vector<std::string>& region_names() {
    static const std::vector<std::string> names = {
        "Huimanguillo", "Cárdenas",  "Comalcalco", "Paraíso",   "Cunduacán", "Jalpa de Méndez",
        "Nacajuca",     "Centro",    "Jalapa",     "Teapa",     "Tacotalpa", "Macuspana"};
    return names;
}

ScenarioConfig default_config() {
    ScenarioConfig c;
    c.first_day = *parse_date("2009-10-01");
    c.last_day = *parse_date("2010-01-31");
    c.bl_window = parse_day_range("2009-10-01:2009-10-31");
    c.event_window = parse_day_range("2009-11-01:2010-01-31");
    c.rain_peak_day = *parse_date("2009-11-02");
    c.spike_start = c.rain_peak_day + 4;
    c.spike_towers = {"T005", "T009", "T014", "T018", "T027", "T033"};
    c.outage_towers = {"T021", "T036"};
    c.outage_days = parse_day_range("2009-11-03:2009-11-05");
    c.affected = {{"Cárdenas", 105272, 69},    {"Comalcalco", 18215, 15}, {"Cunduacán", 10280, 5},
                  {"Huimanguillo", 53688, 60}, {"Jalpa de Méndez", 147, 0}, {"Paraíso", 27134, 14}};
    return c;
}

void validate(const ScenarioConfig& c) {
    if (c.first_day > c.last_day) bad_field("end_date", "before start_date");
    const DayRange span{c.first_day, c.last_day};
    if (c.tz_offset_hours < -12 || c.tz_offset_hours > 14) bad_field("tz_offset_hours", "outside -12..14");
    if (!span.contains(c.bl_window)) bad_field("bl_window", "outside the scenario span");
    if (c.bl_window.length() < 2) bad_field("bl_window", "needs at least 2 days");
    if (!span.contains(c.event_window)) bad_field("event_window", "outside the scenario span");
    if (c.event_window.first <= c.bl_window.first) bad_field("event_window", "must start after the baseline start");
    try {
        c.study_box.validate();
    } catch (const DataError& e) {
        bad_field("study_box", e.what());
    }
    if (c.n_bts < region_names().size()) bad_field("n_bts", "needs one tower per region (12)");
    if (c.n_bts > 999) bad_field("n_bts", "at most 999");
    if (c.n_phones < 2) bad_field("n_phones", "needs at least 2 phones");
    if (!(c.base_rate_min > 0) || !(c.base_rate_max >= c.base_rate_min)) bad_field("base_rate_min", "need 0 < min <= max");
    for (double w : c.weekly)
        if (!(w > 0)) bad_field("weekly", "multipliers must be positive");
    if (!(c.visitor_fraction >= 0 && c.visitor_fraction < 1)) bad_field("visitor_fraction", "must lie in [0, 1)");
    if (!(c.repeat_call_prob >= 0 && c.repeat_call_prob <= 1)) bad_field("repeat_call_prob", "must lie in [0, 1]");

    if (!(c.spike_factor >= 1)) bad_field("spike_factor", "must be >= 1");
    if (c.spike_duration < 1) bad_field("spike_duration", "must be >= 1");
    std::set<std::string> seen;
    for (const auto& t : c.spike_towers) {
        if (!tower_index(t, c.n_bts)) bad_field("spike_towers", "unknown tower " + t);
        if (!seen.insert(t).second) bad_field("spike_towers", "duplicate tower " + t);
    }
    if (!c.spike_towers.empty() && !span.contains(DayRange{c.spike_start, c.spike_start + c.spike_duration - 1}))
        bad_field("spike_start", "spike window outside the scenario span");
    for (const auto& t : c.outage_towers) {
        if (!tower_index(t, c.n_bts)) bad_field("outage_towers", "unknown tower " + t);
        if (seen.count(t)) bad_field("outage_towers", "tower " + t + " is also spiked");
    }
    if (!c.outage_towers.empty() && (!c.outage_days || !span.contains(*c.outage_days)))
        bad_field("outage_days", "missing or outside the scenario span");

    if (!c.study_box.contains(c.rain_center_lat, c.rain_center_lon)) bad_field("rain_center_lat", "outside study_box");
    if (c.rain_days < 1 || c.rain_days % 2 == 0) bad_field("rain_days", "must be a positive odd number");
    if (!span.contains(rain_window(c))) bad_field("rain_peak_day", "rain window outside the scenario span");
    if (!(c.rain_magnitude_mm > 0)) bad_field("rain_magnitude_mm", "must be positive");
    if (!(c.rain_sigma_deg > 0)) bad_field("rain_sigma_deg", "must be positive");
    if (!(c.rain_temporal_sigma_h > 0)) bad_field("rain_temporal_sigma_h", "must be positive");
    if (!(c.rain_cell_deg > 0)) bad_field("rain_cell_deg", "must be positive");

    if (!(c.flood_cell_deg > 0)) bad_field("flood_cell_deg", "must be positive");
    const auto fg = grid_over(c.study_box, c.flood_cell_deg);
    if (c.flood_rows == 0 || c.flood_cols == 0) bad_field("flood_rows", "empty flood rectangle");
    if (c.flood_row0 + c.flood_rows > fg.nrows || c.flood_col0 + c.flood_cols > fg.ncols)
        bad_field("flood_row0", "flood rectangle outside the raster");
    if (!(c.flood_increment > 0)) bad_field("flood_increment", "must be positive");
    if (!(c.flood_noise >= 0)) bad_field("flood_noise", "must be non-negative");

    if (!c.census.empty()) {
        if (c.census.size() != region_names().size()) bad_field("census", "needs one row per region");
        std::set<std::string> ids;
        for (const auto& row : c.census) {
            if (!ids.insert(row.region_id).second) bad_field("census", "duplicate region " + row.region_id);
            if (std::find(region_names().begin(), region_names().end(), row.region_id) == region_names().end())
                bad_field("census", "unknown region " + row.region_id);
            if (row.population <= 0) bad_field("census", "populations must be positive");
        }
    }
}

ScenarioConfig parse_config_json(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::exception& e) {
        throw DataError(std::string("invalid config: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("invalid config: expected a JSON object");
    ScenarioConfig c = default_config();
    for (const auto& [key, v] : doc.items()) {
        try {
            if (key == "rng_seed") c.rng_seed = v.get<std::uint64_t>();
            else if (key == "tz_offset_hours") c.tz_offset_hours = v.get<int>();
            else if (key == "start_date") c.first_day = date_or_throw(key, v.get<std::string>());
            else if (key == "end_date") c.last_day = date_or_throw(key, v.get<std::string>());
            else if (key == "bl_window") c.bl_window = range_or_throw(key, v.get<std::string>());
            else if (key == "event_window") c.event_window = range_or_throw(key, v.get<std::string>());
            else if (key == "study_box") c.study_box = parse_geo_box(v.get<std::string>());
            else if (key == "n_bts") c.n_bts = v.get<std::size_t>();
            else if (key == "n_phones") c.n_phones = v.get<std::size_t>();
            else if (key == "base_rate_min") c.base_rate_min = v.get<double>();
            else if (key == "base_rate_max") c.base_rate_max = v.get<double>();
            else if (key == "weekly") {
                if (!v.is_array() || v.size() != 7) bad_field(key, "expected 7 multipliers");
                for (std::size_t i = 0; i < 7; ++i) c.weekly[i] = v[i].get<double>();
            }
            else if (key == "visitor_fraction") c.visitor_fraction = v.get<double>();
            else if (key == "repeat_call_prob") c.repeat_call_prob = v.get<double>();
            else if (key == "spike_towers") c.spike_towers = v.get<std::vector<std::string>>();
            else if (key == "spike_factor") c.spike_factor = v.get<double>();
            else if (key == "spike_start") c.spike_start = date_or_throw(key, v.get<std::string>());
            else if (key == "spike_duration") c.spike_duration = v.get<int>();
            else if (key == "outage_towers") c.outage_towers = v.get<std::vector<std::string>>();
            else if (key == "outage_days") {
                if (v.is_null()) c.outage_days.reset();
                else c.outage_days = range_or_throw(key, v.get<std::string>());
            }
            else if (key == "rain_center_lat") c.rain_center_lat = v.get<double>();
            else if (key == "rain_center_lon") c.rain_center_lon = v.get<double>();
            else if (key == "rain_peak_day") c.rain_peak_day = date_or_throw(key, v.get<std::string>());
            else if (key == "rain_days") c.rain_days = v.get<int>();
            else if (key == "rain_magnitude_mm") c.rain_magnitude_mm = v.get<double>();
            else if (key == "rain_sigma_deg") c.rain_sigma_deg = v.get<double>();
            else if (key == "rain_temporal_sigma_h") c.rain_temporal_sigma_h = v.get<double>();
            else if (key == "rain_cell_deg") c.rain_cell_deg = v.get<double>();
            else if (key == "flood_cell_deg") c.flood_cell_deg = v.get<double>();
            else if (key == "flood_row0") c.flood_row0 = v.get<std::size_t>();
            else if (key == "flood_col0") c.flood_col0 = v.get<std::size_t>();
            else if (key == "flood_rows") c.flood_rows = v.get<std::size_t>();
            else if (key == "flood_cols") c.flood_cols = v.get<std::size_t>();
            else if (key == "flood_increment") c.flood_increment = v.get<double>();
            else if (key == "flood_noise") c.flood_noise = v.get<double>();
            else if (key == "census") {
                c.census.clear();
                for (const auto& row : v) c.census.push_back({row.at("region_id").get<std::string>(), row.at("population").get<std::int64_t>()});
            }
            else if (key == "affected") {
                c.affected.clear();
                for (const auto& row : v)
                    c.affected.push_back({row.at("region_id").get<std::string>(), row.at("affected_population").get<std::int64_t>(),
                                          row.at("camps").get<std::int64_t>()});
            }
            else bad_field(key, "unknown field");
        } catch (const Json::exception& e) {
            bad_field(key, e.what());
        } catch (const DataError& e) {
            const std::string msg = e.what();
            if (msg.rfind("invalid config", 0) == 0) throw;
            bad_field(key, msg);
        }
    }
    validate(c);
    return c;
}

std::string config_to_json(const ScenarioConfig& c) {
    Json j;
    j["rng_seed"] = c.rng_seed;
    j["tz_offset_hours"] = c.tz_offset_hours;
    j["start_date"] = format_date(c.first_day);
    j["end_date"] = format_date(c.last_day);
    j["bl_window"] = format_day_range(c.bl_window);
    j["event_window"] = format_day_range(c.event_window);
    j["study_box"] = format_shortest(c.study_box.lat_min) + "," + format_shortest(c.study_box.lat_max) + "," +
                     format_shortest(c.study_box.lon_min) + "," + format_shortest(c.study_box.lon_max);
    j["n_bts"] = c.n_bts;
    j["n_phones"] = c.n_phones;
    j["base_rate_min"] = c.base_rate_min;
    j["base_rate_max"] = c.base_rate_max;
    j["weekly"] = c.weekly;
    j["visitor_fraction"] = c.visitor_fraction;
    j["repeat_call_prob"] = c.repeat_call_prob;
    j["spike_towers"] = c.spike_towers;
    j["spike_factor"] = c.spike_factor;
    j["spike_start"] = format_date(c.spike_start);
    j["spike_duration"] = c.spike_duration;
    j["outage_towers"] = c.outage_towers;
    j["outage_days"] = c.outage_days ? Json(format_day_range(*c.outage_days)) : Json(nullptr);
    j["rain_center_lat"] = c.rain_center_lat;
    j["rain_center_lon"] = c.rain_center_lon;
    j["rain_peak_day"] = format_date(c.rain_peak_day);
    j["rain_days"] = c.rain_days;
    j["rain_magnitude_mm"] = c.rain_magnitude_mm;
    j["rain_sigma_deg"] = c.rain_sigma_deg;
    j["rain_temporal_sigma_h"] = c.rain_temporal_sigma_h;
    j["rain_cell_deg"] = c.rain_cell_deg;
    j["flood_cell_deg"] = c.flood_cell_deg;
    j["flood_row0"] = c.flood_row0;
    j["flood_col0"] = c.flood_col0;
    j["flood_rows"] = c.flood_rows;
    j["flood_cols"] = c.flood_cols;
    j["flood_increment"] = c.flood_increment;
    j["flood_noise"] = c.flood_noise;
    j["census"] = Json::array();
    for (const auto& r : c.census) j["census"].push_back({{"region_id", r.region_id}, {"population", r.population}});
    j["affected"] = Json::array();
    for (const auto& r : c.affected)
        j["affected"].push_back({{"region_id", r.region_id}, {"affected_population", r.affected_population}, {"camps", r.camps}});
    return j.dump(2) + "\n";
}

std::vector<std::int64_t> multinomial_counts(std::span<const double> weights, std::size_t n, std::uint64_t seed) {
    if (weights.empty()) throw DataError("multinomial over no categories");
    Rng rng(seed);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::vector<std::int64_t> counts(weights.size(), 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[pick(rng)];
    return counts;
}

Bundle generate(const ScenarioConfig& config) {
    validate(config);
    const auto& c = config;
    Bundle b;
    b.config = c;
    const DayBucketing bucketing{c.tz_offset_hours};
    const auto& names = region_names();

    // Regions: 4x3 grid of rectangles.
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto box = region_box(c.study_box, i);
        geo::RegionPolygon poly{names[i], names[i], {{{box.lat_min, box.lon_min}, {box.lat_min, box.lon_max},
                                                      {box.lat_max, box.lon_max}, {box.lat_max, box.lon_min},
                                                      {box.lat_min, box.lon_min}}}};
        b.regions.push_back(std::move(poly));
    }

    // Towers: the first twelve anchor one per region, the rest anywhere in the study box.
    {
        auto rng = stream(c.rng_seed, kTowers);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<cdr::BtsSite> sites;
        for (std::size_t i = 0; i < c.n_bts; ++i) {
            const GeoBox box = i < names.size() ? region_box(c.study_box, i) : c.study_box;
            const double inset = i < names.size() ? 0.1 : 0.0;
            const double lat = box.lat_min + (inset + (1 - 2 * inset) * u(rng)) * (box.lat_max - box.lat_min);
            const double lon = box.lon_min + (inset + (1 - 2 * inset) * u(rng)) * (box.lon_max - box.lon_min);
            sites.push_back({tower_id(i), micro(lat), micro(lon)});
        }
        b.registry = cdr::BtsRegistry(std::move(sites));
    }
    const auto& sites = b.registry.sites();  // id order == generation order

    if (c.census.empty()) {
        auto rng = stream(c.rng_seed, kCensus);
        std::uniform_int_distribution<std::int64_t> pop(20000, 400000);
        for (const auto& n : names) b.census.push_back({n, pop(rng)});
    } else {
        b.census = c.census;
    }
    b.affected = c.affected;

    // Phones: home region proportional to census, home tower uniform among the region's towers.
    std::vector<std::vector<std::size_t>> region_towers(names.size());
    for (std::size_t t = 0; t < sites.size(); ++t)
        if (const auto r = geo::region_of({sites[t].lat, sites[t].lon}, b.regions)) region_towers[*r].push_back(t);
    std::vector<std::size_t> home(c.n_phones);
    std::vector<std::vector<std::size_t>> pool(sites.size());
    std::vector<std::int64_t> home_region_count(names.size(), 0);
    {
        auto rng = stream(c.rng_seed, kPhones);
        std::vector<double> weights;
        for (const auto& name : names) {
            const auto it = std::find_if(b.census.begin(), b.census.end(), [&](const auto& r) { return r.region_id == name; });
            weights.push_back(static_cast<double>(it->population));
        }
        std::discrete_distribution<std::size_t> pick_region(weights.begin(), weights.end());
        for (std::size_t p = 0; p < c.n_phones; ++p) {
            const auto r = pick_region(rng);
            const auto& towers = region_towers[r];
            std::uniform_int_distribution<std::size_t> pick(0, towers.size() - 1);
            home[p] = towers[pick(rng)];
            pool[home[p]].push_back(p);
            ++home_region_count[r];
        }
    }
    for (std::size_t p = 0; p < c.n_phones; ++p) b.phone_home.push_back(sites[home[p]].bts_id);

    // Daily unique-phone targets.
    const auto n_days = static_cast<std::size_t>(c.last_day - c.first_day + 1);
    std::vector<double> rate(sites.size());
    {
        auto rng = stream(c.rng_seed, kRates);
        std::uniform_real_distribution<double> u(c.base_rate_min, c.base_rate_max);
        for (auto& r : rate) r = u(rng);
    }
    std::vector<bool> spiked(sites.size(), false), outage(sites.size(), false);
    for (const auto& t : c.spike_towers) spiked[*b.registry.index_of(t)] = true;
    for (const auto& t : c.outage_towers) outage[*b.registry.index_of(t)] = true;
    const DayRange spike_days{c.spike_start, c.spike_start + c.spike_duration - 1};

    b.truth_counts.resize(sites.size());
    {
        auto rng = stream(c.rng_seed, kCounts);
        for (std::size_t t = 0; t < sites.size(); ++t) {
            auto& s = b.truth_counts[t];
            s.bts_id = sites[t].bts_id;
            s.start_day = c.first_day;
            const auto max_count = static_cast<std::int64_t>(c.n_phones);
            for (std::size_t i = 0; i < n_days; ++i) {
                const Day d = c.first_day + static_cast<Day>(i);
                double lambda = rate[t] * c.weekly[static_cast<std::size_t>(weekday(d))];
                if (spiked[t] && spike_days.contains(d)) lambda *= c.spike_factor;
                std::poisson_distribution<std::int64_t> poisson(lambda);
                std::int64_t n = poisson(rng);
                if (outage[t] && c.outage_days->contains(d)) n = 0;
                s.values.push_back(std::min(n, max_count));
            }
        }
    }

    // Realize each count with calls among exactly that many distinct phones at the tower.
    {
        auto rng = stream(c.rng_seed, kCalls);
        std::uniform_int_distribution<std::size_t> any_phone(0, c.n_phones - 1);
        std::uniform_int_distribution<int> any_hour(0, 23), day_hour(10, 17), second(0, 3599), duration(10, 600);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<std::size_t> chosen;
        std::unordered_set<std::size_t> taken;
        for (std::size_t i = 0; i < n_days; ++i) {
            const Day d = c.first_day + static_cast<Day>(i);
            const Instant day0 = bucketing.day_start(d);
            for (std::size_t t = 0; t < sites.size(); ++t) {
                auto& count = b.truth_counts[t].values[i];
                if (count == 0) continue;
                auto& home_pool = pool[t];
                const auto visitors_available = static_cast<std::int64_t>(c.n_phones - home_pool.size());
                auto n_home = std::min<std::int64_t>(static_cast<std::int64_t>(home_pool.size()),
                                                     count - std::llround(static_cast<double>(count) * c.visitor_fraction));
                if (count - n_home > visitors_available) n_home = std::min<std::int64_t>(count, static_cast<std::int64_t>(home_pool.size()));
                if (count - n_home > visitors_available) count = n_home + visitors_available;

                chosen.clear();
                taken.clear();
                for (std::int64_t k = 0; k < n_home; ++k) {
                    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), home_pool.size() - 1);
                    std::swap(home_pool[static_cast<std::size_t>(k)], home_pool[pick(rng)]);
                    chosen.push_back(home_pool[static_cast<std::size_t>(k)]);
                }
                while (static_cast<std::int64_t>(chosen.size()) < count) {
                    const auto p = any_phone(rng);
                    if (home[p] == t || !taken.insert(p).second) continue;
                    chosen.push_back(p);
                }

                std::vector<Call> calls;
                if (chosen.size() == 1) {
                    calls.push_back({chosen[0], chosen[0]});
                } else {
                    for (std::size_t k = 0; k + 1 < chosen.size(); k += 2) calls.push_back({chosen[k], chosen[k + 1]});
                    if (chosen.size() % 2 == 1) calls.push_back({chosen.back(), chosen.front()});
                }
                const auto is_visitor = [&](std::size_t pos_phone) { return home[pos_phone] != t; };
                const auto emit = [&](const Call& call) {
                    const bool daytime = is_visitor(call.a) || is_visitor(call.b);
                    const int hour = daytime ? day_hour(rng) : any_hour(rng);
                    cdr::CdrRecord r;
                    r.origin_id = phone_id(call.a);
                    r.dest_id = phone_id(call.b);
                    r.timestamp = day0 + static_cast<Instant>(hour) * 3600 + second(rng);
                    r.duration_s = duration(rng);
                    r.origin_bts = sites[t].bts_id;
                    r.dest_bts = sites[t].bts_id;
                    b.records.push_back(std::move(r));
                };
                for (const auto& call : calls) {
                    emit(call);
                    if (u(rng) < c.repeat_call_prob) emit(call);
                }
            }
        }
        std::stable_sort(b.records.begin(), b.records.end(), [](const cdr::CdrRecord& x, const cdr::CdrRecord& y) {
            return std::tie(x.timestamp, x.origin_id, x.dest_id) < std::tie(y.timestamp, y.origin_id, y.dest_id);
        });
    }

    // Rain: separable Gaussian in space and time, zero outside the rain window.
    const DayRange rwin = rain_window(c);
    b.rain.geom = grid_over(c.study_box, c.rain_cell_deg);
    b.rain.timestep_s = rain::kDefaultTimestepS;
    const auto peak_cell = rain::nearest_cell(b.rain.geom, {c.rain_center_lat, c.rain_center_lon});
    {
        const Instant t_begin = bucketing.day_start(c.first_day), t_end = bucketing.day_start(c.last_day + 1);
        const Instant t_peak = bucketing.day_start(c.rain_peak_day) + 12 * 3600;
        const auto w_rain = rain::window_for_days(rwin, bucketing);
        const double sigma_s = c.rain_temporal_sigma_h * 3600;
        std::vector<double> temporal;
        double temporal_sum = 0;
        for (Instant t = t_begin; t < t_end; t += b.rain.timestep_s) {
            b.rain.instants.push_back(t);
            double w = 0;
            if (t >= w_rain.start && t + b.rain.timestep_s <= w_rain.end) {
                const double dt = static_cast<double>(t + b.rain.timestep_s / 2 - t_peak);
                w = std::exp(-dt * dt / (2 * sigma_s * sigma_s));
            }
            temporal.push_back(w);
            temporal_sum += w;
        }
        const auto& g = b.rain.geom;
        std::vector<double> spatial(g.size());
        for (std::size_t r = 0; r < g.nrows; ++r)
            for (std::size_t col = 0; col < g.ncols; ++col) {
                const auto ctr = g.center(r, col);
                const double dlat = ctr.lat - c.rain_center_lat, dlon = ctr.lon - c.rain_center_lon;
                spatial[g.index(r, col)] = std::exp(-(dlat * dlat + dlon * dlon) / (2 * c.rain_sigma_deg * c.rain_sigma_deg));
            }
        const double scale = c.rain_magnitude_mm / (spatial[g.index(peak_cell.row, peak_cell.col)] * temporal_sum);
        for (double w : temporal) {
            std::vector<double> frame(g.size(), 0.0);
            if (w > 0)
                for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = scale * spatial[i] * w;
            b.rain.frames.push_back(std::move(frame));
        }
        b.rain.validate();
    }

    // Flood rasters: noise everywhere, a constant increment inside the planted rectangle.
    {
        const auto g = grid_over(c.study_box, c.flood_cell_deg);
        auto rng = stream(c.rng_seed, kFlood);
        std::uniform_real_distribution<double> noise(0.0, c.flood_noise);
        b.flood_pre = raster::make_raster(g);
        for (auto& v : b.flood_pre.values) v = c.flood_noise > 0 ? noise(rng) : 0.0;
        b.flood_post = b.flood_pre;
        b.planted_flood = raster::make_mask(g);
        for (std::size_t r = c.flood_row0; r < c.flood_row0 + c.flood_rows; ++r)
            for (std::size_t col = c.flood_col0; col < c.flood_col0 + c.flood_cols; ++col) {
                b.flood_post.values[g.index(r, col)] += c.flood_increment;
                b.planted_flood.values[g.index(r, col)] = 1;
            }
    }

    // Manifest.
    Json m;
    m["seed"] = c.rng_seed;
    m["tz_offset_hours"] = c.tz_offset_hours;
    m["scenario_days"] = format_day_range({c.first_day, c.last_day});
    m["bl_window"] = format_day_range(c.bl_window);
    m["event_window"] = format_day_range(c.event_window);
    std::vector<std::string> spike_sorted = c.spike_towers;
    std::sort(spike_sorted.begin(), spike_sorted.end());
    m["spikes"] = {{"towers", spike_sorted},
                   {"factor", c.spike_factor},
                   {"days", format_day_range(spike_days)},
                   {"active", !c.spike_towers.empty() && c.spike_factor > 1}};
    m["outages"] = {{"towers", c.outage_towers},
                    {"days", c.outage_days ? Json(format_day_range(*c.outage_days)) : Json(nullptr)}};
    const auto peak_center = b.rain.geom.center(peak_cell.row, peak_cell.col);
    m["rain"] = {{"peak_day", format_date(c.rain_peak_day)},
                 {"window", format_day_range(rwin)},
                 {"center_lat", c.rain_center_lat},
                 {"center_lon", c.rain_center_lon},
                 {"peak_cell_row", peak_cell.row},
                 {"peak_cell_col", peak_cell.col},
                 {"peak_cell_lat", peak_center.lat},
                 {"peak_cell_lon", peak_center.lon},
                 {"magnitude_mm", c.rain_magnitude_mm}};
    m["expected_lag"] = c.spike_start - c.rain_peak_day;
    const auto& fg = b.planted_flood.geom;
    const auto sw = fg.center(c.flood_row0, c.flood_col0);
    const auto ne = fg.center(c.flood_row0 + c.flood_rows - 1, c.flood_col0 + c.flood_cols - 1);
    m["flood"] = {{"row0", c.flood_row0},
                  {"col0", c.flood_col0},
                  {"rows", c.flood_rows},
                  {"cols", c.flood_cols},
                  {"cells", c.flood_rows * c.flood_cols},
                  {"increment", c.flood_increment},
                  {"lat_min", sw.lat - fg.cell_deg / 2},
                  {"lat_max", ne.lat + fg.cell_deg / 2},
                  {"lon_min", sw.lon - fg.cell_deg / 2},
                  {"lon_max", ne.lon + fg.cell_deg / 2}};
    {
        const geo::FloodProximity near(b.planted_flood);
        std::vector<std::string> ids;
        for (const auto& s : sites)
            if (near.near({s.lat, s.lon}, geo::kDefaultFloodDistanceM)) ids.push_back(s.bts_id);
        m["towers_near_flood"] = ids;
    }
    Json homes = Json::object();
    for (std::size_t i = 0; i < names.size(); ++i) homes[names[i]] = home_region_count[i];
    m["phones_per_home_region"] = homes;
    m["n_records"] = b.records.size();
    m["files"] = {{"cdr", "cdr.csv"},           {"bts", "bts.csv"},
                  {"regions", "regions.geojson"}, {"census", "census.csv"},
                  {"affected", "affected.csv"},   {"rain_index", "rain/index.csv"},
                  {"flood_pre", "flood_pre.asc"}, {"flood_post", "flood_post.asc"},
                  {"truth_counts", "truth_counts.csv"}};
    b.manifest = m.dump(2) + "\n";
    return b;
}

void write_bundle(const Bundle& b, const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    fs::create_directories(root / "rain");
    const auto put = [&](const fs::path& rel, std::string_view content) { write_file((root / rel).string(), content); };
    put("cdr.csv", cdr::export_cdr(b.records));
    put("bts.csv", cdr::export_bts_registry(b.registry));
    put("regions.geojson", geo::export_regions_geojson(b.regions));
    put("census.csv", hat::export_census_csv(b.census));
    put("affected.csv", impact::export_affected_csv(b.affected));
    std::vector<std::string> paths;
    for (std::size_t f = 0; f < b.rain.frames.size(); ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.asc", f);
        paths.emplace_back(name);
        put(fs::path("rain") / name, raster::format_ascii_grid({b.rain.geom, b.rain.frames[f]}));
    }
    put("rain/index.csv", rain::format_rain_index(b.rain.instants, paths));
    put("flood_pre.asc", raster::format_ascii_grid(b.flood_pre));
    put("flood_post.asc", raster::format_ascii_grid(b.flood_post));
    put("truth_counts.csv", activity::export_activity_csv(b.truth_counts));
    put("config.json", config_to_json(b.config));
    put("manifest.json", b.manifest);
}

} // namespace floodlens::synth
