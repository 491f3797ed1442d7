#include "floodlens/home_antenna.hpp"

#include "floodlens/parallel.hpp"

#include <json.hpp>
#include <omp.h>

#include <cmath>
#include <unordered_map>

namespace floodlens::hat {

namespace {

struct Credit {
    std::string_view phone;
    std::string_view bts;
};

bool eligible(Instant t, const DayBucketing& bucketing, const NightWindow& night, const DayRange& bl) {
    return bl.contains(bucketing.day_of(t)) && night.contains(bucketing.local_hour(t));
}

// Most credited tower; the map iterates ids in order, so the first maximum is the smallest id.
template <class Counts>
std::string_view argmax_tower(const Counts& counts) {
    std::string_view best;
    std::int64_t best_n = -1;
    for (const auto& [bts, n] : counts)
        if (n > best_n) best = bts, best_n = n;
    return best;
}

void check_bl(const DayRange& bl) {
    if (bl.first > bl.last) throw DataError("baseline window is empty");
}

} // namespace

bool NightWindow::contains(int hour) const {
    if (start_hour <= end_hour) return hour >= start_hour && hour <= end_hour;
    return hour >= start_hour || hour <= end_hour;
}

void NightWindow::validate() const {
    if (start_hour < 0 || start_hour > 23 || end_hour < 0 || end_hour > 23)
        throw DataError("night window hours must lie in 0..23");
}

NightWindow parse_night_window(std::string_view s) {
    const auto f = split(s, '-');
    if (f.size() != 2) throw DataError("night window must look like 20-6");
    const auto a = parse_int(trim(f[0])), b = parse_int(trim(f[1]));
    if (!a || !b) throw DataError("night window must look like 20-6");
    NightWindow w{static_cast<int>(*a), static_cast<int>(*b)};
    w.validate();
    return w;
}

std::string format_night_window(const NightWindow& w) {
    return std::to_string(w.start_hour) + "-" + std::to_string(w.end_hour);
}

HatAssignment assign_hat(std::span<const cdr::CdrRecord> records, const DayBucketing& bucketing,
                         const NightWindow& night, const DayRange& bl_window) {
    check_bl(bl_window);
    night.validate();
    std::vector<Credit> credits;
    for (const auto& r : records) {
        if (!eligible(r.timestamp, bucketing, night, bl_window)) continue;
        credits.push_back({r.origin_id, r.origin_bts});
        if (r.dest_bts) credits.push_back({r.dest_id, *r.dest_bts});
    }

    // Each worker owns the phones hashing to its rank.
    const int workers = std::max(1, parallel::worker_count());
    std::vector<std::vector<std::pair<std::string_view, std::string_view>>> partial(static_cast<std::size_t>(workers));
#pragma omp parallel num_threads(workers)
    {
        const auto rank = static_cast<std::size_t>(omp_get_thread_num());
        const auto nthreads = static_cast<std::size_t>(omp_get_num_threads());
        std::unordered_map<std::string_view, std::map<std::string_view, std::int64_t>> counts;
        const std::hash<std::string_view> hash;
        for (const auto& c : credits)
            if (hash(c.phone) % nthreads == rank) ++counts[c.phone][c.bts];
        auto& out = partial[rank];
        for (const auto& [phone, towers] : counts) out.emplace_back(phone, argmax_tower(towers));
    }

    HatAssignment hat{{}, night, bl_window};
    for (const auto& part : partial)
        for (const auto& [phone, bts] : part) hat.phone_to_bts.emplace(phone, bts);
    return hat;
}

namespace serial {

HatAssignment assign_hat(std::span<const cdr::CdrRecord> records, const DayBucketing& bucketing,
                         const NightWindow& night, const DayRange& bl_window) {
    check_bl(bl_window);
    night.validate();
    std::map<std::string, std::map<std::string, std::int64_t>> counts;
    for (const auto& r : records) {
        if (!eligible(r.timestamp, bucketing, night, bl_window)) continue;
        ++counts[r.origin_id][r.origin_bts];
        if (r.dest_bts) ++counts[r.dest_id][*r.dest_bts];
    }
    HatAssignment hat{{}, night, bl_window};
    for (const auto& [phone, towers] : counts) hat.phone_to_bts.emplace(phone, std::string(argmax_tower(towers)));
    return hat;
}

} // namespace serial

HatAccumulator::HatAccumulator(DayBucketing bucketing, NightWindow night, DayRange bl_window)
    : bucketing_(bucketing), night_(night), bl_window_(bl_window) {
    check_bl(bl_window_);
    night_.validate();
}

void HatAccumulator::credit(std::string_view phone, std::string_view bts) {
    auto it = counts_.find(phone);
    if (it == counts_.end()) it = counts_.emplace(std::string(phone), std::map<std::string, std::int64_t, std::less<>>{}).first;
    auto jt = it->second.find(bts);
    if (jt == it->second.end()) jt = it->second.emplace(std::string(bts), 0).first;
    ++jt->second;
}

void HatAccumulator::add(const cdr::CdrView& r) {
    if (!eligible(r.timestamp, bucketing_, night_, bl_window_)) return;
    credit(r.origin_id, r.origin_bts);
    if (!r.dest_bts.empty()) credit(r.dest_id, r.dest_bts);
}

void HatAccumulator::add(std::span<const cdr::CdrView> records) {
    for (const auto& r : records) add(r);
}

HatAssignment HatAccumulator::finish() const {
    HatAssignment hat{{}, night_, bl_window_};
    for (const auto& [phone, towers] : counts_) hat.phone_to_bts.emplace(phone, std::string(argmax_tower(towers)));
    return hat;
}

PopulationEstimate estimate_population(const HatAssignment& hat, const cdr::BtsRegistry& registry,
                                       std::span<const geo::RegionPolygon> regions) {
    for (const auto& r : regions) {
        r.validate();
        if (r.region_id == kUnassigned) throw DataError("region_id \"unassigned\" is reserved");
    }
    // Region per registry site, resolved once.
    std::vector<std::optional<std::size_t>> site_region(registry.size());
    const auto& sites = registry.sites();
    const int workers = parallel::worker_count();
#pragma omp parallel for schedule(static) num_threads(workers)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(sites.size()); ++i) {
        const auto& s = sites[static_cast<std::size_t>(i)];
        site_region[static_cast<std::size_t>(i)] = geo::region_of({s.lat, s.lon}, regions);
    }

    PopulationEstimate out;
    for (const auto& r : regions) out.regions.push_back({r.region_id, 0, std::nullopt});
    for (const auto& [phone, bts] : hat.phone_to_bts) {
        const auto idx = registry.index_of(bts);
        const auto region = idx ? site_region[*idx] : std::nullopt;
        if (region)
            ++out.regions[*region].cdr_count;
        else
            ++out.unassigned;
    }
    return out;
}

std::vector<CensusRow> parse_census_csv(std::string_view text) {
    std::vector<CensusRow> rows;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line == "region_id,population") continue;
        const auto f = split(line, ',');
        const std::string where = "census line " + std::to_string(line_no) + ": ";
        if (f.size() != 2 || trim(f[0]).empty()) throw DataError(where + "expected region_id,population");
        const auto n = parse_int(trim(f[1]));
        if (!n || *n < 0) throw DataError(where + "population must be a non-negative integer");
        for (const auto& r : rows)
            if (r.region_id == trim(f[0])) throw DataError(where + "duplicate region_id " + r.region_id);
        rows.push_back({std::string(trim(f[0])), *n});
    }
    return rows;
}

std::string export_census_csv(std::span<const CensusRow> rows) {
    std::string out = "region_id,population\n";
    for (const auto& r : rows) out += r.region_id + "," + std::to_string(r.population) + "\n";
    return out;
}

std::vector<std::string> join_census(PopulationEstimate& pops, std::span<const CensusRow> census) {
    std::vector<std::string> unmatched;
    for (const auto& row : census) {
        bool found = false;
        for (auto& p : pops.regions)
            if (p.region_id == row.region_id) p.census_count = row.population, found = true;
        if (!found) unmatched.push_back(row.region_id);
    }
    return unmatched;
}

CensusFit compare_census(std::span<const RegionPopulation> pops) {
    std::vector<const RegionPopulation*> used;
    for (const auto& p : pops) {
        if (!p.census_count) continue;
        if (*p.census_count <= 0) throw DataError("census count must be positive for region " + p.region_id);
        used.push_back(&p);
    }
    if (used.size() < 3)
        throw DataError("census comparison needs at least 3 regions with both counts, got " + std::to_string(used.size()));

    const double n = static_cast<double>(used.size());
    double mx = 0, my = 0;
    for (const auto* p : used) mx += static_cast<double>(p->cdr_count), my += static_cast<double>(*p->census_count);
    mx /= n, my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto* p : used) {
        const double dx = static_cast<double>(p->cdr_count) - mx;
        const double dy = static_cast<double>(*p->census_count) - my;
        sxx += dx * dx, syy += dy * dy, sxy += dx * dy;
    }
    if (sxx == 0) throw DataError("zero variance in CDR region counts");
    if (syy == 0) throw DataError("zero variance in census region counts");

    CensusFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = (sxy * sxy) / (sxx * syy);

    double mean_ratio = 0;
    for (const auto* p : used) {
        const double ratio = static_cast<double>(p->cdr_count) / static_cast<double>(*p->census_count);
        fit.ratios.push_back({p->region_id, ratio});
        mean_ratio += ratio;
    }
    mean_ratio /= n;
    double var = 0;
    for (const auto& r : fit.ratios) var += (r.ratio - mean_ratio) * (r.ratio - mean_ratio);
    fit.ratio_cv = std::sqrt(var / n) / mean_ratio;
    return fit;
}

std::string export_hat_csv(const HatAssignment& hat) {
    std::string out = "phone_id,bts_id\n";
    for (const auto& [phone, bts] : hat.phone_to_bts) out += phone + "," + bts + "\n";
    return out;
}

HatAssignment parse_hat_csv(std::string_view text) {
    HatAssignment hat;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line == "phone_id,bts_id") continue;
        const auto f = split(line, ',');
        if (f.size() != 2 || f[0].empty() || f[1].empty())
            throw DataError("hat line " + std::to_string(line_no) + ": expected phone_id,bts_id");
        if (!hat.phone_to_bts.emplace(std::string(f[0]), std::string(f[1])).second)
            throw DataError("hat line " + std::to_string(line_no) + ": duplicate phone_id");
    }
    return hat;
}

std::string export_population_csv(const PopulationEstimate& pops) {
    std::string out = "region_id,cdr_count,census_count,ratio\n";
    for (const auto& p : pops.regions) {
        out += p.region_id + "," + std::to_string(p.cdr_count) + ",";
        if (p.census_count) {
            out += std::to_string(*p.census_count) + ",";
            if (*p.census_count > 0)
                out += format_fixed(static_cast<double>(p.cdr_count) / static_cast<double>(*p.census_count));
        } else {
            out += ",";
        }
        out += "\n";
    }
    out += std::string(kUnassigned) + "," + std::to_string(pops.unassigned) + ",,\n";
    return out;
}

std::string export_census_fit_json(const CensusFit& fit) {
    // Numbers go through format_fixed so the file does not depend on the json float printer.
    std::string out = "{\n";
    out += "  \"slope\": " + format_fixed(fit.slope) + ",\n";
    out += "  \"intercept\": " + format_fixed(fit.intercept) + ",\n";
    out += "  \"r_squared\": " + format_fixed(fit.r_squared) + ",\n";
    out += "  \"ratio_cv\": " + format_fixed(fit.ratio_cv) + ",\n";
    out += "  \"ratios\": [";
    for (std::size_t i = 0; i < fit.ratios.size(); ++i) {
        out += i ? ",\n    " : "\n    ";
        out += "{\"region_id\": " + nlohmann::json(fit.ratios[i].region_id).dump() +
               ", \"ratio\": " + format_fixed(fit.ratios[i].ratio) + "}";
    }
    out += fit.ratios.empty() ? "]\n}\n" : "\n  ]\n}\n";
    return out;
}

} // namespace floodlens::hat
