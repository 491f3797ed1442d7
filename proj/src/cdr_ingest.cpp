#include "floodlens/cdr_ingest.hpp"

#include "floodlens/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>

namespace floodlens::cdr {

namespace {

bool is_skippable(std::string_view line) { return line.empty() || line.front() == '#'; }

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

// Consumes leading blank/comment lines and an optional header line.
std::size_t skip_preamble(std::string_view text, std::string_view header, std::size_t& lines_consumed) {
    std::size_t pos = 0;
    lines_consumed = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        const auto line = strip_cr(text.substr(pos, end - pos));
        const std::size_t next = nl == std::string_view::npos ? text.size() : nl + 1;
        if (is_skippable(line)) {
            ++lines_consumed;
            pos = next;
            continue;
        }
        if (line == header) {
            ++lines_consumed;
            return next;
        }
        return pos;
    }
    return pos;
}

struct RegionResult {
    std::vector<CdrView> views;
    std::vector<Diagnostic> diagnostics;
    std::size_t lines = 0;
    std::size_t data_lines = 0;
};

// Parses [begin, end) of text; diagnostics carry line numbers relative to the region.
RegionResult parse_region(std::string_view region) {
    RegionResult out;
    std::size_t pos = 0;
    while (pos < region.size()) {
        const auto nl = region.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? region.size() : nl;
        const auto line = strip_cr(region.substr(pos, end - pos));
        ++out.lines;
        if (!is_skippable(line)) {
            ++out.data_lines;
            CdrView view;
            if (const char* reason = parse_cdr_line(line, view))
                out.diagnostics.push_back({out.lines, reason});
            else
                out.views.push_back(view);
        }
        pos = nl == std::string_view::npos ? region.size() : nl + 1;
    }
    return out;
}

// Splits text into at most n pieces ending on line boundaries.
std::vector<std::string_view> split_on_lines(std::string_view text, std::size_t n) {
    std::vector<std::string_view> pieces;
    if (text.empty()) return pieces;
    n = std::max<std::size_t>(1, std::min(n, text.size()));
    const std::size_t target = text.size() / n;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < n && begin < text.size(); ++i) {
        std::size_t end = text.size();
        if (i + 1 < n) {
            const std::size_t probe = std::max(begin, (i + 1) * target);
            const auto nl = text.find('\n', probe);
            end = nl == std::string_view::npos ? text.size() : nl + 1;
        }
        pieces.push_back(text.substr(begin, end - begin));
        begin = end;
    }
    if (begin < text.size()) pieces.push_back(text.substr(begin));
    return pieces;
}

// Parses a body region, in parallel when workers > 1, renumbering diagnostics
// to absolute lines starting after line_base.
RegionResult parse_body(std::string_view body, std::size_t line_base, bool parallel_parse) {
    const int workers = parallel_parse ? parallel::worker_count() : 1;
    const std::size_t min_piece = 1u << 16;
    const std::size_t n_pieces =
        workers <= 1 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(workers) * 4, body.size() / min_piece + 1);
    const auto pieces = split_on_lines(body, n_pieces);
    std::vector<RegionResult> parts(pieces.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) if (pieces.size() > 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pieces.size()); ++i)
        parts[static_cast<std::size_t>(i)] = parse_region(pieces[static_cast<std::size_t>(i)]);

    RegionResult merged;
    std::size_t total_views = 0;
    for (const auto& p : parts) total_views += p.views.size();
    merged.views.reserve(total_views);
    std::size_t offset = line_base;
    for (auto& p : parts) {
        merged.views.insert(merged.views.end(), p.views.begin(), p.views.end());
        for (auto& d : p.diagnostics) merged.diagnostics.push_back({d.line + offset, std::move(d.reason)});
        offset += p.lines;
        merged.lines += p.lines;
        merged.data_lines += p.data_lines;
    }
    return merged;
}

ParseResult materialize(const RegionResult& region, const ParseOptions& options, bool parallel_convert) {
    if (options.strict && !region.diagnostics.empty())
        throw DataError(region.diagnostics.front().message());
    ParseResult result;
    result.records.resize(region.views.size());
    const int workers = parallel_convert ? parallel::worker_count() : 1;
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(region.views.size()); ++i)
        result.records[static_cast<std::size_t>(i)] = region.views[static_cast<std::size_t>(i)].to_record();
    result.diagnostics = region.diagnostics;
    result.data_lines = region.data_lines;
    return result;
}

ParseResult parse_text_impl(std::string_view text, const ParseOptions& options, bool parallel_parse) {
    std::size_t consumed = 0;
    const std::size_t body_start = skip_preamble(text, kCdrHeader, consumed);
    const auto region = parse_body(text.substr(body_start), consumed, parallel_parse);
    return materialize(region, options, parallel_parse);
}

} // namespace

CdrRecord CdrView::to_record() const {
    CdrRecord r;
    r.origin_id = origin_id;
    r.dest_id = dest_id;
    r.timestamp = timestamp;
    r.duration_s = duration_s;
    r.origin_bts = origin_bts;
    if (!dest_bts.empty()) r.dest_bts = std::string(dest_bts);
    return r;
}

BtsRegistry::BtsRegistry(std::vector<BtsSite> sites) : sites_(std::move(sites)) {
    std::sort(sites_.begin(), sites_.end(), [](const BtsSite& a, const BtsSite& b) { return a.bts_id < b.bts_id; });
    for (std::size_t i = 0; i < sites_.size(); ++i) {
        const auto& s = sites_[i];
        if (s.bts_id.empty()) throw DataError("empty bts_id in registry");
        if (i > 0 && sites_[i - 1].bts_id == s.bts_id) throw DataError("duplicate bts_id " + s.bts_id);
        if (!(s.lat >= -90.0 && s.lat <= 90.0)) throw DataError("latitude out of range for " + s.bts_id);
        if (!(s.lon >= -180.0 && s.lon <= 180.0)) throw DataError("longitude out of range for " + s.bts_id);
        index_.emplace(s.bts_id, i);
    }
}

std::optional<std::size_t> BtsRegistry::index_of(std::string_view bts_id) const {
    const auto it = index_.find(bts_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const BtsSite* BtsRegistry::find(std::string_view bts_id) const {
    const auto idx = index_of(bts_id);
    return idx ? &sites_[*idx] : nullptr;
}

const char* parse_cdr_line(std::string_view line, CdrView& out) {
    std::string_view fields[6];
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        const auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        if (count < 6) fields[count] = field;
        ++count;
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (count != 6) return "expected 6 fields";
    if (fields[0].empty()) return "empty origin_id";
    if (fields[1].empty()) return "empty dest_id";
    const auto ts = parse_instant(fields[2]);
    if (!ts) return "bad timestamp";
    const auto dur = fields[3];
    if (dur.empty() || dur.front() < '0' || dur.front() > '9') return "bad duration";
    std::int64_t duration = 0;
    const auto res = std::from_chars(dur.data(), dur.data() + dur.size(), duration);
    if (res.ec != std::errc{} || res.ptr != dur.data() + dur.size()) return "bad duration";
    if (fields[4].empty()) return "empty origin_bts";

    out.origin_id = fields[0];
    out.dest_id = fields[1];
    out.timestamp = *ts;
    out.duration_s = duration;
    out.origin_bts = fields[4];
    out.dest_bts = fields[5];
    return nullptr;
}

ParseResult parse_cdr_text(std::string_view text, const ParseOptions& options) {
    return parse_text_impl(text, options, true);
}

ParseResult parse_cdr_file(const std::string& path, const ParseOptions& options) {
    const std::string text = read_file(path);
    return parse_cdr_text(text, options);
}

namespace serial {

ParseResult parse_cdr_text(std::string_view text, const ParseOptions& options) {
    ParseResult result;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool seen_data = false;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        const auto line = strip_cr(text.substr(pos, end - pos));
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (is_skippable(line)) continue;
        if (!seen_data) {
            seen_data = true;
            if (line == kCdrHeader) continue;
        }
        ++result.data_lines;
        CdrView view;
        if (const char* reason = parse_cdr_line(line, view)) {
            Diagnostic d{line_no, reason};
            if (options.strict) throw DataError(d.message());
            result.diagnostics.push_back(std::move(d));
        } else {
            result.records.push_back(view.to_record());
        }
    }
    return result;
}

} // namespace serial

StreamStats stream_cdr_file(const std::string& path, const ParseOptions& options, const BatchFn& on_batch,
                            const DiagnosticFn& on_diagnostic, std::size_t block_bytes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    block_bytes = std::max<std::size_t>(block_bytes, 1024);

    StreamStats stats;
    std::string buffer;
    std::size_t carry = 0;  // bytes of an unfinished line kept at buffer start
    std::size_t line_base = 0;
    bool first_block = true;
    bool eof = false;

    auto process = [&](std::string_view region) {
        std::size_t start = 0;
        if (first_block) {
            std::size_t consumed = 0;
            start = skip_preamble(region, kCdrHeader, consumed);
            line_base += consumed;
            first_block = false;
        }
        const auto body = region.substr(start);
        auto parsed = parse_body(body, line_base, true);
        line_base += parsed.lines;
        stats.data_lines += parsed.data_lines;
        stats.records += parsed.views.size();
        stats.diagnostics += parsed.diagnostics.size();
        if (options.strict && !parsed.diagnostics.empty()) throw DataError(parsed.diagnostics.front().message());
        if (on_diagnostic)
            for (const auto& d : parsed.diagnostics) on_diagnostic(d);
        if (!parsed.views.empty()) on_batch(parsed.views);
    };

    while (!eof) {
        buffer.resize(carry + block_bytes);
        in.read(buffer.data() + carry, static_cast<std::streamsize>(block_bytes));
        const std::size_t got = static_cast<std::size_t>(in.gcount());
        buffer.resize(carry + got);
        eof = got < block_bytes;
        if (in.bad()) throw DataError("read failed for " + path);

        const std::string_view view(buffer);
        std::size_t cut = view.size();
        if (!eof) {
            const auto last_nl = view.rfind('\n');
            if (last_nl == std::string_view::npos) {
                carry = buffer.size();  // a single line longer than the block; keep reading
                continue;
            }
            cut = last_nl + 1;
        }
        process(view.substr(0, cut));
        const std::size_t rest = view.size() - cut;
        std::memmove(buffer.data(), buffer.data() + cut, rest);
        carry = rest;
    }
    return stats;
}

std::string format_cdr_line(const CdrRecord& r) {
    std::string line;
    line.reserve(r.origin_id.size() + r.dest_id.size() + r.origin_bts.size() + 48);
    line += r.origin_id;
    line += ',';
    line += r.dest_id;
    line += ',';
    line += format_instant(r.timestamp);
    line += ',';
    line += std::to_string(r.duration_s);
    line += ',';
    line += r.origin_bts;
    line += ',';
    if (r.dest_bts) line += *r.dest_bts;
    return line;
}

std::string export_cdr(std::span<const CdrRecord> records) {
    std::string out(kCdrHeader);
    out += '\n';
    for (const auto& r : records) {
        out += format_cdr_line(r);
        out += '\n';
    }
    return out;
}

BtsRegistry parse_bts_registry_text(std::string_view text) {
    std::vector<BtsSite> sites;
    std::map<std::string, std::size_t, std::less<>> seen;
    std::size_t line_no = 0;
    bool seen_data = false;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = strip_cr(raw);
        if (is_skippable(line)) continue;
        if (!seen_data) {
            seen_data = true;
            if (line == kBtsHeader) continue;
        }
        const auto fields = split(line, ',');
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (fields.size() != 3) throw DataError(where + "expected 3 fields");
        const auto id = trim(fields[0]);
        const auto lat = parse_double(trim(fields[1]));
        const auto lon = parse_double(trim(fields[2]));
        if (id.empty()) throw DataError(where + "empty bts_id");
        if (!lat || !lon) throw DataError(where + "bad coordinate");
        if (*lat < -90.0 || *lat > 90.0) throw DataError(where + "latitude out of range for " + std::string(id));
        if (*lon < -180.0 || *lon > 180.0) throw DataError(where + "longitude out of range for " + std::string(id));
        if (!seen.emplace(std::string(id), line_no).second)
            throw DataError(where + "duplicate bts_id " + std::string(id));
        sites.push_back({std::string(id), *lat, *lon});
    }
    return BtsRegistry(std::move(sites));
}

BtsRegistry parse_bts_registry(const std::string& path) { return parse_bts_registry_text(read_file(path)); }

std::string export_bts_registry(const BtsRegistry& registry) {
    std::string out(kBtsHeader);
    out += '\n';
    for (const auto& s : registry.sites()) out += s.bts_id + "," + format_fixed(s.lat) + "," + format_fixed(s.lon) + "\n";
    return out;
}

FilterResult filter_bbox(std::span<const CdrRecord> records, const BtsRegistry& registry, const GeoBox& box) {
    box.validate();
    FilterResult out;
    for (const auto& r : records) {
        const BtsSite* origin = registry.find(r.origin_bts);
        const BtsSite* dest = r.dest_bts ? registry.find(*r.dest_bts) : nullptr;
        const bool unknown = origin == nullptr || (r.dest_bts && dest == nullptr);
        if (unknown) out.quarantined.push_back(r);
        const bool keep = (origin && box.contains(origin->lat, origin->lon)) || (dest && box.contains(dest->lat, dest->lon));
        if (keep) out.kept.push_back(r);
    }
    return out;
}

std::string export_diagnostics(std::span<const Diagnostic> diagnostics) {
    std::string out = "line,reason\n";
    for (const auto& d : diagnostics) out += std::to_string(d.line) + "," + d.reason + "\n";
    return out;
}

} // namespace floodlens::cdr
