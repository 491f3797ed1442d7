#pragma once
// CDR log and tower registry ingestion.
//
// CDR CSV:      origin_id,dest_id,timestamp_utc,duration_s,origin_bts,dest_bts
// Registry CSV: bts_id,lat,lon
//
// Both formats are UTF-8 with LF endings; '#' lines and blank lines are
// ignored and the header line is optional.

#include "floodlens/common.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens::cdr {

inline constexpr std::string_view kCdrHeader = "origin_id,dest_id,timestamp_utc,duration_s,origin_bts,dest_bts";
inline constexpr std::string_view kBtsHeader = "bts_id,lat,lon";

struct CdrRecord {
    std::string origin_id;
    std::string dest_id;
    Instant timestamp = 0;
    std::int64_t duration_s = 0;
    std::string origin_bts;
    std::optional<std::string> dest_bts;

    bool operator==(const CdrRecord&) const = default;
};

// Non-owning view of one parsed line; an empty dest_bts means absent.
struct CdrView {
    std::string_view origin_id;
    std::string_view dest_id;
    Instant timestamp = 0;
    std::int64_t duration_s = 0;
    std::string_view origin_bts;
    std::string_view dest_bts;

    CdrRecord to_record() const;
};

struct BtsSite {
    std::string bts_id;
    double lat = 0;
    double lon = 0;

    bool operator==(const BtsSite&) const = default;
};

// Sites sorted by bts_id; ids unique, coordinates in range.
class BtsRegistry {
public:
    BtsRegistry() = default;
    explicit BtsRegistry(std::vector<BtsSite> sites);

    const std::vector<BtsSite>& sites() const { return sites_; }
    std::size_t size() const { return sites_.size(); }
    bool empty() const { return sites_.empty(); }
    std::optional<std::size_t> index_of(std::string_view bts_id) const;
    const BtsSite* find(std::string_view bts_id) const;

private:
    std::vector<BtsSite> sites_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

struct Diagnostic {
    std::size_t line = 0;  // 1-based physical line number
    std::string reason;

    std::string message() const { return "line " + std::to_string(line) + ": " + reason; }
    bool operator==(const Diagnostic&) const = default;
};

struct ParseOptions {
    bool strict = false;  // throw DataError on the first malformed line
};

struct ParseResult {
    std::vector<CdrRecord> records;
    std::vector<Diagnostic> diagnostics;
    std::size_t data_lines = 0;  // excludes header, comments and blank lines
};

// Parses one data line. Returns nullptr on success, else the failure reason.
const char* parse_cdr_line(std::string_view line, CdrView& out);

// Chunked OpenMP parse; output order and diagnostics match the serial parse.
ParseResult parse_cdr_text(std::string_view text, const ParseOptions& options = {});
ParseResult parse_cdr_file(const std::string& path, const ParseOptions& options = {});

namespace serial {
ParseResult parse_cdr_text(std::string_view text, const ParseOptions& options = {});
} // namespace serial

struct StreamStats {
    std::size_t data_lines = 0;
    std::size_t records = 0;
    std::size_t diagnostics = 0;
};

using BatchFn = std::function<void(std::span<const CdrView>)>;
using DiagnosticFn = std::function<void(const Diagnostic&)>;

// Block-wise streaming parse. Views passed to on_batch are valid only during
// the call. Memory use is bounded by block_bytes, independent of file size.
StreamStats stream_cdr_file(const std::string& path, const ParseOptions& options, const BatchFn& on_batch,
                            const DiagnosticFn& on_diagnostic = {}, std::size_t block_bytes = 16u << 20);

// Canonical form: header line, then one record per line, dest_bts empty when absent.
std::string export_cdr(std::span<const CdrRecord> records);
std::string format_cdr_line(const CdrRecord& r);

BtsRegistry parse_bts_registry_text(std::string_view text);
BtsRegistry parse_bts_registry(const std::string& path);
std::string export_bts_registry(const BtsRegistry& registry);

struct FilterResult {
    std::vector<CdrRecord> kept;
    // Records referencing at least one tower absent from the registry.
    std::vector<CdrRecord> quarantined;
};

// Keeps a record iff its origin_bts or dest_bts resolves to a site inside box.
FilterResult filter_bbox(std::span<const CdrRecord> records, const BtsRegistry& registry, const GeoBox& box);

std::string export_diagnostics(std::span<const Diagnostic> diagnostics);

} // namespace floodlens::cdr
