#include <doctest.h>

#include "floodlens/cdr_ingest.hpp"
#include "floodlens/parallel.hpp"
#include "helpers.hpp"

#include <random>

using namespace floodlens;
using namespace floodlens::cdr;
using floodlens::testing::at;

TEST_CASE("a well-formed line maps field by field") {
    const auto r = parse_cdr_text("a1,b2,2009-11-03T14:00:00Z,60,T001,T002\n");
    CHECK(r.diagnostics.empty());
    REQUIRE(r.records.size() == 1);
    const CdrRecord expect{"a1", "b2", at("2009-11-03T14:00:00Z"), 60, "T001", std::string("T002")};
    CHECK(r.records[0] == expect);
    CHECK(r.data_lines == 1);
}

TEST_CASE("malformed lines become diagnostics") {
    const auto r = parse_cdr_text("a1,b2,notadate,60,T001,T002\n");
    CHECK(r.records.empty());
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].message() == "line 1: bad timestamp");

    const std::string text = std::string(kCdrHeader) +
                             "\n"
                             "a,b,2009-11-03T14:00:00Z,60,T1,T2\n"
                             "a,b,2009-11-03T14:00:00Z,60,T1\n"
                             "# comment\n"
                             ",b,2009-11-03T14:00:00Z,60,T1,T2\n"
                             "a,b,2009-11-03T14:00:00Z,-1,T1,T2\n"
                             "a,b,2009-11-03T14:00:00Z,60,,T2\n"
                             "a,,2009-11-03T14:00:00Z,60,T1,T2\n"
                             "a,b,2009-11-03T14:00:00Z,60,T1,\n";
    const auto p = parse_cdr_text(text);
    REQUIRE(p.diagnostics.size() == 5);
    CHECK(p.diagnostics[0].message() == "line 3: expected 6 fields");
    CHECK(p.diagnostics[1].message() == "line 5: empty origin_id");
    CHECK(p.diagnostics[2].message() == "line 6: bad duration");
    CHECK(p.diagnostics[3].message() == "line 7: empty origin_bts");
    CHECK(p.diagnostics[4].message() == "line 8: empty dest_id");
    REQUIRE(p.records.size() == 2);
    CHECK_FALSE(p.records[1].dest_bts);
    // Nothing invented: records + diagnostics = data lines.
    CHECK(p.records.size() + p.diagnostics.size() == p.data_lines);
}

TEST_CASE("strict mode fails on the first malformed line") {
    CHECK_THROWS_WITH_AS(parse_cdr_text("a,b,c\n", {true}), "line 1: expected 6 fields", DataError);
}

TEST_CASE("export then parse is the identity on random records") {
    std::mt19937_64 rng(11);
    const auto recs = testing::random_records(rng, 3000, 50, {"T1", "T2", "T3"}, at("2009-10-01T00:00:00Z"), 40);
    const auto text = export_cdr(recs);
    const auto back = parse_cdr_text(text, {true});
    CHECK(back.records == recs);
    CHECK(export_cdr(back.records) == text);
}

TEST_CASE("parallel parse equals the serial reference") {
    std::mt19937_64 rng(5);
    auto recs = testing::random_records(rng, 40000, 300, {"T1", "T2", "T3", "T4"}, at("2009-10-01T00:00:00Z"), 60);
    std::string text = "# preamble\n\n" + export_cdr(recs);
    // Sprinkle malformed lines and CRLF endings.
    std::string mangled;
    std::size_t line = 0, pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto l = text.substr(pos, nl - pos);
        ++line;
        if (line % 997 == 0) l = "broken,line";
        if (line % 13 == 0) l += "\r";
        mangled += l + "\n";
        pos = nl + 1;
    }
    for (int workers : {1, 2, 3, 8}) {
        parallel::ScopedWorkers w(workers);
        const auto par = parse_cdr_text(mangled);
        const auto ser = serial::parse_cdr_text(mangled);
        CHECK(par.records == ser.records);
        CHECK(par.diagnostics == ser.diagnostics);
        CHECK(par.data_lines == ser.data_lines);
    }
    const auto ser = serial::parse_cdr_text(mangled);
    CHECK(ser.records.size() + ser.diagnostics.size() == ser.data_lines);
    CHECK(!ser.diagnostics.empty());
}

TEST_CASE("streaming parse sees the same records and diagnostics") {
    std::mt19937_64 rng(9);
    const auto recs = testing::random_records(rng, 20000, 100, {"T1", "T2"}, at("2009-10-01T00:00:00Z"), 10);
    std::string text = export_cdr(recs) + "bad line\n";
    const auto dir = testing::scratch_dir("stream");
    const auto path = (dir / "cdr.csv").string();
    write_file(path, text);
    std::vector<CdrRecord> streamed;
    std::vector<Diagnostic> diags;
    // A tiny block size forces many carried partial lines.
    const auto stats = stream_cdr_file(
        path, {}, [&](std::span<const CdrView> b) { for (const auto& v : b) streamed.push_back(v.to_record()); },
        [&](const Diagnostic& d) { diags.push_back(d); }, 4096);
    const auto whole = parse_cdr_text(text);
    CHECK(streamed == whole.records);
    CHECK(diags == whole.diagnostics);
    CHECK(stats.records == recs.size());
    CHECK(stats.data_lines == whole.data_lines);
    CHECK_THROWS_AS(stream_cdr_file((dir / "missing.csv").string(), {}, [](auto) {}), DataError);
    CHECK_THROWS_AS(parse_cdr_file((dir / "missing.csv").string()), DataError);
}

TEST_CASE("tower registry") {
    const auto reg = parse_bts_registry_text("bts_id,lat,lon\nT002,18.1,-93.1\nT001,17.98,-93.38\n");
    REQUIRE(reg.size() == 2);
    CHECK(reg.sites()[0] == BtsSite{"T001", 17.98, -93.38});
    CHECK(reg.index_of("T002") == 1);
    CHECK_FALSE(reg.index_of("T003"));
    CHECK_THROWS_WITH_AS(parse_bts_registry_text("T001,1,1\nT001,2,2\n"), doctest::Contains("T001"), DataError);
    CHECK_THROWS_AS(parse_bts_registry_text("T002,95.0,0.0\n"), DataError);
    CHECK_THROWS_AS(parse_bts_registry_text("T002,0.0,181\n"), DataError);
    CHECK_THROWS_AS(parse_bts_registry_text("T002,x,1\n"), DataError);
    CHECK(parse_bts_registry_text(export_bts_registry(reg)).sites() == reg.sites());
}

TEST_CASE("bounding-box filter") {
    const BtsRegistry reg({{"IN", 18.0, -93.0}, {"OUT", 20.0, -90.0}, {"OUT2", 21.0, -89.0}});
    const GeoBox box{17.5, 18.5, -93.5, -92.5};
    const CdrRecord inside{"a", "b", 0, 1, "IN", std::string("OUT")};
    const CdrRecord outside{"a", "b", 0, 1, "OUT", std::string("OUT2")};
    const CdrRecord unknown{"a", "b", 0, 1, "IN", std::string("NOPE")};
    const CdrRecord dest_in{"a", "b", 0, 1, "OUT", std::string("IN")};
    const std::vector<CdrRecord> recs{inside, outside, unknown, dest_in};
    const auto f = filter_bbox(recs, reg, box);
    // The unknown destination is reported, but the origin alone keeps the record.
    CHECK(f.kept == std::vector<CdrRecord>{inside, unknown, dest_in});
    CHECK(f.quarantined == std::vector<CdrRecord>{unknown});
    // Idempotent.
    CHECK(filter_bbox(f.kept, reg, box).kept == f.kept);
}

TEST_CASE("bounding-box filter matches a per-record brute-force check") {
    std::mt19937_64 rng(21);
    const GeoBox world{10, 25, -100, -85};
    const auto reg = testing::random_registry(rng, 30, world);
    std::vector<std::string> ids;
    for (const auto& s : reg.sites()) ids.push_back(s.bts_id);
    ids.push_back("GHOST");
    const auto recs = testing::random_records(rng, 5000, 40, ids, 0, 3);
    const GeoBox box{14, 20, -95, -90};
    const auto f = filter_bbox(recs, reg, box);

    std::vector<CdrRecord> kept, quarantined;
    for (const auto& r : recs) {
        const BtsSite* o = nullptr;
        const BtsSite* d = nullptr;
        for (const auto& s : reg.sites()) {
            if (s.bts_id == r.origin_bts) o = &s;
            if (r.dest_bts && s.bts_id == *r.dest_bts) d = &s;
        }
        if (!o || (r.dest_bts && !d)) quarantined.push_back(r);
        const auto in = [&](const BtsSite* s) {
            return s && s->lat >= box.lat_min && s->lat <= box.lat_max && s->lon >= box.lon_min && s->lon <= box.lon_max;
        };
        if (in(o) || in(d)) kept.push_back(r);
    }
    CHECK(f.kept == kept);
    CHECK(f.quarantined == quarantined);
}
