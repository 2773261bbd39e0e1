#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dynmatch/harness.hpp"
#include "dynmatch/solvers.hpp"

using namespace dynmatch;
using namespace dynmatch::harness;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content) {
        path = "/tmp/dynmatch_test_" + name;
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("uniform generator range and determinism") {
    CHECK(gen_uniform(0, 1).empty());
    const auto a = gen_uniform(500, 99);
    const auto b = gen_uniform(500, 99);
    CHECK(a == b);
    for (const Point& p : a) {
        CHECK(p.x >= 1);
        CHECK(p.x <= 500);
        CHECK(p.y >= 1);
        CHECK(p.y <= 500);
    }
    CHECK(gen_uniform(500, 100) != a);
}

TEST_CASE("gaussian generator statistics") {
    const std::size_t n = 100000;
    const auto pts = gen_gaussian(n, 7);
    CHECK(pts == gen_gaussian(n, 7));
    double sum = 0.0;
    for (const Point& p : pts) sum += static_cast<double>(p.x);
    const double mean = sum / static_cast<double>(n);
    CHECK(mean > 245.0);
    CHECK(mean < 255.0);
    double var = 0.0;
    for (const Point& p : pts) var += (p.x - mean) * (p.x - mean);
    const double stddev = std::sqrt(var / static_cast<double>(n));
    CHECK(stddev > 120.0);
    CHECK(stddev < 130.0);
    for (const Point& p : pts) {
        CHECK(p.x >= 0);
        CHECK(p.x < (Coord{1} << 19));
    }
}

TEST_CASE("report emission and round trip") {
    std::vector<SeriesRecord> series;
    series.push_back({1, 1, 12.5, 12.5, 3.25, 4});
    series.push_back({2, 2, 20.0, 10.0, 1.5, 0});
    std::stringstream ss;
    emit_report(series, ss);
    const std::string text = ss.str();
    CHECK(text.substr(0, text.find('\n')) == "step,n,cost,wasserstein,update_us,recourse");

    std::stringstream back(text);
    const auto parsed = parse_report(back);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].cost == doctest::Approx(12.5));
    CHECK(parsed[1].wasserstein == doctest::Approx(10.0));
    CHECK(parsed[0].recourseEdges == 4);

    std::stringstream empty;
    emit_report({}, empty);
    CHECK(empty.str() == "step,n,cost,wasserstein,update_us,recourse\n");
}

TEST_CASE("point csv reader handles colors and bad rows") {
    const TempFile f("points.csv",
                     "10,20,R\n"
                     "30,40,B\n"
                     "oops,1,R\n"
                     "50,60,R\n");
    const PointFile pf = read_point_csv(f.path);
    CHECK(pf.reds.size() == 2);
    CHECK(pf.blues.size() == 1);
    CHECK(pf.skipped == 1);
    CHECK(pf.reds[0] == Point{10, 20});

    const TempFile plain("plain.csv", "1,2\n3,4\n");
    const PointFile pp = read_point_csv(plain.path);
    CHECK(pp.uncolored.size() == 2);
    CHECK(pp.skipped == 0);

    CHECK_THROWS_AS(read_point_csv("/nonexistent/file.csv"), Error);
}

TEST_CASE("filtered csv ingestion") {
    const TempFile f("trips.csv",
                     "plon,plat,dlon,dlat,mph\n"
                     "-74.0,40.7,-73.9,40.8,30\n"
                     "-74.0,40.7,-73.9,40.8,150\n"   // too fast
                     "-80.0,40.7,-73.9,40.8,30\n"    // out of the box
                     "x,y,z,w,v\n");                 // malformed
    CsvFilter filter;
    filter.hasHeader = true;
    filter.ranges = {{0, -74.5, -73.5}, {2, -74.5, -73.5}, {4, 0.0, 110.0}};
    filter.xOffset = -74.5;
    filter.xScale = 1000.0;
    filter.yOffset = 40.0;
    filter.yScale = 1000.0;
    const CsvLoad load = load_points_csv(f.path, filter);
    REQUIRE(load.a.size() == 1);
    REQUIRE(load.b.size() == 1);
    CHECK(load.skipped == 1);
    CHECK(load.a[0] == Point{500, 700});
    CHECK(load.b[0] == Point{600, 800});
    CHECK(load.xScale == 1000.0);

    const TempFile empty("empty.csv", "");
    const CsvLoad none = load_points_csv(empty.path, CsvFilter{});
    CHECK(none.a.empty());
    CHECK(none.b.empty());
    CHECK(none.skipped == 0);
}

TEST_CASE("drift over identical streams reports zero wasserstein") {
    const auto pts = gen_uniform(60, 5);
    WorkloadConfig cfg;
    cfg.mode = RunMode::DynamicBasic;
    cfg.p = 4;
    const auto series = run_drift(pts, pts, 20, cfg);
    REQUIRE(series.size() == 60);
    for (const SeriesRecord& r : series) {
        CHECK(r.cost == doctest::Approx(0.0));
        CHECK(r.wasserstein == doctest::Approx(0.0));
    }
}

TEST_CASE("drift window caps the live pair count") {
    const auto a = gen_uniform(50, 1);
    const auto b = gen_uniform(50, 2);
    WorkloadConfig cfg;
    cfg.mode = RunMode::DynamicAdvanced;
    cfg.p = 2;
    const auto series = run_drift(a, b, 15, cfg);
    REQUIRE(series.size() == 50);
    for (std::size_t t = 0; t < series.size(); ++t) {
        CHECK(series[t].step == (std::int64_t)t + 1);
        CHECK(series[t].n == std::min<std::int64_t>((std::int64_t)t + 1, 15));
    }
    // W >= stream length degenerates to insert-only.
    const auto insertOnly = run_drift(a, b, 100, cfg);
    CHECK(insertOnly.back().n == 50);
}

TEST_CASE("drift matches the static reference mode") {
    const auto a = gen_uniform(30, 3);
    const auto b = gen_gaussian(30, 4);
    WorkloadConfig dynCfg;
    dynCfg.mode = RunMode::DynamicBasic;
    dynCfg.p = 4;
    WorkloadConfig statCfg = dynCfg;
    statCfg.mode = RunMode::Static;
    const auto dynSeries = run_drift(a, b, 10, dynCfg);
    const auto statSeries = run_drift(a, b, 10, statCfg);
    REQUIRE(dynSeries.size() == statSeries.size());
    for (std::size_t t = 0; t < dynSeries.size(); ++t)
        CHECK(dynSeries[t].cost ==
              doctest::Approx(statSeries[t].cost).epsilon(1e-9));
}

TEST_CASE("bench smoke run checks its own costs") {
    WorkloadConfig cfg;
    cfg.mode = RunMode::DynamicBasic;
    cfg.p = 4;
    const auto rows = bench_speedup({200}, 4, cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].n == 200);
    CHECK(rows[0].perUpdateMicros > 0.0);
    CHECK(rows[0].staticRecomputeMicros > 0.0);
    CHECK(rows[0].dynamicCost == doctest::Approx(rows[0].staticCost).epsilon(1e-6));
}

TEST_CASE("hardness line construction") {
    const HardnessInstance inst = gen_hardness_line(4);
    REQUIRE(inst.reds.size() == 4);
    REQUIRE(inst.blues.size() == 4);
    // Alternating along x with unit gaps, reds on even offsets.
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(inst.reds[i].x == inst.offset - 4 + 2 * (Coord)i);
        CHECK(inst.blues[i].x == inst.offset - 3 + 2 * (Coord)i);
    }
    REQUIRE(inst.extensions.size() == 4);
    // First extension: red on the right end, blue on the left end.
    CHECK(inst.extensions[0].first.x == inst.offset + 4);
    CHECK(inst.extensions[0].second.x == inst.offset - 5);
    CHECK(inst.extensions[1].first.x == inst.offset - 6);
    CHECK(inst.extensions[1].second.x == inst.offset + 5);

    CHECK_THROWS_AS(gen_hardness_line(1), Error);
    CHECK_THROWS_AS(gen_hardness_line(1 << 20), Error);
}

TEST_CASE("line optimal matching is exact") {
    for (std::int64_t n : {2, 4, 6}) {
        HardnessInstance inst = gen_hardness_line(n);
        std::vector<Point> reds = inst.reds, blues = inst.blues;
        for (const auto& [r, b] : inst.extensions) {
            const auto pairs = line_optimal_matching(reds, blues);
            // Closed form: every adjacent pair at unit distance.
            CHECK(pairs.size() == reds.size());
            double cost = 0.0;
            for (const auto& [r2, b2] : pairs) cost += distance(r2, b2);
            CHECK(cost == doctest::Approx((double)pairs.size()));

            // Cross-check against the exact solver while it is cheap.
            if (reds.size() <= 7) {
                std::vector<PointRecord> rr, bb;
                PointId id = 0;
                for (const Point& p : reds) rr.push_back({id++, p, p, Color::Red});
                for (const Point& p : blues) bb.push_back({id++, p, p, Color::Blue});
                CHECK(hungarian(rr, bb).cost == doctest::Approx(cost).epsilon(1e-9));
            }
            reds.push_back(r);
            blues.push_back(b);
        }
    }
}
