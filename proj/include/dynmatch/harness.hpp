#pragma once

#include <iosfwd>
#include <string>

#include "dynmatch/dynamic.hpp"

namespace dynmatch::harness {

enum class RunMode { Static, DynamicBasic, DynamicAdvanced };

struct WorkloadConfig {
    RunMode mode = RunMode::DynamicBasic;
    Coord p = 8;
    Coord universe = Coord{1} << 20;
    std::uint64_t seed = 0;
    std::size_t window = 0;
    std::string out;
    bool audit = false;
};

struct SeriesRecord {
    std::int64_t step = 0;
    std::int64_t n = 0;
    double cost = 0.0;
    double wasserstein = 0.0;
    double updateMicros = 0.0;
    std::int64_t recourseEdges = 0;  // advanced mode only
};

/// i.i.d. integer coordinates uniform on [1, 500].
std::vector<Point> gen_uniform(std::size_t n, std::uint64_t seed);

/// Per-axis round(500 * N(0.5, 0.25)), clamped into [0, universe/2).
std::vector<Point> gen_gaussian(std::size_t n, std::uint64_t seed,
                                Coord universe = Coord{1} << 20);

/// Column mapping + numeric filters for generic trip-record CSVs. Rows
/// failing a filter are dropped; rows that do not parse are counted.
struct CsvFilter {
    int colAx = 0, colAy = 1;  // first point (e.g. pickup lon, lat)
    int colBx = 2, colBy = 3;  // second point (e.g. dropoff lon, lat)
    bool hasHeader = false;
    struct Range {
        int column = 0;
        double lo = 0.0, hi = 0.0;  // inclusive
    };
    std::vector<Range> ranges;
    // Affine map into the integer universe: u = round((v - offset) * scale).
    double xOffset = 0.0, xScale = 1.0;
    double yOffset = 0.0, yScale = 1.0;
};

struct CsvLoad {
    std::vector<Point> a, b;
    std::size_t skipped = 0;
    // The mapping actually applied, echoed into report headers so costs can
    // be converted back to source units.
    double xOffset = 0.0, xScale = 1.0, yOffset = 0.0, yScale = 1.0;
};

CsvLoad load_points_csv(const std::string& path, const CsvFilter& filter);

/// Plain point file: `x,y` rows, or `x,y,color` with color in {R, B}.
struct PointFile {
    std::vector<Point> reds, blues;
    std::vector<Point> uncolored;  // rows without a color column
    std::size_t skipped = 0;
};
PointFile read_point_csv(const std::string& path);

/// Sliding-window workload: step t <= W inserts pair t; afterwards each step
/// additionally deletes the oldest live pair. Stops early (partial series)
/// when a stream runs out.
std::vector<SeriesRecord> run_drift(const std::vector<Point>& streamA,
                                    const std::vector<Point>& streamB, std::size_t window,
                                    const WorkloadConfig& cfg);

struct BenchRow {
    std::size_t n = 0;
    double perUpdateMicros = 0.0;
    double staticRecomputeMicros = 0.0;
    double speedup = 0.0;
    double dynamicCost = 0.0;
    double staticCost = 0.0;
};

/// For each size: build an instance, time M=100 pair-inserts (after 10
/// discarded warm-up updates) against one static rebuild of the same final
/// point set, and cross-check the two costs.
std::vector<BenchRow> bench_speedup(const std::vector<std::size_t>& sizes, Coord p,
                                    const WorkloadConfig& cfg);

/// Alternating unit-spaced line on the x-axis: A = {-n, -n+2, ...},
/// B = {-n+1, -n+3, ...}, plus n pair-inserts extending both ends while
/// keeping the colors alternating. Coordinates are translated into the raw
/// domain [0, universe/2).
struct HardnessInstance {
    std::vector<Point> reds, blues;                    // initial 2n points
    std::vector<std::pair<Point, Point>> extensions;   // (red, blue) inserts
    Coord offset = 0;                                  // applied translation
};
HardnessInstance gen_hardness_line(std::int64_t n, Coord universe = Coord{1} << 20);

/// Optimal matching of an alternating unit line: sort by x, pair adjacent
/// points. Every edge has unit length, so the cost equals the pair count and
/// no perfect matching can do better.
std::vector<std::pair<Point, Point>> line_optimal_matching(std::vector<Point> reds,
                                                           std::vector<Point> blues);

void emit_report(const std::vector<SeriesRecord>& series, std::ostream& os);
void emit_report(const std::vector<SeriesRecord>& series, const std::string& path);
std::vector<SeriesRecord> parse_report(std::istream& is);

}  // namespace dynmatch::harness
