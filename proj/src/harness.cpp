#include "dynmatch/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace dynmatch::harness {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(s, &used);
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) used++;
        return used == s.size();
    } catch (...) {
        return false;
    }
}

}  // namespace

std::vector<Point> gen_uniform(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Coord> dist(1, 500);
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Coord x = dist(rng);
        const Coord y = dist(rng);
        out.push_back({x, y});
    }
    return out;
}

std::vector<Point> gen_gaussian(std::size_t n, std::uint64_t seed, Coord universe) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.5, 0.25);
    const Coord hi = universe / 2 - 1;
    std::vector<Point> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Coord x = std::clamp<Coord>(std::llround(500.0 * dist(rng)), 0, hi);
        const Coord y = std::clamp<Coord>(std::llround(500.0 * dist(rng)), 0, hi);
        out.push_back({x, y});
    }
    return out;
}

CsvLoad load_points_csv(const std::string& path, const CsvFilter& filter) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    CsvLoad out;
    out.xOffset = filter.xOffset;
    out.xScale = filter.xScale;
    out.yOffset = filter.yOffset;
    out.yScale = filter.yScale;

    const auto mapX = [&](double v) {
        return static_cast<Coord>(std::llround((v - filter.xOffset) * filter.xScale));
    };
    const auto mapY = [&](double v) {
        return static_cast<Coord>(std::llround((v - filter.yOffset) * filter.yScale));
    };

    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && filter.hasHeader) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv(line);
        const int needed =
            std::max({filter.colAx, filter.colAy, filter.colBx, filter.colBy});
        if (static_cast<int>(fields.size()) <= needed) {
            out.skipped++;
            continue;
        }
        std::vector<double> vals(fields.size());
        bool ok = true;
        for (std::size_t i = 0; i < fields.size() && ok; ++i)
            if (!parse_double(fields[i], vals[i])) ok = false;
        if (!ok) {
            out.skipped++;
            continue;
        }
        bool pass = true;
        for (const CsvFilter::Range& r : filter.ranges) {
            if (r.column < 0 || r.column >= static_cast<int>(vals.size()) ||
                vals[r.column] < r.lo || vals[r.column] > r.hi) {
                pass = false;
                break;
            }
        }
        if (!pass) continue;  // filtered, not malformed
        out.a.push_back({mapX(vals[filter.colAx]), mapY(vals[filter.colAy])});
        out.b.push_back({mapX(vals[filter.colBx]), mapY(vals[filter.colBy])});
    }
    return out;
}

PointFile read_point_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    PointFile out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv(line);
        double x = 0.0, y = 0.0;
        if (fields.size() < 2 || !parse_double(fields[0], x) || !parse_double(fields[1], y)) {
            out.skipped++;
            continue;
        }
        const Point p{static_cast<Coord>(std::llround(x)), static_cast<Coord>(std::llround(y))};
        if (fields.size() >= 3) {
            std::string c = fields[2];
            c.erase(std::remove_if(c.begin(), c.end(),
                                   [](unsigned char ch) { return std::isspace(ch); }),
                    c.end());
            if (c == "R") {
                out.reds.push_back(p);
            } else if (c == "B") {
                out.blues.push_back(p);
            } else {
                out.skipped++;
            }
        } else {
            out.uncolored.push_back(p);
        }
    }
    return out;
}

std::vector<SeriesRecord> run_drift(const std::vector<Point>& streamA,
                                    const std::vector<Point>& streamB, std::size_t window,
                                    const WorkloadConfig& cfg) {
    if (window < 1) throw Error("bad parameter", "window must be >= 1");
    const std::size_t steps = std::min(streamA.size(), streamB.size());
    std::vector<SeriesRecord> series;
    series.reserve(steps);

    MatchConfig mc{cfg.p, cfg.universe, cfg.seed};

    if (cfg.mode == RunMode::Static) {
        // Reference path: rebuild from scratch every step.
        std::deque<std::pair<Point, Point>> live;
        for (std::size_t t = 0; t < steps; ++t) {
            const auto t0 = Clock::now();
            live.emplace_back(streamA[t], streamB[t]);
            if (live.size() > window) live.pop_front();
            std::vector<Point> reds, blues;
            for (const auto& [a, b] : live) {
                reds.push_back(a);
                blues.push_back(b);
            }
            const StaticSolution sol = static_matching(reds, blues, mc);
            SeriesRecord rec;
            rec.step = static_cast<std::int64_t>(t + 1);
            rec.n = static_cast<std::int64_t>(live.size());
            rec.cost = sol.cost;
            rec.wasserstein = sol.cost / static_cast<double>(live.size());
            rec.updateMicros = micros_since(t0);
            series.push_back(rec);
        }
        return series;
    }

    const auto mode = cfg.mode == RunMode::DynamicAdvanced ? DynamicMatcher::Mode::Advanced
                                                           : DynamicMatcher::Mode::Basic;
    DynamicMatcher m(mc, mode);
    m.set_audit(cfg.audit);
    std::deque<std::pair<PointId, PointId>> live;
    for (std::size_t t = 0; t < steps; ++t) {
        const auto t0 = Clock::now();
        std::int64_t recourse = 0;
        const DynamicMatcher::UpdateReport ins = m.insert_pair(streamA[t], streamB[t]);
        recourse += ins.recourseAdded + ins.recourseRemoved;
        live.emplace_back(ins.idA, ins.idB);
        if (live.size() > window) {
            const auto [idA, idB] = live.front();
            live.pop_front();
            const DynamicMatcher::UpdateReport del = m.delete_pair(idA, idB);
            recourse += del.recourseAdded + del.recourseRemoved;
        }
        SeriesRecord rec;
        rec.step = static_cast<std::int64_t>(t + 1);
        rec.n = static_cast<std::int64_t>(m.pairs());
        rec.cost = m.query_cost();
        rec.wasserstein = m.wasserstein_estimate();
        rec.updateMicros = micros_since(t0);
        rec.recourseEdges = mode == DynamicMatcher::Mode::Advanced ? recourse : 0;
        series.push_back(rec);
    }
    return series;
}

std::vector<BenchRow> bench_speedup(const std::vector<std::size_t>& sizes, Coord p,
                                    const WorkloadConfig& cfg) {
    constexpr std::size_t kWarmup = 10;
    constexpr std::size_t kTimed = 100;
    std::vector<BenchRow> rows;
    for (std::size_t n : sizes) {
        MatchConfig mc{p, cfg.universe, cfg.seed};
        const std::vector<Point> reds = gen_uniform(n, cfg.seed * 2 + 1);
        const std::vector<Point> blues = gen_uniform(n, cfg.seed * 2 + 2);
        const std::vector<Point> extraA = gen_uniform(kWarmup + kTimed, cfg.seed * 2 + 3);
        const std::vector<Point> extraB = gen_uniform(kWarmup + kTimed, cfg.seed * 2 + 4);

        const auto mode = cfg.mode == RunMode::DynamicAdvanced ? DynamicMatcher::Mode::Advanced
                                                               : DynamicMatcher::Mode::Basic;
        DynamicMatcher m(mc, mode);
        m.init(reds, blues);
        for (std::size_t i = 0; i < kWarmup; ++i) m.insert_pair(extraA[i], extraB[i]);
        const auto t0 = Clock::now();
        for (std::size_t i = kWarmup; i < kWarmup + kTimed; ++i)
            m.insert_pair(extraA[i], extraB[i]);
        const double updateMicros = micros_since(t0) / static_cast<double>(kTimed);

        std::vector<PointRecord> finalRecs;
        for (const auto& [id, rec] : m.tree().points()) finalRecs.push_back(rec);
        const auto t1 = Clock::now();
        const StaticSolution sol = static_matching_shifted(finalRecs, m.shift(), mc);
        const double staticMicros = micros_since(t1);

        const double denom = std::max(1.0, std::abs(sol.cost));
        if (std::abs(sol.cost - m.query_cost()) > 1e-6 * denom)
            throw Error("integrity", "dynamic and static costs diverged during benchmark");

        BenchRow row;
        row.n = n;
        row.perUpdateMicros = updateMicros;
        row.staticRecomputeMicros = staticMicros;
        row.speedup = staticMicros / updateMicros;
        row.dynamicCost = m.query_cost();
        row.staticCost = sol.cost;
        rows.push_back(row);
    }
    return rows;
}

HardnessInstance gen_hardness_line(std::int64_t n, Coord universe) {
    if (n < 2) throw Error("bad parameter", "line instance needs n >= 2");
    const Coord offset = 2 * n;
    if (4 * n - 1 >= universe / 2)
        throw Error("size", "line instance does not fit the universe");
    HardnessInstance inst;
    inst.offset = offset;
    for (std::int64_t x = -n; x <= n - 2; x += 2) inst.reds.push_back({x + offset, 0});
    for (std::int64_t x = -n + 1; x <= n - 1; x += 2) inst.blues.push_back({x + offset, 0});
    std::int64_t left = -n, right = n - 1;
    for (std::int64_t k = 1; k <= n; ++k) {
        left -= 1;
        right += 1;
        const Point leftPt{left + offset, 0};
        const Point rightPt{right + offset, 0};
        // Alternation dictates the colors: odd steps put the red on the right.
        if (k % 2 == 1)
            inst.extensions.emplace_back(rightPt, leftPt);
        else
            inst.extensions.emplace_back(leftPt, rightPt);
    }
    return inst;
}

std::vector<std::pair<Point, Point>> line_optimal_matching(std::vector<Point> reds,
                                                           std::vector<Point> blues) {
    if (reds.size() != blues.size()) throw Error("size mismatch", "line matching");
    struct Tagged {
        Point p;
        bool red;
    };
    std::vector<Tagged> all;
    for (const Point& p : reds) all.push_back({p, true});
    for (const Point& p : blues) all.push_back({p, false});
    std::sort(all.begin(), all.end(),
              [](const Tagged& a, const Tagged& b) { return a.p.x < b.p.x; });
    std::vector<std::pair<Point, Point>> out;
    for (std::size_t i = 0; i + 1 < all.size(); i += 2) {
        if (all[i].red == all[i + 1].red)
            throw Error("state", "line instance is not alternating");
        const Tagged& r = all[i].red ? all[i] : all[i + 1];
        const Tagged& b = all[i].red ? all[i + 1] : all[i];
        out.emplace_back(r.p, b.p);
    }
    return out;
}

void emit_report(const std::vector<SeriesRecord>& series, std::ostream& os) {
    os << "step,n,cost,wasserstein,update_us,recourse\n";
    os << std::fixed << std::setprecision(6);
    for (const SeriesRecord& r : series)
        os << r.step << ',' << r.n << ',' << r.cost << ',' << r.wasserstein << ','
           << r.updateMicros << ',' << r.recourseEdges << '\n';
}

void emit_report(const std::vector<SeriesRecord>& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    emit_report(series, out);
    if (!out) throw Error("io", "write failed: " + path);
}

std::vector<SeriesRecord> parse_report(std::istream& is) {
    std::vector<SeriesRecord> out;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line != "step,n,cost,wasserstein,update_us,recourse")
                throw Error("io", "unexpected report header");
            continue;
        }
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != 6) throw Error("io", "malformed report row");
        SeriesRecord r;
        r.step = std::stoll(f[0]);
        r.n = std::stoll(f[1]);
        r.cost = std::stod(f[2]);
        r.wasserstein = std::stod(f[3]);
        r.updateMicros = std::stod(f[4]);
        r.recourseEdges = std::stoll(f[5]);
        out.push_back(r);
    }
    return out;
}

}  // namespace dynmatch::harness
