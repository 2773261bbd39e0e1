#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dynmatch/harness.hpp"

using namespace dynmatch;
using namespace dynmatch::harness;

namespace {

bool audit_enabled() {
    const char* v = std::getenv("DYNMATCH_AUDIT");
    return v && std::string(v) == "1";
}

RunMode parse_mode(const std::string& s) {
    if (s == "basic") return RunMode::DynamicBasic;
    if (s == "advanced") return RunMode::DynamicAdvanced;
    if (s == "static") return RunMode::Static;
    throw CLI::ValidationError("mode", "expected static|basic|advanced");
}

void write_points(const std::vector<Point>& pts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    for (const Point& p : pts) out << p.x << ',' << p.y << '\n';
}

// Splits a point file into red/blue lists: either an explicit color column
// or, failing that, first half red / second half blue.
std::pair<std::vector<Point>, std::vector<Point>> load_colored(const std::string& path) {
    PointFile pf = read_point_csv(path);
    if (pf.skipped)
        std::cerr << "warning: skipped " << pf.skipped << " malformed rows in " << path
                  << "\n";
    if (!pf.reds.empty() || !pf.blues.empty()) {
        if (!pf.uncolored.empty()) throw Error("io", path + " mixes colored and plain rows");
        return {pf.reds, pf.blues};
    }
    const std::size_t n = pf.uncolored.size();
    if (n % 2 != 0) throw Error("size mismatch", path + " holds an odd number of points");
    return {{pf.uncolored.begin(), pf.uncolored.begin() + static_cast<long>(n / 2)},
            {pf.uncolored.begin() + static_cast<long>(n / 2), pf.uncolored.end()}};
}

int run_gen(const std::string& dist, std::size_t n, std::uint64_t seed,
            const std::string& out) {
    std::vector<Point> pts;
    if (dist == "uniform") {
        pts = gen_uniform(n, seed);
    } else if (dist == "gaussian") {
        pts = gen_gaussian(n, seed);
    } else {
        std::cerr << "unknown distribution: " << dist << "\n";
        return 1;
    }
    write_points(pts, out);
    std::cout << "wrote " << pts.size() << " points to " << out << "\n";
    return 0;
}

int run_static(const std::string& in, Coord p, std::uint64_t seed) {
    const auto [reds, blues] = load_colored(in);
    MatchConfig cfg;
    cfg.p = p;
    cfg.seed = seed;
    const StaticSolution sol = static_matching(reds, blues, cfg);
    std::cout << "n=" << reds.size() << " cost=" << sol.cost
              << " wasserstein=" << sol.cost / static_cast<double>(reds.size()) << "\n";
    return 0;
}

int apply_updates(DynamicMatcher& m, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line)) {
        lineNo++;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string op;
        std::getline(ss, op, ',');
        if (op == "I") {
            Point a, b;
            char c;
            if (!(ss >> a.x >> c >> a.y >> c >> b.x >> c >> b.y))
                throw Error("io", "bad insert at line " + std::to_string(lineNo));
            const auto rep = m.insert_pair(a, b);
            std::cout << "I " << rep.idA << ' ' << rep.idB << " cost=" << m.query_cost()
                      << "\n";
        } else if (op == "D") {
            PointId idA, idB;
            char c;
            if (!(ss >> idA >> c >> idB))
                throw Error("io", "bad delete at line " + std::to_string(lineNo));
            m.delete_pair(idA, idB);
            std::cout << "D " << idA << ' ' << idB << " cost=" << m.query_cost() << "\n";
        } else {
            throw Error("io", "unknown op '" + op + "' at line " + std::to_string(lineNo));
        }
    }
    return 0;
}

int run_dynamic(const std::string& in, Coord p, std::uint64_t seed, const std::string& mode,
                const std::string& updates) {
    const auto [reds, blues] = load_colored(in);
    MatchConfig cfg;
    cfg.p = p;
    cfg.seed = seed;
    const auto m0 = parse_mode(mode);
    DynamicMatcher m(cfg, m0 == RunMode::DynamicAdvanced ? DynamicMatcher::Mode::Advanced
                                                         : DynamicMatcher::Mode::Basic);
    m.set_audit(audit_enabled());
    m.init(reds, blues);
    std::cout << "init n=" << m.pairs() << " cost=" << m.query_cost() << "\n";
    if (!updates.empty()) apply_updates(m, updates);
    if (m.pairs() > 0)
        std::cout << "final n=" << m.pairs() << " cost=" << m.query_cost()
                  << " wasserstein=" << m.wasserstein_estimate() << "\n";
    else
        std::cout << "final n=0 cost=0\n";
    return 0;
}

int run_drift_cmd(const std::string& inA, const std::string& inB, std::size_t window, Coord p,
                  const std::string& mode, std::uint64_t seed, const std::string& out) {
    const PointFile a = read_point_csv(inA);
    const PointFile b = read_point_csv(inB);
    const std::vector<Point>& sa = a.uncolored.empty() ? a.reds : a.uncolored;
    const std::vector<Point>& sb = b.uncolored.empty() ? b.blues : b.uncolored;
    WorkloadConfig cfg;
    cfg.mode = parse_mode(mode);
    cfg.p = p;
    cfg.seed = seed;
    cfg.window = window;
    cfg.audit = audit_enabled();
    const auto series = run_drift(sa, sb, window, cfg);
    if (out.empty()) {
        emit_report(series, std::cout);
    } else {
        emit_report(series, out);
        std::cout << "wrote " << series.size() << " rows to " << out << "\n";
    }
    return 0;
}

int run_bench(const std::string& sizesArg, Coord p, const std::string& mode,
              std::uint64_t seed) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(sizesArg);
    std::string tok;
    while (std::getline(ss, tok, ',')) sizes.push_back(std::stoull(tok));
    WorkloadConfig cfg;
    cfg.mode = parse_mode(mode);
    cfg.p = p;
    cfg.seed = seed;
    cfg.audit = audit_enabled();
    const auto rows = bench_speedup(sizes, p, cfg);
    std::cout << "n,update_us,static_us,speedup\n";
    for (const BenchRow& r : rows)
        std::cout << r.n << ',' << r.perUpdateMicros << ',' << r.staticRecomputeMicros << ','
                  << r.speedup << "\n";
    return 0;
}

int run_hardness(std::int64_t n, Coord p) {
    const HardnessInstance inst = gen_hardness_line(n);
    MatchConfig cfg;
    cfg.p = p;
    DynamicMatcher m(cfg, DynamicMatcher::Mode::Advanced);
    m.set_audit(audit_enabled());
    m.init(inst.reds, inst.blues);

    auto exactPrev = line_optimal_matching(inst.reds, inst.blues);
    std::vector<Point> reds = inst.reds, blues = inst.blues;
    const std::int64_t bound =
        2 * (cfg.p * cfg.p + 1) * static_cast<std::int64_t>(m.depth_cap());
    std::int64_t worstRecourse = 0;
    std::int64_t worstExactFlips = 0;
    for (const auto& [r, b] : inst.extensions) {
        const auto rep = m.insert_pair(r, b);
        if (!rep.structural)
            worstRecourse = std::max(worstRecourse, rep.recourseAdded + rep.recourseRemoved);
        reds.push_back(r);
        blues.push_back(b);
        auto exactNext = line_optimal_matching(reds, blues);
        std::int64_t common = 0;
        for (const auto& e : exactNext)
            for (const auto& f : exactPrev)
                if (e == f) {
                    common++;
                    break;
                }
        const std::int64_t flips = static_cast<std::int64_t>(exactPrev.size()) - common +
                                   static_cast<std::int64_t>(exactNext.size()) - common;
        worstExactFlips = std::max(worstExactFlips, flips);
        exactPrev = std::move(exactNext);
    }
    std::cout << "n=" << n << " p=" << cfg.p << " depth=" << m.depth_cap() << "\n";
    std::cout << "approx per-update recourse: max=" << worstRecourse << " bound=" << bound
              << "\n";
    std::cout << "exact matching edge flips per extension: max=" << worstExactFlips << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic Euclidean bi-chromatic matching workloads"};
    app.require_subcommand(1);

    std::string dist = "uniform", out, in, inA, inB, mode = "basic", updates, sizes = "1000";
    std::size_t n = 1000, window = 1000;
    std::int64_t hn = 100;
    std::uint64_t seed = 0;
    Coord p = 8;

    auto* gen = app.add_subcommand("gen", "generate a point file");
    gen->add_option("--distribution", dist, "uniform|gaussian");
    gen->add_option("--n", n, "point count");
    gen->add_option("--seed", seed, "PRNG seed");
    gen->add_option("--out", out, "output CSV")->required();

    auto* st = app.add_subcommand("static", "one-shot static matching");
    st->add_option("--in", in, "point CSV (x,y[,R|B])")->required();
    st->add_option("--p", p, "branching parameter");
    st->add_option("--seed", seed, "shift seed");

    auto* dyn = app.add_subcommand("dynamic", "dynamic matching over an update stream");
    dyn->add_option("--in", in, "initial point CSV")->required();
    dyn->add_option("--p", p, "branching parameter");
    dyn->add_option("--seed", seed, "shift seed");
    dyn->add_option("--mode", mode, "basic|advanced");
    dyn->add_option("--updates", updates, "update stream (I,ax,ay,bx,by / D,idA,idB)");

    auto* dr = app.add_subcommand("drift", "sliding-window drift series");
    dr->add_option("--inA", inA, "red stream CSV")->required();
    dr->add_option("--inB", inB, "blue stream CSV")->required();
    dr->add_option("--window", window, "window width");
    dr->add_option("--p", p, "branching parameter");
    dr->add_option("--mode", mode, "static|basic|advanced");
    dr->add_option("--seed", seed, "shift seed");
    dr->add_option("--out", out, "series CSV (stdout if omitted)");

    auto* be = app.add_subcommand("bench", "update vs rebuild timing");
    be->add_option("--sizes", sizes, "comma-separated instance sizes");
    be->add_option("--p", p, "branching parameter");
    be->add_option("--mode", mode, "basic|advanced");
    be->add_option("--seed", seed, "PRNG seed");

    auto* ha = app.add_subcommand("hardness", "alternating line recourse demo");
    ha->add_option("--n", hn, "half line length");
    ha->add_option("--p", p, "branching parameter");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen(dist, n, seed, out);
        if (st->parsed()) return run_static(in, p, seed);
        if (dyn->parsed()) return run_dynamic(in, p, seed, mode, updates);
        if (dr->parsed()) return run_drift_cmd(inA, inB, window, p, mode, seed, out);
        if (be->parsed()) return run_bench(sizes, p, mode, seed);
        if (ha->parsed()) return run_hardness(hn, p);
    } catch (const Error& e) {
        std::cerr << "error (" << e.kind() << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
