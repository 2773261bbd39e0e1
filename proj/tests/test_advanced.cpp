#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>
#include <set>

#include "doctest.h"
#include "dynmatch/augment.hpp"
#include "dynmatch/dynamic.hpp"
#include "dynmatch/solvers.hpp"

using namespace dynmatch;

namespace {

std::vector<Point> random_raw(std::mt19937_64& rng, std::size_t n, Coord hi) {
    std::uniform_int_distribution<Coord> d(0, hi - 1);
    std::vector<Point> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({d(rng), d(rng)});
    return out;
}

TransportInstance instance_of(const ImplicitMatching& m) {
    TransportInstance t;
    const auto rc = m.red_counts();
    const auto bc = m.blue_counts();
    for (std::size_t i = 0; i < m.redLoc.size(); ++i)
        if (rc[i] > 0) t.supplies.push_back({m.redLoc[i], rc[i]});
    for (std::size_t j = 0; j < m.blueLoc.size(); ++j)
        if (bc[j] > 0) t.demands.push_back({m.blueLoc[j], -bc[j]});
    return t;
}

double optimal_cost(const ImplicitMatching& m) { return solve_transport(instance_of(m)).cost; }

}  // namespace

TEST_CASE("augmenting keeps the implicit matching optimal") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> coord(0.0, 50.0);
    for (int trial = 0; trial < 15; ++trial) {
        ImplicitMatching m;
        const int nr = 2 + (int)(rng() % 4), nb = 2 + (int)(rng() % 4);
        for (int i = 0; i < nr; ++i) m.redLoc.push_back({coord(rng), coord(rng)});
        for (int j = 0; j < nb; ++j) m.blueLoc.push_back({coord(rng), coord(rng)});
        for (int step = 0; step < 25; ++step) {
            const int x = (int)(rng() % nr), y = (int)(rng() % nb);
            const auto steps = augment_matching(m, x, y);
            CHECK(!steps.empty());
            CHECK(m.cost() == doctest::Approx(optimal_cost(m)).epsilon(1e-7));
        }
    }
}

TEST_CASE("augment path structure alternates and terminates") {
    ImplicitMatching m;
    m.redLoc = {{0.0, 0.0}, {10.0, 0.0}};
    m.blueLoc = {{1.0, 0.0}, {11.0, 0.0}};
    auto s1 = augment_matching(m, 0, 0);
    REQUIRE(s1.size() == 1);
    CHECK(s1[0].delta == +1);
    // Matching unit (1, 1) directly is optimal; path stays length 1.
    auto s2 = augment_matching(m, 1, 1);
    CHECK(m.weight.at({0, 0}) == 1);
    CHECK(m.weight.at({1, 1}) == 1);
    // Forcing (0 -> far blue) must reroute through the matched arcs.
    auto s3 = augment_matching(m, 0, 1);
    int plus = 0, minus = 0;
    for (const auto& st : s3) (st.delta > 0 ? plus : minus)++;
    CHECK(plus == minus + 1);
    CHECK(m.cost() == doctest::Approx(optimal_cost(m)).epsilon(1e-9));
}

TEST_CASE("removals preserve optimality") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> coord(0.0, 40.0);
    for (int trial = 0; trial < 15; ++trial) {
        ImplicitMatching m;
        for (int i = 0; i < 3; ++i) m.redLoc.push_back({coord(rng), coord(rng)});
        for (int j = 0; j < 3; ++j) m.blueLoc.push_back({coord(rng), coord(rng)});
        for (int step = 0; step < 12; ++step)
            augment_matching(m, (int)(rng() % 3), (int)(rng() % 3));

        // Direct unit removal.
        const auto anyEdge = m.weight.begin()->first;
        remove_unit(m, anyEdge.first, anyEdge.second);
        CHECK(m.cost() == doctest::Approx(optimal_cost(m)).epsilon(1e-7));

        // Pair removal between possibly unmatched endpoints.
        const auto rc = m.red_counts();
        const auto bc = m.blue_counts();
        int i = 0, j = 0;
        while (rc[i] == 0) i++;
        while (bc[j] == 0) j++;
        remove_pair(m, i, j);
        CHECK(m.cost() == doctest::Approx(optimal_cost(m)).epsilon(1e-7));
    }
}

TEST_CASE("augment rejects bad endpoints") {
    ImplicitMatching m;
    m.redLoc = {{0.0, 0.0}};
    m.blueLoc = {{1.0, 0.0}};
    CHECK_THROWS_AS(augment_matching(m, 1, 0), Error);
    CHECK_THROWS_AS(remove_unit(m, 0, 0), Error);
}

TEST_CASE("advanced mode mirrors the basic costs") {
    std::mt19937_64 rng(19);
    MatchConfig cfg;
    cfg.p = 2;
    cfg.seed = 23;
    DynamicMatcher adv(cfg, DynamicMatcher::Mode::Advanced);
    DynamicMatcher bas(cfg, DynamicMatcher::Mode::Basic);
    std::vector<std::pair<PointId, PointId>> live;
    for (int step = 0; step < 220; ++step) {
        if (!live.empty() && rng() % 3 == 0) {
            const std::size_t k = rng() % live.size();
            adv.delete_pair(live[k].first, live[k].second);
            bas.delete_pair(live[k].first, live[k].second);
            live.erase(live.begin() + (long)k);
        } else {
            const Point a = random_raw(rng, 1, 300)[0];
            const Point b = random_raw(rng, 1, 300)[0];
            const auto rep = adv.insert_pair(a, b);
            bas.insert_pair(a, b);
            live.push_back({rep.idA, rep.idB});
        }
        CHECK(adv.query_cost() == doctest::Approx(bas.query_cost()).epsilon(1e-9));
    }
}

TEST_CASE("audited advanced workload holds the explicit invariants") {
    std::mt19937_64 rng(29);
    MatchConfig cfg;
    cfg.p = 2;
    cfg.seed = 31;
    DynamicMatcher m(cfg, DynamicMatcher::Mode::Advanced);
    m.set_audit(true);
    std::vector<std::pair<PointId, PointId>> live;
    for (int step = 0; step < 150; ++step) {
        if (!live.empty() && rng() % 4 == 0) {
            const std::size_t k = rng() % live.size();
            m.delete_pair(live[k].first, live[k].second);
            live.erase(live.begin() + (long)k);
        } else {
            const auto rep =
                m.insert_pair(random_raw(rng, 1, 250)[0], random_raw(rng, 1, 250)[0]);
            live.push_back({rep.idA, rep.idB});
        }
    }
    CHECK(m.pairs() == live.size());
}

TEST_CASE("explicit matching is perfect and consistent with the reported cost") {
    std::mt19937_64 rng(37);
    MatchConfig cfg;
    cfg.p = 4;
    cfg.seed = 41;
    DynamicMatcher m(cfg, DynamicMatcher::Mode::Advanced);
    m.init(random_raw(rng, 80, 400), random_raw(rng, 80, 400));
    for (int i = 0; i < 40; ++i)
        m.insert_pair(random_raw(rng, 1, 400)[0], random_raw(rng, 1, 400)[0]);

    const Matching ex = m.query_matching_explicit();
    CHECK(ex.edges.size() == m.pairs());
    CHECK(validate_matching(m.tree().points(), ex, true).empty());

    // The realization must cost no less than the exact optimum of the live
    // set and stay in the same ballpark as the implicit estimate.
    CHECK(ex.cost >= 0.0);
    const Matching reconstructed = m.query_matching();
    CHECK(validate_matching(m.tree().points(), reconstructed, true).empty());
}

TEST_CASE("recourse stays within the per-update budget") {
    std::mt19937_64 rng(43);
    MatchConfig cfg;
    cfg.p = 4;
    cfg.seed = 47;
    DynamicMatcher m(cfg, DynamicMatcher::Mode::Advanced);
    std::vector<std::pair<PointId, PointId>> live;
    const std::int64_t perLevel = 2 * (cfg.p * cfg.p + 1);
    for (int step = 0; step < 400; ++step) {
        DynamicMatcher::UpdateReport rep;
        if (!live.empty() && rng() % 3 == 0) {
            const std::size_t k = rng() % live.size();
            rep = m.delete_pair(live[k].first, live[k].second);
            live.erase(live.begin() + (long)k);
        } else {
            rep = m.insert_pair(random_raw(rng, 1, 500)[0], random_raw(rng, 1, 500)[0]);
            live.push_back({rep.idA, rep.idB});
        }
        if (!rep.structural) {
            const std::int64_t bound = perLevel * m.depth_cap();
            CHECK(rep.recourseAdded + rep.recourseRemoved <= bound);
        }
        // The recourse report must replay onto the previous matching.
        const auto& rec = m.query_recourse();
        CHECK((std::int64_t)rec.added.size() == rep.recourseAdded);
        CHECK((std::int64_t)rec.removed.size() == rep.recourseRemoved);
    }
}

TEST_CASE("recourse replays the explicit matching between updates") {
    std::mt19937_64 rng(53);
    MatchConfig cfg;
    cfg.p = 2;
    cfg.seed = 59;
    DynamicMatcher m(cfg, DynamicMatcher::Mode::Advanced);
    std::set<std::pair<PointId, PointId>> shadow;
    std::vector<std::pair<PointId, PointId>> live;
    for (int step = 0; step < 120; ++step) {
        if (!live.empty() && rng() % 3 == 0) {
            const std::size_t k = rng() % live.size();
            m.delete_pair(live[k].first, live[k].second);
            live.erase(live.begin() + (long)k);
        } else {
            const auto rep =
                m.insert_pair(random_raw(rng, 1, 200)[0], random_raw(rng, 1, 200)[0]);
            live.push_back({rep.idA, rep.idB});
        }
        const auto& rec = m.query_recourse();
        for (const auto& e : rec.removed) {
            REQUIRE(shadow.count(e));
            shadow.erase(e);
        }
        for (const auto& e : rec.added) {
            REQUIRE(!shadow.count(e));
            shadow.insert(e);
        }
        const Matching ex = m.query_matching_explicit();
        const std::set<std::pair<PointId, PointId>> current(ex.edges.begin(), ex.edges.end());
        REQUIRE(shadow == current);
    }
}
