#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "dynmatch/core.hpp"

using namespace dynmatch;

namespace {

PointTable table(std::initializer_list<PointRecord> recs) {
    PointTable t;
    for (const PointRecord& r : recs) t[r.id] = r;
    return t;
}

}  // namespace

TEST_CASE("euclidean distance") {
    CHECK(distance(Point{0, 0}, Point{3, 4}) == doctest::Approx(5.0));
    CHECK(distance(Point{7, 7}, Point{7, 7}) == 0.0);
    CHECK(distance(RealPoint{0.5, 0.5}, RealPoint{0.5, 2.5}) == doctest::Approx(2.0));
    CHECK(distance(Point{-3, 0}, Point{0, 0}) == doctest::Approx(3.0));
}

TEST_CASE("color helpers") {
    CHECK(opposite(Color::Red) == Color::Blue);
    CHECK(opposite(Color::Blue) == Color::Red);
    CHECK(std::string(to_string(Color::Red)) == "Red");
    CHECK(std::string(to_string(Color::Blue)) == "Blue");
}

TEST_CASE("matching cost") {
    const PointTable t = table({{0, {0, 0}, {0, 0}, Color::Red},
                                {1, {3, 4}, {3, 4}, Color::Blue},
                                {2, {10, 0}, {10, 0}, Color::Red},
                                {3, {10, 2}, {10, 2}, Color::Blue}});
    Matching m;
    m.edges = {{0, 1}, {2, 3}};
    CHECK(matching_cost(t, m) == doctest::Approx(7.0));

    m.edges.push_back({42, 1});
    CHECK_THROWS_AS(matching_cost(t, m), Error);
}

TEST_CASE("assignment cost checks marginals") {
    TransportInstance t;
    t.supplies = {{{0.0, 0.0}, 2}};
    t.demands = {{{1.0, 0.0}, -1}, {{0.0, 1.0}, -1}};
    Assignment a;
    a.weights[{0, 0}] = 1;
    a.weights[{0, 1}] = 1;
    CHECK(assignment_cost(t, a) == doctest::Approx(2.0));

    a.weights[{0, 1}] = 2;  // oversubscribes both marginals
    CHECK_THROWS_AS(assignment_cost(t, a), Error);
}

TEST_CASE("validate matching") {
    const PointTable t = table({{0, {0, 0}, {0, 0}, Color::Red},
                                {1, {1, 0}, {1, 0}, Color::Blue},
                                {2, {2, 0}, {2, 0}, Color::Red},
                                {3, {3, 0}, {3, 0}, Color::Blue}});

    Matching ok;
    ok.edges = {{0, 1}, {2, 3}};
    CHECK(validate_matching(t, ok, true).empty());

    Matching partial;
    partial.edges = {{0, 1}};
    CHECK(validate_matching(t, partial, false).empty());
    const auto v1 = validate_matching(t, partial, true);
    REQUIRE(v1.size() == 2);
    CHECK(v1[0].kind == "unmatched");

    Matching wrongColor;
    wrongColor.edges = {{1, 0}, {2, 3}};  // endpoints swapped
    const auto v2 = validate_matching(t, wrongColor, false);
    CHECK(!v2.empty());
    CHECK(v2[0].kind == "color mismatch");

    Matching dup;
    dup.edges = {{0, 1}, {0, 3}};
    const auto v3 = validate_matching(t, dup, false);
    CHECK(!v3.empty());
    CHECK(v3[0].kind == "duplicate endpoint");

    Matching ghost;
    ghost.edges = {{99, 1}};
    const auto v4 = validate_matching(t, ghost, false);
    CHECK(!v4.empty());
    CHECK(v4[0].kind == "unknown id");
}

TEST_CASE("error carries its kind") {
    const Error e("lookup", "missing point");
    CHECK(e.kind() == "lookup");
    CHECK(std::string(e.what()) == "lookup: missing point");
}

TEST_CASE("transport instance totals") {
    TransportInstance t;
    t.supplies = {{{0.0, 0.0}, 3}, {{1.0, 1.0}, 2}};
    t.demands = {{{2.0, 2.0}, -5}};
    CHECK(t.total_supply() == 5);
    CHECK(t.total_demand() == -5);
}
