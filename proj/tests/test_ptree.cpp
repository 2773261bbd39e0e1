#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <random>

#include "doctest.h"
#include "dynmatch/ptree.hpp"

using namespace dynmatch;

namespace {

PointRecord rec(PointId id, Coord x, Coord y, Color c = Color::Red) {
    return {id, {x, y}, {x, y}, c};
}

// Reference z-order: walk the subcell digits top-down (row-major, row from
// y), then fall back to row-major unit order inside cells finer than p.
bool z_less_oracle(Point a, Point b, Coord universe, Coord p) {
    Coord side = universe, ox = 0, oy = 0;
    while (side >= p) {
        const Coord sub = side / p;
        const Coord rowA = (a.y - oy) / sub, colA = (a.x - ox) / sub;
        const Coord rowB = (b.y - oy) / sub, colB = (b.x - ox) / sub;
        const Coord ia = rowA * p + colA, ib = rowB * p + colB;
        if (ia != ib) return ia < ib;
        ox += colA * sub;
        oy += rowA * sub;
        side = sub;
    }
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
}

std::vector<PointRecord> random_records(std::mt19937_64& rng, std::size_t n, Coord hi) {
    std::uniform_int_distribution<Coord> d(0, hi - 1);
    std::vector<PointRecord> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(rec(i, d(rng), d(rng), i % 2 ? Color::Blue : Color::Red));
    return out;
}

}  // namespace

TEST_CASE("subcell indexing is row-major") {
    const Cell c{0, 0, 0, 8};
    CHECK(subcell_index(c, {1, 1}, 2) == 0);
    CHECK(subcell_index(c, {5, 1}, 2) == 1);
    CHECK(subcell_index(c, {5, 7}, 2) == 3);
    CHECK(subcell_index(c, {1, 5}, 2) == 2);
    CHECK_THROWS_AS(subcell_index(c, {9, 0}, 2), Error);

    const Cell child = child_cell(c, 3, 2);
    CHECK(child.side == 4);
    CHECK(child.ix == 1);
    CHECK(child.iy == 1);
    CHECK(child.level == 1);
}

TEST_CASE("z keys reproduce the recursive subcell order") {
    std::mt19937_64 rng(5);
    for (const auto& [universe, p] : std::vector<std::pair<Coord, Coord>>{
             {64, 2}, {64, 4}, {1 << 10, 8}, {Coord{1} << 20, 8}, {32, 8}}) {
        std::uniform_int_distribution<Coord> d(0, universe - 1);
        std::vector<Point> pts;
        for (int i = 0; i < 200; ++i) pts.push_back({d(rng), d(rng)});
        auto bySortKey = pts;
        std::stable_sort(bySortKey.begin(), bySortKey.end(), [&](const Point& a, const Point& b) {
            return z_key(a, universe, p) < z_key(b, universe, p);
        });
        auto byOracle = pts;
        std::stable_sort(byOracle.begin(), byOracle.end(), [&](const Point& a, const Point& b) {
            return z_less_oracle(a, b, universe, p);
        });
        for (std::size_t i = 0; i < pts.size(); ++i) {
            CHECK(z_key(bySortKey[i], universe, p) == z_key(byOracle[i], universe, p));
        }
    }
}

TEST_CASE("small point sets build a single leaf at the minimal cell") {
    std::vector<PointRecord> recs;
    for (PointId i = 0; i < 4; ++i) recs.push_back(rec(i, 64 + (Coord)i, 64));
    const auto tree = build_tree(recs, 2, 1 << 10);
    CHECK(tree->root()->isLeaf);
    CHECK(tree->root()->pointCount == 4);
    CHECK(tree->root()->cell.contains({64, 64}));
    CHECK(tree->root()->cell.contains({67, 64}));
    tree->audit();
}

TEST_CASE("overfull leaves split into subtrees") {
    std::vector<PointRecord> recs;
    for (PointId i = 0; i < 9; ++i) recs.push_back(rec(i, (Coord)(i * 100), (Coord)(i * 37)));
    const auto tree = build_tree(recs, 2, 1 << 10);
    CHECK(!tree->root()->isLeaf);
    CHECK(tree->root()->pointCount == 9);
    std::int64_t sum = 0;
    for (const auto& [idx, child] : tree->root()->children) sum += child->pointCount;
    CHECK(sum == 9);
    tree->audit();
}

TEST_CASE("incremental inserts reproduce the bulk shape in any order") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 120);
        auto recs = random_records(rng, n, 1 << 12);
        const auto bulk = build_tree(recs, 4, 1 << 13);

        std::shuffle(recs.begin(), recs.end(), rng);
        RestrictedPTree inc(4, 1 << 13);
        for (const auto& r : recs) inc.insert_point(r);
        inc.audit();
        CHECK(same_shape(bulk->root(), inc.root()));
    }
}

TEST_CASE("deletions restore the canonical shape") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        auto recs = random_records(rng, 100, 1 << 12);
        RestrictedPTree tree(4, 1 << 13);
        for (const auto& r : recs) tree.insert_point(r);

        std::shuffle(recs.begin(), recs.end(), rng);
        while (recs.size() > 3) {
            tree.delete_point(recs.back().id);
            recs.pop_back();
        }
        tree.audit();
        std::sort(recs.begin(), recs.end(),
                  [](const PointRecord& a, const PointRecord& b) { return a.id < b.id; });
        const auto bulk = build_tree(recs, 4, 1 << 13);
        CHECK(same_shape(bulk->root(), tree.root()));
    }
}

TEST_CASE("delete to empty resets the tree") {
    RestrictedPTree tree(2, 1 << 10);
    tree.insert_point(rec(0, 5, 5));
    tree.insert_point(rec(1, 700, 700));
    tree.delete_point(0);
    tree.delete_point(1);
    tree.audit();
    CHECK(tree.root()->isLeaf);
    CHECK(tree.root()->pointCount == 0);
    CHECK(tree.points().empty());
    // And it accepts points again.
    const auto ev = tree.insert_point(rec(2, 9, 9));
    CHECK(ev.rootChanged);
    tree.audit();
}

TEST_CASE("root growth and descent") {
    RestrictedPTree tree(2, 1 << 10);
    for (PointId i = 0; i < 5; ++i) tree.insert_point(rec(i, (Coord)i, 0));
    const auto before = tree.root()->cell;
    // A far-away point forces the root to a coarser ancestor cell.
    const auto grow = tree.insert_point(rec(99, 900, 900));
    CHECK(grow.rootChanged);
    CHECK(tree.root()->cell.side > before.side);
    tree.audit();
    // Removing it lets the root descend again.
    const auto shrink = tree.delete_point(99);
    CHECK(shrink.rootChanged);
    tree.audit();
    const auto rebuilt = build_tree(
        {rec(0, 0, 0), rec(1, 1, 0), rec(2, 2, 0), rec(3, 3, 0), rec(4, 4, 0)}, 2, 1 << 10);
    CHECK(same_shape(rebuilt->root(), tree.root()));
}

TEST_CASE("structural events carry split and merge markers") {
    RestrictedPTree tree(2, 1 << 10);
    StructuralEvents last;
    for (PointId i = 0; i < 5; ++i) last = tree.insert_point(rec(i, (Coord)(i * 7), (Coord)(i * 13)));
    CHECK(last.newSubroot != nullptr);  // 5th point overflows capacity 4
    CHECK(!tree.root()->isLeaf);

    const auto merge = tree.delete_point(4);
    CHECK(merge.collapsed);
    CHECK(tree.root()->isLeaf);
    tree.audit();
}

TEST_CASE("events order children before parents") {
    std::mt19937_64 rng(31);
    RestrictedPTree tree(2, 1 << 10);
    for (PointId i = 0; i < 60; ++i) {
        const auto ev =
            tree.insert_point(rec(i, (Coord)(rng() % 512), (Coord)(rng() % 512)));
        for (std::size_t a = 0; a < ev.order.size(); ++a)
            for (std::size_t b = a + 1; b < ev.order.size(); ++b)
                CHECK(ev.order[a].node->cell.level >= ev.order[b].node->cell.level);
    }
}

TEST_CASE("insert rejects bad input") {
    RestrictedPTree tree(2, 1 << 10);
    tree.insert_point(rec(0, 1, 1));
    CHECK_THROWS_AS(tree.insert_point(rec(0, 2, 2)), Error);              // duplicate id
    CHECK_THROWS_AS(tree.insert_point(rec(1, 1 << 10, 0)), Error);        // outside universe
    CHECK_THROWS_AS(tree.insert_point(rec(2, -1, 0)), Error);             // negative
    CHECK_THROWS_AS(tree.delete_point(42), Error);                        // unknown id
    CHECK_THROWS_AS(RestrictedPTree(3, 1 << 10), Error);                  // p not a power of 2
    CHECK_THROWS_AS(RestrictedPTree(2, 1000), Error);                     // D not a power of 2
}

TEST_CASE("locate path walks root to leaf") {
    std::mt19937_64 rng(41);
    auto recs = random_records(rng, 80, 1 << 9);
    RestrictedPTree tree(2, 1 << 10);
    for (const auto& r : recs) tree.insert_point(r);
    for (const auto& r : recs) {
        const auto path = tree.locate_path(r.pos);
        REQUIRE(!path.empty());
        CHECK(path.front() == tree.root());
        CHECK(path.back()->isLeaf);
        for (const auto* node : path) CHECK(node->cell.contains(r.pos));
    }
    CHECK_THROWS_AS(tree.locate_path({-5, 0}), Error);
}
