#include "dynmatch/matcher.hpp"

#include <algorithm>
#include <random>

#include "dynmatch/solvers.hpp"

namespace dynmatch {

namespace {

std::vector<PointId> z_sorted_ids(const RestrictedPTree& tree, const std::vector<PointId>& ids) {
    std::vector<std::pair<std::uint64_t, PointId>> keyed;
    keyed.reserve(ids.size());
    for (PointId id : ids) keyed.emplace_back(tree.z_key(tree.points().at(id).pos), id);
    std::sort(keyed.begin(), keyed.end());
    std::vector<PointId> out;
    out.reserve(ids.size());
    for (const auto& [k, id] : keyed) out.push_back(id);
    return out;
}

void append_excess(const PTreeNode* v, std::vector<PointId>& out) {
    for (const ExcessPart& part : v->state.excess.parts) {
        if (!part.child) {
            out.insert(out.end(), part.ids.begin(), part.ids.end());
            continue;
        }
        std::vector<PointId> sub = materialize_excess(part.child);
        for (std::int64_t i = 0; i < part.takeCount; ++i)
            out.push_back(sub[static_cast<std::size_t>(part.skipPrefix + i)]);
    }
}

}  // namespace

Point draw_shift(std::uint64_t seed, Coord universe) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Coord> dist(0, universe / 2 - 1);
    const Coord x = dist(rng);
    const Coord y = dist(rng);
    return {x, y};
}

PointRecord shifted_record(PointId id, Point raw, Color color, Point shift, Coord universe) {
    const Coord half = universe / 2;
    if (raw.x < 0 || raw.x >= half || raw.y < 0 || raw.y >= half)
        throw Error("out of universe", "raw point (" + std::to_string(raw.x) + "," +
                                           std::to_string(raw.y) + ") outside [0," +
                                           std::to_string(half) + ")^2");
    return {id, Point{raw.x + shift.x, raw.y + shift.y}, raw, color};
}

ZScan scan_children(const PTreeNode* v) {
    ZScan s;
    std::vector<std::pair<int, std::int64_t>> redKids, blueKids;  // z-order
    std::int64_t redTotal = 0, blueTotal = 0;
    for (const auto& [idx, child] : v->children) {
        const ExcessDescriptor& e = child->state.excess;
        if (e.total == 0) continue;
        if (e.color == Color::Red) {
            redKids.emplace_back(idx, e.total);
            redTotal += e.total;
        } else {
            blueKids.emplace_back(idx, e.total);
            blueTotal += e.total;
        }
    }
    const std::int64_t k = std::min(redTotal, blueTotal);
    s.matchedPairs = k;
    s.excessColor = redTotal >= blueTotal ? Color::Red : Color::Blue;
    s.excessTotal = std::llabs(redTotal - blueTotal);
    const auto consume = [&](const std::vector<std::pair<int, std::int64_t>>& kids) {
        std::int64_t quota = k;
        for (const auto& [idx, cnt] : kids) {
            const std::int64_t take = std::min(cnt, quota);
            quota -= take;
            if (take > 0) s.takes[idx] = take;
            if (cnt > take) s.forwarded.emplace_back(idx, cnt - take);
        }
    };
    consume(redKids);
    consume(blueKids);
    return s;
}

TransportInstance aggregate_instance(const PTreeNode* v, const ZScan& s,
                                     std::vector<int>& supplyChild,
                                     std::vector<int>& demandChild) {
    TransportInstance t;
    supplyChild.clear();
    demandChild.clear();
    for (const auto& [idx, take] : s.takes) {
        const PTreeNode* child = v->children.at(idx).get();
        const RealPoint c = child->cell.center();
        if (child->state.excess.color == Color::Red) {
            t.supplies.emplace_back(c, take);
            supplyChild.push_back(idx);
        } else {
            t.demands.emplace_back(c, -take);
            demandChild.push_back(idx);
        }
    }
    return t;
}

void recompute_leaf(RestrictedPTree& tree, PTreeNode* v) {
    NodeMatchState& st = v->state;
    const std::vector<PointId> ids = z_sorted_ids(tree, v->leafPoints);
    std::vector<PointRecord> reds, blues;
    for (PointId id : ids) {
        const PointRecord& rec = tree.points().at(id);
        (rec.color == Color::Red ? reds : blues).push_back(rec);
    }
    st.redCount = static_cast<std::int64_t>(reds.size());
    st.blueCount = static_cast<std::int64_t>(blues.size());
    const std::size_t k = std::min(reds.size(), blues.size());
    const std::vector<PointRecord>& major = reds.size() >= blues.size() ? reds : blues;

    std::vector<PointRecord> mr(reds.begin(), reds.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<PointRecord> mb(blues.begin(), blues.begin() + static_cast<std::ptrdiff_t>(k));
    st.leafMatching = hungarian(mr, mb);

    st.excess.color = st.excess_color();
    st.excess.total = std::llabs(st.eta());
    st.excess.parts.clear();
    if (st.excess.total > 0) {
        ExcessPart part;
        for (std::size_t i = k; i < major.size(); ++i) part.ids.push_back(major[i].id);
        part.takeCount = static_cast<std::int64_t>(part.ids.size());
        st.excess.parts.push_back(std::move(part));
    }
    st.takes.clear();
    st.implicitEdges.clear();
    st.implicitCost = 0.0;
    st.costSubtree = st.leafMatching.cost;
}

void recompute_internal(RestrictedPTree& tree, PTreeNode* v) {
    (void)tree;
    NodeMatchState& st = v->state;
    st.redCount = 0;
    st.blueCount = 0;
    double childCost = 0.0;
    for (const auto& [idx, child] : v->children) {
        st.redCount += child->state.redCount;
        st.blueCount += child->state.blueCount;
        childCost += child->state.costSubtree;
    }
    ZScan s = scan_children(v);
    std::vector<int> supplyChild, demandChild;
    const TransportInstance inst = aggregate_instance(v, s, supplyChild, demandChild);
    const Assignment a = solve_transport(inst);

    st.takes = std::move(s.takes);
    st.implicitEdges.clear();
    for (const auto& [edge, w] : a.weights)
        st.implicitEdges.emplace_back(supplyChild[edge.first], demandChild[edge.second], w);
    st.implicitCost = a.cost;

    st.excess.color = s.excessColor;
    st.excess.total = s.excessTotal;
    st.excess.parts.clear();
    for (const auto& [idx, left] : s.forwarded) {
        ExcessPart part;
        part.child = v->children.at(idx).get();
        auto it = st.takes.find(idx);
        part.skipPrefix = it == st.takes.end() ? 0 : it->second;
        part.takeCount = left;
        st.excess.parts.push_back(std::move(part));
    }
    st.leafMatching = Matching{};
    st.costSubtree = childCost + st.implicitCost;
}

void match_node(RestrictedPTree& tree, PTreeNode* v) {
    if (v->isLeaf) {
        recompute_leaf(tree, v);
        return;
    }
    for (const auto& [idx, child] : v->children) match_node(tree, child.get());
    recompute_internal(tree, v);
}

std::vector<PointId> materialize_excess(const PTreeNode* v) {
    std::vector<PointId> out;
    append_excess(v, out);
    return out;
}

std::vector<std::pair<PointId, PointId>> explicit_matching(const RestrictedPTree& tree,
                                                           const PTreeNode* v) {
    (void)tree;
    std::map<int, std::vector<PointId>> pool;
    std::map<int, std::size_t> cursor;
    for (const auto& [idx, take] : v->state.takes) {
        std::vector<PointId> full = materialize_excess(v->children.at(idx).get());
        if (static_cast<std::int64_t>(full.size()) < take)
            throw Error("match invariant", "take exceeds child excess at subcell " +
                                               std::to_string(idx));
        full.resize(static_cast<std::size_t>(take));
        pool[idx] = std::move(full);
    }
    std::vector<std::pair<PointId, PointId>> out;
    for (const auto& [i, j, w] : v->state.implicitEdges)
        for (std::int64_t u = 0; u < w; ++u)
            out.emplace_back(pool[i][cursor[i]++], pool[j][cursor[j]++]);
    return out;
}

namespace {

void collect_edges(const RestrictedPTree& tree, const PTreeNode* v, Matching& m) {
    if (v->isLeaf) {
        m.edges.insert(m.edges.end(), v->state.leafMatching.edges.begin(),
                       v->state.leafMatching.edges.end());
        return;
    }
    const auto pairs = explicit_matching(tree, v);
    m.edges.insert(m.edges.end(), pairs.begin(), pairs.end());
    for (const auto& [idx, child] : v->children) collect_edges(tree, child.get(), m);
}

}  // namespace

Matching extract_full_matching(const RestrictedPTree& tree) {
    const PTreeNode* root = tree.root();
    if (root->state.excess.total != 0)
        throw Error("integrity",
                    "root excess holds " + std::to_string(root->state.excess.total) + " points");
    Matching m;
    collect_edges(tree, root, m);
    m.cost = matching_cost(tree.points(), m);
    return m;
}

StaticSolution static_matching_shifted(const std::vector<PointRecord>& raw, Point shift,
                                       const MatchConfig& cfg) {
    std::int64_t reds = 0, blues = 0;
    std::vector<PointRecord> recs;
    recs.reserve(raw.size());
    for (const PointRecord& r : raw) {
        (r.color == Color::Red ? reds : blues)++;
        recs.push_back(shifted_record(r.id, r.raw, r.color, shift, cfg.universe));
    }
    if (reds != blues)
        throw Error("size mismatch",
                    std::to_string(reds) + " reds vs " + std::to_string(blues) + " blues");
    StaticSolution sol;
    sol.shift = shift;
    sol.tree = build_tree(recs, cfg.p, cfg.universe);
    match_node(*sol.tree, sol.tree->root());
    sol.cost = sol.tree->root()->state.costSubtree;
    return sol;
}

StaticSolution static_matching(const std::vector<Point>& redRaw,
                               const std::vector<Point>& blueRaw, const MatchConfig& cfg) {
    std::vector<PointRecord> raw;
    PointId next = 0;
    for (const Point& p : redRaw) raw.push_back({next++, {}, p, Color::Red});
    for (const Point& p : blueRaw) raw.push_back({next++, {}, p, Color::Blue});
    return static_matching_shifted(raw, draw_shift(cfg.seed, cfg.universe), cfg);
}

namespace {

struct AuditCounts {
    std::int64_t red = 0;
    std::int64_t blue = 0;
};

AuditCounts audit_walk(const RestrictedPTree& tree, const PTreeNode* v,
                       std::vector<std::pair<PointId, PointId>>& allEdges) {
    const auto fail = [&](const std::string& what) {
        throw Error("match invariant", what + " at level " + std::to_string(v->cell.level) +
                                           " cell (" + std::to_string(v->cell.ix) + "," +
                                           std::to_string(v->cell.iy) + ")");
    };
    const NodeMatchState& st = v->state;
    AuditCounts counts;
    if (v->isLeaf) {
        for (PointId id : v->leafPoints)
            (tree.points().at(id).color == Color::Red ? counts.red : counts.blue)++;
        const double tol = kCostTol * (1.0 + std::abs(st.leafMatching.cost));
        if (std::abs(st.costSubtree - st.leafMatching.cost) > tol) fail("leaf cost");
        for (const auto& [r, b] : st.leafMatching.edges) {
            if (!v->cell.contains(tree.points().at(r).pos) ||
                !v->cell.contains(tree.points().at(b).pos))
                fail("leaf edge leaves the cell");
            allEdges.emplace_back(r, b);
        }
    } else {
        double childCost = 0.0;
        for (const auto& [idx, child] : v->children) {
            const AuditCounts c = audit_walk(tree, child.get(), allEdges);
            counts.red += c.red;
            counts.blue += c.blue;
            childCost += child->state.costSubtree;
        }
        const double expect = childCost + st.implicitCost;
        if (std::abs(st.costSubtree - expect) > kCostTol * (1.0 + std::abs(expect)))
            fail("cost additivity");
        // Implicit edge weights must sum to the stored takes per child.
        std::map<int, std::int64_t> sums;
        for (const auto& [i, j, w] : st.implicitEdges) {
            if (w <= 0) fail("nonpositive implicit weight");
            sums[i] += w;
            sums[j] += w;
        }
        if (sums != st.takes) fail("implicit weights vs takes");
        for (const auto& [r, b] : explicit_matching(tree, v)) {
            const PointRecord& rr = tree.points().at(r);
            const PointRecord& bb = tree.points().at(b);
            if (rr.color != Color::Red || bb.color != Color::Blue) fail("realized edge colors");
            if (!v->cell.contains(rr.pos) || !v->cell.contains(bb.pos))
                fail("realized edge leaves the cell");
            allEdges.emplace_back(r, b);
        }
    }
    if (counts.red != st.redCount || counts.blue != st.blueCount) fail("stored color counts");
    const std::vector<PointId> excess = materialize_excess(v);
    if (static_cast<std::int64_t>(excess.size()) != st.excess.total) fail("excess total");
    if (st.excess.total != std::llabs(counts.red - counts.blue)) fail("excess cardinality");
    int skips = 0;
    for (const ExcessPart& part : st.excess.parts)
        if (part.skipPrefix != 0) skips++;
    if (skips > 1) fail("more than one split child");
    std::uint64_t prevKey = 0;
    bool first = true;
    for (PointId id : excess) {
        const PointRecord& rec = tree.points().at(id);
        if (rec.color != st.excess.color) fail("excess not monochromatic");
        if (!v->cell.contains(rec.pos)) fail("excess point outside cell");
        const std::uint64_t key = tree.z_key(rec.pos);
        if (!first && key < prevKey) fail("excess not z-sorted");
        prevKey = key;
        first = false;
    }
    return counts;
}

}  // namespace

void audit_match_state(const RestrictedPTree& tree) {
    std::vector<std::pair<PointId, PointId>> edges;
    audit_walk(tree, tree.root(), edges);
    // Exclusivity: every live point is matched at most once, and exactly the
    // root excess stays unmatched.
    std::set<PointId> seen;
    for (const auto& [r, b] : edges) {
        if (!seen.insert(r).second)
            throw Error("match invariant", "point matched twice: " + std::to_string(r));
        if (!seen.insert(b).second)
            throw Error("match invariant", "point matched twice: " + std::to_string(b));
    }
    const std::int64_t unmatched =
        static_cast<std::int64_t>(tree.points().size()) - static_cast<std::int64_t>(seen.size());
    if (unmatched != tree.root()->state.excess.total)
        throw Error("match invariant", "unmatched count " + std::to_string(unmatched) +
                                           " differs from root excess");
}

}  // namespace dynmatch
