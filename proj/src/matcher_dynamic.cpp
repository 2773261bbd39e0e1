#include "dynmatch/dynamic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "dynmatch/augment.hpp"
#include "dynmatch/solvers.hpp"

namespace dynmatch {

DynamicMatcher::DynamicMatcher(const MatchConfig& cfg, Mode mode)
    : cfg_(cfg), mode_(mode), shift_(draw_shift(cfg.seed, cfg.universe)) {
    tree_ = std::make_unique<RestrictedPTree>(cfg_.p, cfg_.universe);
}

std::uint64_t DynamicMatcher::key_of(PointId id) const {
    auto it = tree_->points().find(id);
    if (it != tree_->points().end()) return tree_->z_key(it->second.pos);
    if (haveRemoved_ && id == lastRemovedId_) return lastRemovedKey_;
    throw Error("unknown id", std::to_string(id));
}

std::pair<std::uint64_t, PointId> DynamicMatcher::zpair(PointId id) const {
    return {key_of(id), id};
}

void DynamicMatcher::init(const std::vector<Point>& redRaw, const std::vector<Point>& blueRaw) {
    if (redRaw.size() != blueRaw.size())
        throw Error("size mismatch", std::to_string(redRaw.size()) + " reds vs " +
                                         std::to_string(blueRaw.size()) + " blues");
    if (nextId_ != 0) throw Error("state", "init on a non-empty matcher");
    std::vector<PointRecord> recs;
    for (const Point& p : redRaw)
        recs.push_back(shifted_record(nextId_++, p, Color::Red, shift_, cfg_.universe));
    for (const Point& p : blueRaw)
        recs.push_back(shifted_record(nextId_++, p, Color::Blue, shift_, cfg_.universe));
    tree_ = build_tree(recs, cfg_.p, cfg_.universe);
    match_node(*tree_, tree_->root());
    if (mode_ == Mode::Advanced) advanced_build(tree_->root(), false);
    if (audit_) audit();
}

double DynamicMatcher::query_cost() const { return tree_->root()->state.costSubtree; }

double DynamicMatcher::wasserstein_estimate() const {
    const std::size_t n = pairs();
    if (n == 0) throw Error("undefined", "wasserstein estimate of an empty instance");
    return query_cost() / static_cast<double>(n);
}

Matching DynamicMatcher::query_matching() const { return extract_full_matching(*tree_); }

namespace {

void collect_explicit(const PTreeNode* v, Matching& m) {
    if (v->isLeaf) {
        m.edges.insert(m.edges.end(), v->state.leafMatching.edges.begin(),
                       v->state.leafMatching.edges.end());
        return;
    }
    if (v->state.adv)
        for (const auto& [key, pairs] : v->state.adv->buckets)
            m.edges.insert(m.edges.end(), pairs.begin(), pairs.end());
    for (const auto& [idx, child] : v->children) collect_explicit(child.get(), m);
}

}  // namespace

Matching DynamicMatcher::query_matching_explicit() const {
    if (mode_ != Mode::Advanced)
        throw Error("unsupported", "explicit matching requires advanced mode");
    if (tree_->root()->state.excess.total != 0)
        throw Error("integrity", "root excess holds " +
                                     std::to_string(tree_->root()->state.excess.total) +
                                     " points");
    Matching m;
    collect_explicit(tree_->root(), m);
    m.cost = matching_cost(tree_->points(), m);
    return m;
}

const DynamicMatcher::Recourse& DynamicMatcher::query_recourse() const {
    if (mode_ != Mode::Advanced)
        throw Error("unsupported", "recourse tracking requires advanced mode");
    return recourse_;
}

std::size_t DynamicMatcher::live_points() const { return tree_->points().size(); }

int DynamicMatcher::depth_cap() const { return tree_->max_level() + 1; }

void DynamicMatcher::begin_pair_update() {
    edgeLog_.clear();
    recourse_ = Recourse{};
    haveRemoved_ = false;
}

void DynamicMatcher::finish_pair_update(UpdateReport& rep) {
    if (tree_->root()->state.excess.total != 0)
        throw Error("integrity", "unbalanced state after a pair update");
    for (const auto& [edge, delta] : edgeLog_) {
        if (delta > 0) recourse_.added.push_back(edge);
        if (delta < 0) recourse_.removed.push_back(edge);
    }
    recourse_.structural = rep.structural;
    rep.recourseAdded = static_cast<std::int64_t>(recourse_.added.size());
    rep.recourseRemoved = static_cast<std::int64_t>(recourse_.removed.size());
    if (audit_) audit();
}

void DynamicMatcher::log_edge(PointId r, PointId b, int delta) { edgeLog_[{r, b}] += delta; }

DynamicMatcher::UpdateReport DynamicMatcher::insert_pair(Point aRaw, Point bRaw) {
    begin_pair_update();
    UpdateReport rep;
    rep.idA = nextId_++;
    rep.idB = nextId_++;
    single_insert(shifted_record(rep.idA, aRaw, Color::Red, shift_, cfg_.universe), rep);
    single_insert(shifted_record(rep.idB, bRaw, Color::Blue, shift_, cfg_.universe), rep);
    finish_pair_update(rep);
    return rep;
}

DynamicMatcher::UpdateReport DynamicMatcher::delete_pair(PointId idA, PointId idB) {
    begin_pair_update();
    UpdateReport rep;
    rep.idA = idA;
    rep.idB = idB;
    single_delete(idA, Color::Red, rep);
    single_delete(idB, Color::Blue, rep);
    finish_pair_update(rep);
    return rep;
}

void DynamicMatcher::single_insert(const PointRecord& rec, UpdateReport& rep) {
    if (mode_ == Mode::Advanced) {
        // A leaf about to exceed capacity gets rebuilt wholesale; its old
        // matching dies with it.
        const auto path = tree_->locate_path(rec.pos);
        const PTreeNode* leaf = nullptr;
        bool willSplit = false;
        if (!path.empty() && path.back()->isLeaf) {
            leaf = path.back();
            willSplit = leaf->pointCount >= tree_->capacity() && leaf->cell.side >= cfg_.p;
        } else if (path.empty() && tree_->root()->isLeaf) {
            // Re-anchoring lifts the root to a cell of side >= p.
            leaf = tree_->root();
            willSplit = leaf->pointCount >= tree_->capacity();
        }
        if (willSplit)
            for (const auto& [r, b] : leaf->state.leafMatching.edges) log_edge(r, b, -1);
    }
    const StructuralEvents ev = tree_->insert_point(rec);
    rep.structural |= ev.collapsed || ev.newSubroot != nullptr || ev.rootChanged;
    process_events(ev, rec.pos, true, rec.id, rep);
}

void DynamicMatcher::single_delete(PointId id, Color expect, UpdateReport& rep) {
    auto it = tree_->points().find(id);
    if (it == tree_->points().end()) throw Error("unknown id", std::to_string(id));
    if (it->second.color != expect)
        throw Error("color mismatch", "id " + std::to_string(id) + " is not " +
                                          to_string(expect));
    const Point pos = it->second.pos;
    lastRemovedId_ = id;
    lastRemovedKey_ = tree_->z_key(pos);
    lastRemovedColor_ = expect;
    haveRemoved_ = true;

    if (mode_ == Mode::Advanced) {
        // Pre-log edges that die with nodes the delete will merge or discard
        // (mirrors the tree's normalization rules).
        const auto path = tree_->locate_path(pos);
        const std::int64_t cap = tree_->capacity();
        const PTreeNode* prunedParent = nullptr;
        if (path.back()->isLeaf && path.back()->pointCount == 1 && path.size() >= 2)
            prunedParent = path[path.size() - 2];
        const PTreeNode* root = path.front();
        if (!root->isLeaf && root->pointCount - 1 <= cap) {
            snapshot_removed_edges(root);  // root collapses into a leaf
        } else if (!root->isLeaf && prunedParent == root && root->children.size() == 2) {
            // Root descends; the discarded shell loses its realized pairs.
            if (root->state.adv)
                for (const auto& [key, pairs] : root->state.adv->buckets)
                    for (const auto& [r, b] : pairs) log_edge(r, b, -1);
        } else {
            for (std::size_t i = 1; i < path.size(); ++i) {
                const PTreeNode* nd = path[i];
                if (nd->isLeaf) break;
                if (nd->pointCount - 1 <= cap) {
                    snapshot_removed_edges(nd);
                    break;
                }
            }
        }
    }

    const StructuralEvents ev = tree_->delete_point(id);
    rep.structural |= ev.collapsed || ev.newSubroot != nullptr || ev.rootChanged;
    process_events(ev, pos, false, id, rep);
}

void DynamicMatcher::snapshot_removed_edges(const PTreeNode* v) {
    if (v->isLeaf) {
        for (const auto& [r, b] : v->state.leafMatching.edges) log_edge(r, b, -1);
        return;
    }
    if (v->state.adv)
        for (const auto& [key, pairs] : v->state.adv->buckets)
            for (const auto& [r, b] : pairs) log_edge(r, b, -1);
    for (const auto& [idx, child] : v->children) snapshot_removed_edges(child.get());
}

void DynamicMatcher::process_events(const StructuralEvents& ev, const Point& pos, bool isInsert,
                                    PointId id, UpdateReport& rep) {
    if (mode_ == Mode::Basic) {
        for (const StructuralEvent& e : ev.order) {
            rep.touchedNodes++;
            switch (e.kind) {
                case StructuralEvent::Kind::Leaf: recompute_leaf(*tree_, e.node); break;
                case StructuralEvent::Kind::Internal: recompute_internal(*tree_, e.node); break;
                case StructuralEvent::Kind::Subtree: match_node(*tree_, e.node); break;
            }
        }
        return;
    }

    bool resync = ev.collapsed;
    ExcessDelta delta;
    const PTreeNode* prev = nullptr;
    for (const StructuralEvent& e : ev.order) {
        rep.touchedNodes++;
        switch (e.kind) {
            case StructuralEvent::Kind::Leaf:
                delta = advanced_leaf(e.node);
                break;
            case StructuralEvent::Kind::Subtree:
                match_node(*tree_, e.node);
                advanced_build(e.node, true);
                resync = true;
                break;
            case StructuralEvent::Kind::Internal:
                if (resync || !e.node->state.adv) {
                    advanced_rebuild_internal(e.node);
                    resync = true;
                } else {
                    int childIdx = -1;
                    if (prev) {
                        const Point probe{prev->cell.ix * prev->cell.side,
                                          prev->cell.iy * prev->cell.side};
                        childIdx = subcell_index(e.node->cell, probe, cfg_.p);
                    } else if (e.node->cell.contains(pos)) {
                        // Bottom of a deletion path whose leaf was pruned.
                        childIdx = subcell_index(e.node->cell, pos, cfg_.p);
                        delta.removed.push_back(id);
                        (void)isInsert;
                    }
                    delta = advanced_repair(e.node, childIdx, delta);
                }
                break;
        }
        prev = e.node;
    }
}

DynamicMatcher::ExcessDelta DynamicMatcher::advanced_leaf(PTreeNode* v) {
    const std::vector<PointId> oldExcess = materialize_excess(v);
    const std::vector<std::pair<PointId, PointId>> oldEdges = v->state.leafMatching.edges;
    recompute_leaf(*tree_, v);
    if (!v->state.adv) v->state.adv = std::make_unique<AdvancedNodeState>();

    const std::set<std::pair<PointId, PointId>> oldSet(oldEdges.begin(), oldEdges.end());
    std::set<std::pair<PointId, PointId>> newSet(v->state.leafMatching.edges.begin(),
                                                 v->state.leafMatching.edges.end());
    for (const auto& e : oldSet)
        if (!newSet.count(e)) log_edge(e.first, e.second, -1);
    for (const auto& e : newSet)
        if (!oldSet.count(e)) log_edge(e.first, e.second, +1);

    ExcessDelta delta;
    const std::vector<PointId> newExcess = materialize_excess(v);
    const std::set<PointId> oldIds(oldExcess.begin(), oldExcess.end());
    const std::set<PointId> newIds(newExcess.begin(), newExcess.end());
    for (PointId p : oldIds)
        if (!newIds.count(p)) delta.removed.push_back(p);
    for (PointId p : newIds)
        if (!oldIds.count(p)) delta.added.push_back(p);
    return delta;
}

namespace {

void build_pools_and_buckets(DynamicMatcher* self, RestrictedPTree& tree, PTreeNode* v,
                             bool logEdges,
                             const std::function<void(PointId, PointId, int)>& logFn) {
    (void)self;
    (void)tree;
    auto adv = std::make_unique<AdvancedNodeState>();
    std::map<int, std::vector<PointId>> fullExcess;
    for (const auto& [idx, child] : v->children)
        if (child->state.excess.total > 0) fullExcess[idx] = materialize_excess(child.get());

    for (const auto& [idx, ids] : fullExcess) {
        auto it = v->state.takes.find(idx);
        const std::int64_t take = it == v->state.takes.end() ? 0 : it->second;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto zp = std::make_pair(tree.z_key(tree.points().at(ids[i]).pos), ids[i]);
            if (static_cast<std::int64_t>(i) < take)
                adv->matched[idx].insert(zp);
            else
                adv->forwarded[idx].insert(zp);
        }
    }
    std::map<int, std::size_t> cursor;
    for (const auto& [i, j, w] : v->state.implicitEdges) {
        for (std::int64_t u = 0; u < w; ++u) {
            const PointId r = fullExcess.at(i)[cursor[i]++];
            const PointId b = fullExcess.at(j)[cursor[j]++];
            adv->buckets[{i, j}].emplace_back(r, b);
            if (logEdges) logFn(r, b, +1);
        }
    }
    v->state.adv = std::move(adv);
}

}  // namespace

void DynamicMatcher::advanced_build(PTreeNode* v, bool logEdges) {
    if (v->isLeaf) {
        v->state.adv = std::make_unique<AdvancedNodeState>();
        if (logEdges)
            for (const auto& [r, b] : v->state.leafMatching.edges) log_edge(r, b, +1);
        return;
    }
    for (const auto& [idx, child] : v->children) advanced_build(child.get(), logEdges);
    build_pools_and_buckets(this, *tree_, v, logEdges,
                            [this](PointId r, PointId b, int d) { log_edge(r, b, d); });
}

void DynamicMatcher::advanced_rebuild_internal(PTreeNode* v) {
    if (v->state.adv)
        for (const auto& [key, pairs] : v->state.adv->buckets)
            for (const auto& [r, b] : pairs) log_edge(r, b, -1);
    recompute_internal(*tree_, v);
    build_pools_and_buckets(this, *tree_, v, true,
                            [this](PointId r, PointId b, int d) { log_edge(r, b, d); });
}

DynamicMatcher::ExcessDelta DynamicMatcher::advanced_repair(PTreeNode* v, int childIdx,
                                                            const ExcessDelta& delta) {
    AdvancedNodeState& adv = *v->state.adv;
    NodeMatchState& st = v->state;
    ExcessDelta out;

    const std::map<int, std::int64_t> oldTakes = st.takes;
    const ZScan scan = scan_children(v);

    struct ChildEvents {
        std::vector<PointId> entered, left;
    };
    std::map<int, ChildEvents> events;

    // ---- pool bookkeeping: apply the child's identity delta, then restore
    // the matched-prefix/forwarded-suffix split against the new takes.
    if (childIdx >= 0) {
        ZSet& pool = adv.matched[childIdx];
        ZSet& fwd = adv.forwarded[childIdx];
        for (PointId id : delta.removed) {
            const auto zp = zpair(id);
            if (pool.erase(zp)) {
                events[childIdx].left.push_back(id);
            } else if (fwd.erase(zp)) {
                out.removed.push_back(id);
            } else {
                throw Error("match invariant", "departing excess id " + std::to_string(id) +
                                                   " missing from pools");
            }
        }
        for (PointId id : delta.added) {
            const auto zp = zpair(id);
            if (fwd.empty() || zp < *fwd.begin()) {
                adv.matched[childIdx].insert(zp);
                events[childIdx].entered.push_back(id);
            } else {
                fwd.insert(zp);
                out.added.push_back(id);
            }
        }
    }

    std::set<int> touched;
    if (childIdx >= 0) touched.insert(childIdx);
    for (const auto& [c, t] : oldTakes) touched.insert(c);
    for (const auto& [c, t] : scan.takes) touched.insert(c);
    for (int c : touched) {
        auto it = scan.takes.find(c);
        const std::int64_t target = it == scan.takes.end() ? 0 : it->second;
        ZSet& pool = adv.matched[c];
        ZSet& fwd = adv.forwarded[c];
        while (static_cast<std::int64_t>(pool.size()) > target) {
            auto last = std::prev(pool.end());
            const PointId id = last->second;
            fwd.insert(*last);
            pool.erase(last);
            events[c].left.push_back(id);
            out.added.push_back(id);
        }
        while (static_cast<std::int64_t>(pool.size()) < target) {
            if (fwd.empty())
                throw Error("match invariant", "pool shortfall with empty forward set");
            auto first = fwd.begin();
            const PointId id = first->second;
            pool.insert(*first);
            fwd.erase(first);
            events[c].entered.push_back(id);
            out.removed.push_back(id);
        }
    }

    // ---- classify per-child identity events into swaps and count deltas.
    struct Delta1 {
        int child;
        PointId id;
    };
    std::vector<Delta1> redPlus, redMinus, bluePlus, blueMinus;
    std::vector<std::tuple<int, PointId, PointId>> swaps;  // child, leftId, enteredId

    const auto colorOf = [&](PointId id) -> Color {
        auto it = tree_->points().find(id);
        if (it != tree_->points().end()) return it->second.color;
        // Only the just-deleted point can be absent; its pool color equals
        // the color recorded in the excess it left.
        return lastRemovedColor_;
    };

    for (auto& [c, evts] : events) {
        // Cancel ids that entered and left within the same repair.
        std::sort(evts.entered.begin(), evts.entered.end());
        std::sort(evts.left.begin(), evts.left.end());
        std::vector<PointId> enter2, left2;
        std::set_difference(evts.entered.begin(), evts.entered.end(), evts.left.begin(),
                            evts.left.end(), std::back_inserter(enter2));
        std::set_difference(evts.left.begin(), evts.left.end(), evts.entered.begin(),
                            evts.entered.end(), std::back_inserter(left2));
        auto oit = oldTakes.find(c);
        auto nit = scan.takes.find(c);
        const std::int64_t diff = (nit == scan.takes.end() ? 0 : nit->second) -
                                  (oit == oldTakes.end() ? 0 : oit->second);
        if (static_cast<std::int64_t>(enter2.size()) - static_cast<std::int64_t>(left2.size()) !=
            diff)
            throw Error("match invariant", "pool events disagree with take delta");
        const std::size_t k = std::min(enter2.size(), left2.size());
        for (std::size_t i = 0; i < k; ++i) swaps.emplace_back(c, left2[i], enter2[i]);
        for (std::size_t i = k; i < enter2.size(); ++i) {
            const Delta1 d{c, enter2[i]};
            (colorOf(d.id) == Color::Red ? redPlus : bluePlus).push_back(d);
        }
        for (std::size_t i = k; i < left2.size(); ++i) {
            const Delta1 d{c, left2[i]};
            (colorOf(d.id) == Color::Red ? redMinus : blueMinus).push_back(d);
        }
    }

    // ---- gamma* mirror over child cell centers.
    ImplicitMatching mirror;
    std::map<int, int> redIx, blueIx;
    std::vector<int> redChild, blueChild;
    const auto centerOf = [&](int c) { return child_cell(v->cell, c, cfg_.p).center(); };
    const auto regRed = [&](int c) {
        if (!redIx.count(c)) {
            redIx[c] = static_cast<int>(mirror.redLoc.size());
            mirror.redLoc.push_back(centerOf(c));
            redChild.push_back(c);
        }
        return redIx[c];
    };
    const auto regBlue = [&](int c) {
        if (!blueIx.count(c)) {
            blueIx[c] = static_cast<int>(mirror.blueLoc.size());
            mirror.blueLoc.push_back(centerOf(c));
            blueChild.push_back(c);
        }
        return blueIx[c];
    };
    for (const auto& [key, pairs] : adv.buckets) {
        mirror.weight[{regRed(key.first), regBlue(key.second)}] =
            static_cast<std::int64_t>(pairs.size());
    }

    // ---- realization primitives over the concrete buckets.
    const auto bucketPush = [&](int i, int j, PointId r, PointId b) {
        adv.buckets[{i, j}].emplace_back(r, b);
        log_edge(r, b, +1);
    };
    const auto bucketPop = [&](int i, int j, std::size_t pos) {
        auto it = adv.buckets.find({i, j});
        if (it == adv.buckets.end() || pos >= it->second.size())
            throw Error("match invariant", "bucket pop out of range");
        const auto pr = it->second[pos];
        it->second.erase(it->second.begin() + static_cast<std::ptrdiff_t>(pos));
        if (it->second.empty()) adv.buckets.erase(it);
        log_edge(pr.first, pr.second, -1);
        return pr;
    };
    const auto findRed = [&](int i, int j, PointId r) -> int {
        auto it = adv.buckets.find({i, j});
        if (it == adv.buckets.end()) return -1;
        for (std::size_t p = 0; p < it->second.size(); ++p)
            if (it->second[p].first == r) return static_cast<int>(p);
        return -1;
    };
    const auto findBlue = [&](int i, int j, PointId b) -> int {
        auto it = adv.buckets.find({i, j});
        if (it == adv.buckets.end()) return -1;
        for (std::size_t p = 0; p < it->second.size(); ++p)
            if (it->second[p].second == b) return static_cast<int>(p);
        return -1;
    };
    const auto findRedAnywhere = [&](int i, PointId r) -> std::pair<int, int> {
        for (const auto& [key, pairs] : adv.buckets) {
            if (key.first != i) continue;
            for (std::size_t p = 0; p < pairs.size(); ++p)
                if (pairs[p].first == r) return {key.second, static_cast<int>(p)};
        }
        throw Error("match invariant", "matched red id has no realized pair");
    };
    const auto findBlueAnywhere = [&](int j, PointId b) -> std::pair<int, int> {
        for (const auto& [key, pairs] : adv.buckets) {
            if (key.second != j) continue;
            for (std::size_t p = 0; p < pairs.size(); ++p)
                if (pairs[p].second == b) return {key.first, static_cast<int>(p)};
        }
        throw Error("match invariant", "matched blue id has no realized pair");
    };
    // Move red r (matched in child i) into bucket (i, j) by exchanging
    // realization partners within child i.
    const auto ensureRedIn = [&](int i, PointId r, int j) {
        if (findRed(i, j, r) >= 0) return;
        const auto [j1, p1] = findRedAnywhere(i, r);
        const auto a = bucketPop(i, j1, static_cast<std::size_t>(p1));  // (r, u)
        const auto b = bucketPop(i, j, 0);                              // (r2, u2)
        bucketPush(i, j1, b.first, a.second);
        bucketPush(i, j, a.first, b.second);
    };
    const auto ensureBlueIn = [&](int j, PointId b, int i) {
        if (findBlue(i, j, b) >= 0) return;
        const auto [i1, p1] = findBlueAnywhere(j, b);
        const auto a = bucketPop(i1, j, static_cast<std::size_t>(p1));  // (s, b)
        const auto c = bucketPop(i, j, 0);                              // (r2, u2)
        bucketPush(i1, j, a.first, c.second);
        bucketPush(i, j, c.first, a.second);
    };
    // Make (r, b) a concrete pair of bucket (i, j).
    const auto ensurePairIn = [&](int i, int j, PointId r, PointId b) {
        ensureRedIn(i, r, j);
        ensureBlueIn(j, b, i);
        const int pr = findRed(i, j, r);
        const int pb = findBlue(i, j, b);
        if (pr < 0 || pb < 0) throw Error("match invariant", "pair realization failed");
        if (pr == pb) return;
        const auto a = bucketPop(i, j, static_cast<std::size_t>(std::max(pr, pb)));
        const auto c = bucketPop(i, j, static_cast<std::size_t>(std::min(pr, pb)));
        bucketPush(i, j, r, b);
        bucketPush(i, j, a.first == r ? c.first : a.first, a.second == b ? c.second : a.second);
    };

    const auto realizeAugment = [&](int cRed, PointId er, int cBlue, PointId eb) {
        const int x = regRed(cRed);
        const int y = regBlue(cBlue);
        const std::vector<PathStep> steps = augment_matching(mirror, x, y);
        std::vector<std::pair<PointId, PointId>> freed;
        for (const PathStep& s : steps)
            if (s.delta < 0) freed.push_back(bucketPop(redChild[s.red], blueChild[s.blue], 0));
        std::size_t plusIdx = 0;
        const std::size_t totalPlus = freed.size() + 1;
        for (const PathStep& s : steps) {
            if (s.delta < 0) continue;
            const PointId r = plusIdx == 0 ? er : freed[plusIdx - 1].first;
            const PointId b = plusIdx + 1 == totalPlus ? eb : freed[plusIdx].second;
            bucketPush(redChild[s.red], blueChild[s.blue], r, b);
            plusIdx++;
        }
        if (plusIdx != totalPlus)
            throw Error("match invariant", "augmenting path has malformed arc parity");
    };

    const auto smallestBlueFor = [&](int i) -> int {
        for (const auto& [key, pairs] : adv.buckets)
            if (key.first == i) return key.second;
        throw Error("match invariant", "red child has no matched bucket");
    };
    const auto smallestRedFor = [&](int j) -> int {
        int best = -1;
        for (const auto& [key, pairs] : adv.buckets)
            if (key.second == j && (best < 0 || key.first < best)) best = key.first;
        if (best < 0) throw Error("match invariant", "blue child has no matched bucket");
        return best;
    };

    // ---- apply identity swaps (gamma* untouched).
    for (const auto& [c, leftId, enterId] : swaps) {
        if (colorOf(enterId) == Color::Red) {
            const auto [j, p] = findRedAnywhere(c, leftId);
            const auto pr = bucketPop(c, j, static_cast<std::size_t>(p));
            bucketPush(c, j, enterId, pr.second);
        } else {
            const auto [i, p] = findBlueAnywhere(c, leftId);
            const auto pr = bucketPop(i, c, static_cast<std::size_t>(p));
            bucketPush(i, c, pr.first, enterId);
        }
    }

    // ---- repair gamma* to the new takes, case by case.
    while (!redMinus.empty() && !blueMinus.empty()) {
        const Delta1 rm = redMinus.back();
        redMinus.pop_back();
        const Delta1 bm = blueMinus.back();
        blueMinus.pop_back();
        if (adv.buckets.count({rm.child, bm.child})) {
            remove_unit(mirror, redIx.at(rm.child), blueIx.at(bm.child));
            ensurePairIn(rm.child, bm.child, rm.id, bm.id);
            const int p = findRed(rm.child, bm.child, rm.id);
            bucketPop(rm.child, bm.child, static_cast<std::size_t>(p));
        } else {
            const int jHat = smallestBlueFor(rm.child);
            const int iHat = smallestRedFor(bm.child);
            remove_unit(mirror, redIx.at(rm.child), blueIx.at(jHat));
            remove_unit(mirror, redIx.at(iHat), blueIx.at(bm.child));
            ensureRedIn(rm.child, rm.id, jHat);
            const auto freedB =
                bucketPop(rm.child, jHat,
                          static_cast<std::size_t>(findRed(rm.child, jHat, rm.id)));
            ensureBlueIn(bm.child, bm.id, iHat);
            const auto freedR =
                bucketPop(iHat, bm.child,
                          static_cast<std::size_t>(findBlue(iHat, bm.child, bm.id)));
            realizeAugment(iHat, freedR.first, jHat, freedB.second);
        }
    }
    while (!redMinus.empty() && !redPlus.empty()) {
        const Delta1 rm = redMinus.back();
        redMinus.pop_back();
        const Delta1 rp = redPlus.back();
        redPlus.pop_back();
        const int j = smallestBlueFor(rm.child);
        remove_unit(mirror, redIx.at(rm.child), blueIx.at(j));
        ensureRedIn(rm.child, rm.id, j);
        const auto freed =
            bucketPop(rm.child, j, static_cast<std::size_t>(findRed(rm.child, j, rm.id)));
        realizeAugment(rp.child, rp.id, j, freed.second);
    }
    while (!blueMinus.empty() && !bluePlus.empty()) {
        const Delta1 bm = blueMinus.back();
        blueMinus.pop_back();
        const Delta1 bp = bluePlus.back();
        bluePlus.pop_back();
        const int i = smallestRedFor(bm.child);
        remove_unit(mirror, redIx.at(i), blueIx.at(bm.child));
        ensureBlueIn(bm.child, bm.id, i);
        const auto freed =
            bucketPop(i, bm.child, static_cast<std::size_t>(findBlue(i, bm.child, bm.id)));
        realizeAugment(i, freed.first, bp.child, bp.id);
    }
    while (!redPlus.empty() && !bluePlus.empty()) {
        const Delta1 rp = redPlus.back();
        redPlus.pop_back();
        const Delta1 bp = bluePlus.back();
        bluePlus.pop_back();
        realizeAugment(rp.child, rp.id, bp.child, bp.id);
    }
    if (!redPlus.empty() || !redMinus.empty() || !bluePlus.empty() || !blueMinus.empty())
        throw Error("match invariant", "unbalanced take deltas after repair");

    // ---- refresh the maintained node state from the repaired realization.
    st.redCount = 0;
    st.blueCount = 0;
    double childCost = 0.0;
    for (const auto& [idx, child] : v->children) {
        st.redCount += child->state.redCount;
        st.blueCount += child->state.blueCount;
        childCost += child->state.costSubtree;
    }
    st.takes = scan.takes;
    st.implicitEdges.clear();
    st.implicitCost = 0.0;
    for (const auto& [key, pairs] : adv.buckets) {
        const std::int64_t w = static_cast<std::int64_t>(pairs.size());
        st.implicitEdges.emplace_back(key.first, key.second, w);
        st.implicitCost +=
            static_cast<double>(w) * distance(centerOf(key.first), centerOf(key.second));
    }
    st.excess.color = scan.excessColor;
    st.excess.total = scan.excessTotal;
    st.excess.parts.clear();
    for (const auto& [idx, left] : scan.forwarded) {
        ExcessPart part;
        part.child = v->children.at(idx).get();
        auto it = st.takes.find(idx);
        part.skipPrefix = it == st.takes.end() ? 0 : it->second;
        part.takeCount = left;
        st.excess.parts.push_back(std::move(part));
    }
    st.costSubtree = childCost + st.implicitCost;

    // Net out ids that both entered and exited E_v during this repair.
    std::sort(out.removed.begin(), out.removed.end());
    std::sort(out.added.begin(), out.added.end());
    ExcessDelta net;
    std::set_difference(out.removed.begin(), out.removed.end(), out.added.begin(),
                        out.added.end(), std::back_inserter(net.removed));
    std::set_difference(out.added.begin(), out.added.end(), out.removed.begin(),
                        out.removed.end(), std::back_inserter(net.added));
    return net;
}

void DynamicMatcher::advanced_audit_node(const PTreeNode* v) const {
    const auto fail = [&](const std::string& what) {
        throw Error("match invariant", what + " (advanced) at level " +
                                           std::to_string(v->cell.level));
    };
    if (!v->state.adv) fail("missing advanced state");
    if (v->isLeaf) return;
    const AdvancedNodeState& adv = *v->state.adv;
    for (const auto& [idx, child] : v->children) {
        const std::vector<PointId> excess = materialize_excess(child.get());
        auto it = v->state.takes.find(idx);
        const std::int64_t take = it == v->state.takes.end() ? 0 : it->second;
        ZSet wantPool, wantFwd;
        for (std::size_t i = 0; i < excess.size(); ++i) {
            const auto zp =
                std::make_pair(tree_->z_key(tree_->points().at(excess[i]).pos), excess[i]);
            (static_cast<std::int64_t>(i) < take ? wantPool : wantFwd).insert(zp);
        }
        auto pit = adv.matched.find(idx);
        const ZSet empty;
        const ZSet& havePool = pit == adv.matched.end() ? empty : pit->second;
        auto fit = adv.forwarded.find(idx);
        const ZSet& haveFwd = fit == adv.forwarded.end() ? empty : fit->second;
        if (havePool != wantPool) fail("matched pool is not the child excess prefix");
        if (haveFwd != wantFwd) fail("forwarded pool is not the child excess suffix");
    }
    std::map<std::pair<int, int>, std::int64_t> weights;
    for (const auto& [i, j, w] : v->state.implicitEdges) weights[{i, j}] = w;
    std::map<std::pair<int, int>, std::int64_t> realized;
    for (const auto& [key, pairs] : adv.buckets) {
        realized[key] = static_cast<std::int64_t>(pairs.size());
        for (const auto& [r, b] : pairs) {
            if (!adv.matched.count(key.first) ||
                !adv.matched.at(key.first).count(zpair(r)))
                fail("realized red outside its pool");
            if (!adv.matched.count(key.second) ||
                !adv.matched.at(key.second).count(zpair(b)))
                fail("realized blue outside its pool");
        }
    }
    if (weights != realized) fail("bucket sizes disagree with implicit weights");

    // Optimality: the maintained implicit cost must equal a fresh solve.
    const ZScan scan = scan_children(v);
    std::vector<int> sc, dc;
    const TransportInstance inst = aggregate_instance(v, scan, sc, dc);
    const Assignment fresh = solve_transport(inst);
    if (std::abs(fresh.cost - v->state.implicitCost) > 1e-7 * (1.0 + std::abs(fresh.cost)))
        fail("implicit matching no longer optimal");
}

namespace {

void advanced_audit_walk(const DynamicMatcher* m,
                         const std::function<void(const PTreeNode*)>& check,
                         const PTreeNode* v) {
    (void)m;
    check(v);
    for (const auto& [idx, child] : v->children) advanced_audit_walk(m, check, child.get());
}

}  // namespace

void DynamicMatcher::audit() const {
    tree_->audit();
    audit_match_state(*tree_);
    if (mode_ == Mode::Advanced)
        advanced_audit_walk(this, [this](const PTreeNode* v) { advanced_audit_node(v); },
                            tree_->root());
}

}  // namespace dynmatch
