#include "dynmatch/ptree.hpp"

#include <algorithm>
#include <bit>

namespace dynmatch {

namespace {

bool power_of_two(Coord v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_of(Coord v) { return std::bit_width(static_cast<std::uint64_t>(v)) - 1; }

std::unique_ptr<PTreeNode> make_node(const Cell& cell, PTreeNode* parent) {
    auto node = std::make_unique<PTreeNode>();
    node->cell = cell;
    node->parent = parent;
    return node;
}

}  // namespace

int subcell_index(const Cell& cell, const Point& p, Coord branching) {
    if (!cell.contains(p))
        throw Error("out of cell", "point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                                       ") outside cell at level " + std::to_string(cell.level));
    const Coord childSide = cell.side / branching;
    if (childSide < 1) throw Error("out of cell", "cell too small to subdivide");
    const Coord col = (p.x - cell.ix * cell.side) / childSide;
    const Coord row = (p.y - cell.iy * cell.side) / childSide;
    return static_cast<int>(row * branching + col);
}

Cell child_cell(const Cell& cell, int index, Coord branching) {
    const Coord row = index / branching;
    const Coord col = index % branching;
    return Cell{cell.level + 1, cell.ix * branching + col, cell.iy * branching + row,
                cell.side / branching};
}

std::uint64_t z_key(const Point& p, Coord universe, Coord branching) {
    const int logD = log2_of(universe);
    const int b = log2_of(branching);
    const int levels = logD / b;
    const auto ux = static_cast<std::uint64_t>(p.x);
    const auto uy = static_cast<std::uint64_t>(p.y);
    const std::uint64_t mask = static_cast<std::uint64_t>(branching) - 1;
    std::uint64_t key = 0;
    int shift = logD;
    for (int l = 0; l < levels; ++l) {
        shift -= b;
        key = (key << b) | ((uy >> shift) & mask);
        key = (key << b) | ((ux >> shift) & mask);
    }
    // Residual coordinate bits when log2(universe) is not a multiple of log2(p).
    const std::uint64_t rmask = (std::uint64_t{1} << shift) - 1;
    key = (key << shift) | (uy & rmask);
    key = (key << shift) | (ux & rmask);
    return key;
}

RestrictedPTree::RestrictedPTree(Coord branching, Coord universe)
    : p_(branching), universe_(universe) {
    if (!power_of_two(branching) || branching < 2)
        throw Error("bad parameter", "branching must be a power of two >= 2");
    if (!power_of_two(universe) || universe < branching)
        throw Error("bad parameter", "universe side must be a power of two >= branching");
    logP_ = log2_of(branching);
    maxLevel_ = log2_of(universe) / logP_;
    root_ = make_node(Cell{0, 0, 0, universe_}, nullptr);
}

Coord RestrictedPTree::side_at(int level) const { return universe_ >> (logP_ * level); }

bool RestrictedPTree::z_less(PointId a, PointId b) const {
    const std::uint64_t ka = z_key(points_.at(a).pos);
    const std::uint64_t kb = z_key(points_.at(b).pos);
    return ka != kb ? ka < kb : a < b;
}

Cell RestrictedPTree::minimal_cell_of_bbox(Coord minX, Coord maxX, Coord minY, Coord maxY) const {
    for (int level = maxLevel_; level >= 0; --level) {
        const Coord side = side_at(level);
        if (minX / side == maxX / side && minY / side == maxY / side)
            return Cell{level, minX / side, minY / side, side};
    }
    throw Error("internal", "no enclosing cell");  // unreachable: level 0 spans the universe
}

Cell RestrictedPTree::minimal_cell(const std::vector<PointId>& ids) const {
    Coord minX = universe_, maxX = -1, minY = universe_, maxY = -1;
    for (PointId id : ids) {
        const Point& pos = points_.at(id).pos;
        minX = std::min(minX, pos.x);
        maxX = std::max(maxX, pos.x);
        minY = std::min(minY, pos.y);
        maxY = std::max(maxY, pos.y);
    }
    if (ids.empty()) throw Error("internal", "minimal cell of empty set");
    return minimal_cell_of_bbox(minX, maxX, minY, maxY);
}

void RestrictedPTree::split_leaf(PTreeNode* node) {
    node->isLeaf = false;
    for (PointId id : node->leafPoints) {
        const Point& pos = points_.at(id).pos;
        const int idx = subcell_index(node->cell, pos, p_);
        auto& slot = node->children[idx];
        if (!slot) slot = make_node(child_cell(node->cell, idx, p_), node);
        slot->leafPoints.push_back(id);
        slot->pointCount++;
    }
    node->leafPoints.clear();
    node->state = NodeMatchState{};
    for (auto& [idx, child] : node->children)
        if (child->pointCount > capacity() && child->cell.side >= p_) split_leaf(child.get());
}

void RestrictedPTree::gather_ids(const PTreeNode* node, std::vector<PointId>& out) const {
    if (node->isLeaf) {
        out.insert(out.end(), node->leafPoints.begin(), node->leafPoints.end());
        return;
    }
    for (const auto& [idx, child] : node->children) gather_ids(child.get(), out);
}

void RestrictedPTree::collapse_to_leaf(PTreeNode* node) {
    std::vector<PointId> ids;
    gather_ids(node, ids);
    node->children.clear();
    node->isLeaf = true;
    node->leafPoints = std::move(ids);
    node->state = NodeMatchState{};
}

StructuralEvents RestrictedPTree::insert_point(const PointRecord& rec) {
    if (points_.count(rec.id)) throw Error("duplicate id", std::to_string(rec.id));
    if (rec.pos.x < 0 || rec.pos.x >= universe_ || rec.pos.y < 0 || rec.pos.y >= universe_)
        throw Error("out of universe", "shifted position (" + std::to_string(rec.pos.x) + "," +
                                           std::to_string(rec.pos.y) + ")");
    points_.emplace(rec.id, rec);

    StructuralEvents ev;
    if (points_.size() == 1) {
        PTreeNode* r = root_.get();
        r->cell = minimal_cell_of_bbox(rec.pos.x, rec.pos.x, rec.pos.y, rec.pos.y);
        r->leafPoints.push_back(rec.id);
        r->pointCount = 1;
        r->state = NodeMatchState{};
        ev.rootChanged = true;
        ev.order.push_back({StructuralEvent::Kind::Leaf, r});
        return ev;
    }

    std::vector<PTreeNode*> chain;  // fresh pass-through internals, bottom-up
    if (!root_->cell.contains(rec.pos)) {
        const Cell old = root_->cell;
        const Cell anc = minimal_cell_of_bbox(std::min(old.ix * old.side, rec.pos.x),
                                              std::max((old.ix + 1) * old.side - 1, rec.pos.x),
                                              std::min(old.iy * old.side, rec.pos.y),
                                              std::max((old.iy + 1) * old.side - 1, rec.pos.y));
        ev.rootChanged = true;
        if (root_->isLeaf) {
            root_->cell = anc;  // re-anchored; split below once the point lands
        } else {
            auto oldRoot = std::move(root_);
            root_ = make_node(anc, nullptr);
            root_->isLeaf = false;
            root_->pointCount = oldRoot->pointCount;
            PTreeNode* cur = root_.get();
            const Point probe{old.ix * old.side, old.iy * old.side};
            for (int level = anc.level + 1; level < old.level; ++level) {
                const int idx = subcell_index(cur->cell, probe, p_);
                auto mid = make_node(child_cell(cur->cell, idx, p_), cur);
                mid->isLeaf = false;
                mid->pointCount = cur->pointCount;
                PTreeNode* midp = mid.get();
                cur->children[idx] = std::move(mid);
                chain.push_back(midp);
                cur = midp;
            }
            const int idx = subcell_index(cur->cell, probe, p_);
            oldRoot->parent = cur;
            cur->children[idx] = std::move(oldRoot);
            std::reverse(chain.begin(), chain.end());
        }
    }

    PTreeNode* node = root_.get();
    while (!node->isLeaf) {
        node->pointCount++;
        const int idx = subcell_index(node->cell, rec.pos, p_);
        auto& slot = node->children[idx];
        if (!slot) slot = make_node(child_cell(node->cell, idx, p_), node);
        node = slot.get();
    }
    node->pointCount++;
    node->leafPoints.push_back(rec.id);

    const bool split = node->pointCount > capacity() && node->cell.side >= p_;
    if (split) {
        split_leaf(node);
        ev.newSubroot = node;
    }
    ev.order.push_back({split ? StructuralEvent::Kind::Subtree : StructuralEvent::Kind::Leaf, node});
    for (PTreeNode* c : chain) ev.order.push_back({StructuralEvent::Kind::Internal, c});
    for (PTreeNode* a = node->parent; a; a = a->parent)
        ev.order.push_back({StructuralEvent::Kind::Internal, a});
    return ev;
}

StructuralEvents RestrictedPTree::delete_point(PointId id) {
    auto it = points_.find(id);
    if (it == points_.end()) throw Error("unknown id", std::to_string(id));
    const Point pos = it->second.pos;
    points_.erase(it);

    PTreeNode* node = root_.get();
    while (!node->isLeaf) {
        node->pointCount--;
        node = node->children.at(subcell_index(node->cell, pos, p_)).get();
    }
    node->pointCount--;
    auto& lp = node->leafPoints;
    lp.erase(std::find(lp.begin(), lp.end(), id));

    StructuralEvents ev;
    if (points_.empty()) {
        root_ = make_node(Cell{0, 0, 0, universe_}, nullptr);
        ev.rootChanged = true;
        ev.order.push_back({StructuralEvent::Kind::Leaf, root_.get()});
        return ev;
    }

    if (node->pointCount == 0 && node->parent)
        node->parent->children.erase(subcell_index(node->parent->cell, pos, p_));

    // Root normalization: collapse a small root, descend while one child
    // holds everything, and keep a leaf root on its minimal cell.
    for (;;) {
        PTreeNode* r = root_.get();
        if (r->isLeaf) {
            const Cell mc = minimal_cell(r->leafPoints);
            if (!(mc == r->cell)) {
                r->cell = mc;
                ev.rootChanged = true;
            }
            break;
        }
        if (r->pointCount <= capacity()) {
            collapse_to_leaf(r);
            ev.rootChanged = true;
            ev.collapsed = true;
            continue;
        }
        if (r->children.size() == 1) {
            auto child = std::move(r->children.begin()->second);
            child->parent = nullptr;
            root_ = std::move(child);
            ev.rootChanged = true;
            continue;
        }
        break;
    }

    // Below the root only path nodes lost points; collapse the topmost that
    // dropped to capacity.
    PTreeNode* cur = root_.get();
    while (!cur->isLeaf && cur->cell.contains(pos)) {
        if (cur->pointCount <= capacity() && cur->parent) {
            collapse_to_leaf(cur);
            ev.collapsed = true;
            break;
        }
        auto cit = cur->children.find(subcell_index(cur->cell, pos, p_));
        if (cit == cur->children.end()) break;
        cur = cit->second.get();
    }

    std::vector<PTreeNode*> path;
    PTreeNode* walk = root_.get();
    path.push_back(walk);
    while (!walk->isLeaf && walk->cell.contains(pos)) {
        auto cit = walk->children.find(subcell_index(walk->cell, pos, p_));
        if (cit == walk->children.end()) break;
        walk = cit->second.get();
        path.push_back(walk);
    }
    for (auto rit = path.rbegin(); rit != path.rend(); ++rit)
        ev.order.push_back(
            {(*rit)->isLeaf ? StructuralEvent::Kind::Leaf : StructuralEvent::Kind::Internal,
             *rit});
    return ev;
}

std::vector<const PTreeNode*> RestrictedPTree::locate_path(const Point& pos) const {
    if (pos.x < 0 || pos.x >= universe_ || pos.y < 0 || pos.y >= universe_)
        throw Error("out of universe", "position (" + std::to_string(pos.x) + "," +
                                           std::to_string(pos.y) + ")");
    std::vector<const PTreeNode*> path;
    const PTreeNode* node = root_.get();
    if (!node->cell.contains(pos)) return path;
    path.push_back(node);
    while (!node->isLeaf) {
        auto it = node->children.find(subcell_index(node->cell, pos, p_));
        if (it == node->children.end()) break;  // no point of the set down there
        node = it->second.get();
        path.push_back(node);
    }
    return path;
}

void RestrictedPTree::audit_node(const PTreeNode* node) const {
    const auto fail = [&](const std::string& what) {
        throw Error("tree invariant", what + " at level " + std::to_string(node->cell.level) +
                                          " cell (" + std::to_string(node->cell.ix) + "," +
                                          std::to_string(node->cell.iy) + ")");
    };
    if (node->cell.side != side_at(node->cell.level)) fail("cell side");
    if (node->isLeaf) {
        if (static_cast<std::int64_t>(node->leafPoints.size()) != node->pointCount)
            fail("leaf count");
        if (node->pointCount > capacity() && node->cell.side >= p_) fail("oversized leaf");
        for (PointId id : node->leafPoints) {
            auto it = points_.find(id);
            if (it == points_.end()) fail("leaf holds unknown id " + std::to_string(id));
            if (!node->cell.contains(it->second.pos)) fail("point outside leaf cell");
        }
        return;
    }
    if (node->pointCount <= capacity()) fail("undersized internal node");
    if (node->cell.side < p_) fail("internal node below the level cap");
    std::int64_t sum = 0;
    for (const auto& [idx, child] : node->children) {
        if (!child) fail("null child");
        if (child->parent != node) fail("parent pointer");
        if (idx < 0 || idx >= static_cast<int>(p_ * p_)) fail("child index");
        if (!(child->cell == child_cell(node->cell, idx, p_))) fail("child cell");
        if (child->pointCount <= 0) fail("empty child");
        sum += child->pointCount;
        audit_node(child.get());
    }
    if (sum != node->pointCount) fail("child count sum");
}

void RestrictedPTree::audit() const {
    const PTreeNode* r = root_.get();
    if (r->parent) throw Error("tree invariant", "root has a parent");
    if (points_.empty()) {
        if (!r->isLeaf || r->pointCount != 0 || !(r->cell == Cell{0, 0, 0, universe_}))
            throw Error("tree invariant", "empty tree must be a single empty universe leaf");
        return;
    }
    if (r->pointCount != static_cast<std::int64_t>(points_.size()))
        throw Error("tree invariant", "root count differs from point table size");
    Coord minX = universe_, maxX = -1, minY = universe_, maxY = -1;
    for (const auto& [id, rec] : points_) {
        minX = std::min(minX, rec.pos.x);
        maxX = std::max(maxX, rec.pos.x);
        minY = std::min(minY, rec.pos.y);
        maxY = std::max(maxY, rec.pos.y);
    }
    if (!(r->cell == minimal_cell_of_bbox(minX, maxX, minY, maxY)))
        throw Error("tree invariant", "root cell is not the minimal enclosing cell");
    audit_node(r);
}

std::unique_ptr<RestrictedPTree> build_tree(const std::vector<PointRecord>& shifted, Coord p,
                                            Coord universe) {
    auto tree = std::make_unique<RestrictedPTree>(p, universe);
    if (shifted.empty()) return tree;

    std::vector<PointId> ids;
    for (const PointRecord& rec : shifted) {
        if (rec.pos.x < 0 || rec.pos.x >= universe || rec.pos.y < 0 || rec.pos.y >= universe)
            throw Error("out of universe", "shifted position (" + std::to_string(rec.pos.x) +
                                               "," + std::to_string(rec.pos.y) + ")");
        if (!tree->points_.emplace(rec.id, rec).second)
            throw Error("duplicate id", std::to_string(rec.id));
        ids.push_back(rec.id);
    }

    PTreeNode* root = tree->root_.get();
    root->cell = tree->minimal_cell(ids);

    struct Frame {
        PTreeNode* node;
        std::vector<PointId> ids;
    };
    std::vector<Frame> stack;
    stack.push_back({root, std::move(ids)});
    while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        PTreeNode* node = fr.node;
        node->pointCount = static_cast<std::int64_t>(fr.ids.size());
        if (node->pointCount <= tree->capacity() || node->cell.side < p) {
            node->leafPoints = std::move(fr.ids);
            continue;
        }
        node->isLeaf = false;
        std::map<int, std::vector<PointId>> parts;
        for (PointId id : fr.ids)
            parts[subcell_index(node->cell, tree->points_.at(id).pos, p)].push_back(id);
        for (auto& [idx, part] : parts) {
            auto child = make_node(child_cell(node->cell, idx, p), node);
            PTreeNode* cp = child.get();
            node->children[idx] = std::move(child);
            stack.push_back({cp, std::move(part)});
        }
    }
    return tree;
}

bool same_shape(const PTreeNode* a, const PTreeNode* b) {
    if (!(a->cell == b->cell) || a->isLeaf != b->isLeaf || a->pointCount != b->pointCount)
        return false;
    if (a->isLeaf) {
        auto la = a->leafPoints, lb = b->leafPoints;
        std::sort(la.begin(), la.end());
        std::sort(lb.begin(), lb.end());
        return la == lb;
    }
    if (a->children.size() != b->children.size()) return false;
    for (auto ia = a->children.begin(), ib = b->children.begin(); ia != a->children.end();
         ++ia, ++ib) {
        if (ia->first != ib->first) return false;
        if (!same_shape(ia->second.get(), ib->second.get())) return false;
    }
    return true;
}

}  // namespace dynmatch
