#pragma once

#include <cstdlib>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "dynmatch/core.hpp"

namespace dynmatch {

/// One cell of the underlying p-tree: the square
/// [ix*side, (ix+1)*side) x [iy*side, (iy+1)*side) at `level`.
struct Cell {
    int level = 0;
    Coord ix = 0;
    Coord iy = 0;
    Coord side = 0;

    bool contains(const Point& p) const {
        return p.x >= ix * side && p.x < (ix + 1) * side && p.y >= iy * side &&
               p.y < (iy + 1) * side;
    }
    RealPoint center() const {
        return {static_cast<double>(ix * side) + static_cast<double>(side) / 2.0,
                static_cast<double>(iy * side) + static_cast<double>(side) / 2.0};
    }
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct PTreeNode;

/// Ordered set of point ids keyed by z-order (key pair = (zkey, id)).
using ZSet = std::set<std::pair<std::uint64_t, PointId>>;

/// One slice of an implicit excess set: either a leaf's explicit id list or
/// a reference into a child's excess, skipping the matched prefix.
struct ExcessPart {
    const PTreeNode* child = nullptr;  // null -> `ids` holds the points
    std::vector<PointId> ids;          // z-sorted (leaf case)
    std::int64_t skipPrefix = 0;
    std::int64_t takeCount = 0;
};

struct ExcessDescriptor {
    Color color = Color::Red;
    std::int64_t total = 0;
    std::vector<ExcessPart> parts;  // z-order
};

/// Explicit per-node matching state used by the advanced matcher: each
/// child's excess split into the matched z-prefix and the forwarded
/// z-suffix, plus the realized pairs of the implicit matching.
struct AdvancedNodeState {
    std::map<int, ZSet> matched;    // child subcell index -> ids matched at v
    std::map<int, ZSet> forwarded;  // child subcell index -> ids passed to E_v
    // (redChild, blueChild) -> concrete realized pairs, one per unit of weight
    std::map<std::pair<int, int>, std::vector<std::pair<PointId, PointId>>> buckets;
};

/// Matching state attached to every p-tree node (Y_v, eta_v, E_v, gamma*,
/// mu_v and the maintained subtree cost).
struct NodeMatchState {
    std::int64_t redCount = 0;
    std::int64_t blueCount = 0;
    ExcessDescriptor excess;  // E_v
    // Leaves:
    Matching leafMatching;
    // Internal nodes:
    std::map<int, std::int64_t> takes;  // child subcell index -> units matched at v
    std::vector<std::tuple<int, int, std::int64_t>> implicitEdges;  // (redChild, blueChild, w)
    double implicitCost = 0.0;
    double costSubtree = 0.0;
    std::unique_ptr<AdvancedNodeState> adv;

    std::int64_t eta() const { return redCount - blueCount; }
    Color excess_color() const { return redCount >= blueCount ? Color::Red : Color::Blue; }
};

struct PTreeNode {
    Cell cell;
    PTreeNode* parent = nullptr;
    std::map<int, std::unique_ptr<PTreeNode>> children;  // subcell index -> node, z-ordered
    std::int64_t pointCount = 0;
    bool isLeaf = true;
    std::vector<PointId> leafPoints;
    NodeMatchState state;
};

/// What an update did to the tree, in bottom-up state-recompute order.
struct StructuralEvent {
    enum class Kind { Leaf, Internal, Subtree } kind;
    PTreeNode* node;
};

struct StructuralEvents {
    std::vector<StructuralEvent> order;  // children strictly before parents
    bool rootChanged = false;
    bool collapsed = false;  // an internal node was merged back into a leaf
    PTreeNode* newSubroot = nullptr;
};

int subcell_index(const Cell& cell, const Point& p, Coord branching);
Cell child_cell(const Cell& cell, int index, Coord branching);

/// z-order key: row-major subcell digits from the universe cell down to the
/// finest level, then the residual coordinate bits (row before column).
std::uint64_t z_key(const Point& p, Coord universe, Coord branching);

/// The restricted p-tree over the shifted point set, plus the point table.
class RestrictedPTree {
public:
    RestrictedPTree(Coord branching, Coord universe);

    Coord p() const { return p_; }
    Coord universe() const { return universe_; }
    Coord capacity() const { return p_ * p_; }
    int max_level() const { return maxLevel_; }
    PTreeNode* root() { return root_.get(); }
    const PTreeNode* root() const { return root_.get(); }

    PointTable& points() { return points_; }
    const PointTable& points() const { return points_; }

    std::uint64_t z_key(const Point& p) const { return dynmatch::z_key(p, universe_, p_); }
    bool z_less(PointId a, PointId b) const;

    /// rec.pos must already carry the shift. Throws on duplicate id or
    /// out-of-universe position.
    StructuralEvents insert_point(const PointRecord& rec);
    StructuralEvents delete_point(PointId id);

    /// Root-to-leaf node sequence containing the point; empty if the point
    /// lies outside the current root cell. Throws when outside the universe.
    std::vector<const PTreeNode*> locate_path(const Point& pos) const;

    /// Full structural audit; throws Error("tree invariant", ...) on failure.
    void audit() const;

private:
    friend std::unique_ptr<RestrictedPTree> build_tree(const std::vector<PointRecord>&, Coord,
                                                       Coord);
    Coord p_;
    Coord universe_;
    int logP_;
    int maxLevel_;
    std::unique_ptr<PTreeNode> root_;
    PointTable points_;

    Coord side_at(int level) const;
    Cell minimal_cell(const std::vector<PointId>& ids) const;
    Cell minimal_cell_of_bbox(Coord minX, Coord maxX, Coord minY, Coord maxY) const;
    void split_leaf(PTreeNode* node);
    void collapse_to_leaf(PTreeNode* node);
    void gather_ids(const PTreeNode* node, std::vector<PointId>& out) const;
    void audit_node(const PTreeNode* node) const;
};

/// Canonical bulk construction; the incremental path must reproduce its
/// shape node for node.
std::unique_ptr<RestrictedPTree> build_tree(const std::vector<PointRecord>& shifted, Coord p,
                                            Coord universe);

bool same_shape(const PTreeNode* a, const PTreeNode* b);

}  // namespace dynmatch
