#pragma once

#include "dynmatch/ptree.hpp"

namespace dynmatch {

struct MatchConfig {
    Coord p = 8;
    Coord universe = Coord{1} << 20;
    std::uint64_t seed = 0;
};

/// The random grid shift r, uniform over {0..D/2-1}^2.
Point draw_shift(std::uint64_t seed, Coord universe);

/// Validates raw coordinates against [0, D/2)^2 and applies the shift.
PointRecord shifted_record(PointId id, Point raw, Color color, Point shift, Coord universe);

/// Result of the z-order scan over child excess sets: how many excess units
/// of each child get matched at this node and what is forwarded upward.
struct ZScan {
    std::map<int, std::int64_t> takes;  // child subcell index -> matched units
    std::vector<std::pair<int, std::int64_t>> forwarded;  // child -> leftover, z-order
    Color excessColor = Color::Red;
    std::int64_t excessTotal = 0;
    std::int64_t matchedPairs = 0;
};
ZScan scan_children(const PTreeNode* v);

/// Aggregated sub-instance over occupied subcell centers; supplyChild and
/// demandChild record the child subcell index behind each slot.
TransportInstance aggregate_instance(const PTreeNode* v, const ZScan& s,
                                     std::vector<int>& supplyChild,
                                     std::vector<int>& demandChild);

void recompute_leaf(RestrictedPTree& tree, PTreeNode* v);
void recompute_internal(RestrictedPTree& tree, PTreeNode* v);

/// Full bottom-up (re)computation of a subtree's match state.
void match_node(RestrictedPTree& tree, PTreeNode* v);

/// E_v as a concrete z-sorted id list (O(|E_v| * depth)).
std::vector<PointId> materialize_excess(const PTreeNode* v);

/// Concrete realization of v's implicit matching: per implicit edge, pairs
/// subcell populations in z-order.
std::vector<std::pair<PointId, PointId>> explicit_matching(const RestrictedPTree& tree,
                                                           const PTreeNode* v);

/// Union of leaf matchings and realized implicit matchings; perfect on the
/// current point set. Throws Error("integrity", ...) if the root has excess.
Matching extract_full_matching(const RestrictedPTree& tree);

struct StaticSolution {
    std::unique_ptr<RestrictedPTree> tree;
    Point shift;
    double cost = 0.0;
};

/// Shifts, builds the tree and matches bottom-up. Requires |A| = |B|.
StaticSolution static_matching(const std::vector<Point>& redRaw,
                               const std::vector<Point>& blueRaw, const MatchConfig& cfg);

/// Same, with caller-provided ids/colors (raw coordinates) and a fixed shift.
StaticSolution static_matching_shifted(const std::vector<PointRecord>& raw, Point shift,
                                       const MatchConfig& cfg);

/// Verifies every per-node invariant (counts, monochromatic excess, excess
/// cardinality, cost additivity, exclusive in-cell matching, global
/// perfectness up to root excess). Throws Error("match invariant", ...).
void audit_match_state(const RestrictedPTree& tree);

}  // namespace dynmatch
