#pragma once

#include "dynmatch/core.hpp"

namespace dynmatch {

/// Aggregated implicit matching over fixed locations; weights are positive
/// unit counts between redLoc[i] and blueLoc[j].
struct ImplicitMatching {
    std::vector<RealPoint> redLoc;
    std::vector<RealPoint> blueLoc;
    std::map<std::pair<int, int>, std::int64_t> weight;

    double cost() const;
    std::vector<std::int64_t> red_counts() const;
    std::vector<std::int64_t> blue_counts() const;
};

/// Directed arc in the augmentation graph. Nodes are [0, reds) red
/// locations followed by [reds, reds+blues) blue locations.
struct AugmentArc {
    int from = 0;
    int to = 0;
    double length = 0.0;
};

struct AugmentGraph {
    int reds = 0;
    int blues = 0;
    std::vector<AugmentArc> arcs;  // red->blue: +dist; blue->red (matched): -dist
};

AugmentGraph build_augment_graph(const ImplicitMatching& m);

struct PathStep {
    int red = 0;
    int blue = 0;
    int delta = 0;  // +1 new matched unit, -1 unmatched unit
};

constexpr double kArcTol = 1e-9;

/// Adds one unit at redLoc[x] / blueLoc[y] along the shortest alternating
/// path (Bellman-Ford over the augment graph; ties broken by fewer arcs,
/// then lower predecessor). Mutates m; the result is optimal if m was.
/// Throws Error("optimality", ...) on a negative cycle.
std::vector<PathStep> augment_matching(ImplicitMatching& m, int x, int y);

/// Removes one matched unit (i, j); the remainder stays optimal.
void remove_unit(ImplicitMatching& m, int i, int j);

/// Removes one red unit at i and one blue unit at j. When they are matched
/// directly the unit is dropped; otherwise one partner each is detached and
/// the partners are re-matched via augment_matching. Returns the applied
/// augmentation steps (empty in the direct case).
std::vector<PathStep> remove_pair(ImplicitMatching& m, int i, int j);

}  // namespace dynmatch
