#pragma once

#include "dynmatch/core.hpp"

namespace dynmatch {

/// Exact minimum-cost perfect matching, O(k^3) potential-based Hungarian.
/// Requires |reds| == |blues|.
Matching hungarian(const std::vector<PointRecord>& reds, const std::vector<PointRecord>& blues);

/// Exact integral min-cost transportation via successive shortest augmenting
/// paths with node potentials (Dijkstra on reduced costs). Requires a
/// balanced instance.
Assignment solve_transport(const TransportInstance& t);

/// Testing oracle: optimum by enumerating all permutations. Refuses k > 9.
Matching brute_force_matching(const std::vector<PointRecord>& reds,
                              const std::vector<PointRecord>& blues);

/// Testing oracle: expands multiplicities into unit points and brute-forces.
/// Refuses total supply > 8 or more than 6 locations.
Assignment brute_force_transport(const TransportInstance& t);

}  // namespace dynmatch
