#include "dynmatch/augment.hpp"

#include <algorithm>
#include <limits>

namespace dynmatch {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double ImplicitMatching::cost() const {
    double total = 0.0;
    for (const auto& [edge, w] : weight)
        total += static_cast<double>(w) * distance(redLoc[edge.first], blueLoc[edge.second]);
    return total;
}

std::vector<std::int64_t> ImplicitMatching::red_counts() const {
    std::vector<std::int64_t> out(redLoc.size(), 0);
    for (const auto& [edge, w] : weight) out[edge.first] += w;
    return out;
}

std::vector<std::int64_t> ImplicitMatching::blue_counts() const {
    std::vector<std::int64_t> out(blueLoc.size(), 0);
    for (const auto& [edge, w] : weight) out[edge.second] += w;
    return out;
}

AugmentGraph build_augment_graph(const ImplicitMatching& m) {
    AugmentGraph g;
    g.reds = static_cast<int>(m.redLoc.size());
    g.blues = static_cast<int>(m.blueLoc.size());
    for (int i = 0; i < g.reds; ++i)
        for (int j = 0; j < g.blues; ++j)
            g.arcs.push_back({i, g.reds + j, distance(m.redLoc[i], m.blueLoc[j])});
    for (const auto& [edge, w] : m.weight) {
        if (w <= 0) throw Error("state", "nonpositive implicit weight");
        g.arcs.push_back({g.reds + edge.second, edge.first,
                          -distance(m.redLoc[edge.first], m.blueLoc[edge.second])});
    }
    return g;
}

std::vector<PathStep> augment_matching(ImplicitMatching& m, int x, int y) {
    const int reds = static_cast<int>(m.redLoc.size());
    const int blues = static_cast<int>(m.blueLoc.size());
    if (x < 0 || x >= reds || y < 0 || y >= blues)
        throw Error("state", "augment endpoints out of range");
    const AugmentGraph g = build_augment_graph(m);
    const int nodes = reds + blues;
    const int target = reds + y;

    std::vector<double> dist(nodes, kInf);
    std::vector<int> pred(nodes, -1), hops(nodes, 0);
    dist[x] = 0.0;
    // Bellman-Ford; matched arcs are negative but an optimal base matching
    // admits no negative cycle.
    for (int round = 0; round < nodes; ++round) {
        bool changed = false;
        for (const AugmentArc& a : g.arcs) {
            if (dist[a.from] == kInf) continue;
            const double nd = dist[a.from] + a.length;
            const int nh = hops[a.from] + 1;
            bool better = false;
            if (nd < dist[a.to] - kArcTol) {
                better = true;
            } else if (nd <= dist[a.to] + kArcTol) {
                if (nh < hops[a.to] || (nh == hops[a.to] && a.from < pred[a.to])) better = true;
            }
            if (better && (nd < dist[a.to] || nh != hops[a.to] || a.from != pred[a.to])) {
                if (round == nodes - 1 && nd < dist[a.to] - kArcTol)
                    throw Error("optimality", "negative cycle in augment graph");
                dist[a.to] = std::min(dist[a.to], nd);
                pred[a.to] = a.from;
                hops[a.to] = nh;
                changed = true;
            }
        }
        if (!changed) break;
    }
    if (dist[target] == kInf)
        throw Error("infeasible", "no augmenting path despite direct arc");

    std::vector<int> path;  // target .. x
    int node = target;
    path.push_back(node);
    while (node != x) {
        node = pred[node];
        if (node < 0 || static_cast<int>(path.size()) > nodes)
            throw Error("optimality", "augmenting path trace failed");
        path.push_back(node);
    }
    std::reverse(path.begin(), path.end());

    std::vector<PathStep> steps;
    for (std::size_t s = 0; s + 1 < path.size(); ++s) {
        const int u = path[s], v = path[s + 1];
        if (u < reds) {
            steps.push_back({u, v - reds, +1});
        } else {
            steps.push_back({v, u - reds, -1});
        }
    }
    for (const PathStep& st : steps) {
        auto keyPair = std::make_pair(st.red, st.blue);
        if (st.delta > 0) {
            m.weight[keyPair] += 1;
        } else {
            auto it = m.weight.find(keyPair);
            if (it == m.weight.end() || it->second <= 0)
                throw Error("optimality", "path unmatches a nonexistent unit");
            if (--it->second == 0) m.weight.erase(it);
        }
    }
    return steps;
}

void remove_unit(ImplicitMatching& m, int i, int j) {
    auto it = m.weight.find({i, j});
    if (it == m.weight.end() || it->second <= 0)
        throw Error("state", "no matched unit between locations " + std::to_string(i) + " and " +
                                 std::to_string(j));
    if (--it->second == 0) m.weight.erase(it);
}

std::vector<PathStep> remove_pair(ImplicitMatching& m, int i, int j) {
    if (m.weight.count({i, j})) {
        remove_unit(m, i, j);
        return {};
    }
    int jHat = -1, iHat = -1;
    for (const auto& [edge, w] : m.weight) {
        if (edge.first == i && jHat < 0) jHat = edge.second;
        if (edge.second == j && iHat < 0) iHat = edge.first;
    }
    if (jHat < 0 || iHat < 0) throw Error("state", "location has no matched unit to remove");
    remove_unit(m, i, jHat);
    remove_unit(m, iHat, j);
    return augment_matching(m, iHat, jHat);
}

}  // namespace dynmatch
