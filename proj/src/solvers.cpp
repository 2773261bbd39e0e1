#include "dynmatch/solvers.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <numeric>

namespace dynmatch {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Matching hungarian(const std::vector<PointRecord>& reds, const std::vector<PointRecord>& blues) {
    if (reds.size() != blues.size())
        throw Error("size mismatch", std::to_string(reds.size()) + " reds vs " +
                                         std::to_string(blues.size()) + " blues");
    const int n = static_cast<int>(reds.size());
    Matching out;
    if (n == 0) return out;

    // Potential-based O(n^3) formulation, 1-indexed with a dummy row/column 0.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = distance(reds[i0 - 1].pos, blues[j - 1].pos) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> rowToCol(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j]) rowToCol[p[j] - 1] = j - 1;
    for (int i = 0; i < n; ++i) {
        out.edges.emplace_back(reds[i].id, blues[rowToCol[i]].id);
        out.cost += distance(reds[i].pos, blues[rowToCol[i]].pos);
    }
    return out;
}

Assignment solve_transport(const TransportInstance& t) {
    const std::int64_t balance = t.total_supply() + t.total_demand();
    if (balance != 0)
        throw Error("balance", "supplies plus demands sum to " + std::to_string(balance));

    const std::size_t m = t.supplies.size();
    const std::size_t k = t.demands.size();
    Assignment out;
    if (m == 0 || t.total_supply() == 0) {
        out.cost = 0.0;
        return out;
    }

    std::vector<std::vector<double>> cost(m, std::vector<double>(k));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j)
            cost[i][j] = distance(t.supplies[i].first, t.demands[j].first);

    std::vector<std::int64_t> residS(m), residD(k);
    for (std::size_t i = 0; i < m; ++i) residS[i] = t.supplies[i].second;
    for (std::size_t j = 0; j < k; ++j) residD[j] = -t.demands[j].second;

    std::vector<std::vector<std::int64_t>> flow(m, std::vector<std::int64_t>(k, 0));
    // Node layout: [0, m) supplies, [m, m+k) demands.
    const std::size_t nNodes = m + k;
    std::vector<double> pi(nNodes, 0.0);
    std::int64_t remaining = t.total_supply();

    while (remaining > 0) {
        std::vector<double> dist(nNodes, kInf);
        std::vector<int> prev(nNodes, -1);
        std::vector<char> done(nNodes, 0);
        for (std::size_t i = 0; i < m; ++i)
            if (residS[i] > 0) dist[i] = 0.0;

        for (std::size_t iter = 0; iter < nNodes; ++iter) {
            int u = -1;
            for (std::size_t v = 0; v < nNodes; ++v)
                if (!done[v] && dist[v] < kInf && (u < 0 || dist[v] < dist[u])) u = static_cast<int>(v);
            if (u < 0) break;
            done[u] = 1;
            if (static_cast<std::size_t>(u) < m) {
                const std::size_t i = static_cast<std::size_t>(u);
                for (std::size_t j = 0; j < k; ++j) {
                    const double nd = dist[u] + cost[i][j] + pi[i] - pi[m + j];
                    if (nd < dist[m + j] - 1e-12) {
                        dist[m + j] = nd;
                        prev[m + j] = u;
                    }
                }
            } else {
                const std::size_t j = static_cast<std::size_t>(u) - m;
                for (std::size_t i = 0; i < m; ++i) {
                    if (flow[i][j] <= 0) continue;
                    const double nd = dist[u] - cost[i][j] + pi[m + j] - pi[i];
                    if (nd < dist[i] - 1e-12) {
                        dist[i] = nd;
                        prev[i] = u;
                    }
                }
            }
        }

        int target = -1;
        for (std::size_t j = 0; j < k; ++j)
            if (residD[j] > 0 && dist[m + j] < kInf &&
                (target < 0 || dist[m + j] < dist[m + static_cast<std::size_t>(target)]))
                target = static_cast<int>(j);
        if (target < 0) throw Error("infeasible", "no augmenting path in balanced instance");

        const double dTarget = dist[m + static_cast<std::size_t>(target)];
        for (std::size_t v = 0; v < nNodes; ++v)
            pi[v] += std::min(dist[v], dTarget);

        // Trace the path back to a source supply, collecting the bottleneck.
        std::int64_t push = residD[static_cast<std::size_t>(target)];
        std::vector<int> path;  // node sequence target..source
        int node = static_cast<int>(m) + target;
        path.push_back(node);
        while (prev[node] >= 0) {
            const int p = prev[node];
            if (static_cast<std::size_t>(node) >= m) {
                // forward arc p(supply) -> node(demand): unlimited capacity
            } else {
                // backward arc p(demand) -> node(supply): limited by flow
                push = std::min(push, flow[static_cast<std::size_t>(node)]
                                          [static_cast<std::size_t>(p) - m]);
            }
            node = p;
            path.push_back(node);
        }
        push = std::min(push, residS[static_cast<std::size_t>(node)]);
        assert(push > 0);

        residS[static_cast<std::size_t>(node)] -= push;
        residD[static_cast<std::size_t>(target)] -= push;
        for (std::size_t s = 0; s + 1 < path.size(); ++s) {
            const int to = path[s];
            const int from = path[s + 1];
            if (static_cast<std::size_t>(to) >= m)
                flow[static_cast<std::size_t>(from)][static_cast<std::size_t>(to) - m] += push;
            else
                flow[static_cast<std::size_t>(to)][static_cast<std::size_t>(from) - m] -= push;
        }
        remaining -= push;
    }

#ifndef NDEBUG
    // Optimality certificate: reduced costs nonnegative under final potentials.
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j)
            assert(cost[i][j] + pi[i] - pi[m + j] >= -1e-7);
#endif

    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (flow[i][j] > 0) out.weights[{i, j}] = flow[i][j];
    for (const auto& [edge, w] : out.weights)
        out.cost += static_cast<double>(w) * cost[edge.first][edge.second];
    return out;
}

Matching brute_force_matching(const std::vector<PointRecord>& reds,
                              const std::vector<PointRecord>& blues) {
    if (reds.size() != blues.size())
        throw Error("size mismatch", std::to_string(reds.size()) + " reds vs " +
                                         std::to_string(blues.size()) + " blues");
    if (reds.size() > 9)
        throw Error("refused", "brute force limited to 9 points per side");
    const std::size_t n = reds.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    double bestCost = kInf;
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += distance(reds[i].pos, blues[perm[i]].pos);
        if (c < bestCost) {
            bestCost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    Matching out;
    out.cost = n == 0 ? 0.0 : bestCost;
    for (std::size_t i = 0; i < n; ++i) out.edges.emplace_back(reds[i].id, blues[best[i]].id);
    return out;
}

Assignment brute_force_transport(const TransportInstance& t) {
    const std::int64_t balance = t.total_supply() + t.total_demand();
    if (balance != 0)
        throw Error("balance", "supplies plus demands sum to " + std::to_string(balance));
    if (t.total_supply() > 8)
        throw Error("refused", "brute force limited to total supply 8");
    if (t.supplies.size() + t.demands.size() > 6)
        throw Error("refused", "brute force limited to 6 locations");

    // Expand multiplicities into unit supplies/demands and enumerate matchings.
    std::vector<std::size_t> redLoc, blueLoc;
    for (std::size_t i = 0; i < t.supplies.size(); ++i)
        for (std::int64_t u = 0; u < t.supplies[i].second; ++u) redLoc.push_back(i);
    for (std::size_t j = 0; j < t.demands.size(); ++j)
        for (std::int64_t u = 0; u < -t.demands[j].second; ++u) blueLoc.push_back(j);

    const std::size_t n = redLoc.size();
    std::vector<std::size_t> perm(n), best(n);
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    double bestCost = n == 0 ? 0.0 : kInf;
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            c += distance(t.supplies[redLoc[i]].first, t.demands[blueLoc[perm[i]]].first);
        if (c < bestCost) {
            bestCost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    Assignment out;
    for (std::size_t i = 0; i < n; ++i) out.weights[{redLoc[i], blueLoc[best[i]]}] += 1;
    for (const auto& [edge, w] : out.weights)
        out.cost += static_cast<double>(w) *
                    distance(t.supplies[edge.first].first, t.demands[edge.second].first);
    return out;
}

}  // namespace dynmatch
