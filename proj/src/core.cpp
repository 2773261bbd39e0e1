#include "dynmatch/core.hpp"

#include <numeric>
#include <unordered_set>

namespace dynmatch {

std::int64_t TransportInstance::total_supply() const {
    std::int64_t s = 0;
    for (const auto& [p, v] : supplies) s += v;
    return s;
}

std::int64_t TransportInstance::total_demand() const {
    std::int64_t d = 0;
    for (const auto& [p, v] : demands) d += v;
    return d;
}

double distance(const Point& p, const Point& q) {
    const double dx = static_cast<double>(p.x - q.x);
    const double dy = static_cast<double>(p.y - q.y);
    return std::sqrt(dx * dx + dy * dy);
}

double distance(const RealPoint& p, const RealPoint& q) {
    const double dx = p.x - q.x;
    const double dy = p.y - q.y;
    return std::sqrt(dx * dx + dy * dy);
}

double matching_cost(const PointTable& points, const Matching& m) {
    double total = 0.0;
    for (const auto& [redId, blueId] : m.edges) {
        auto r = points.find(redId);
        if (r == points.end()) throw Error("lookup", "unknown red id " + std::to_string(redId));
        auto b = points.find(blueId);
        if (b == points.end()) throw Error("lookup", "unknown blue id " + std::to_string(blueId));
        total += distance(r->second.pos, b->second.pos);
    }
    return total;
}

double assignment_cost(const TransportInstance& t, const Assignment& a) {
    std::vector<std::int64_t> rowSum(t.supplies.size(), 0);
    std::vector<std::int64_t> colSum(t.demands.size(), 0);
    double total = 0.0;
    for (const auto& [edge, w] : a.weights) {
        const auto [i, j] = edge;
        if (i >= t.supplies.size())
            throw Error("validation", "supply index " + std::to_string(i) + " out of range");
        if (j >= t.demands.size())
            throw Error("validation", "demand index " + std::to_string(j) + " out of range");
        if (w < 0) throw Error("validation", "negative weight on edge");
        rowSum[i] += w;
        colSum[j] += w;
        total += static_cast<double>(w) * distance(t.supplies[i].first, t.demands[j].first);
    }
    for (std::size_t i = 0; i < rowSum.size(); ++i)
        if (rowSum[i] != t.supplies[i].second)
            throw Error("validation", "row sum mismatch at supply index " + std::to_string(i));
    for (std::size_t j = 0; j < colSum.size(); ++j)
        if (colSum[j] != -t.demands[j].second)
            throw Error("validation", "column sum mismatch at demand index " + std::to_string(j));
    return total;
}

std::vector<Violation> validate_matching(const PointTable& points, const Matching& m,
                                         bool require_perfect) {
    std::vector<Violation> out;
    std::unordered_set<PointId> reds, blues;
    for (const auto& [redId, blueId] : m.edges) {
        auto r = points.find(redId);
        auto b = points.find(blueId);
        if (r == points.end()) out.push_back({"unknown id", redId});
        else if (r->second.color != Color::Red) out.push_back({"color mismatch", redId});
        if (b == points.end()) out.push_back({"unknown id", blueId});
        else if (b->second.color != Color::Blue) out.push_back({"color mismatch", blueId});
        if (!reds.insert(redId).second) out.push_back({"duplicate endpoint", redId});
        if (!blues.insert(blueId).second) out.push_back({"duplicate endpoint", blueId});
    }
    if (require_perfect) {
        for (const auto& [id, rec] : points) {
            if (rec.color == Color::Red && !reds.count(id)) out.push_back({"unmatched", id});
            if (rec.color == Color::Blue && !blues.count(id)) out.push_back({"unmatched", id});
        }
    }
    return out;
}

}  // namespace dynmatch
