#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dynmatch {

/// Runtime error carrying a short machine-greppable kind tag.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

using PointId = std::uint64_t;
using Coord = std::int64_t;

struct Point {
    Coord x = 0;
    Coord y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Real-valued location (cell centers sit on half-integer coordinates).
struct RealPoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const RealPoint&, const RealPoint&) = default;
};

enum class Color : std::uint8_t { Red, Blue };

inline Color opposite(Color c) { return c == Color::Red ? Color::Blue : Color::Red; }
inline const char* to_string(Color c) { return c == Color::Red ? "Red" : "Blue"; }

/// An identified, colored grid point. `pos` is the shifted position used by
/// all geometry; `raw` is what the caller handed in.
struct PointRecord {
    PointId id = 0;
    Point pos;
    Point raw;
    Color color = Color::Red;
};

using PointTable = std::unordered_map<PointId, PointRecord>;

/// A (partial) bijection between red and blue point ids plus its Euclidean cost.
struct Matching {
    std::vector<std::pair<PointId, PointId>> edges;  // (redId, blueId)
    double cost = 0.0;
};

/// Balanced supply/demand instance over weighted locations. Demands are
/// stored non-positive.
struct TransportInstance {
    std::vector<std::pair<RealPoint, std::int64_t>> supplies;  // s >= 0
    std::vector<std::pair<RealPoint, std::int64_t>> demands;   // d <= 0

    std::int64_t total_supply() const;
    std::int64_t total_demand() const;  // negative or zero
};

/// Integral edge weighting of a TransportInstance.
struct Assignment {
    std::map<std::pair<std::size_t, std::size_t>, std::int64_t> weights;
    double cost = 0.0;
};

double distance(const Point& p, const Point& q);
double distance(const RealPoint& p, const RealPoint& q);

double matching_cost(const PointTable& points, const Matching& m);

/// Recomputes the weighted cost after checking the row/column sum invariants.
double assignment_cost(const TransportInstance& t, const Assignment& a);

struct Violation {
    std::string kind;  // "duplicate endpoint" | "unmatched" | "color mismatch" | "unknown id"
    PointId id = 0;
};

std::vector<Violation> validate_matching(const PointTable& points, const Matching& m,
                                         bool require_perfect);

constexpr double kCostTol = 1e-9;

}  // namespace dynmatch
