#pragma once

#include "dynmatch/matcher.hpp"

namespace dynmatch {

/// Fully dynamic matcher over pair insertions/deletions. Basic mode keeps
/// the per-node implicit matchings by recomputing every affected node from
/// its children (deterministically equal to a fresh static run). Advanced
/// mode additionally maintains an explicit realization of every implicit
/// matching, repaired along augmenting paths with bounded recourse.
class DynamicMatcher {
public:
    enum class Mode { Basic, Advanced };

    explicit DynamicMatcher(const MatchConfig& cfg, Mode mode = Mode::Basic);

    struct UpdateReport {
        PointId idA = 0;
        PointId idB = 0;
        std::size_t touchedNodes = 0;
        std::int64_t recourseAdded = 0;    // advanced mode
        std::int64_t recourseRemoved = 0;  // advanced mode
        bool structural = false;  // leaf split / merge / root change occurred
    };

    struct Recourse {
        std::vector<std::pair<PointId, PointId>> added;
        std::vector<std::pair<PointId, PointId>> removed;
        bool structural = false;
    };

    /// Bulk initialization, equivalent to static_matching. Requires |A|=|B|.
    void init(const std::vector<Point>& redRaw, const std::vector<Point>& blueRaw);

    UpdateReport insert_pair(Point aRaw, Point bRaw);
    UpdateReport delete_pair(PointId idA, PointId idB);

    double query_cost() const;
    double wasserstein_estimate() const;  // query_cost() / number of pairs

    /// O(n) extraction from the implicit states (basic and advanced).
    Matching query_matching() const;
    /// Advanced mode: the maintained explicit matching, no reconstruction.
    Matching query_matching_explicit() const;
    /// Advanced mode: edge delta of the last pair update.
    const Recourse& query_recourse() const;

    std::size_t live_points() const;
    std::size_t pairs() const { return live_points() / 2; }
    Point shift() const { return shift_; }
    Mode mode() const { return mode_; }
    const RestrictedPTree& tree() const { return *tree_; }
    /// Depth cap used in recourse bounds (number of tree levels).
    int depth_cap() const;

    void set_audit(bool on) { audit_ = on; }

    /// Tree + match-state audit; in advanced mode also verifies pools,
    /// realized buckets and per-node optimality against a fresh solve.
    void audit() const;

private:
    struct ExcessDelta {
        std::vector<PointId> removed;
        std::vector<PointId> added;
    };

    MatchConfig cfg_;
    Mode mode_;
    Point shift_;
    std::unique_ptr<RestrictedPTree> tree_;
    PointId nextId_ = 0;
    Recourse recourse_;
    std::map<std::pair<PointId, PointId>, int> edgeLog_;  // +added / -removed
    bool audit_ = false;
    PointId lastRemovedId_ = 0;
    std::uint64_t lastRemovedKey_ = 0;
    Color lastRemovedColor_ = Color::Red;
    bool haveRemoved_ = false;

    std::uint64_t key_of(PointId id) const;
    std::pair<std::uint64_t, PointId> zpair(PointId id) const;

    void begin_pair_update();
    void finish_pair_update(UpdateReport& rep);
    void single_insert(const PointRecord& rec, UpdateReport& rep);
    void single_delete(PointId id, Color expect, UpdateReport& rep);

    void process_events(const StructuralEvents& ev, const Point& pos, bool isInsert,
                        PointId id, UpdateReport& rep);

    // Advanced machinery.
    void log_edge(PointId r, PointId b, int delta);
    void advanced_build(PTreeNode* v, bool logEdges);
    void advanced_rebuild_internal(PTreeNode* v);
    ExcessDelta advanced_leaf(PTreeNode* v);
    ExcessDelta advanced_repair(PTreeNode* v, int childIdx, const ExcessDelta& delta);
    void snapshot_removed_edges(const PTreeNode* v);
    void advanced_audit_node(const PTreeNode* v) const;
};

}  // namespace dynmatch
