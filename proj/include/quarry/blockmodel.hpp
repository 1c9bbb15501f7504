#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "quarry/multinet.hpp"

namespace quarry {

using BlockId = std::uint32_t;

/// Pass as a move target to request a new, empty block of the node's type.
inline constexpr BlockId kFreshBlock = std::numeric_limits<BlockId>::max();

/// levels[0][node] is the block of each level-0 item; levels[l][b] is the
/// block of level-(l-1) block b. Ids are global per level and grouped by
/// type; every block holds items of a single type.
struct HierarchicalPartition {
    std::vector<NodeType> node_types;
    std::vector<std::vector<BlockId>> levels;

    std::size_t height() const noexcept { return levels.size(); }
    std::size_t block_count(std::size_t level) const;
    /// Type of every block at `level`.
    std::vector<NodeType> block_types(std::size_t level) const;
    std::array<std::size_t, kNodeTypes> type_block_counts(std::size_t level) const;
    /// Block of every level-0 item after composing levels 0..level.
    std::vector<BlockId> composed(std::size_t level) const;
    /// Throws Error{InvalidLevel} when level >= height().
    BlockId cluster_of(std::uint32_t node, std::size_t level) const;

    /// Throws Error{InvalidPartition} on type mixing, gaps, size mismatches,
    /// or a top level with more than one block per type.
    void validate() const;

    bool operator==(const HierarchicalPartition&) const = default;
};

/// Relabels blocks at every level by order of first occurrence.
HierarchicalPartition canonicalize(const HierarchicalPartition& partition);

/// Builds a hierarchy from composed per-level assignments (as stored in
/// snapshots). Throws Error{InvalidPartition} if a level does not nest in the
/// one below it.
HierarchicalPartition from_composed(std::vector<NodeType> node_types,
                                    const std::vector<std::vector<BlockId>>& composed_levels);

/// Partition of `graph` with one block per type and a single level.
HierarchicalPartition trivial_partition(const std::vector<NodeType>& node_types);

struct LayerTerms {
    double likelihood = 0.0;  // F
    double penalty = 0.0;     // P
};

struct LevelTerms {
    std::array<LayerTerms, kLayers> layers{};
    std::array<std::size_t, kNodeTypes> blocks{};
};

struct ObjectiveValue {
    double total = 0.0;
    std::vector<LevelTerms> levels;

    double breakdown_sum() const noexcept;
};

/// x ln x with 0 ln 0 = 0.
double xlogx(double x) noexcept;

/// Model-cost term for one level and layer. `blocks` are this level's block
/// counts, `items` the number of things being labelled per type.
double level_penalty(Layer layer, const std::array<std::size_t, kNodeTypes>& blocks,
                     const std::array<std::size_t, kNodeTypes>& items, std::uint64_t edges);

ObjectiveValue description_length(const LayeredGraph& graph, const HierarchicalPartition& partition);
ObjectiveValue description_length(const ContractedNetwork& network, const HierarchicalPartition& partition);

/// DL(after) - DL(before) for moving level-0 item `node` into `target`
/// (an existing same-type level-0 block, or kFreshBlock).
double delta_dl(const LayeredGraph& graph, const HierarchicalPartition& partition, std::uint32_t node,
                BlockId target);

/// The partition after the move, canonicalized. Same preconditions as delta_dl.
HierarchicalPartition apply_move(const HierarchicalPartition& partition, std::uint32_t node, BlockId target);

/// Block multigraph of `graph` under `assignment`.
LayeredGraph block_graph(const LayeredGraph& graph, std::span<const BlockId> assignment,
                         std::size_t block_count);

// --- Incremental state --------------------------------------------------------

/// Adjacency shared by every state built over the same graph.
struct Adjacency {
    explicit Adjacency(const LayeredGraph& graph);

    std::vector<NodeType> node_types;
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> neighbors;
    std::vector<std::uint64_t> weights;
    std::vector<std::uint64_t> cumulative;  // running weight sum per node, for sampling
    std::vector<std::array<std::uint64_t, kLayers>> degree;
    std::array<std::uint64_t, kLayers> layer_totals{};

    std::size_t node_count() const noexcept { return node_types.size(); }
    /// Weighted random neighbour, or nullopt for isolated nodes. `u` in [0, 1).
    std::optional<std::uint32_t> sample_neighbor(std::uint32_t node, double u) const;
};

/// One level's block statistics with O(degree) move evaluation.
class BlockState {
public:
    struct Delta {
        std::array<double, kLayers> likelihood{};  // change in F per layer
        bool source_empties = false;
        bool target_is_new = false;
    };

    BlockState(std::shared_ptr<const Adjacency> adjacency, std::span<const BlockId> assignment);

    const Adjacency& adjacency() const noexcept { return *adj_; }
    BlockId block_of(std::uint32_t node) const { return assignment_[node]; }
    const std::vector<BlockId>& assignment() const noexcept { return assignment_; }
    std::size_t capacity() const noexcept { return size_.size(); }
    std::size_t block_size(BlockId b) const { return size_[b]; }
    NodeType block_type(BlockId b) const { return type_[b]; }
    const std::vector<std::uint32_t>& members(BlockId b) const { return members_[b]; }
    /// Non-empty blocks of a type, in no particular order.
    const std::vector<BlockId>& active(NodeType type) const { return active_[static_cast<std::size_t>(type)]; }
    std::array<std::size_t, kNodeTypes> active_counts() const noexcept;
    std::uint64_t edges_between(BlockId r, BlockId s) const;
    std::uint64_t block_total(BlockId b, Layer layer) const { return total_[b][static_cast<std::size_t>(layer)]; }

    /// F per layer, recomputed from the block statistics.
    std::array<double, kLayers> likelihood() const;

    /// Target may be kFreshBlock.
    Delta evaluate_move(std::uint32_t node, BlockId target) const;
    /// Returns the block the node landed in (allocated when target is fresh).
    BlockId move(std::uint32_t node, BlockId target);

    /// Moving every member of `from` into `into`.
    Delta evaluate_merge(BlockId from, BlockId into) const;
    void merge(BlockId from, BlockId into);

private:
    using Counts = std::unordered_map<BlockId, std::uint64_t>;

    void gather_node(std::uint32_t node) const;
    Delta evaluate(BlockId r, BlockId s, NodeType type, const std::array<std::uint64_t, kLayers>& degree) const;
    void shift(BlockId r, BlockId s, const std::array<std::uint64_t, kLayers>& degree);
    BlockId allocate(NodeType type);
    void activate(BlockId b);
    void deactivate(BlockId b);

    std::shared_ptr<const Adjacency> adj_;
    std::vector<BlockId> assignment_;
    std::vector<std::size_t> position_;  // of each node inside members_
    std::vector<std::vector<std::uint32_t>> members_;
    std::vector<std::size_t> size_;
    std::vector<NodeType> type_;
    std::vector<std::array<std::uint64_t, kLayers>> total_;
    std::vector<Counts> counts_;
    std::array<std::vector<BlockId>, kNodeTypes> active_;
    std::vector<std::size_t> active_pos_;
    std::vector<BlockId> free_;

    // Scratch for evaluation: neighbour-block weights of the moving set.
    mutable std::vector<std::uint64_t> scratch_;
    mutable std::vector<BlockId> touched_;
};

/// A hierarchy tracked as one BlockState per level over the level-0 graph,
/// each holding the composed assignment. Supports exact level-0 move deltas.
class HierarchyState {
public:
    HierarchyState(const LayeredGraph& graph, const HierarchicalPartition& partition);

    std::size_t height() const noexcept { return levels_.size(); }
    /// Current DL, kept incrementally.
    double total() const noexcept { return total_; }
    /// Level-0 block of a node. Move targets use these ids, which need not
    /// match partition()'s canonical ones.
    BlockId block_of(std::uint32_t node) const { return levels_[0].block_of(node); }
    double delta(std::uint32_t node, BlockId target) const;
    /// Applies the move and returns its delta.
    double move(std::uint32_t node, BlockId target);
    HierarchicalPartition partition() const;

private:
    struct Step {
        std::size_t level;
        BlockId from;
        BlockId to;
    };
    std::vector<Step> plan(std::uint32_t node, BlockId target) const;
    double plan_delta(std::uint32_t node, const std::vector<Step>& steps) const;
    double penalty(const std::vector<std::array<std::size_t, kNodeTypes>>& counts) const;

    std::shared_ptr<const Adjacency> adj_;
    std::array<std::size_t, kNodeTypes> node_counts_{};
    std::vector<BlockState> levels_;
    std::vector<std::vector<BlockId>> parent_;  // parent_[l][b]: level-(l+1) block of level-l block b
    double total_ = 0.0;
};

/// Probability that a token of document `doc_node` falls into word cluster
/// `cluster` at `level`. Throws Error{EmptyDocument} for tokenless documents.
double doc_cluster_prob(const LayeredGraph& graph, const HierarchicalPartition& partition, std::uint32_t doc_node,
                        BlockId cluster, std::size_t level);

}  // namespace quarry
