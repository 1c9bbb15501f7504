#include "quarry/blockmodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "quarry/error.hpp"

namespace quarry {

namespace {

constexpr BlockId kUnset = std::numeric_limits<BlockId>::max();

constexpr std::size_t idx(NodeType t) { return static_cast<std::size_t>(t); }

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::InvalidPartition, why); }

BlockId max_plus_one(const std::vector<BlockId>& v) {
    BlockId n = 0;
    for (BlockId b : v) n = std::max(n, b + 1);
    return n;
}

/// Relabels `v` in place by order of first occurrence; returns the count.
BlockId relabel_first_occurrence(std::vector<BlockId>& v) {
    std::unordered_map<BlockId, BlockId> map;
    for (auto& b : v) {
        auto [it, fresh] = map.emplace(b, static_cast<BlockId>(map.size()));
        b = it->second;
    }
    return static_cast<BlockId>(map.size());
}

}  // namespace

// --- HierarchicalPartition --------------------------------------------------

std::size_t HierarchicalPartition::block_count(std::size_t level) const {
    if (level >= levels.size()) throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(level) + " out of range");
    return max_plus_one(levels[level]);
}

std::vector<NodeType> HierarchicalPartition::block_types(std::size_t level) const {
    if (level >= levels.size()) throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(level) + " out of range");
    std::vector<NodeType> types = node_types;
    for (std::size_t l = 0; l <= level; ++l) {
        std::vector<NodeType> next(max_plus_one(levels[l]), NodeType::Word);
        for (std::size_t i = 0; i < levels[l].size() && i < types.size(); ++i) next[levels[l][i]] = types[i];
        types = std::move(next);
    }
    return types;
}

std::array<std::size_t, kNodeTypes> HierarchicalPartition::type_block_counts(std::size_t level) const {
    std::array<std::size_t, kNodeTypes> counts{};
    const auto types = block_types(level);
    std::vector<bool> used(types.size(), false);
    for (BlockId b : levels[level]) used[b] = true;
    for (std::size_t b = 0; b < types.size(); ++b) {
        if (used[b]) ++counts[idx(types[b])];
    }
    return counts;
}

std::vector<BlockId> HierarchicalPartition::composed(std::size_t level) const {
    if (level >= levels.size()) throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(level) + " out of range");
    std::vector<BlockId> c = levels[0];
    for (std::size_t l = 1; l <= level; ++l) {
        for (auto& b : c) b = levels[l][b];
    }
    return c;
}

BlockId HierarchicalPartition::cluster_of(std::uint32_t node, std::size_t level) const {
    if (level >= levels.size()) throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(level) + " out of range");
    if (node >= node_types.size()) throw Error(ErrorCode::NotFound, "node " + std::to_string(node) + " out of range");
    BlockId b = levels[0][node];
    for (std::size_t l = 1; l <= level; ++l) b = levels[l][b];
    return b;
}

void HierarchicalPartition::validate() const {
    if (levels.empty()) invalid("partition has no levels");
    std::vector<NodeType> types = node_types;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const auto& level = levels[l];
        if (level.size() != types.size()) {
            invalid("level " + std::to_string(l) + " assigns " + std::to_string(level.size()) + " items, expected " +
                    std::to_string(types.size()));
        }
        const BlockId n = max_plus_one(level);
        std::vector<int> seen(n, -1);
        for (std::size_t i = 0; i < level.size(); ++i) {
            const int t = static_cast<int>(types[i]);
            if (seen[level[i]] == -1) {
                seen[level[i]] = t;
            } else if (seen[level[i]] != t) {
                invalid("level " + std::to_string(l) + " block " + std::to_string(level[i]) + " mixes node types");
            }
        }
        std::vector<NodeType> next(n);
        for (BlockId b = 0; b < n; ++b) {
            if (seen[b] == -1) invalid("level " + std::to_string(l) + " has unused block id " + std::to_string(b));
            next[b] = static_cast<NodeType>(seen[b]);
        }
        types = std::move(next);
    }
    std::array<std::size_t, kNodeTypes> top{};
    for (auto t : types) ++top[idx(t)];
    for (auto c : top) {
        if (c > 1) invalid("top level has more than one block of a type");
    }
}

HierarchicalPartition canonicalize(const HierarchicalPartition& partition) {
    std::vector<std::vector<BlockId>> composed_levels;
    for (std::size_t l = 0; l < partition.height(); ++l) composed_levels.push_back(partition.composed(l));
    return from_composed(partition.node_types, composed_levels);
}

HierarchicalPartition from_composed(std::vector<NodeType> node_types,
                                    const std::vector<std::vector<BlockId>>& composed_levels) {
    HierarchicalPartition p;
    p.node_types = std::move(node_types);
    std::vector<BlockId> below;
    BlockId below_count = 0;
    for (std::size_t l = 0; l < composed_levels.size(); ++l) {
        std::vector<BlockId> c = composed_levels[l];
        if (c.size() != p.node_types.size()) invalid("composed level " + std::to_string(l) + " has the wrong size");
        const BlockId count = relabel_first_occurrence(c);
        if (l == 0) {
            p.levels.push_back(c);
        } else {
            std::vector<BlockId> level(below_count, kUnset);
            for (std::size_t i = 0; i < c.size(); ++i) {
                auto& slot = level[below[i]];
                if (slot == kUnset) {
                    slot = c[i];
                } else if (slot != c[i]) {
                    invalid("level " + std::to_string(l) + " does not nest in level " + std::to_string(l - 1));
                }
            }
            p.levels.push_back(std::move(level));
        }
        below = std::move(c);
        below_count = count;
    }
    p.validate();
    return p;
}

HierarchicalPartition trivial_partition(const std::vector<NodeType>& node_types) {
    HierarchicalPartition p;
    p.node_types = node_types;
    std::array<BlockId, kNodeTypes> id;
    id.fill(kUnset);
    BlockId next = 0;
    std::vector<BlockId> level(node_types.size());
    for (std::size_t i = 0; i < node_types.size(); ++i) {
        auto& slot = id[idx(node_types[i])];
        if (slot == kUnset) slot = next++;
        level[i] = slot;
    }
    p.levels.push_back(std::move(level));
    return p;
}

// --- Objective ----------------------------------------------------------------

double ObjectiveValue::breakdown_sum() const noexcept {
    double sum = 0.0;
    for (const auto& level : levels) {
        for (const auto& layer : level.layers) sum += -layer.likelihood + layer.penalty;
    }
    return sum;
}

double xlogx(double x) noexcept { return x > 0.0 ? x * std::log(x) : 0.0; }

double level_penalty(Layer layer, const std::array<std::size_t, kNodeTypes>& blocks,
                     const std::array<std::size_t, kNodeTypes>& items, std::uint64_t edges) {
    auto label = [&](NodeType t) {
        const auto b = blocks[idx(t)];
        return b > 1 ? static_cast<double>(items[idx(t)]) * std::log(static_cast<double>(b)) : 0.0;
    };
    auto b = [&](NodeType t) { return static_cast<double>(blocks[idx(t)]); };
    const double log_e = std::log(static_cast<double>(edges) + 1.0);
    if (layer == Layer::Text) {
        return b(NodeType::Word) * b(NodeType::Document) * log_e + label(NodeType::Word) + label(NodeType::Document);
    }
    return (b(NodeType::Word) * b(NodeType::Code) + b(NodeType::Code) * b(NodeType::Category)) * log_e +
           label(NodeType::Code) + label(NodeType::Category);
}

ObjectiveValue description_length(const LayeredGraph& graph, const HierarchicalPartition& partition) {
    partition.validate();
    if (partition.node_types != graph.node_types) invalid("partition does not match the network's nodes");

    ObjectiveValue out;
    std::array<std::size_t, kNodeTypes> items = graph.type_counts();
    std::unordered_map<std::uint64_t, std::uint64_t> pair_counts;
    for (std::size_t l = 0; l < partition.height(); ++l) {
        const auto c = partition.composed(l);
        const auto blocks = partition.type_block_counts(l);
        const std::size_t n_blocks = partition.block_count(l);
        LevelTerms terms;
        terms.blocks = blocks;
        for (std::size_t a = 0; a < kLayers; ++a) {
            pair_counts.clear();
            std::vector<std::uint64_t> totals(n_blocks, 0);
            std::uint64_t edges = 0;
            for (const auto& e : graph.layers[a]) {
                BlockId r = c[e.u], s = c[e.v];
                if (r > s) std::swap(r, s);
                pair_counts[(static_cast<std::uint64_t>(r) << 32) | s] += e.multiplicity;
                totals[r] += e.multiplicity;
                totals[s] += e.multiplicity;
                edges += e.multiplicity;
            }
            double f = 0.0;
            for (const auto& [key, ers] : pair_counts) {
                const auto r = static_cast<BlockId>(key >> 32);
                const auto s = static_cast<BlockId>(key & 0xffffffffu);
                const double x = static_cast<double>(ers);
                f += x * (std::log(x) - std::log(static_cast<double>(totals[r])) -
                          std::log(static_cast<double>(totals[s])));
            }
            terms.layers[a].likelihood = f;
            terms.layers[a].penalty = level_penalty(static_cast<Layer>(a), blocks, items, edges);
        }
        out.levels.push_back(terms);
        items = blocks;
    }
    out.total = out.breakdown_sum();
    return out;
}

ObjectiveValue description_length(const ContractedNetwork& network, const HierarchicalPartition& partition) {
    return description_length(network.graph, partition);
}

double delta_dl(const LayeredGraph& graph, const HierarchicalPartition& partition, std::uint32_t node,
                BlockId target) {
    return HierarchyState(graph, partition).delta(node, target);
}

HierarchicalPartition apply_move(const HierarchicalPartition& partition, std::uint32_t node, BlockId target) {
    partition.validate();
    if (node >= partition.node_types.size()) throw Error(ErrorCode::InvalidMove, "node out of range");
    const auto types = partition.block_types(0);
    const BlockId b0 = static_cast<BlockId>(types.size());
    if (target != kFreshBlock && (target >= b0 || types[target] != partition.node_types[node])) {
        throw Error(ErrorCode::InvalidMove, "target block is not a block of the node's type");
    }
    std::vector<std::vector<BlockId>> composed_levels;
    for (std::size_t l = 0; l < partition.height(); ++l) composed_levels.push_back(partition.composed(l));
    if (target == kFreshBlock) {
        composed_levels[0][node] = b0;
    } else {
        BlockId a = target;
        composed_levels[0][node] = a;
        for (std::size_t l = 1; l < partition.height(); ++l) {
            a = partition.levels[l][a];
            composed_levels[l][node] = a;
        }
    }
    return from_composed(partition.node_types, composed_levels);
}

LayeredGraph block_graph(const LayeredGraph& graph, std::span<const BlockId> assignment, std::size_t block_count) {
    LayeredGraph out;
    out.node_types.assign(block_count, NodeType::Word);
    for (std::size_t i = 0; i < assignment.size(); ++i) out.node_types[assignment[i]] = graph.node_types[i];
    for (const auto& edges : graph.layers) {
        for (const auto& e : edges) out.add_edge(assignment[e.u], assignment[e.v], e.multiplicity);
    }
    out.normalize();
    return out;
}

// --- Adjacency --------------------------------------------------------------

Adjacency::Adjacency(const LayeredGraph& graph) : node_types(graph.node_types) {
    const std::size_t n = graph.node_count();
    std::vector<std::size_t> deg(n, 0);
    for (const auto& edges : graph.layers) {
        for (const auto& e : edges) {
            ++deg[e.u];
            ++deg[e.v];
        }
    }
    offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + deg[i];
    neighbors.resize(offsets[n]);
    weights.resize(offsets[n]);
    cumulative.resize(offsets[n]);
    degree.assign(n, {0, 0});
    std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
    for (std::size_t a = 0; a < kLayers; ++a) {
        for (const auto& e : graph.layers[a]) {
            neighbors[fill[e.u]] = e.v;
            weights[fill[e.u]++] = e.multiplicity;
            neighbors[fill[e.v]] = e.u;
            weights[fill[e.v]++] = e.multiplicity;
            degree[e.u][a] += e.multiplicity;
            degree[e.v][a] += e.multiplicity;
            layer_totals[a] += e.multiplicity;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t run = 0;
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
            run += weights[k];
            cumulative[k] = run;
        }
    }
}

std::optional<std::uint32_t> Adjacency::sample_neighbor(std::uint32_t node, double u) const {
    const auto begin = offsets[node], end = offsets[node + 1];
    if (begin == end) return std::nullopt;
    const auto total = cumulative[end - 1];
    const auto pick = static_cast<std::uint64_t>(u * static_cast<double>(total));
    const auto it = std::upper_bound(cumulative.begin() + static_cast<std::ptrdiff_t>(begin),
                                     cumulative.begin() + static_cast<std::ptrdiff_t>(end), pick);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), end - 1);
    return neighbors[k];
}

// --- BlockState ---------------------------------------------------------------

BlockState::BlockState(std::shared_ptr<const Adjacency> adjacency, std::span<const BlockId> assignment)
    : adj_(std::move(adjacency)), assignment_(assignment.begin(), assignment.end()) {
    const std::size_t n = adj_->node_count();
    if (assignment_.size() != n) invalid("assignment size does not match the graph");
    std::size_t capacity = 0;
    for (BlockId b : assignment_) capacity = std::max<std::size_t>(capacity, b + 1);
    members_.resize(capacity);
    size_.assign(capacity, 0);
    type_.assign(capacity, NodeType::Word);
    total_.assign(capacity, {0, 0});
    counts_.resize(capacity);
    active_pos_.assign(capacity, 0);
    scratch_.assign(capacity, 0);
    position_.resize(n);

    std::vector<bool> typed(capacity, false);
    for (std::uint32_t v = 0; v < n; ++v) {
        const BlockId b = assignment_[v];
        if (typed[b] && type_[b] != adj_->node_types[v]) invalid("block mixes node types");
        typed[b] = true;
        type_[b] = adj_->node_types[v];
        position_[v] = members_[b].size();
        members_[b].push_back(v);
        ++size_[b];
        for (std::size_t a = 0; a < kLayers; ++a) total_[b][a] += adj_->degree[v][a];
        for (std::size_t k = adj_->offsets[v]; k < adj_->offsets[v + 1]; ++k) {
            counts_[b][assignment_[adj_->neighbors[k]]] += adj_->weights[k];
        }
    }
    for (BlockId b = 0; b < capacity; ++b) {
        if (size_[b] > 0) {
            activate(b);
        }
    }
    for (BlockId b = static_cast<BlockId>(capacity); b-- > 0;) {
        if (size_[b] == 0) free_.push_back(b);
    }
}

std::array<std::size_t, kNodeTypes> BlockState::active_counts() const noexcept {
    std::array<std::size_t, kNodeTypes> out{};
    for (std::size_t t = 0; t < kNodeTypes; ++t) out[t] = active_[t].size();
    return out;
}

std::uint64_t BlockState::edges_between(BlockId r, BlockId s) const {
    if (r >= counts_.size()) return 0;
    const auto& m = counts_[r];
    auto it = m.find(s);
    return it == m.end() ? 0 : it->second;
}

std::array<double, kLayers> BlockState::likelihood() const {
    std::array<double, kLayers> f{};
    for (BlockId r = 0; r < counts_.size(); ++r) {
        if (size_[r] == 0) continue;
        for (const auto& [s, e] : counts_[r]) {
            if (s <= r) continue;
            const auto layer = layer_between(type_[r], type_[s]);
            f[static_cast<std::size_t>(*layer)] += xlogx(static_cast<double>(e));
        }
        for (std::size_t a = 0; a < kLayers; ++a) f[a] -= xlogx(static_cast<double>(total_[r][a]));
    }
    return f;
}

void BlockState::gather_node(std::uint32_t node) const {
    for (std::size_t k = adj_->offsets[node]; k < adj_->offsets[node + 1]; ++k) {
        const BlockId t = assignment_[adj_->neighbors[k]];
        if (scratch_[t] == 0) touched_.push_back(t);
        scratch_[t] += adj_->weights[k];
    }
}

BlockState::Delta BlockState::evaluate(BlockId r, BlockId s, NodeType type,
                                       const std::array<std::uint64_t, kLayers>& degree) const {
    Delta d;
    const bool fresh = s == kFreshBlock;
    for (BlockId t : touched_) {
        const double k = static_cast<double>(scratch_[t]);
        scratch_[t] = 0;
        const auto a = static_cast<std::size_t>(*layer_between(type, type_[t]));
        const double ert = static_cast<double>(edges_between(r, t));
        const double est = fresh ? 0.0 : static_cast<double>(edges_between(s, t));
        d.likelihood[a] += xlogx(ert - k) - xlogx(ert) + xlogx(est + k) - xlogx(est);
    }
    touched_.clear();
    for (std::size_t a = 0; a < kLayers; ++a) {
        if (degree[a] == 0) continue;
        const double dg = static_cast<double>(degree[a]);
        const double er = static_cast<double>(total_[r][a]);
        const double es = fresh ? 0.0 : static_cast<double>(total_[s][a]);
        d.likelihood[a] -= xlogx(er - dg) - xlogx(er) + xlogx(es + dg) - xlogx(es);
    }
    d.target_is_new = fresh || size_[s] == 0;
    return d;
}

BlockState::Delta BlockState::evaluate_move(std::uint32_t node, BlockId target) const {
    if (node >= assignment_.size()) throw Error(ErrorCode::InvalidMove, "node out of range");
    const BlockId r = assignment_[node];
    if (target == r) return {};
    const NodeType type = adj_->node_types[node];
    if (target != kFreshBlock && (target >= size_.size() || (size_[target] > 0 && type_[target] != type))) {
        throw Error(ErrorCode::InvalidMove, "target block has a different node type");
    }
    gather_node(node);
    Delta d = evaluate(r, target, type, adj_->degree[node]);
    d.source_empties = size_[r] == 1;
    return d;
}

BlockState::Delta BlockState::evaluate_merge(BlockId from, BlockId into) const {
    if (from == into) return {};
    for (const auto& [t, e] : counts_[from]) {
        touched_.push_back(t);
        scratch_[t] = e;
    }
    Delta d = evaluate(from, into, type_[from], total_[from]);
    d.source_empties = true;
    return d;
}

void BlockState::shift(BlockId r, BlockId s, const std::array<std::uint64_t, kLayers>& degree) {
    auto decrement = [](Counts& m, BlockId key, std::uint64_t k) {
        auto it = m.find(key);
        if ((it->second -= k) == 0) m.erase(it);
    };
    for (BlockId t : touched_) {
        const auto k = scratch_[t];
        scratch_[t] = 0;
        decrement(counts_[r], t, k);
        decrement(counts_[t], r, k);
        counts_[s][t] += k;
        counts_[t][s] += k;
    }
    touched_.clear();
    for (std::size_t a = 0; a < kLayers; ++a) {
        total_[r][a] -= degree[a];
        total_[s][a] += degree[a];
    }
}

BlockId BlockState::allocate(NodeType type) {
    BlockId b;
    if (!free_.empty()) {
        b = free_.back();
        free_.pop_back();
    } else {
        b = static_cast<BlockId>(size_.size());
        members_.emplace_back();
        size_.push_back(0);
        type_.push_back(type);
        total_.push_back({0, 0});
        counts_.emplace_back();
        active_pos_.push_back(0);
        scratch_.push_back(0);
    }
    type_[b] = type;
    return b;
}

void BlockState::activate(BlockId b) {
    auto& list = active_[idx(type_[b])];
    active_pos_[b] = list.size();
    list.push_back(b);
}

void BlockState::deactivate(BlockId b) {
    auto& list = active_[idx(type_[b])];
    const auto pos = active_pos_[b];
    list[pos] = list.back();
    active_pos_[list[pos]] = pos;
    list.pop_back();
}

BlockId BlockState::move(std::uint32_t node, BlockId target) {
    const BlockId r = assignment_[node];
    if (target == r) return r;
    const NodeType type = adj_->node_types[node];
    if (target != kFreshBlock && (target >= size_.size() || (size_[target] > 0 && type_[target] != type))) {
        throw Error(ErrorCode::InvalidMove, "target block has a different node type");
    }
    BlockId s = target;
    if (s == kFreshBlock) {
        s = allocate(type);
    } else if (size_[s] == 0) {
        auto it = std::find(free_.begin(), free_.end(), s);
        if (it != free_.end()) free_.erase(it);
        type_[s] = type;
    }
    gather_node(node);
    shift(r, s, adj_->degree[node]);

    auto& from = members_[r];
    const auto pos = position_[node];
    from[pos] = from.back();
    position_[from[pos]] = pos;
    from.pop_back();
    position_[node] = members_[s].size();
    members_[s].push_back(node);
    assignment_[node] = s;

    if (size_[s]++ == 0) activate(s);
    if (--size_[r] == 0) {
        deactivate(r);
        free_.push_back(r);
    }
    return s;
}

void BlockState::merge(BlockId from, BlockId into) {
    if (from == into) return;
    for (const auto& [t, e] : counts_[from]) {
        touched_.push_back(t);
        scratch_[t] = e;
    }
    const auto degree = total_[from];
    shift(from, into, degree);
    for (std::uint32_t v : members_[from]) {
        assignment_[v] = into;
        position_[v] = members_[into].size();
        members_[into].push_back(v);
    }
    if (size_[into] == 0) activate(into);
    size_[into] += size_[from];
    size_[from] = 0;
    members_[from].clear();
    deactivate(from);
    free_.push_back(from);
}

// --- HierarchyState -------------------------------------------------------------

HierarchyState::HierarchyState(const LayeredGraph& graph, const HierarchicalPartition& partition)
    : adj_(std::make_shared<Adjacency>(graph)) {
    partition.validate();
    if (partition.node_types != graph.node_types) invalid("partition does not match the network's nodes");
    node_counts_ = graph.type_counts();
    for (std::size_t l = 0; l < partition.height(); ++l) {
        const auto c = partition.composed(l);
        levels_.emplace_back(adj_, c);
        if (l + 1 < partition.height()) parent_.push_back(partition.levels[l + 1]);
    }
    std::vector<std::array<std::size_t, kNodeTypes>> counts;
    for (const auto& s : levels_) counts.push_back(s.active_counts());
    total_ = penalty(counts);
    for (const auto& s : levels_) {
        for (double f : s.likelihood()) total_ -= f;
    }
}

double HierarchyState::penalty(const std::vector<std::array<std::size_t, kNodeTypes>>& counts) const {
    double p = 0.0;
    for (std::size_t l = 0; l < counts.size(); ++l) {
        const auto& items = l == 0 ? node_counts_ : counts[l - 1];
        for (std::size_t a = 0; a < kLayers; ++a) {
            p += level_penalty(static_cast<Layer>(a), counts[l], items, adj_->layer_totals[a]);
        }
    }
    return p;
}

std::vector<HierarchyState::Step> HierarchyState::plan(std::uint32_t node, BlockId target) const {
    if (node >= adj_->node_count()) throw Error(ErrorCode::InvalidMove, "node out of range");
    const auto& base = levels_[0];
    const BlockId r = base.block_of(node);
    std::vector<Step> steps;
    if (target == r) return steps;
    if (target != kFreshBlock && (target >= base.capacity() || base.block_size(target) == 0 ||
                                  base.block_type(target) != adj_->node_types[node])) {
        throw Error(ErrorCode::InvalidMove, "target is not a block of the node's type");
    }
    steps.push_back({0, r, target});
    if (target == kFreshBlock) return steps;
    BlockId a = target;
    for (std::size_t l = 1; l < levels_.size(); ++l) {
        a = parent_[l - 1][a];
        const BlockId from = levels_[l].block_of(node);
        if (from == a) break;
        steps.push_back({l, from, a});
    }
    return steps;
}

double HierarchyState::plan_delta(std::uint32_t node, const std::vector<Step>& steps) const {
    if (steps.empty()) return 0.0;
    std::vector<std::array<std::size_t, kNodeTypes>> before, after;
    for (const auto& s : levels_) before.push_back(s.active_counts());
    after = before;
    const auto t = idx(adj_->node_types[node]);
    double df = 0.0;
    for (const auto& step : steps) {
        const auto d = levels_[step.level].evaluate_move(node, step.to);
        for (double x : d.likelihood) df += x;
        if (d.source_empties) --after[step.level][t];
        if (d.target_is_new) ++after[step.level][t];
    }
    return -df + penalty(after) - penalty(before);
}

double HierarchyState::delta(std::uint32_t node, BlockId target) const { return plan_delta(node, plan(node, target)); }

double HierarchyState::move(std::uint32_t node, BlockId target) {
    const auto steps = plan(node, target);
    const double d = plan_delta(node, steps);
    for (const auto& step : steps) {
        const BlockId landed = levels_[step.level].move(node, step.to);
        if (step.level == 0 && step.to == kFreshBlock && !parent_.empty()) {
            if (parent_[0].size() <= landed) parent_[0].resize(landed + 1, kUnset);
            parent_[0][landed] = parent_[0][step.from];
        }
    }
    total_ += d;
    return d;
}

HierarchicalPartition HierarchyState::partition() const {
    std::vector<std::vector<BlockId>> composed_levels;
    for (const auto& s : levels_) composed_levels.push_back(s.assignment());
    return from_composed(adj_->node_types, composed_levels);
}

// --- Queries --------------------------------------------------------------------

double doc_cluster_prob(const LayeredGraph& graph, const HierarchicalPartition& partition, std::uint32_t doc_node,
                        BlockId cluster, std::size_t level) {
    if (level >= partition.height()) {
        throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(level) + " out of range");
    }
    if (doc_node >= graph.node_count() || graph.node_types[doc_node] != NodeType::Document) {
        throw Error(ErrorCode::NotFound, "node " + std::to_string(doc_node) + " is not a document");
    }
    std::uint64_t hit = 0, all = 0;
    for (const auto& e : graph.layers[static_cast<std::size_t>(Layer::Text)]) {
        if (e.v != doc_node && e.u != doc_node) continue;
        const auto word = e.u == doc_node ? e.v : e.u;
        all += e.multiplicity;
        if (partition.cluster_of(word, level) == cluster) hit += e.multiplicity;
    }
    if (all == 0) throw Error(ErrorCode::EmptyDocument, "document has no tokens");
    return static_cast<double>(hit) / static_cast<double>(all);
}

}  // namespace quarry
