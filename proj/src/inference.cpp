#include "quarry/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <optional>
#include <thread>

#include "quarry/error.hpp"

namespace quarry {

namespace {

constexpr std::size_t idx(NodeType t) { return static_cast<std::size_t>(t); }

using Counts = std::array<std::size_t, kNodeTypes>;

/// Level DL bookkeeping shared by agglomeration, sweeps and coarsening.
struct LevelObjective {
    Counts items{};
    std::array<std::uint64_t, kLayers> edges{};

    double penalty(const Counts& blocks) const {
        double p = 0.0;
        for (std::size_t a = 0; a < kLayers; ++a) p += level_penalty(static_cast<Layer>(a), blocks, items, edges[a]);
        return p;
    }
    double value(const BlockState& st) const {
        double dl = penalty(st.active_counts());
        for (double f : st.likelihood()) dl -= f;
        return dl;
    }
    double delta(const BlockState::Delta& d, NodeType type, const Counts& before) const {
        Counts after = before;
        if (d.source_empties) --after[idx(type)];
        if (d.target_is_new) ++after[idx(type)];
        double df = 0.0;
        for (double x : d.likelihood) df += x;
        return -df + penalty(after) - penalty(before);
    }
};

LevelObjective objective_for(const Adjacency& adj) {
    LevelObjective o;
    for (auto t : adj.node_types) ++o.items[idx(t)];
    o.edges = adj.layer_totals;
    return o;
}

std::vector<BlockId> identity(std::size_t n) {
    std::vector<BlockId> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<BlockId>(i);
    return a;
}

std::vector<BlockId> canonical(std::vector<BlockId> a) {
    std::unordered_map<BlockId, BlockId> map;
    for (auto& b : a) b = map.emplace(b, static_cast<BlockId>(map.size())).first->second;
    return a;
}

std::vector<BlockId> merged_by_type(const LayeredGraph& g) {
    std::array<BlockId, kNodeTypes> id;
    id.fill(kFreshBlock);
    BlockId next = 0;
    std::vector<BlockId> a(g.node_count());
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto& slot = id[idx(g.node_types[i])];
        if (slot == kFreshBlock) slot = next++;
        a[i] = slot;
    }
    return a;
}

Counts blocks_by_type(const LayeredGraph& g, const std::vector<BlockId>& a) {
    std::vector<std::optional<NodeType>> seen;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (seen.size() <= a[i]) seen.resize(a[i] + 1);
        seen[a[i]] = g.node_types[i];
    }
    Counts c{};
    for (const auto& t : seen) {
        if (t) ++c[idx(*t)];
    }
    return c;
}

struct Candidate {
    double delta;
    BlockId a;
    BlockId b;

    bool better_than(const Candidate& o) const {
        if (delta != o.delta) return delta < o.delta;
        if (std::min(a, b) != std::min(o.a, o.b)) return std::min(a, b) < std::min(o.a, o.b);
        return std::max(a, b) < std::max(o.a, o.b);
    }
};

/// Random same-type block pair, mostly found by a two-step walk from a
/// member of the first block.
std::optional<std::pair<BlockId, BlockId>> sample_pair(const BlockState& st, Rng& rng,
                                                       std::optional<NodeType> only = std::nullopt) {
    std::size_t pool = 0;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        if (only && idx(*only) != t) continue;
        if (st.active(static_cast<NodeType>(t)).size() >= 2) pool += st.active(static_cast<NodeType>(t)).size();
    }
    if (pool == 0) return std::nullopt;
    std::size_t pick = rng.uniform(pool);
    BlockId r = 0;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        if (only && idx(*only) != t) continue;
        const auto& list = st.active(static_cast<NodeType>(t));
        if (list.size() < 2) continue;
        if (pick < list.size()) {
            r = list[pick];
            break;
        }
        pick -= list.size();
    }
    const NodeType type = st.block_type(r);
    const auto& adj = st.adjacency();
    const auto& members = st.members(r);
    for (int attempt = 0; attempt < 3; ++attempt) {
        const std::uint32_t u = members[rng.uniform(members.size())];
        const auto x = adj.sample_neighbor(u, rng.uniform01());
        if (!x) break;
        const auto y = adj.sample_neighbor(*x, rng.uniform01());
        if (y && adj.node_types[*y] == type && st.block_of(*y) != r) return std::pair{r, st.block_of(*y)};
    }
    const auto& list = st.active(type);
    BlockId s = r;
    while (s == r) s = list[rng.uniform(list.size())];
    return std::pair{r, s};
}

constexpr std::size_t kExhaustiveBlocks = 32;

/// Zero-temperature pass of single-node moves. Types with few blocks try
/// every block; otherwise targets come from two-step walks and one uniform
/// draw. Returns the DL change.
double greedy_sweep(BlockState& st, const LevelObjective& obj, Rng& rng, std::vector<std::uint32_t>& order,
                    const std::function<void(double)>& on_move) {
    const auto& adj = st.adjacency();
    double total = 0.0;
    rng.shuffle(order.begin(), order.end());
    for (std::uint32_t v : order) {
        const NodeType type = adj.node_types[v];
        const auto& list = st.active(type);
        if (list.size() < 2) continue;
        const BlockId r = st.block_of(v);
        const Counts counts = st.active_counts();
        std::optional<Candidate> best;
        auto consider = [&](BlockId s) {
            if (s == r) return;
            const Candidate c{obj.delta(st.evaluate_move(v, s), type, counts), s, s};
            if (!best || c.better_than(*best)) best = c;
        };
        if (list.size() <= kExhaustiveBlocks) {
            for (BlockId s : list) consider(s);
        } else {
            for (int k = 0; k < 3; ++k) {
                const auto x = adj.sample_neighbor(v, rng.uniform01());
                if (!x) break;
                const auto y = adj.sample_neighbor(*x, rng.uniform01());
                if (y && adj.node_types[*y] == type) consider(st.block_of(*y));
            }
            consider(list[rng.uniform(list.size())]);
        }
        if (best && best->delta < 0.0) {
            st.move(v, best->a);
            total += best->delta;
            if (on_move) on_move(best->delta);
        }
    }
    return total;
}

constexpr double kMergeRatio = 1.3;
constexpr int kRelaxPasses = 5;
constexpr int kPolishTrials = 8;
constexpr double kRelaxTolerance = 1e-7;

/// Best merge partner for every active block of a type with two or more
/// blocks. Partners come from two-step walks plus uniform draws; small types
/// are enumerated in full.
std::vector<Candidate> merge_proposals(const BlockState& st, const LevelObjective& obj, std::size_t m, Rng& rng) {
    const auto& adj = st.adjacency();
    const Counts counts = st.active_counts();
    std::vector<Candidate> out;
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        const auto type = static_cast<NodeType>(t);
        const auto list = st.active(type);
        if (list.size() < 2) continue;
        for (BlockId r : list) {
            std::optional<Candidate> best;
            auto consider = [&](BlockId s) {
                if (s == r) return;
                const Candidate c{obj.delta(st.evaluate_merge(r, s), type, counts), r, s};
                if (!best || c.better_than(*best)) best = c;
            };
            if (list.size() <= m + 1) {
                for (BlockId s : list) consider(s);
            } else {
                const auto& members = st.members(r);
                for (std::size_t i = 0; i < m; ++i) {
                    std::optional<std::uint32_t> y;
                    if (i % 2 == 0) {
                        const auto x = adj.sample_neighbor(members[rng.uniform(members.size())], rng.uniform01());
                        if (x) y = adj.sample_neighbor(*x, rng.uniform01());
                    }
                    if (y && adj.node_types[*y] == type) {
                        consider(st.block_of(*y));
                    } else {
                        consider(list[rng.uniform(list.size())]);
                    }
                }
            }
            if (best) out.push_back(*best);
        }
    }
    return out;
}

/// Merges `a` and `b`, folding the smaller block into the larger.
void apply_merge(BlockState& st, BlockId a, BlockId b) {
    if (st.block_size(a) > st.block_size(b) || (st.block_size(a) == st.block_size(b) && a < b)) std::swap(a, b);
    st.merge(a, b);
}

void relax(BlockState& st, const LevelObjective& obj, Rng& rng, std::vector<std::uint32_t>& order, int passes) {
    for (int pass = 0; pass < passes; ++pass) {
        if (greedy_sweep(st, obj, rng, order, {}) > -kRelaxTolerance) break;
    }
}

/// Tries the most promising block merges, each followed by relaxation of the
/// merged members, and keeps a merged state only when it ends below `current`.
double polish(BlockState& st, const LevelObjective& obj, double current, std::size_t m, Rng& rng) {
    for (bool improved = true; improved;) {
        improved = false;
        auto proposals = merge_proposals(st, obj, m, rng);
        std::sort(proposals.begin(), proposals.end(),
                  [](const Candidate& x, const Candidate& y) { return x.better_than(y); });
        if (proposals.size() > kPolishTrials) proposals.resize(kPolishTrials);
        for (const auto& c : proposals) {
            BlockState trial = st;
            std::vector<std::uint32_t> local = trial.members(c.a);
            local.insert(local.end(), trial.members(c.b).begin(), trial.members(c.b).end());
            apply_merge(trial, c.a, c.b);
            relax(trial, obj, rng, local, 4 * kRelaxPasses);
            const double value = obj.value(trial);
            if (value < current - kRelaxTolerance) {
                st = std::move(trial);
                current = value;
                improved = true;
                break;
            }
        }
    }
    return current;
}

/// Greedy coarsening to about half the blocks of each type with three or
/// more items, applied even when it raises the level's DL.
std::vector<BlockId> forced_coarsen(const LayeredGraph& g, const InferenceConfig& config, Rng& rng) {
    auto adj = std::make_shared<Adjacency>(g);
    BlockState st(adj, identity(g.node_count()));
    const auto obj = objective_for(*adj);
    Counts target = obj.items;
    for (auto& t : target) {
        if (t >= 3) t = (t + 1) / 2;
    }
    for (std::size_t t = 0; t < kNodeTypes; ++t) {
        const auto type = static_cast<NodeType>(t);
        while (st.active(type).size() > target[t]) {
            const Counts counts = st.active_counts();
            std::optional<Candidate> best;
            auto consider = [&](BlockId a, BlockId b) {
                const Candidate c{obj.delta(st.evaluate_merge(a, b), type, counts), a, b};
                if (!best || c.better_than(*best)) best = c;
            };
            const auto& list = st.active(type);
            if (list.size() <= 64) {
                for (std::size_t i = 0; i < list.size(); ++i) {
                    for (std::size_t j = i + 1; j < list.size(); ++j) consider(list[i], list[j]);
                }
            } else {
                for (std::size_t i = 0; i < config.merge_candidates; ++i) {
                    if (auto p = sample_pair(st, rng, type)) consider(p->first, p->second);
                }
            }
            apply_merge(st, best->a, best->b);
        }
    }
    return canonical(st.assignment());
}

}  // namespace

// --- Config ---------------------------------------------------------------------

void InferenceConfig::validate() const {
    auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, why); };
    if (restarts < 1) bad("restarts must be at least 1");
    if (max_levels < 1) bad("max_levels must be at least 1");
    if (merge_candidates < 1) bad("merge_candidates must be at least 1");
    if (!(initial_temperature >= 0.0) || !std::isfinite(initial_temperature)) {
        bad("initial_temperature must be finite and non-negative");
    }
    if (omega < 1) bad("omega must be at least 1");
}

nlohmann::json to_json(const InferenceConfig& c) {
    return nlohmann::json{{"seed", c.seed},
                          {"restarts", c.restarts},
                          {"sweeps", c.sweeps},
                          {"initial_temperature", c.initial_temperature},
                          {"merge_candidates", c.merge_candidates},
                          {"max_levels", c.max_levels},
                          {"min_levels", c.min_levels},
                          {"merge_patience", c.merge_patience},
                          {"omega", c.omega},
                          {"include_non_keyword", c.include_non_keyword}};
}

InferenceConfig inference_config_from_json(const nlohmann::json& j) {
    InferenceConfig c;
    if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "inference config must be an object");
    try {
        c.seed = j.value("seed", c.seed);
        c.restarts = j.value("restarts", c.restarts);
        c.sweeps = j.value("sweeps", c.sweeps);
        c.initial_temperature = j.value("initial_temperature", c.initial_temperature);
        c.merge_candidates = j.value("merge_candidates", c.merge_candidates);
        c.max_levels = j.value("max_levels", c.max_levels);
        c.min_levels = j.value("min_levels", c.min_levels);
        c.merge_patience = j.value("merge_patience", c.merge_patience);
        c.omega = j.value("omega", c.omega);
        c.include_non_keyword = j.value("include_non_keyword", c.include_non_keyword);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad inference config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string config_digest(const InferenceConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(config).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double acceptance_probability(double delta, double temperature) noexcept {
    if (delta < 0.0) return 1.0;
    if (temperature <= 0.0) return 0.0;
    return std::min(1.0, std::exp(-delta / temperature));
}

double sweep_temperature(double initial, std::size_t sweep, std::size_t sweeps) noexcept {
    if (sweeps <= 1) return 0.0;
    return initial * (1.0 - static_cast<double>(sweep) / static_cast<double>(sweeps - 1));
}

// --- Level fit --------------------------------------------------------------------

double level_dl(const LayeredGraph& graph, std::span<const BlockId> assignment) {
    auto adj = std::make_shared<Adjacency>(graph);
    BlockState st(adj, assignment);
    return objective_for(*adj).value(st);
}

std::vector<BlockId> fit_level(const LayeredGraph& graph, const InferenceConfig& config, Rng& rng,
                               const FitTrace* trace, const std::function<void(double)>& progress) {
    const std::size_t n = graph.node_count();
    if (n == 0) return {};
    auto adj = std::make_shared<Adjacency>(graph);
    BlockState st(adj, identity(n));
    const auto obj = objective_for(*adj);
    double current = obj.value(st);
    auto report = [&](int phase, double t) {
        if (trace && trace->on_change) trace->on_change(phase, t, current);
    };

    // Staged agglomeration from singletons. Every stage merges about a
    // quarter of the blocks, each block proposing its best partner, then
    // relaxes the result with zero-temperature node passes. The lowest DL
    // seen along the way is kept.
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t v = 0; v < n; ++v) order[v] = v;
    auto active_total = [&] {
        std::size_t b = 0;
        for (auto c : st.active_counts()) b += c;
        return b;
    };
    std::vector<BlockId> best_assignment = st.assignment();
    double best_dl = current;
    std::size_t stale = 0;
    while (stale < std::max<std::size_t>(1, config.merge_patience)) {
        const std::size_t before = active_total();
        const std::size_t merges = std::max<std::size_t>(1, before - static_cast<std::size_t>(before / kMergeRatio));
        auto proposals = merge_proposals(st, obj, config.merge_candidates, rng);
        if (proposals.empty()) break;
        std::sort(proposals.begin(), proposals.end(),
                  [](const Candidate& x, const Candidate& y) { return x.better_than(y); });
        std::vector<bool> touched(st.capacity(), false);
        std::size_t done = 0;
        for (const auto& c : proposals) {
            if (done == merges) break;
            if (touched[c.a] || touched[c.b]) continue;
            touched[c.a] = touched[c.b] = true;
            apply_merge(st, c.a, c.b);
            ++done;
        }
        relax(st, obj, rng, order, kRelaxPasses);
        current = obj.value(st);
        report(0, 0.0);
        if (current < best_dl - kRelaxTolerance) {
            best_dl = current;
            best_assignment = st.assignment();
            stale = 0;
        } else {
            ++stale;
        }
    }
    if (best_assignment != st.assignment()) st = BlockState(adj, best_assignment);
    current = best_dl;
    if (progress) progress(0.2);

    // Annealed single-node sweeps, keeping the best state seen at sweep ends.
    for (std::size_t k = 0; k < config.sweeps; ++k) {
        const double temperature = sweep_temperature(config.initial_temperature, k, config.sweeps);
        rng.shuffle(order.begin(), order.end());
        for (std::uint32_t v : order) {
            const NodeType type = adj->node_types[v];
            const auto& list = st.active(type);
            const std::size_t pick = rng.uniform(list.size() + 1);
            const BlockId target = pick == list.size() ? kFreshBlock : list[pick];
            const BlockId r = st.block_of(v);
            if (target == r || (target == kFreshBlock && st.block_size(r) == 1)) continue;
            const double delta = obj.delta(st.evaluate_move(v, target), type, st.active_counts());
            if (delta >= 0.0 && !metropolis_accept(delta, temperature, rng.uniform01())) continue;
            st.move(v, target);
            current += delta;
            report(1, temperature);
        }
        if (current < best_dl) {
            best_dl = current;
            best_assignment = st.assignment();
        }
        if (progress) progress(0.2 + 0.8 * static_cast<double>(k + 1) / static_cast<double>(config.sweeps));
    }
    if (best_assignment != st.assignment()) st = BlockState(adj, best_assignment);
    relax(st, obj, rng, order, 4 * kRelaxPasses);
    polish(st, obj, obj.value(st), config.merge_candidates, rng);
    if (progress) progress(1.0);
    return canonical(st.assignment());
}

// --- Hierarchy --------------------------------------------------------------------

namespace {

HierarchicalPartition build_hierarchy(const LayeredGraph& graph, const InferenceConfig& config, Rng& rng,
                                      const FitTrace* trace, const std::function<void(double)>& progress) {
    HierarchicalPartition p;
    p.node_types = graph.node_types;
    LayeredGraph current = graph;
    for (std::size_t l = 0;; ++l) {
        const std::size_t n_items = current.node_count();
        const Counts items = current.type_counts();
        std::vector<BlockId> a;
        if (l + 1 >= config.max_levels) {
            a = merged_by_type(current);
        } else {
            a = fit_level(current, config, rng, l == 0 ? trace : nullptr,
                          l == 0 ? progress : std::function<void(double)>{});
            const auto blocks = blocks_by_type(current, a);
            std::size_t total = 0;
            for (auto b : blocks) total += b;
            if (l > 0 && total == n_items) a = merged_by_type(current);
            const auto after = blocks_by_type(current, a);
            const bool collapsed = std::all_of(after.begin(), after.end(), [](auto b) { return b <= 1; });
            const bool divisible = std::any_of(items.begin(), items.end(), [](auto c) { return c >= 3; });
            if (l > 0 && collapsed && divisible && l + 1 < config.min_levels && l + 2 <= config.max_levels) {
                a = forced_coarsen(current, config, rng);
            }
        }
        const auto blocks = blocks_by_type(current, a);
        std::size_t total = 0;
        for (auto b : blocks) total += b;
        p.levels.push_back(a);
        if (std::all_of(blocks.begin(), blocks.end(), [](auto b) { return b <= 1; })) break;
        current = block_graph(current, a, total);
    }
    return canonicalize(p);
}

}  // namespace

FitResult fit_hierarchy(const LayeredGraph& graph, const InferenceConfig& config, const ProgressFn& progress,
                        const FitTrace* trace) {
    config.validate();
    FitResult best;
    if (graph.node_count() == 0) {
        best.partition.levels.emplace_back();
        if (progress) progress(1.0);
        return best;
    }
    // Restarts are independent and run on worker threads; the winner is the
    // lowest total, ties going to the lower restart index. A trace forces a
    // single thread so its callbacks stay ordered.
    const std::size_t n = config.restarts;
    std::vector<HierarchicalPartition> partitions(n);
    std::vector<ObjectiveValue> objectives(n);
    std::vector<double> done(n, 0.0);
    std::mutex mutex;
    double reported = 0.0;
    auto report = [&](std::size_t i, double f) {
        if (!progress) return;
        std::lock_guard lock(mutex);
        done[i] = f;
        double sum = 0.0;
        for (double d : done) sum += d;
        const double p = sum / static_cast<double>(n);
        if (p > reported) {
            reported = p;
            progress(p);
        }
    };
    auto run = [&](std::size_t i) {
        Rng rng(splitmix64(config.seed + i));
        partitions[i] = build_hierarchy(graph, config, rng, trace, [&](double f) { report(i, 0.95 * f); });
        objectives[i] = description_length(graph, partitions[i]);
        report(i, 1.0);
    };
    const std::size_t workers =
        trace ? 1 : std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        run(i);
                    } catch (...) {
                        std::lock_guard lock(mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0 || objectives[i].total < best.objective.total) {
            best.partition = std::move(partitions[i]);
            best.objective = std::move(objectives[i]);
            best.best_restart = i;
        }
    }
    return best;
}

FitResult fit_hierarchy(const ContractedNetwork& network, const InferenceConfig& config, const ProgressFn& progress) {
    return fit_hierarchy(network.graph, config, progress);
}

}  // namespace quarry
