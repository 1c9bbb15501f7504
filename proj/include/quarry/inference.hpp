#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quarry/blockmodel.hpp"
#include "quarry/multinet.hpp"
#include "quarry/rng.hpp"

namespace quarry {

struct InferenceConfig {
    std::uint64_t seed = 0;
    std::size_t restarts = 5;
    std::size_t sweeps = 100;  // per level
    double initial_temperature = 1.0;
    std::size_t merge_candidates = 20;
    std::size_t max_levels = 5;
    std::size_t min_levels = 3;
    /// Consecutive agglomeration stages without a new lowest DL before the
    /// level's agglomeration stops.
    std::size_t merge_patience = 3;
    std::uint64_t omega = 1;
    bool include_non_keyword = true;

    /// Throws Error{InvalidArgument} when a field is out of range.
    void validate() const;
    NetworkConfig network() const { return NetworkConfig{omega, include_non_keyword}; }
};

nlohmann::json to_json(const InferenceConfig& config);
/// Missing fields keep their defaults.
InferenceConfig inference_config_from_json(const nlohmann::json& j);
/// FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string config_digest(const InferenceConfig& config);

/// Metropolis acceptance: 1 for improving moves, exp(-delta/T) otherwise,
/// 0 for worsening moves at T <= 0.
double acceptance_probability(double delta, double temperature) noexcept;
/// `u` is a uniform draw in [0, 1).
inline bool metropolis_accept(double delta, double temperature, double u) noexcept {
    return u < acceptance_probability(delta, temperature);
}

/// Temperature of sweep k out of K: linear from T0 down to 0.
double sweep_temperature(double initial, std::size_t sweep, std::size_t sweeps) noexcept;

/// Called with a fraction in [0, 1]; never decreases within one fit.
using ProgressFn = std::function<void(double)>;

/// Observer for tests: receives the running level DL after every accepted
/// change during agglomeration (phase 0) and sweeps (phase 1, with the
/// sweep's temperature).
struct FitTrace {
    std::function<void(int phase, double temperature, double level_dl)> on_change;
};

struct FitResult {
    HierarchicalPartition partition;
    ObjectiveValue objective;
    std::size_t best_restart = 0;
};

/// One level: agglomerative merging from singletons, then annealed sweeps.
/// Returns a canonical assignment of the graph's nodes.
std::vector<BlockId> fit_level(const LayeredGraph& graph, const InferenceConfig& config, Rng& rng,
                               const FitTrace* trace = nullptr, const std::function<void(double)>& progress = {});

/// DL of a single level over `graph` (items = the graph's nodes).
double level_dl(const LayeredGraph& graph, std::span<const BlockId> assignment);

FitResult fit_hierarchy(const LayeredGraph& graph, const InferenceConfig& config, const ProgressFn& progress = {},
                        const FitTrace* trace = nullptr);
FitResult fit_hierarchy(const ContractedNetwork& network, const InferenceConfig& config,
                        const ProgressFn& progress = {});

}  // namespace quarry
