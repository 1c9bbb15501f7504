#include <doctest.h>

#include <cmath>
#include <limits>

#include "quarry/error.hpp"
#include "quarry/inference.hpp"
#include "support/dl_oracle.hpp"
#include "support/synthetic.hpp"

using namespace quarry;
using quarry::testing::for_each_set_partition;

namespace {

InferenceConfig quick(std::uint64_t seed = 1) {
    InferenceConfig c;
    c.seed = seed;
    c.restarts = 2;
    c.sweeps = 20;
    return c;
}

LayeredGraph small_bipartite(Rng& rng, std::size_t words, std::size_t docs) {
    LayeredGraph g;
    g.node_types.assign(words, NodeType::Word);
    g.node_types.insert(g.node_types.end(), docs, NodeType::Document);
    for (std::size_t w = 0; w < words; ++w) {
        for (std::size_t d = 0; d < docs; ++d) {
            const auto m = rng.uniform(3);
            if (m > 0) g.add_edge(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(words + d), m);
        }
    }
    g.normalize();
    return g;
}

double enumerated_optimum(const LayeredGraph& g, std::size_t words, std::size_t docs) {
    double best = std::numeric_limits<double>::infinity();
    for_each_set_partition(words, [&](const std::vector<std::uint32_t>& pw) {
        std::uint32_t bw = 0;
        for (auto b : pw) bw = std::max(bw, b + 1);
        for_each_set_partition(docs, [&](const std::vector<std::uint32_t>& pd) {
            std::vector<BlockId> a(pw.begin(), pw.end());
            for (auto b : pd) a.push_back(bw + b);
            best = std::min(best, level_dl(g, a));
        });
    });
    return best;
}

}  // namespace

TEST_CASE("config validation and serialization") {
    InferenceConfig c;
    CHECK_NOTHROW(c.validate());
    auto rejects = [](InferenceConfig bad) {
        try {
            bad.validate();
        } catch (const Error& e) {
            return e.code() == ErrorCode::InvalidArgument;
        }
        return false;
    };
    InferenceConfig bad = c;
    bad.restarts = 0;
    CHECK(rejects(bad));
    bad = c;
    bad.initial_temperature = -1;
    CHECK(rejects(bad));
    bad = c;
    bad.initial_temperature = std::numeric_limits<double>::infinity();
    CHECK(rejects(bad));
    bad = c;
    bad.omega = 0;
    CHECK(rejects(bad));
    bad = c;
    bad.max_levels = 0;
    CHECK(rejects(bad));
    bad = c;
    bad.sweeps = 0;
    CHECK_FALSE(rejects(bad));

    c.seed = 99;
    c.omega = 4;
    c.include_non_keyword = false;
    const auto back = inference_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(inference_config_from_json(nlohmann::json::object()).restarts == 5);
    CHECK_THROWS_AS(inference_config_from_json(nlohmann::json{{"restarts", "many"}}), Error);
    CHECK_THROWS_AS(inference_config_from_json(nlohmann::json{{"restarts", 0}}), Error);
    CHECK_THROWS_AS(inference_config_from_json(nlohmann::json::array()), Error);

    // FNV-1a 64 of the sorted compact JSON, computed independently
    CHECK(config_digest(InferenceConfig{}) == "1d745db0ca9970a7");
    CHECK(config_digest(c) != config_digest(InferenceConfig{}));
    CHECK(config_digest(c).size() == 16);
}

TEST_CASE("Metropolis acceptance follows min(1, exp(-delta/T))") {
    CHECK(acceptance_probability(-3.0, 0.0) == 1.0);
    CHECK(acceptance_probability(-3.0, 2.0) == 1.0);
    CHECK(acceptance_probability(0.5, 0.0) == 0.0);
    CHECK(acceptance_probability(0.0, 0.0) == 0.0);
    CHECK(acceptance_probability(0.0, 1.0) == 1.0);
    for (double t : {0.1, 0.5, 1.0, 3.0}) {
        for (double d : {0.01, 0.3, 1.0, 5.0}) {
            const double p = std::exp(-d / t);
            CHECK(acceptance_probability(d, t) == doctest::Approx(p));
            // a stubbed uniform just below / above the threshold
            CHECK(metropolis_accept(d, t, p * 0.999));
            if (p * 1.001 < 1.0) CHECK_FALSE(metropolis_accept(d, t, p * 1.001));
        }
    }
    CHECK(metropolis_accept(-1e-12, 0.0, 0.9999999));
}

TEST_CASE("linear annealing schedule") {
    CHECK(sweep_temperature(1.0, 0, 100) == 1.0);
    CHECK(sweep_temperature(1.0, 99, 100) == 0.0);
    CHECK(sweep_temperature(2.0, 1, 3) == doctest::Approx(1.0));
    CHECK(sweep_temperature(1.0, 0, 1) == 0.0);
    double prev = 2.0;
    for (std::size_t k = 0; k < 50; ++k) {
        const double t = sweep_temperature(1.5, k, 50);
        CHECK(t <= prev);
        CHECK(t >= 0.0);
        prev = t;
    }
}

TEST_CASE("degenerate networks") {
    LayeredGraph g;
    g.node_types = {NodeType::Word, NodeType::Document};
    g.add_edge(0, 1, 3);
    g.normalize();
    const auto r = fit_hierarchy(g, quick());
    CHECK(r.partition.height() == 1);
    CHECK(r.partition.levels[0] == std::vector<BlockId>{0, 1});

    const auto empty = fit_hierarchy(LayeredGraph{}, quick());
    CHECK(empty.partition.levels.size() == 1);
    CHECK(empty.partition.levels[0].empty());

    LayeredGraph isolated;
    isolated.node_types = {NodeType::Word, NodeType::Word, NodeType::Document};
    const auto ri = fit_hierarchy(isolated, quick());
    ri.partition.validate();
}

TEST_CASE("fits are reproducible and valid") {
    const auto planted = quarry::testing::planted_bipartite(40, 20, 30, 8.0, 4);
    const auto a = fit_hierarchy(planted.graph, quick(3));
    const auto b = fit_hierarchy(planted.graph, quick(3));
    CHECK(a.partition == b.partition);
    CHECK(a.objective.total == b.objective.total);
    CHECK(a.best_restart == b.best_restart);
    a.partition.validate();
    CHECK(a.partition == canonicalize(a.partition));
    CHECK(std::abs(a.objective.total - description_length(planted.graph, a.partition).total) <= 1e-9);
    CHECK(a.partition.height() <= quick().max_levels);

    InferenceConfig single = quick(3);
    single.restarts = 1;
    const auto one = fit_hierarchy(planted.graph, single);
    CHECK(one.objective.total >= a.objective.total);
    CHECK(one.best_restart == 0);
}

TEST_CASE("best of restarts is the lowest total") {
    const auto planted = quarry::testing::planted_bipartite(30, 15, 20, 4.0, 9);
    InferenceConfig c = quick(12);
    c.sweeps = 2;
    c.restarts = 4;
    const auto all = fit_hierarchy(planted.graph, c);
    for (std::size_t i = 0; i < c.restarts; ++i) {
        InferenceConfig one = c;
        one.restarts = 1;
        one.seed = c.seed + i;  // restart i draws from seed + i
        CHECK(fit_hierarchy(planted.graph, one).objective.total >= all.objective.total - 1e-12);
    }
}

TEST_CASE("max_levels caps the height and min_levels forces coarsening") {
    // six word groups and six document groups, each document drawing from its own group
    LayeredGraph g;
    const std::size_t groups = 6, words = 60, docs = 36;
    g.node_types.assign(words, NodeType::Word);
    g.node_types.insert(g.node_types.end(), docs, NodeType::Document);
    Rng rng(4);
    for (std::size_t d = 0; d < docs; ++d) {
        const std::size_t group = d % groups;
        for (int t = 0; t < 40; ++t) {
            const std::size_t w = group * (words / groups) + rng.uniform(words / groups);
            g.add_edge(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(words + d), 1);
        }
    }
    g.normalize();
    InferenceConfig c = quick(5);
    c.max_levels = 2;
    c.min_levels = 1;
    auto r = fit_hierarchy(g, c);
    CHECK(r.partition.height() <= 2);
    c.max_levels = 5;
    c.min_levels = 3;
    r = fit_hierarchy(g, c);
    CHECK(r.partition.type_block_counts(0)[0] == groups);
    CHECK(r.partition.height() >= 3);
    CHECK(r.partition.height() <= 5);
    r.partition.validate();

    // two groups per type leave nothing to coarsen between level 0 and the top
    const auto planted = quarry::testing::planted_bipartite(60, 30, 40, 10.0, 2);
    r = fit_hierarchy(planted.graph, c);
    CHECK(r.partition.height() == 2);
}

TEST_CASE("greedy phases never raise the level DL") {
    const auto planted = quarry::testing::planted_bipartite(40, 20, 25, 5.0, 7);
    InferenceConfig c = quick(2);
    c.initial_temperature = 0.0;
    std::vector<double> phase0;
    std::vector<double> phase1;
    FitTrace trace;
    trace.on_change = [&](int phase, double t, double dl) {
        (phase == 0 ? phase0 : phase1).push_back(dl);
        if (phase == 1) CHECK(t == 0.0);
    };
    Rng rng(1);
    const auto a = fit_level(planted.graph, c, rng, &trace);
    REQUIRE_FALSE(phase0.empty());
    for (std::size_t i = 1; i < phase1.size(); ++i) CHECK(phase1[i] <= phase1[i - 1] + 1e-9);
    // the result is no worse than singletons or any agglomeration stage
    std::vector<BlockId> singles(planted.graph.node_count());
    for (std::size_t i = 0; i < singles.size(); ++i) singles[i] = static_cast<BlockId>(i);
    const double final_dl = level_dl(planted.graph, a);
    CHECK(final_dl <= level_dl(planted.graph, singles) + 1e-9);
    for (double d : phase0) CHECK(final_dl <= d + 1e-9);
    for (double d : phase1) CHECK(final_dl <= d + 1e-9);
}

TEST_CASE("annealed sweeps report their temperature") {
    const auto planted = quarry::testing::planted_bipartite(20, 10, 15, 3.0, 3);
    InferenceConfig c = quick(4);
    c.sweeps = 10;
    c.initial_temperature = 2.0;
    double last_t = 3.0;
    bool monotone = true;
    FitTrace trace;
    trace.on_change = [&](int phase, double t, double) {
        if (phase != 1) return;
        monotone &= t <= last_t;
        last_t = t;
    };
    Rng rng(9);
    fit_level(planted.graph, c, rng, &trace);
    CHECK(monotone);
}

TEST_CASE("progress is non-decreasing and ends at one") {
    const auto planted = quarry::testing::planted_bipartite(40, 20, 25, 5.0, 1);
    std::vector<double> seen;
    fit_hierarchy(planted.graph, quick(8), [&](double p) { seen.push_back(p); });
    REQUIRE_FALSE(seen.empty());
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i] >= seen[i - 1]);
    CHECK(seen.back() == 1.0);
    for (double p : seen) CHECK((p >= 0.0 && p <= 1.0));
}

TEST_CASE("small networks reach the enumerated level-0 optimum") {
    Rng rng(31);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t words = 2 + rng.uniform(3), docs = 1 + rng.uniform(3);
        const auto g = small_bipartite(rng, words, docs);
        const auto r = fit_hierarchy(g, quick(static_cast<std::uint64_t>(trial)));
        CHECK(std::abs(level_dl(g, r.partition.levels[0]) - enumerated_optimum(g, words, docs)) <= 1e-9);
    }
}

TEST_CASE("contracted networks fit through the same path") {
    const auto planted = quarry::testing::planted_bipartite(20, 10, 15, 6.0, 5);
    auto net = std::make_shared<MultilayerNetwork>();
    net->graph = planted.graph;
    net->n_words = 20;
    for (int i = 0; i < 20; ++i) net->word_terms.push_back("w" + std::to_string(i));
    for (int i = 0; i < 10; ++i) net->doc_ids.push_back("d" + std::to_string(i));
    const auto c = contract_atoms(net);
    CHECK(fit_hierarchy(c, quick(6)).partition == fit_hierarchy(planted.graph, quick(6)).partition);
}
