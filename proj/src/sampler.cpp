#include "quarry/sampler.hpp"

#include <algorithm>
#include <map>

#include "quarry/error.hpp"
#include "quarry/rng.hpp"

namespace quarry {

std::vector<std::string> random_sample(const Corpus& corpus, std::size_t n, std::uint64_t seed,
                                       const std::set<std::string>& exclude) {
    std::vector<const std::string*> pool;
    for (const auto& doc : corpus.documents()) {
        if (!exclude.count(doc.id)) pool.push_back(&doc.id);
    }
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "sample size must be at least 1");
    if (n > pool.size()) {
        throw Error(ErrorCode::SampleTooLarge, "requested " + std::to_string(n) + " documents but only " +
                                                   std::to_string(pool.size()) + " are available");
    }
    Rng rng(seed);
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform(pool.size() - i);
        std::swap(pool[i], pool[j]);
        out.push_back(*pool[i]);
    }
    return out;
}

namespace {

void check_level(const ModelSnapshot& snapshot, std::size_t level) {
    if (level >= snapshot.height()) {
        throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(level) + " out of range (height " +
                                                 std::to_string(snapshot.height()) + ")");
    }
}

double token_fraction(const Document& doc, const std::vector<BlockId>& composed, BlockId cluster) {
    std::size_t hit = 0;
    for (WordId w : doc.tokens) {
        if (w < composed.size() && composed[w] == cluster) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(doc.tokens.size());
}

}  // namespace

double doc_cluster_prob(const ModelSnapshot& snapshot, const Corpus& corpus, std::string_view doc_id,
                        BlockId cluster, std::size_t level) {
    const Document* doc = corpus.find(doc_id);
    if (doc == nullptr) throw Error(ErrorCode::NotFound, "unknown document '" + std::string(doc_id) + "'");
    if (doc->tokens.empty()) throw Error(ErrorCode::EmptyDocument, "document '" + doc->id + "' has no tokens");
    check_level(snapshot, level);
    return token_fraction(*doc, snapshot.composed(level), cluster);
}

std::vector<RankedDocument> sample_by_word_cluster(const ModelSnapshot& snapshot, const Corpus& corpus,
                                                   BlockId cluster, std::size_t level, std::size_t k) {
    if (level >= snapshot.height()) {
        throw Error(ErrorCode::NotFound, "no level " + std::to_string(level) + " in snapshot " +
                                             std::to_string(snapshot.snapshot_id));
    }
    const auto composed = snapshot.composed(level);
    const bool exists = std::any_of(composed.begin(), composed.begin() + static_cast<std::ptrdiff_t>(snapshot.words.size()),
                                    [&](BlockId b) { return b == cluster; });
    if (!exists) {
        throw Error(ErrorCode::NotFound, "no word cluster " + std::to_string(cluster) + " at level " +
                                             std::to_string(level));
    }
    std::vector<RankedDocument> ranked;
    for (const auto& doc : corpus.documents()) {
        if (doc.tokens.empty()) continue;
        const double p = token_fraction(doc, composed, cluster);
        if (p > 0.0) ranked.push_back({doc.id, p});
    }
    const auto cmp = [](const RankedDocument& a, const RankedDocument& b) {
        return a.probability != b.probability ? a.probability > b.probability : a.doc_id < b.doc_id;
    };
    if (ranked.size() > k) {
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(), cmp);
        ranked.resize(k);
    } else {
        std::sort(ranked.begin(), ranked.end(), cmp);
    }
    return ranked;
}

std::vector<WordTreeNode> pruned_word_tree(const ModelSnapshot& snapshot, const Corpus& corpus,
                                           const AnnotationSet& annotations, std::span<const std::string> code_ids) {
    std::vector<std::pair<WordId, std::string>> keywords;
    for (const auto& id : code_ids) {
        const Code* code = annotations.find_code(id);
        if (code == nullptr) throw Error(ErrorCode::NotFound, "unknown code '" + id + "'");
        for (WordId w : code->keywords) {
            if (w < snapshot.words.size()) keywords.emplace_back(w, code->id);
        }
    }
    if (keywords.empty() || snapshot.height() == 0) return {};

    const auto& vocab = corpus.vocabulary();
    const std::size_t n_words = snapshot.words.size();
    std::vector<std::vector<BlockId>> composed;
    for (std::size_t l = 0; l < snapshot.height(); ++l) composed.push_back(snapshot.composed(l));
    auto frequency = [&](WordId w) { return w < vocab.size() ? vocab.frequency(w) : 0; };
    auto by_frequency = [&](WordId a, WordId b) {
        const auto fa = frequency(a), fb = frequency(b);
        return fa != fb ? fa > fb : a < b;
    };

    auto build = [&](auto&& self, std::size_t level, BlockId cluster) -> WordTreeNode {
        WordTreeNode node;
        node.level = level;
        node.cluster = cluster;
        const auto& c = composed[level];
        std::vector<WordId> members;
        for (WordId w = 0; w < n_words; ++w) {
            if (c[w] == cluster) members.push_back(w);
        }
        const auto top = std::min(kTopWords, members.size());
        std::partial_sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(top), members.end(),
                          by_frequency);
        for (std::size_t i = 0; i < top; ++i) node.top_words.push_back(snapshot.words[members[i]]);

        std::vector<std::pair<WordId, std::string>> inside;
        std::set<BlockId> children;
        for (const auto& [w, code] : keywords) {
            if (c[w] != cluster) continue;
            inside.emplace_back(w, code);
            if (level > 0) children.insert(composed[level - 1][w]);
        }
        std::sort(inside.begin(), inside.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return by_frequency(a.first, b.first);
            return a.second < b.second;
        });
        for (const auto& [w, code] : inside) node.keywords.push_back({snapshot.words[w], code, frequency(w)});
        for (BlockId child : children) node.children.push_back(self(self, level - 1, child));
        return node;
    };
    const std::size_t top = snapshot.height() - 1;
    std::set<BlockId> roots;
    for (const auto& [w, code] : keywords) roots.insert(composed[top][w]);
    std::vector<WordTreeNode> out;
    for (BlockId r : roots) out.push_back(build(build, top, r));
    return out;
}

nlohmann::json to_json(const WordTreeNode& node) {
    nlohmann::json keywords = nlohmann::json::array();
    for (const auto& k : node.keywords) {
        keywords.push_back({{"term", k.term}, {"code_id", k.code_id}, {"frequency", k.frequency}});
    }
    nlohmann::json children = nlohmann::json::array();
    for (const auto& child : node.children) children.push_back(to_json(child));
    return {{"level", node.level},
            {"cluster_id", node.cluster},
            {"keywords", keywords},
            {"top_words", node.top_words},
            {"children", children}};
}

nlohmann::json to_json(const RankedDocument& doc) {
    return {{"doc_id", doc.doc_id}, {"probability", doc.probability}};
}

}  // namespace quarry
