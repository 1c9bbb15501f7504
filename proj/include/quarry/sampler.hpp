#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "quarry/annotations.hpp"
#include "quarry/corpus.hpp"
#include "quarry/snapshot.hpp"

namespace quarry {

/// `n` distinct document ids drawn uniformly without replacement from the
/// corpus minus `exclude`, in draw order.
std::vector<std::string> random_sample(const Corpus& corpus, std::size_t n, std::uint64_t seed,
                                       const std::set<std::string>& exclude = {});

/// Fraction of the document's tokens that fall in word cluster `cluster` at
/// `level`. Throws Error{EmptyDocument} for documents without tokens.
double doc_cluster_prob(const ModelSnapshot& snapshot, const Corpus& corpus, std::string_view doc_id,
                        BlockId cluster, std::size_t level);

struct RankedDocument {
    std::string doc_id;
    double probability = 0.0;
};

inline constexpr std::size_t kClusterSampleSize = 30;

/// Top-k documents by doc_cluster_prob, descending, ties by ascending id;
/// zero-probability documents are left out.
std::vector<RankedDocument> sample_by_word_cluster(const ModelSnapshot& snapshot, const Corpus& corpus,
                                                   BlockId cluster, std::size_t level,
                                                   std::size_t k = kClusterSampleSize);

struct TreeKeyword {
    std::string term;
    std::string code_id;
    std::uint64_t frequency = 0;
};

struct WordTreeNode {
    std::size_t level = 0;
    BlockId cluster = 0;
    std::vector<TreeKeyword> keywords;   // frequency descending
    std::vector<std::string> top_words;  // ten most frequent members
    std::vector<WordTreeNode> children;
};

inline constexpr std::size_t kTopWords = 10;

/// Word-cluster hierarchy pruned to clusters holding a keyword of one of
/// `code_ids`. Returns the root (the top-level word cluster), or nothing
/// when the selected codes have no keywords.
std::vector<WordTreeNode> pruned_word_tree(const ModelSnapshot& snapshot, const Corpus& corpus,
                                           const AnnotationSet& annotations, std::span<const std::string> code_ids);

nlohmann::json to_json(const WordTreeNode& node);
nlohmann::json to_json(const RankedDocument& doc);

}  // namespace quarry
