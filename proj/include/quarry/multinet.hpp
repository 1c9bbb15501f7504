#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quarry/annotations.hpp"
#include "quarry/corpus.hpp"

namespace quarry {

enum class NodeType : std::uint8_t { Word = 0, Document = 1, Code = 2, Category = 3 };
inline constexpr std::size_t kNodeTypes = 4;

enum class Layer : std::uint8_t { Text = 0, Metadata = 1 };
inline constexpr std::size_t kLayers = 2;

std::string_view to_string(NodeType type) noexcept;
std::string_view to_string(Layer layer) noexcept;

/// Layer carrying edges between two node types, or nullopt when the pair may
/// not be connected (Text: word-document; Metadata: word-code, code-category).
std::optional<Layer> layer_between(NodeType a, NodeType b) noexcept;

struct Edge {
    std::uint32_t u = 0;  // u < v
    std::uint32_t v = 0;
    std::uint64_t multiplicity = 0;

    bool operator==(const Edge&) const = default;
};

/// Typed multigraph with one sorted edge list per layer. This is the shape
/// shared by the source network, the contracted network and every
/// block graph of the hierarchy.
struct LayeredGraph {
    std::vector<NodeType> node_types;
    std::array<std::vector<Edge>, kLayers> layers;

    std::size_t node_count() const noexcept { return node_types.size(); }
    std::uint64_t layer_total(Layer layer) const noexcept;
    std::array<std::size_t, kNodeTypes> type_counts() const noexcept;

    /// Adds multiplicity to (a, b), placing the edge in the layer its
    /// endpoint types determine. Call normalize() before use.
    void add_edge(std::uint32_t a, std::uint32_t b, std::uint64_t multiplicity);
    /// Sorts each layer and merges parallel entries.
    void normalize();
    /// Throws Error{IntegrityError} on out-of-range nodes, zero
    /// multiplicities or edges between types that may not connect.
    void validate() const;
};

/// Name of the category node hosting codes without an analyst category.
inline constexpr std::string_view kUncategorized = "uncategorized";

struct NetworkConfig {
    std::uint64_t omega = 1;  // weight of one keyword selection
    bool include_non_keyword = true;
};

/// Node layout: words [0, n_words), then documents, codes, categories.
struct MultilayerNetwork {
    LayeredGraph graph;
    std::size_t n_words = 0;
    std::vector<std::string> word_terms;
    std::vector<std::string> doc_ids;  // model documents, corpus order
    std::vector<std::string> code_ids;
    std::vector<std::string> category_ids;

    std::size_t n_docs() const noexcept { return doc_ids.size(); }
    std::uint32_t doc_node(std::size_t i) const { return static_cast<std::uint32_t>(n_words + i); }
    std::uint32_t code_node(std::size_t i) const { return static_cast<std::uint32_t>(n_words + doc_ids.size() + i); }
    std::uint32_t category_node(std::size_t i) const {
        return static_cast<std::uint32_t>(n_words + doc_ids.size() + code_ids.size() + i);
    }
    std::string node_label(std::uint32_t node) const;
};

MultilayerNetwork build_network(const Corpus& corpus, const AnnotationSet& annotations,
                                const NetworkConfig& config = {});

/// `layer src dst multiplicity`, one edge per line.
std::string dump_edge_list(const MultilayerNetwork& network);

/// Network with every analyst code's keyword set collapsed into one word
/// node (an atom). Atom nodes come first, ordered by smallest member word;
/// the source's document, code and category nodes follow in order.
struct ContractedNetwork {
    LayeredGraph graph;
    std::vector<std::vector<WordId>> atoms;
    std::vector<std::uint32_t> atom_of_word;
    std::shared_ptr<const MultilayerNetwork> source;

    std::size_t atom_count() const noexcept { return atoms.size(); }
    std::uint32_t contracted_node(std::uint32_t source_node) const;
};

ContractedNetwork contract_atoms(std::shared_ptr<const MultilayerNetwork> network);

}  // namespace quarry
