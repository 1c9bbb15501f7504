#include "quarry/multinet.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "quarry/error.hpp"

namespace quarry {

std::string_view to_string(NodeType type) noexcept {
    switch (type) {
        case NodeType::Word: return "word";
        case NodeType::Document: return "document";
        case NodeType::Code: return "code";
        case NodeType::Category: return "category";
    }
    return "?";
}

std::string_view to_string(Layer layer) noexcept { return layer == Layer::Text ? "text" : "metadata"; }

std::optional<Layer> layer_between(NodeType a, NodeType b) noexcept {
    if (a > b) std::swap(a, b);
    if (a == NodeType::Word && b == NodeType::Document) return Layer::Text;
    if (a == NodeType::Word && b == NodeType::Code) return Layer::Metadata;
    if (a == NodeType::Code && b == NodeType::Category) return Layer::Metadata;
    return std::nullopt;
}

// --- LayeredGraph -----------------------------------------------------------

std::uint64_t LayeredGraph::layer_total(Layer layer) const noexcept {
    std::uint64_t total = 0;
    for (const auto& e : layers[static_cast<std::size_t>(layer)]) total += e.multiplicity;
    return total;
}

std::array<std::size_t, kNodeTypes> LayeredGraph::type_counts() const noexcept {
    std::array<std::size_t, kNodeTypes> counts{};
    for (auto t : node_types) ++counts[static_cast<std::size_t>(t)];
    return counts;
}

void LayeredGraph::add_edge(std::uint32_t a, std::uint32_t b, std::uint64_t multiplicity) {
    if (a >= node_count() || b >= node_count()) {
        throw Error(ErrorCode::IntegrityError, "edge endpoint out of range");
    }
    auto layer = layer_between(node_types[a], node_types[b]);
    if (!layer) {
        throw Error(ErrorCode::IntegrityError, "no layer connects " + std::string(to_string(node_types[a])) +
                                                   " and " + std::string(to_string(node_types[b])));
    }
    if (a > b) std::swap(a, b);
    layers[static_cast<std::size_t>(*layer)].push_back(Edge{a, b, multiplicity});
}

void LayeredGraph::normalize() {
    for (auto& edges : layers) {
        std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
            return x.u != y.u ? x.u < y.u : x.v < y.v;
        });
        std::vector<Edge> merged;
        merged.reserve(edges.size());
        for (const auto& e : edges) {
            if (e.multiplicity == 0) continue;
            if (!merged.empty() && merged.back().u == e.u && merged.back().v == e.v) {
                merged.back().multiplicity += e.multiplicity;
            } else {
                merged.push_back(e);
            }
        }
        edges = std::move(merged);
    }
}

void LayeredGraph::validate() const {
    for (std::size_t l = 0; l < kLayers; ++l) {
        for (const auto& e : layers[l]) {
            if (e.u >= node_count() || e.v >= node_count() || e.u >= e.v || e.multiplicity == 0) {
                throw Error(ErrorCode::IntegrityError, "malformed edge");
            }
            auto layer = layer_between(node_types[e.u], node_types[e.v]);
            if (!layer || static_cast<std::size_t>(*layer) != l) {
                throw Error(ErrorCode::IntegrityError, "edge placed in the wrong layer");
            }
        }
    }
}

// --- MultilayerNetwork ------------------------------------------------------

std::string MultilayerNetwork::node_label(std::uint32_t node) const {
    if (node < n_words) return "w:" + word_terms[node];
    std::size_t i = node - n_words;
    if (i < doc_ids.size()) return "d:" + doc_ids[i];
    i -= doc_ids.size();
    if (i < code_ids.size()) return "c:" + code_ids[i];
    i -= code_ids.size();
    return "t:" + category_ids.at(i);
}

MultilayerNetwork build_network(const Corpus& corpus, const AnnotationSet& annotations, const NetworkConfig& config) {
    const auto& vocab = corpus.vocabulary();

    // Integrity: every annotation reference must resolve.
    std::vector<std::string> offenders;
    for (const auto& h : annotations.highlights) {
        if (corpus.find(h.doc_id) == nullptr) offenders.push_back("highlight " + h.id + " -> document " + h.doc_id);
        if (annotations.find_code(h.code_id) == nullptr) {
            offenders.push_back("highlight " + h.id + " -> code " + h.code_id);
        }
        for (WordId w : h.keywords) {
            if (w >= vocab.size()) offenders.push_back("highlight " + h.id + " -> word #" + std::to_string(w));
        }
    }
    for (const auto& c : annotations.codes) {
        for (WordId w : c.keywords) {
            if (w >= vocab.size()) offenders.push_back("code " + c.id + " -> word #" + std::to_string(w));
        }
        if (c.category_id && annotations.find_category(*c.category_id) == nullptr) {
            offenders.push_back("code " + c.id + " -> category " + *c.category_id);
        }
    }
    if (!offenders.empty()) {
        std::string msg = "dangling annotation references:";
        for (const auto& o : offenders) msg += "\n  " + o;
        throw Error(ErrorCode::IntegrityError, msg);
    }

    MultilayerNetwork net;
    net.n_words = vocab.size();
    net.word_terms = vocab.terms();

    std::vector<const Document*> docs;
    for (const auto& doc : corpus.documents()) {
        if (doc.in_model()) {
            docs.push_back(&doc);
            net.doc_ids.push_back(doc.id);
        }
    }

    // Word ownership.
    std::vector<const Code*> owner(vocab.size(), nullptr);
    for (const auto& code : annotations.codes) {
        if (code.id == kNonKeywordCode) continue;
        for (WordId w : code.keywords) owner[w] = &code;
    }
    const bool any_unowned = std::any_of(owner.begin(), owner.end(), [](const Code* c) { return c == nullptr; });

    std::vector<const Code*> codes;
    const bool with_non_keyword = config.include_non_keyword && any_unowned;
    if (with_non_keyword) codes.push_back(annotations.find_code(kNonKeywordCode));
    for (const auto& code : annotations.codes) {
        if (code.id != kNonKeywordCode && !code.keywords.empty()) codes.push_back(&code);
    }
    for (const Code* c : codes) net.code_ids.push_back(c->id);

    bool need_uncategorized = false;
    std::vector<std::string> used_categories;
    for (const Code* c : codes) {
        if (!c->category_id) {
            need_uncategorized = true;
        } else if (std::find(used_categories.begin(), used_categories.end(), *c->category_id) ==
                   used_categories.end()) {
            used_categories.push_back(*c->category_id);
        }
    }
    for (const auto& cat : annotations.categories) {
        if (std::find(used_categories.begin(), used_categories.end(), cat.id) != used_categories.end()) {
            net.category_ids.push_back(cat.id);
        }
    }
    if (need_uncategorized) net.category_ids.emplace_back(kUncategorized);

    auto& g = net.graph;
    g.node_types.assign(net.n_words, NodeType::Word);
    g.node_types.insert(g.node_types.end(), docs.size(), NodeType::Document);
    g.node_types.insert(g.node_types.end(), codes.size(), NodeType::Code);
    g.node_types.insert(g.node_types.end(), net.category_ids.size(), NodeType::Category);

    // Text layer: token multiplicities.
    std::map<WordId, std::uint64_t> counts;
    for (std::size_t j = 0; j < docs.size(); ++j) {
        counts.clear();
        for (WordId w : docs[j]->tokens) ++counts[w];
        for (auto [w, n] : counts) g.add_edge(w, net.doc_node(j), n);
    }

    // Metadata layer.
    std::map<std::string_view, std::size_t> code_index;
    for (std::size_t c = 0; c < codes.size(); ++c) code_index[codes[c]->id] = c;
    for (WordId w = 0; w < vocab.size(); ++w) {
        if (owner[w] == nullptr) {
            if (with_non_keyword) g.add_edge(w, net.code_node(0), 1);
            continue;
        }
        const auto selections = annotations.selection_count(owner[w]->id, w);
        const auto multiplicity = config.omega * std::max<std::uint64_t>(1, selections);
        g.add_edge(w, net.code_node(code_index.at(owner[w]->id)), multiplicity);
    }
    for (std::size_t c = 0; c < codes.size(); ++c) {
        const std::string_view category = codes[c]->category_id ? std::string_view(*codes[c]->category_id)
                                                                 : kUncategorized;
        const auto it = std::find(net.category_ids.begin(), net.category_ids.end(), category);
        g.add_edge(net.code_node(c), net.category_node(static_cast<std::size_t>(it - net.category_ids.begin())), 1);
    }
    g.normalize();
    return net;
}

std::string dump_edge_list(const MultilayerNetwork& network) {
    std::ostringstream out;
    for (std::size_t l = 0; l < kLayers; ++l) {
        for (const auto& e : network.graph.layers[l]) {
            out << to_string(static_cast<Layer>(l)) << ' ' << network.node_label(e.u) << ' '
                << network.node_label(e.v) << ' ' << e.multiplicity << '\n';
        }
    }
    return out.str();
}

// --- Contraction ------------------------------------------------------------

std::uint32_t ContractedNetwork::contracted_node(std::uint32_t source_node) const {
    if (source_node < source->n_words) return atom_of_word.at(source_node);
    return static_cast<std::uint32_t>(source_node - source->n_words + atoms.size());
}

ContractedNetwork contract_atoms(std::shared_ptr<const MultilayerNetwork> network) {
    const auto& src = *network;
    const auto& g = src.graph;

    // Must-link groups: the word neighbours of each analyst code node.
    constexpr std::uint32_t kUnassigned = ~0u;
    std::vector<std::uint32_t> group(src.n_words, kUnassigned);
    std::vector<std::vector<WordId>> groups;
    for (std::size_t c = 0; c < src.code_ids.size(); ++c) {
        if (src.code_ids[c] == kNonKeywordCode) continue;
        const auto node = src.code_node(c);
        std::vector<WordId> members;
        for (const auto& e : g.layers[static_cast<std::size_t>(Layer::Metadata)]) {
            if (e.v == node && g.node_types[e.u] == NodeType::Word) members.push_back(e.u);
        }
        if (members.empty()) continue;
        for (WordId w : members) group[w] = static_cast<std::uint32_t>(groups.size());
        groups.push_back(std::move(members));
    }

    ContractedNetwork out;
    out.source = network;
    out.atom_of_word.assign(src.n_words, kUnassigned);
    for (WordId w = 0; w < src.n_words; ++w) {
        if (out.atom_of_word[w] != kUnassigned) continue;
        const auto atom = static_cast<std::uint32_t>(out.atoms.size());
        if (group[w] == kUnassigned) {
            out.atoms.push_back({w});
            out.atom_of_word[w] = atom;
        } else {
            auto members = groups[group[w]];
            std::sort(members.begin(), members.end());
            for (WordId m : members) out.atom_of_word[m] = atom;
            out.atoms.push_back(std::move(members));
        }
    }

    auto& cg = out.graph;
    cg.node_types.assign(out.atoms.size(), NodeType::Word);
    cg.node_types.insert(cg.node_types.end(), g.node_types.begin() + static_cast<std::ptrdiff_t>(src.n_words),
                         g.node_types.end());
    for (std::size_t l = 0; l < kLayers; ++l) {
        for (const auto& e : g.layers[l]) {
            cg.add_edge(out.contracted_node(e.u), out.contracted_node(e.v), e.multiplicity);
        }
    }
    cg.normalize();
    return out;
}

}  // namespace quarry
