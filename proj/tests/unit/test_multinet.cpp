#include <doctest.h>

#include <map>
#include <sstream>

#include "quarry/annotations.hpp"
#include "quarry/error.hpp"
#include "quarry/multinet.hpp"
#include "quarry/rng.hpp"
#include "support/files.hpp"

using namespace quarry;

namespace {

std::shared_ptr<const Corpus> corpus_of(const std::string& lines) {
    std::istringstream in(lines);
    return std::make_shared<const Corpus>(ingest_corpus(in, {}));
}

using EdgeMap = std::map<std::pair<std::string, std::string>, std::uint64_t>;

EdgeMap labeled(const MultilayerNetwork& net, Layer layer) {
    EdgeMap out;
    for (const auto& e : net.graph.layers[static_cast<std::size_t>(layer)]) {
        out[{net.node_label(e.u), net.node_label(e.v)}] += e.multiplicity;
    }
    return out;
}

}  // namespace

TEST_CASE("layer_between encodes the tripartite structure") {
    CHECK(layer_between(NodeType::Word, NodeType::Document) == Layer::Text);
    CHECK(layer_between(NodeType::Document, NodeType::Word) == Layer::Text);
    CHECK(layer_between(NodeType::Word, NodeType::Code) == Layer::Metadata);
    CHECK(layer_between(NodeType::Category, NodeType::Code) == Layer::Metadata);
    CHECK_FALSE(layer_between(NodeType::Word, NodeType::Word));
    CHECK_FALSE(layer_between(NodeType::Document, NodeType::Code));
    CHECK_FALSE(layer_between(NodeType::Word, NodeType::Category));
}

TEST_CASE("LayeredGraph normalizes and validates") {
    LayeredGraph g;
    g.node_types = {NodeType::Word, NodeType::Word, NodeType::Document, NodeType::Code};
    g.add_edge(2, 0, 2);
    g.add_edge(0, 2, 3);
    g.add_edge(1, 2, 1);
    g.add_edge(3, 1, 4);
    g.normalize();
    CHECK(g.layers[0] == std::vector<Edge>{{0, 2, 5}, {1, 2, 1}});
    CHECK(g.layers[1] == std::vector<Edge>{{1, 3, 4}});
    CHECK(g.layer_total(Layer::Text) == 6);
    CHECK(g.layer_total(Layer::Metadata) == 4);
    CHECK(g.type_counts() == std::array<std::size_t, kNodeTypes>{2, 1, 1, 0});
    g.validate();

    CHECK_THROWS_AS(g.add_edge(0, 1, 1), Error);
    LayeredGraph bad = g;
    bad.layers[0].push_back({0, 9, 1});
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = g;
    bad.layers[0][0].multiplicity = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("network without annotations") {
    auto corpus = corpus_of(R"({"id":"d1","title":"","body":"aa aa bb"})" "\n");
    const auto set = AnnotationSet::empty();
    const auto net = build_network(*corpus, set);
    CHECK(labeled(net, Layer::Text) == EdgeMap{{{"w:aa", "d:d1"}, 2}, {{"w:bb", "d:d1"}, 1}});
    CHECK(labeled(net, Layer::Metadata) == EdgeMap{{{"w:aa", "c:non-keyword"}, 1},
                                                   {{"w:bb", "c:non-keyword"}, 1},
                                                   {{"c:non-keyword", "t:uncategorized"}, 1}});
    CHECK(net.graph.layer_total(Layer::Text) == corpus->stats().n_text_edges);
}

TEST_CASE("keyword ownership moves metadata edges") {
    auto corpus = corpus_of(R"({"id":"d1","title":"","body":"aa aa bb"})" "\n"
                            R"({"id":"d2","title":"","body":"aa cc"})" "\n");
    AnnotationStore store(corpus);
    const WordId aa = *corpus->vocabulary().find("aa");
    const auto h = store.create_highlight({"d1", {0, 2}, "c1", {aa}, ""});
    auto meta = labeled(build_network(*corpus, *store.view()), Layer::Metadata);
    CHECK(meta.count({"w:aa", "c:" + h.code_id}) == 1);
    CHECK(meta[{"w:aa", "c:" + h.code_id}] == 1);
    CHECK(meta.count({"w:aa", "c:non-keyword"}) == 0);
    CHECK(meta[{"c:" + h.code_id, "t:uncategorized"}] == 1);

    // two selections with omega 3
    store.create_highlight({"d2", {0, 2}, "c1", {aa}, ""});
    store.assign_category(h.code_id, "group");
    meta = labeled(build_network(*corpus, *store.view(), NetworkConfig{3, true}), Layer::Metadata);
    CHECK(meta[{"w:aa", "c:" + h.code_id}] == 6);
    const auto cat = store.view()->categories[0].id;
    CHECK(meta[{"c:" + h.code_id, "t:" + cat}] == 1);
    // non-keyword still owns bb and cc; uncategorized hosts it
    CHECK(meta[{"c:non-keyword", "t:uncategorized"}] == 1);

    // excluding non-keyword drops its node entirely
    const auto without = build_network(*corpus, *store.view(), NetworkConfig{1, false});
    for (const auto& id : without.code_ids) CHECK(id != kNonKeywordCode);
    for (const auto& [k, m] : labeled(without, Layer::Metadata)) CHECK(k.second != "c:non-keyword");
}

TEST_CASE("codes without keywords and empty documents are left out") {
    auto corpus = corpus_of(R"({"id":"d1","title":"","body":"aa bb"})" "\n"
                            R"({"id":"d2","title":"","body":"the of"})" "\n");
    AnnotationStore store(corpus);
    store.create_highlight({"d1", {0, 2}, "memo-only", {}, "x"});
    const auto net = build_network(*corpus, *store.view());
    CHECK(net.doc_ids == std::vector<std::string>{"d1"});
    CHECK(net.code_ids == std::vector<std::string>{std::string(kNonKeywordCode)});
    CHECK(net.category_ids == std::vector<std::string>{std::string(kUncategorized)});
}

TEST_CASE("dangling references raise IntegrityError listing offenders") {
    auto corpus = corpus_of(R"({"id":"d1","title":"","body":"aa bb"})" "\n");
    auto set = AnnotationSet::empty();
    Code c;
    c.id = "code-1";
    c.label = "x";
    c.keywords = {0, 77};
    c.category_id = "cat-9";
    set.codes.push_back(c);
    Highlight h;
    h.id = "hl-1";
    h.doc_id = "ghost";
    h.span = {0, 1};
    h.code_id = "code-1";
    h.keywords = {0, 77};
    set.highlights.push_back(h);
    try {
        build_network(*corpus, set);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IntegrityError);
        const std::string msg = e.what();
        CHECK(msg.find("ghost") != std::string::npos);
        CHECK(msg.find("77") != std::string::npos);
        CHECK(msg.find("cat-9") != std::string::npos);
    }
}

TEST_CASE("desk corpus text layer total equals the counting oracle") {
    const auto oracle = quarry::testing::read_json(quarry::testing::source_dir() / "tests" / "oracles" / "frozen" /
                                                   "desk_counts.json");
    const auto corpus = ingest_corpus_file(quarry::testing::desk_corpus_path(), {});
    const auto set = AnnotationSet::empty();
    const auto net = build_network(corpus, set);
    CHECK(net.graph.layer_total(Layer::Text) == oracle["n_text_edges"].get<std::uint64_t>());
    net.graph.validate();
    // every word has at least one metadata edge
    std::vector<int> meta_degree(net.n_words, 0);
    for (const auto& e : net.graph.layers[1]) {
        if (e.u < net.n_words) ++meta_degree[e.u];
    }
    for (int d : meta_degree) CHECK(d >= 1);
}

TEST_CASE("edge list dump") {
    auto corpus = corpus_of(R"({"id":"d1","title":"","body":"aa aa bb"})" "\n");
    const auto set = AnnotationSet::empty();
    const auto dump = dump_edge_list(build_network(*corpus, set));
    CHECK(dump == "text w:aa d:d1 2\ntext w:bb d:d1 1\nmetadata w:aa c:non-keyword 1\n"
                  "metadata w:bb c:non-keyword 1\nmetadata c:non-keyword t:uncategorized 1\n");
}

TEST_CASE("contraction aggregates keyword atoms") {
    auto corpus = corpus_of(R"({"id":"d1","title":"","body":"w1 w2 w3 w4 w5 w1 w5 w5"})" "\n"
                            R"({"id":"d2","title":"","body":"w2 w3 w6 w6"})" "\n");
    AnnotationStore store(corpus);
    auto id = [&](const char* t) { return *corpus->vocabulary().find(t); };
    SUBCASE("no user codes gives singleton atoms") {
        auto net = std::make_shared<const MultilayerNetwork>(build_network(*corpus, *store.view()));
        const auto c = contract_atoms(net);
        CHECK(c.atom_count() == net->n_words);
        CHECK(c.graph.layers == net->graph.layers);
        CHECK(c.graph.node_types == net->graph.node_types);
    }
    SUBCASE("one code") {
        store.create_highlight({"d1", {0, 14}, "c1", {id("w1"), id("w2"), id("w5")}, ""});
        auto net = std::make_shared<const MultilayerNetwork>(build_network(*corpus, *store.view()));
        const auto c = contract_atoms(net);
        CHECK(c.atom_count() == net->n_words - 2);
        const auto atom = c.atom_of_word[id("w1")];
        CHECK(c.atoms[atom] == std::vector<WordId>{id("w1"), id("w2"), id("w5")});
        CHECK(c.atom_of_word[id("w2")] == atom);
        const auto d1 = c.contracted_node(net->doc_node(0));
        std::uint64_t m = 0;
        for (const auto& e : c.graph.layers[0]) {
            if (e.u == atom && e.v == d1) m = e.multiplicity;
        }
        CHECK(m == 2 + 1 + 3);
        CHECK(c.graph.layer_total(Layer::Text) == net->graph.layer_total(Layer::Text));
        CHECK(c.graph.layer_total(Layer::Metadata) == net->graph.layer_total(Layer::Metadata));
    }
    SUBCASE("two disjoint codes") {
        store.create_highlight({"d1", {0, 5}, "c1", {id("w1"), id("w2")}, ""});
        store.create_highlight({"d2", {0, 5}, "c2", {id("w2") == id("w3") ? id("w6") : id("w3")}, ""});
        auto net = std::make_shared<const MultilayerNetwork>(build_network(*corpus, *store.view()));
        const auto c = contract_atoms(net);
        int multi = 0;
        for (const auto& a : c.atoms) multi += a.size() > 1;
        CHECK(multi == 1);  // c2 has one keyword, so its atom is a singleton
        store.update_highlight(store.view()->highlights[1].id, {.span = Span{0, 8}, .keywords = std::set<WordId>{id("w3"), id("w6")}});
        auto net2 = std::make_shared<const MultilayerNetwork>(build_network(*corpus, *store.view()));
        multi = 0;
        for (const auto& a : contract_atoms(net2).atoms) multi += a.size() > 1;
        CHECK(multi == 2);
    }
}

TEST_CASE("contraction conserves layers and expands back exactly on random annotations") {
    const auto corpus = std::make_shared<const Corpus>(ingest_corpus_file(quarry::testing::desk_corpus_path(), {}));
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        AnnotationStore store(corpus);
        for (int k = 0; k < 15; ++k) {
            const auto& doc = corpus->documents()[rng.uniform(corpus->documents().size())];
            const auto s = rng.uniform(doc.body_length - 30);
            std::set<WordId> kw;
            for (const auto& c : corpus->candidates_for(doc.id, {s, s + 30})) {
                if (rng.uniform(2)) kw.insert(c.word_ids.begin(), c.word_ids.end());
            }
            try {
                store.create_highlight({doc.id, {s, s + 30}, "c" + std::to_string(rng.uniform(6)), kw, ""});
            } catch (const Error&) {
            }
        }
        auto net = std::make_shared<const MultilayerNetwork>(build_network(*corpus, *store.view()));
        const auto c = contract_atoms(net);
        CHECK(c.graph.layer_total(Layer::Text) == net->graph.layer_total(Layer::Text));
        CHECK(c.graph.layer_total(Layer::Metadata) == net->graph.layer_total(Layer::Metadata));
        std::size_t members = 0;
        for (const auto& a : c.atoms) members += a.size();
        CHECK(members == net->n_words);
        for (std::size_t i = 0; i < c.graph.node_count(); ++i) {
            CHECK(c.graph.node_types[i] == (i < c.atom_count() ? NodeType::Word : net->graph.node_types[i - c.atom_count() + net->n_words]));
        }
        // expansion: summing source edges per (atom, other) reproduces the contracted edges
        std::map<std::tuple<int, std::uint32_t, std::uint32_t>, std::uint64_t> expect, got;
        for (std::size_t l = 0; l < kLayers; ++l) {
            for (const auto& e : net->graph.layers[l]) {
                auto a = c.contracted_node(e.u), b = c.contracted_node(e.v);
                expect[{static_cast<int>(l), std::min(a, b), std::max(a, b)}] += e.multiplicity;
            }
            for (const auto& e : c.graph.layers[l]) got[{static_cast<int>(l), e.u, e.v}] += e.multiplicity;
        }
        CHECK(expect == got);
        // every user code with keywords forms one atom
        for (const auto& code : store.view()->codes) {
            if (code.id == kNonKeywordCode || code.keywords.empty()) continue;
            const auto atom = c.atom_of_word[*code.keywords.begin()];
            for (WordId w : code.keywords) CHECK(c.atom_of_word[w] == atom);
            CHECK(c.atoms[atom].size() == code.keywords.size());
        }
    }
}
