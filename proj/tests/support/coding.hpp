#pragma once

// Randomized coding sessions: highlights with keyword picks, edits,
// deletions and category assignments. Rejected operations are skipped.

#include <set>
#include <string>

#include "quarry/annotations.hpp"
#include "quarry/error.hpp"
#include "quarry/rng.hpp"

namespace quarry::testing {

inline void random_coding_script(AnnotationStore& store, Rng& rng, std::size_t steps, std::size_t code_pool = 8) {
    const auto& corpus = store.corpus();
    const auto& docs = corpus.documents();
    auto pick_span = [&](const Document& doc) {
        const std::size_t len = std::min<std::size_t>(doc.body_length, 20 + rng.uniform(80));
        const std::size_t start = doc.body_length > len ? rng.uniform(doc.body_length - len) : 0;
        return Span{start, start + len};
    };
    auto pick_keywords = [&](const std::string& doc_id, Span span) {
        std::set<WordId> kw;
        for (const auto& c : corpus.candidates_for(doc_id, span)) {
            if (rng.uniform(3) == 0) kw.insert(c.word_ids.begin(), c.word_ids.end());
        }
        return kw;
    };
    for (std::size_t step = 0; step < steps; ++step) {
        const auto view = store.view();
        try {
            const auto op = rng.uniform(10);
            if (op < 6 || view->highlights.empty()) {
                const auto& doc = docs[rng.uniform(docs.size())];
                const auto span = pick_span(doc);
                store.create_highlight({doc.id, span, "code " + std::to_string(rng.uniform(code_pool)),
                                        pick_keywords(doc.id, span), rng.uniform(2) ? "memo" : ""});
            } else if (op < 8) {
                const auto& h = view->highlights[rng.uniform(view->highlights.size())];
                HighlightPatch patch;
                if (rng.uniform(2)) patch.keywords = pick_keywords(h.doc_id, h.span);
                if (rng.uniform(3) == 0) patch.code_label = "code " + std::to_string(rng.uniform(code_pool));
                store.update_highlight(h.id, patch);
            } else if (op < 9) {
                store.delete_highlight(view->highlights[rng.uniform(view->highlights.size())].id);
            } else if (!view->codes.empty()) {
                const auto& code = view->codes[rng.uniform(view->codes.size())];
                store.assign_category(code.id, "theme " + std::to_string(rng.uniform(3)));
            }
        } catch (const Error&) {
        }
    }
}

}  // namespace quarry::testing
