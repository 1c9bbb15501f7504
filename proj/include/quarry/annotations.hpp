#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quarry/corpus.hpp"

namespace quarry {

/// Reserved code owning every vocabulary word no analyst code has claimed.
inline constexpr std::string_view kNonKeywordCode = "non-keyword";

/// Eight-entry qualitative palette (ColorBrewer Set2); index with
/// `color_index % 8`.
inline constexpr std::array<std::string_view, 8> kCategoryPalette = {
    "#66c2a5", "#fc8d62", "#8da0cb", "#e78ac3", "#a6d854", "#ffd92f", "#e5c494", "#b3b3b3",
};

inline std::string_view category_color(int color_index) {
    return kCategoryPalette[static_cast<std::size_t>(color_index) % kCategoryPalette.size()];
}

struct Code {
    std::string id;
    std::string label;
    std::optional<std::string> category_id;
    std::set<WordId> keywords;  // union of the keywords of its highlights
    std::string created_at;
};

struct Category {
    std::string id;
    std::string label;
    int color_index = 0;
};

struct Highlight {
    std::string id;
    std::string doc_id;
    Span span;
    std::string code_id;
    std::set<WordId> keywords;
    std::string memo;
    std::string created_at;
    std::string updated_at;
};

/// One immutable version of the analyst's coding state.
struct AnnotationSet {
    std::uint64_t version = 0;
    std::vector<Code> codes;  // `non-keyword` first, then creation order
    std::vector<Category> categories;
    std::vector<Highlight> highlights;

    static AnnotationSet empty();

    const Code* find_code(std::string_view id) const;
    const Code* find_code_by_label(std::string_view label) const;  // case-insensitive
    const Category* find_category(std::string_view id) const;
    const Category* find_category_by_label(std::string_view label) const;
    const Highlight* find_highlight(std::string_view id) const;

    /// Id of the code owning `word`; `non-keyword` when unclaimed.
    std::string_view owner_of(WordId word) const;

    /// Number of highlights of `code_id` that selected `word`.
    std::size_t selection_count(std::string_view code_id, WordId word) const;

    std::vector<const Highlight*> highlights_for_document(std::string_view doc_id) const;
};

nlohmann::json to_json(const AnnotationSet& set);
nlohmann::json to_json(const Highlight& h);
nlohmann::json to_json(const Code& c);
nlohmann::json to_json(const Category& c);
AnnotationSet annotations_from_json(const nlohmann::json& j);

/// Sorted keys, two-space indent, trailing newline.
std::string canonical_json(const AnnotationSet& set);

/// Writes `content` to `path` through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string iso8601_utc(std::chrono::system_clock::time_point t);

struct HighlightInput {
    std::string doc_id;
    Span span;
    std::string code_label;
    std::set<WordId> keywords;
    std::string memo;
};

struct HighlightPatch {
    std::optional<Span> span;
    std::optional<std::string> code_label;
    std::optional<std::set<WordId>> keywords;
    std::optional<std::string> memo;
};

/// Single-writer store. Every mutation produces a new AnnotationSet with the
/// version incremented by one, persists it, and only then publishes it.
/// Readers hold immutable versioned views.
class AnnotationStore {
public:
    using Clock = std::function<std::chrono::system_clock::time_point()>;

    explicit AnnotationStore(std::shared_ptr<const Corpus> corpus,
                             std::optional<std::filesystem::path> file = std::nullopt, Clock clock = {});

    std::shared_ptr<const AnnotationSet> view() const;
    std::uint64_t version() const { return view()->version; }
    const Corpus& corpus() const { return *corpus_; }

    Highlight create_highlight(const HighlightInput& input);
    Highlight update_highlight(std::string_view id, const HighlightPatch& patch);
    void delete_highlight(std::string_view id);
    Category assign_category(std::string_view code_id, std::string_view category_label);
    /// Removes an unused code. Codes are never removed implicitly.
    void delete_code(std::string_view code_id);

private:
    template <typename Fn>
    auto mutate(Fn&& fn);

    void validate_highlight(const AnnotationSet& set, const Highlight& h) const;
    std::string resolve_code(AnnotationSet& set, std::string_view label, const std::string& now) const;

    std::shared_ptr<const Corpus> corpus_;
    std::optional<std::filesystem::path> file_;
    Clock clock_;
    mutable std::mutex write_mutex_;
    mutable std::mutex view_mutex_;
    std::shared_ptr<const AnnotationSet> current_;
};

struct PassageView {
    std::string highlight_id;
    std::string doc_id;
    Span span;
    std::string text;
    /// Keyword occurrences, as scalar offsets relative to the passage start.
    std::vector<Span> keyword_marks;
    std::string memo;
};

struct CodeSummary {
    std::string code_id;
    std::string label;
    std::optional<std::string> category_id;
    std::optional<std::string> category_label;
    std::vector<std::string> keywords;  // vocabulary terms
    std::vector<std::string> memos;
    std::vector<PassageView> passages;
};

std::vector<CodeSummary> code_summary(const AnnotationSet& set, const Corpus& corpus,
                                      std::span<const std::string> code_ids);
nlohmann::json to_json(const CodeSummary& s);

/// One row per highlight, RFC-4180 quoting, CRLF line endings.
std::string export_csv(const AnnotationSet& set, const Corpus& corpus);

}  // namespace quarry
