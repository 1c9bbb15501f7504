#include "quarry/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "quarry/error.hpp"
#include "quarry/utf8.hpp"

namespace quarry {

using nlohmann::json;

namespace {

std::string fold(std::string_view s) {
    std::string out;
    auto decoded = utf8::decode(s);
    if (!decoded) return std::string(s);
    for (char32_t cp : *decoded) utf8::append(out, utf8::to_lower(cp));
    return out;
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

// Next id for a prefix, one above the largest numeric suffix in use.
template <typename Range, typename Get>
std::string next_id(const Range& items, std::string_view prefix, Get get) {
    std::uint64_t max = 0;
    for (const auto& item : items) {
        std::string_view id = get(item);
        if (id.substr(0, prefix.size()) != prefix) continue;
        try {
            max = std::max<std::uint64_t>(max, std::stoull(std::string(id.substr(prefix.size()))));
        } catch (const std::exception&) {
        }
    }
    return std::string(prefix) + std::to_string(max + 1);
}

void recompute_keywords(AnnotationSet& set) {
    for (auto& code : set.codes) code.keywords.clear();
    for (const auto& h : set.highlights) {
        for (auto& code : set.codes) {
            if (code.id == h.code_id) {
                code.keywords.insert(h.keywords.begin(), h.keywords.end());
                break;
            }
        }
    }
}

// Single ownership: no vocabulary id may be claimed by two codes.
void check_ownership(const AnnotationSet& set, const std::string& changed_code, const Corpus& corpus) {
    std::map<WordId, const Code*> owner;
    for (const auto& code : set.codes) {
        for (WordId w : code.keywords) {
            auto [it, inserted] = owner.emplace(w, &code);
            if (inserted) continue;
            const Code* other = it->second->id == changed_code ? &code : it->second;
            throw Error(ErrorCode::KeywordConflict,
                        "keyword '" + corpus.vocabulary().term(w) + "' already belongs to code '" + other->label + "'");
        }
    }
}

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<Span> keyword_marks(std::string_view passage, const std::set<WordId>& keywords, const Corpus& corpus) {
    std::set<std::string, std::less<>> stems;
    for (WordId w : keywords) stems.insert(corpus.stems().stem_of(w));
    std::vector<Span> marks;
    for (const auto& token : corpus.tokenizer().tokenize(passage)) {
        if (stems.count(corpus.tokenizer().stem(token.text)) > 0) marks.push_back(token.span);
    }
    return marks;
}

}  // namespace

std::string iso8601_utc(std::chrono::system_clock::time_point t) {
    const std::time_t secs = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// --- AnnotationSet ----------------------------------------------------------

AnnotationSet AnnotationSet::empty() {
    AnnotationSet set;
    set.codes.push_back(Code{std::string(kNonKeywordCode), std::string(kNonKeywordCode), std::nullopt, {}, {}});
    return set;
}

const Code* AnnotationSet::find_code(std::string_view id) const {
    auto it = std::find_if(codes.begin(), codes.end(), [&](const Code& c) { return c.id == id; });
    return it == codes.end() ? nullptr : &*it;
}

const Code* AnnotationSet::find_code_by_label(std::string_view label) const {
    const auto key = fold(label);
    auto it = std::find_if(codes.begin(), codes.end(), [&](const Code& c) { return fold(c.label) == key; });
    return it == codes.end() ? nullptr : &*it;
}

const Category* AnnotationSet::find_category(std::string_view id) const {
    auto it = std::find_if(categories.begin(), categories.end(), [&](const Category& c) { return c.id == id; });
    return it == categories.end() ? nullptr : &*it;
}

const Category* AnnotationSet::find_category_by_label(std::string_view label) const {
    const auto key = fold(label);
    auto it = std::find_if(categories.begin(), categories.end(),
                           [&](const Category& c) { return fold(c.label) == key; });
    return it == categories.end() ? nullptr : &*it;
}

const Highlight* AnnotationSet::find_highlight(std::string_view id) const {
    auto it = std::find_if(highlights.begin(), highlights.end(), [&](const Highlight& h) { return h.id == id; });
    return it == highlights.end() ? nullptr : &*it;
}

std::string_view AnnotationSet::owner_of(WordId word) const {
    for (const auto& code : codes) {
        if (code.keywords.count(word) > 0) return code.id;
    }
    return kNonKeywordCode;
}

std::size_t AnnotationSet::selection_count(std::string_view code_id, WordId word) const {
    return static_cast<std::size_t>(std::count_if(highlights.begin(), highlights.end(), [&](const Highlight& h) {
        return h.code_id == code_id && h.keywords.count(word) > 0;
    }));
}

std::vector<const Highlight*> AnnotationSet::highlights_for_document(std::string_view doc_id) const {
    std::vector<const Highlight*> out;
    for (const auto& h : highlights) {
        if (h.doc_id == doc_id) out.push_back(&h);
    }
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->span.start < b->span.start; });
    return out;
}

// --- JSON -------------------------------------------------------------------

json to_json(const Highlight& h) {
    return json{{"id", h.id},
                {"doc_id", h.doc_id},
                {"start", h.span.start},
                {"end", h.span.end},
                {"code_id", h.code_id},
                {"keywords", std::vector<WordId>(h.keywords.begin(), h.keywords.end())},
                {"memo", h.memo},
                {"created_at", h.created_at},
                {"updated_at", h.updated_at}};
}

json to_json(const Code& c) {
    return json{{"id", c.id},
                {"label", c.label},
                {"category_id", c.category_id ? json(*c.category_id) : json(nullptr)},
                {"keywords", std::vector<WordId>(c.keywords.begin(), c.keywords.end())},
                {"created_at", c.created_at}};
}

json to_json(const Category& c) {
    return json{{"id", c.id}, {"label", c.label}, {"color_index", c.color_index}};
}

json to_json(const AnnotationSet& set) {
    json codes = json::array();
    for (const auto& c : set.codes) codes.push_back(to_json(c));
    json categories = json::array();
    for (const auto& c : set.categories) categories.push_back(to_json(c));
    json highlights = json::array();
    for (const auto& h : set.highlights) highlights.push_back(to_json(h));
    return json{{"version", set.version}, {"codes", codes}, {"categories", categories}, {"highlights", highlights}};
}

AnnotationSet annotations_from_json(const json& j) {
    try {
        AnnotationSet set;
        set.version = j.at("version").get<std::uint64_t>();
        for (const auto& c : j.at("codes")) {
            Code code;
            code.id = c.at("id").get<std::string>();
            code.label = c.at("label").get<std::string>();
            if (c.contains("category_id") && !c["category_id"].is_null()) {
                code.category_id = c["category_id"].get<std::string>();
            }
            for (const auto& w : c.at("keywords")) code.keywords.insert(w.get<WordId>());
            code.created_at = c.value("created_at", std::string{});
            set.codes.push_back(std::move(code));
        }
        for (const auto& c : j.at("categories")) {
            set.categories.push_back(
                Category{c.at("id").get<std::string>(), c.at("label").get<std::string>(), c.at("color_index").get<int>()});
        }
        for (const auto& h : j.at("highlights")) {
            Highlight hl;
            hl.id = h.at("id").get<std::string>();
            hl.doc_id = h.at("doc_id").get<std::string>();
            hl.span = Span{h.at("start").get<std::size_t>(), h.at("end").get<std::size_t>()};
            hl.code_id = h.at("code_id").get<std::string>();
            for (const auto& w : h.at("keywords")) hl.keywords.insert(w.get<WordId>());
            hl.memo = h.at("memo").get<std::string>();
            hl.created_at = h.at("created_at").get<std::string>();
            hl.updated_at = h.at("updated_at").get<std::string>();
            set.highlights.push_back(std::move(hl));
        }
        if (set.find_code(kNonKeywordCode) == nullptr) {
            set.codes.insert(set.codes.begin(),
                             Code{std::string(kNonKeywordCode), std::string(kNonKeywordCode), std::nullopt, {}, {}});
        }
        return set;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IntegrityError, std::string("malformed annotations: ") + e.what());
    }
}

std::string canonical_json(const AnnotationSet& set) { return to_json(set).dump(2) + "\n"; }

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

// --- AnnotationStore --------------------------------------------------------

AnnotationStore::AnnotationStore(std::shared_ptr<const Corpus> corpus, std::optional<std::filesystem::path> file,
                                 Clock clock)
    : corpus_(std::move(corpus)), file_(std::move(file)), clock_(std::move(clock)) {
    if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
    auto set = AnnotationSet::empty();
    if (file_ && std::filesystem::exists(*file_)) {
        std::ifstream in(*file_);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::IntegrityError, "cannot parse " + file_->string() + ": " + e.what());
        }
        set = annotations_from_json(j);
        for (const auto& h : set.highlights) {
            if (set.find_code(h.code_id) == nullptr) {
                throw Error(ErrorCode::IntegrityError, "highlight " + h.id + " references unknown code " + h.code_id);
            }
            validate_highlight(set, h);
        }
        for (const auto& c : set.codes) {
            if (c.category_id && set.find_category(*c.category_id) == nullptr) {
                throw Error(ErrorCode::IntegrityError, "code " + c.id + " references unknown category");
            }
        }
    }
    current_ = std::make_shared<const AnnotationSet>(std::move(set));
}

std::shared_ptr<const AnnotationSet> AnnotationStore::view() const {
    std::lock_guard lock(view_mutex_);
    return current_;
}

template <typename Fn>
auto AnnotationStore::mutate(Fn&& fn) {
    std::lock_guard lock(write_mutex_);
    AnnotationSet next = *view();
    auto result = fn(next);
    recompute_keywords(next);
    next.version += 1;
    if (file_) write_atomic(*file_, canonical_json(next));
    auto published = std::make_shared<const AnnotationSet>(std::move(next));
    {
        std::lock_guard view_lock(view_mutex_);
        current_ = std::move(published);
    }
    return result;
}

void AnnotationStore::validate_highlight(const AnnotationSet& set, const Highlight& h) const {
    const Document* doc = corpus_->find(h.doc_id);
    if (doc == nullptr) throw Error(ErrorCode::NotFound, "unknown document '" + h.doc_id + "'");
    if (h.span.start >= h.span.end || h.span.end > doc->body_length) {
        throw Error(ErrorCode::SpanOutOfRange, "span [" + std::to_string(h.span.start) + ", " +
                                                   std::to_string(h.span.end) + ") outside document '" + h.doc_id +
                                                   "' of length " + std::to_string(doc->body_length));
    }
    for (const auto* other : set.highlights_for_document(h.doc_id)) {
        if (other->id != h.id && other->span.overlaps(h.span)) {
            throw Error(ErrorCode::OverlappingHighlight, "span overlaps highlight " + other->id);
        }
    }
    if (!h.keywords.empty()) {
        std::set<WordId> allowed;
        for (const auto& candidate : corpus_->candidates_for(h.doc_id, h.span)) {
            allowed.insert(candidate.word_ids.begin(), candidate.word_ids.end());
        }
        for (WordId w : h.keywords) {
            if (allowed.count(w) == 0) {
                const std::string term = w < corpus_->vocabulary().size() ? corpus_->vocabulary().term(w)
                                                                          : "#" + std::to_string(w);
                throw Error(ErrorCode::InvalidArgument, "keyword '" + term + "' does not occur in the passage");
            }
        }
    }
}

std::string AnnotationStore::resolve_code(AnnotationSet& set, std::string_view label, const std::string& now) const {
    if (label.empty() || blank(label)) throw Error(ErrorCode::InvalidArgument, "code label must not be empty");
    if (fold(label) == kNonKeywordCode) {
        throw Error(ErrorCode::ReservedCode, "'non-keyword' is reserved and cannot be applied");
    }
    if (const Code* code = set.find_code_by_label(label)) return code->id;
    Code code;
    code.id = next_id(set.codes, "code-", [](const Code& c) -> std::string_view { return c.id; });
    code.label = std::string(label);
    code.created_at = now;
    set.codes.push_back(code);
    return code.id;
}

Highlight AnnotationStore::create_highlight(const HighlightInput& input) {
    return mutate([&](AnnotationSet& set) {
        const auto now = iso8601_utc(clock_());
        Highlight h;
        h.id = next_id(set.highlights, "hl-", [](const Highlight& x) -> std::string_view { return x.id; });
        h.doc_id = input.doc_id;
        h.span = input.span;
        h.keywords = input.keywords;
        h.memo = input.memo;
        h.created_at = now;
        h.updated_at = now;
        validate_highlight(set, h);
        h.code_id = resolve_code(set, input.code_label, now);
        set.highlights.push_back(h);
        recompute_keywords(set);
        check_ownership(set, h.code_id, *corpus_);
        return h;
    });
}

Highlight AnnotationStore::update_highlight(std::string_view id, const HighlightPatch& patch) {
    return mutate([&](AnnotationSet& set) {
        auto it = std::find_if(set.highlights.begin(), set.highlights.end(),
                               [&](const Highlight& h) { return h.id == id; });
        if (it == set.highlights.end()) throw Error(ErrorCode::NotFound, "unknown highlight '" + std::string(id) + "'");
        const auto now = iso8601_utc(clock_());
        Highlight h = *it;
        if (patch.span) h.span = *patch.span;
        if (patch.keywords) h.keywords = *patch.keywords;
        if (patch.memo) h.memo = *patch.memo;
        validate_highlight(set, h);
        if (patch.code_label) h.code_id = resolve_code(set, *patch.code_label, now);
        h.updated_at = now;
        // resolve_code may have grown `codes`, but highlights are untouched
        auto slot = std::find_if(set.highlights.begin(), set.highlights.end(),
                                 [&](const Highlight& x) { return x.id == id; });
        *slot = h;
        recompute_keywords(set);
        check_ownership(set, h.code_id, *corpus_);
        return h;
    });
}

void AnnotationStore::delete_highlight(std::string_view id) {
    mutate([&](AnnotationSet& set) {
        auto it = std::find_if(set.highlights.begin(), set.highlights.end(),
                               [&](const Highlight& h) { return h.id == id; });
        if (it == set.highlights.end()) throw Error(ErrorCode::NotFound, "unknown highlight '" + std::string(id) + "'");
        set.highlights.erase(it);
        return 0;
    });
}

Category AnnotationStore::assign_category(std::string_view code_id, std::string_view category_label) {
    return mutate([&](AnnotationSet& set) {
        auto code = std::find_if(set.codes.begin(), set.codes.end(), [&](const Code& c) { return c.id == code_id; });
        if (code == set.codes.end()) throw Error(ErrorCode::NotFound, "unknown code '" + std::string(code_id) + "'");
        if (code->id == kNonKeywordCode) throw Error(ErrorCode::ReservedCode, "'non-keyword' cannot be categorized");
        if (category_label.empty() || blank(category_label)) {
            throw Error(ErrorCode::InvalidArgument, "category label must not be empty");
        }
        Category category;
        if (const Category* existing = set.find_category_by_label(category_label)) {
            category = *existing;
        } else {
            category.id = next_id(set.categories, "cat-", [](const Category& c) -> std::string_view { return c.id; });
            category.label = std::string(category_label);
            category.color_index = static_cast<int>(set.categories.size());
            set.categories.push_back(category);
        }
        code->category_id = category.id;
        return category;
    });
}

void AnnotationStore::delete_code(std::string_view code_id) {
    mutate([&](AnnotationSet& set) {
        if (code_id == kNonKeywordCode) throw Error(ErrorCode::ReservedCode, "'non-keyword' cannot be deleted");
        auto it = std::find_if(set.codes.begin(), set.codes.end(), [&](const Code& c) { return c.id == code_id; });
        if (it == set.codes.end()) throw Error(ErrorCode::NotFound, "unknown code '" + std::string(code_id) + "'");
        for (const auto& h : set.highlights) {
            if (h.code_id == code_id) {
                throw Error(ErrorCode::InvalidArgument, "code '" + it->label + "' is still applied by " + h.id);
            }
        }
        set.codes.erase(it);
        return 0;
    });
}

// --- Summaries and export ---------------------------------------------------

std::vector<CodeSummary> code_summary(const AnnotationSet& set, const Corpus& corpus,
                                      std::span<const std::string> code_ids) {
    std::vector<CodeSummary> out;
    for (const auto& id : code_ids) {
        const Code* code = set.find_code(id);
        if (code == nullptr) throw Error(ErrorCode::NotFound, "unknown code '" + id + "'");
        CodeSummary s;
        s.code_id = code->id;
        s.label = code->label;
        s.category_id = code->category_id;
        if (code->category_id) {
            if (const Category* cat = set.find_category(*code->category_id)) s.category_label = cat->label;
        }
        for (WordId w : code->keywords) s.keywords.push_back(corpus.vocabulary().term(w));
        for (const auto& h : set.highlights) {
            if (h.code_id != code->id) continue;
            if (!h.memo.empty()) s.memos.push_back(h.memo);
            const Document* doc = corpus.find(h.doc_id);
            PassageView p;
            p.highlight_id = h.id;
            p.doc_id = h.doc_id;
            p.span = h.span;
            p.text = doc ? utf8::slice(doc->body, h.span.start, h.span.end) : std::string{};
            p.keyword_marks = keyword_marks(p.text, h.keywords, corpus);
            p.memo = h.memo;
            s.passages.push_back(std::move(p));
        }
        out.push_back(std::move(s));
    }
    return out;
}

json to_json(const CodeSummary& s) {
    json passages = json::array();
    for (const auto& p : s.passages) {
        json marks = json::array();
        for (const auto& m : p.keyword_marks) marks.push_back(json::array({m.start, m.end}));
        passages.push_back(json{{"highlight_id", p.highlight_id},
                                {"doc_id", p.doc_id},
                                {"start", p.span.start},
                                {"end", p.span.end},
                                {"text", p.text},
                                {"keyword_marks", marks},
                                {"memo", p.memo}});
    }
    return json{{"code_id", s.code_id},
                {"label", s.label},
                {"category_id", s.category_id ? json(*s.category_id) : json(nullptr)},
                {"category_label", s.category_label ? json(*s.category_label) : json(nullptr)},
                {"keywords", s.keywords},
                {"memos", s.memos},
                {"passages", passages}};
}

std::string export_csv(const AnnotationSet& set, const Corpus& corpus) {
    std::ostringstream out;
    out << "doc_id,title,start,end,passage_text,code_label,category_label,keywords,memo,created_at,updated_at\r\n";
    for (const auto& h : set.highlights) {
        const Document* doc = corpus.find(h.doc_id);
        const Code* code = set.find_code(h.code_id);
        std::string category;
        if (code && code->category_id) {
            if (const Category* cat = set.find_category(*code->category_id)) category = cat->label;
        }
        std::set<std::string> stems;
        for (WordId w : h.keywords) stems.insert(corpus.stems().stem_of(w));
        std::string keywords;
        for (const auto& s : stems) {
            if (!keywords.empty()) keywords += ';';
            keywords += s;
        }
        const std::string fields[] = {
            h.doc_id,
            doc ? doc->title : std::string{},
            std::to_string(h.span.start),
            std::to_string(h.span.end),
            doc ? utf8::slice(doc->body, h.span.start, h.span.end) : std::string{},
            code ? code->label : h.code_id,
            category,
            keywords,
            h.memo,
            h.created_at,
            h.updated_at,
        };
        bool first = true;
        for (const auto& f : fields) {
            if (!first) out << ',';
            out << csv_field(f);
            first = false;
        }
        out << "\r\n";
    }
    return out.str();
}

}  // namespace quarry
