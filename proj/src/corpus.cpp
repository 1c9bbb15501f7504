#include "quarry/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include <json.hpp>

#include "quarry/error.hpp"
#include "quarry/utf8.hpp"

namespace quarry {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lowercase(std::string_view s) {
    std::string out;
    auto decoded = utf8::decode(s);
    if (!decoded) return std::string(s);
    for (char32_t cp : *decoded) utf8::append(out, utf8::to_lower(cp));
    return out;
}

bool all_digits(std::u32string_view s) {
    return std::all_of(s.begin(), s.end(), [](char32_t c) { return c >= '0' && c <= '9'; });
}

}  // namespace

// --- Tokenizer --------------------------------------------------------------

Tokenizer::Tokenizer(TokenizerConfig config) : config_(std::move(config)) {
    if (config_.stopword_file) {
        std::ifstream in(*config_.stopword_file);
        if (!in) {
            throw Error(ErrorCode::Io, "cannot read stopword file " + config_.stopword_file->string());
        }
        std::string line;
        while (std::getline(in, line)) {
            if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
            auto word = trim(line);
            if (!word.empty()) stopwords_.insert(lowercase(word));
        }
    } else {
        for (auto word : bundled_stopwords()) stopwords_.emplace(word);
    }
}

bool Tokenizer::is_stopword(std::string_view token) const { return stopwords_.find(token) != stopwords_.end(); }

std::string Tokenizer::stem(std::string_view token) const {
    return config_.stemming ? porter_stem(token) : std::string(token);
}

std::vector<Token> Tokenizer::tokenize(std::string_view body) const {
    std::vector<Token> tokens;
    const auto decoded = utf8::decode(body);
    if (!decoded) return tokens;
    const std::u32string& text = *decoded;

    std::size_t i = 0;
    std::u32string lowered;
    while (i < text.size()) {
        if (!utf8::is_word_char(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        lowered.clear();
        while (j < text.size() && utf8::is_word_char(text[j])) {
            lowered.push_back(utf8::to_lower(text[j]));
            ++j;
        }
        if (lowered.size() >= config_.min_length && !all_digits(lowered)) {
            std::string word = utf8::encode(lowered);
            if (!is_stopword(word)) tokens.push_back(Token{std::move(word), Span{i, j}});
        }
        i = j;
    }
    return tokens;
}

// --- Vocabulary -------------------------------------------------------------

WordId Vocabulary::intern(std::string_view term) {
    std::string key(term);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    const auto id = static_cast<WordId>(terms_.size());
    terms_.push_back(key);
    frequency_.push_back(0);
    index_.emplace(std::move(key), id);
    return id;
}

std::optional<WordId> Vocabulary::find(std::string_view term) const {
    if (auto it = index_.find(std::string(term)); it != index_.end()) return it->second;
    return std::nullopt;
}

// --- Stems ------------------------------------------------------------------

StemIndex::StemIndex(const Vocabulary& vocabulary, const Tokenizer& tokenizer) {
    stem_of_.reserve(vocabulary.size());
    for (WordId id = 0; id < vocabulary.size(); ++id) {
        stem_of_.push_back(tokenizer.stem(vocabulary.term(id)));
        words_[stem_of_.back()].push_back(id);
    }
}

std::span<const WordId> StemIndex::words_for(std::string_view stem) const {
    if (auto it = words_.find(std::string(stem)); it != words_.end()) return it->second;
    return {};
}

std::vector<KeywordCandidate> stem_candidates(std::string_view passage, const Tokenizer& tokenizer,
                                              const StemIndex& stems) {
    std::vector<KeywordCandidate> out;
    for (const Token& token : tokenizer.tokenize(passage)) {
        std::string stem = tokenizer.stem(token.text);
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& c) { return c.stem == stem; });
        if (it == out.end()) {
            auto ids = stems.words_for(stem);
            out.push_back(KeywordCandidate{std::move(stem), {token.text}, {ids.begin(), ids.end()}});
        } else if (std::find(it->surface_forms.begin(), it->surface_forms.end(), token.text) ==
                   it->surface_forms.end()) {
            it->surface_forms.push_back(token.text);
        }
    }
    return out;
}

// --- Corpus -----------------------------------------------------------------

CorpusStats compute_stats(const std::vector<Document>& documents, const Vocabulary& vocabulary) {
    CorpusStats stats;
    stats.n_documents = documents.size();
    stats.n_words = vocabulary.size();
    for (const auto& doc : documents) stats.n_text_edges += doc.tokens.size();
    stats.mean_doc_length =
        documents.empty() ? 0.0 : static_cast<double>(stats.n_text_edges) / static_cast<double>(documents.size());
    return stats;
}

Corpus::Corpus(Tokenizer tokenizer, Vocabulary vocabulary, std::vector<Document> documents)
    : tokenizer_(std::move(tokenizer)), vocabulary_(std::move(vocabulary)), documents_(std::move(documents)) {
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        if (!by_id_.emplace(documents_[i].id, i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate document id '" + documents_[i].id + "'");
        }
    }
    stats_ = compute_stats(documents_, vocabulary_);
    stems_ = StemIndex(vocabulary_, tokenizer_);
}

const Document* Corpus::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &documents_[it->second];
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<KeywordCandidate> Corpus::candidates_for(std::string_view doc_id, Span span) const {
    const Document* doc = find(doc_id);
    if (doc == nullptr) throw Error(ErrorCode::NotFound, "unknown document '" + std::string(doc_id) + "'");
    if (span.start >= span.end || span.end > doc->body_length) {
        throw Error(ErrorCode::SpanOutOfRange, "span [" + std::to_string(span.start) + ", " +
                                                   std::to_string(span.end) + ") outside document '" +
                                                   doc->id + "'");
    }
    return stem_candidates(utf8::slice(doc->body, span.start, span.end), tokenizer_, stems_);
}

Corpus ingest_corpus(std::istream& source, const TokenizerConfig& config) {
    Tokenizer tokenizer(config);
    Vocabulary vocabulary;
    std::vector<Document> documents;
    std::unordered_map<std::string, std::size_t> seen;

    std::string line;
    std::size_t line_no = 0;
    auto malformed = [&](const std::string& why) {
        return Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + why);
    };

    while (std::getline(source, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw malformed(e.what());
        }
        if (!record.is_object()) throw malformed("record is not an object");
        for (const char* field : {"id", "title", "body"}) {
            if (!record.contains(field) || !record[field].is_string()) {
                throw malformed(std::string("missing or non-string field '") + field + "'");
            }
        }

        Document doc;
        doc.id = record["id"].get<std::string>();
        doc.title = record["title"].get<std::string>();
        doc.body = record["body"].get<std::string>();
        if (doc.id.empty()) throw malformed("empty id");
        if (!utf8::is_valid(doc.body) || !utf8::is_valid(doc.title)) throw malformed("invalid UTF-8");
        if (!seen.emplace(doc.id, line_no).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate document id '" + doc.id + "' on line " +
                                                    std::to_string(line_no));
        }
        doc.body_length = utf8::length(doc.body);

        if (record.contains("tokens")) {
            const auto& tokens = record["tokens"];
            if (!tokens.is_array()) throw malformed("'tokens' is not an array");
            doc.pretokenized = true;
            for (const auto& t : tokens) {
                if (!t.is_string()) throw malformed("non-string token");
                const auto& text = t.get_ref<const std::string&>();
                if (text.empty()) continue;
                doc.tokens.push_back(vocabulary.intern(text));
            }
        } else {
            for (auto& token : tokenizer.tokenize(doc.body)) {
                doc.tokens.push_back(vocabulary.intern(token.text));
                doc.token_spans.push_back(token.span);
            }
        }
        for (WordId w : doc.tokens) vocabulary.count(w);
        documents.push_back(std::move(doc));
    }
    return Corpus(std::move(tokenizer), std::move(vocabulary), std::move(documents));
}

Corpus ingest_corpus_file(const std::filesystem::path& path, const TokenizerConfig& config) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read corpus file " + path.string());
    return ingest_corpus(in, config);
}

}  // namespace quarry
