#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace quarry {

using WordId = std::uint32_t;

/// Half-open range of Unicode scalar offsets into a document body.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - start; }
    bool overlaps(const Span& other) const noexcept {
        return start < other.end && other.start < end;
    }
    bool operator==(const Span&) const = default;
};

struct Token {
    std::string text;
    Span span;
};

struct TokenizerConfig {
    /// One word per line, `#` starts a comment. The bundled English list is
    /// used when unset.
    std::optional<std::filesystem::path> stopword_file;
    std::size_t min_length = 2;
    bool stemming = true;
};

/// The bundled English stopword list.
std::span<const std::string_view> bundled_stopwords();

/// Classic Porter (1980) suffix stripping on a lowercase word.
std::string porter_stem(std::string_view word);

class Tokenizer {
public:
    explicit Tokenizer(TokenizerConfig config = {});

    /// Lowercased word segments with stopwords, pure digits and short tokens
    /// removed. Spans index the original body.
    std::vector<Token> tokenize(std::string_view body) const;

    bool is_stopword(std::string_view token) const;

    /// Porter stem, or the token itself when stemming is disabled.
    std::string stem(std::string_view token) const;

    const TokenizerConfig& config() const noexcept { return config_; }
    const std::set<std::string, std::less<>>& stopwords() const noexcept { return stopwords_; }

private:
    TokenizerConfig config_;
    std::set<std::string, std::less<>> stopwords_;
};

inline std::vector<Token> tokenize(std::string_view body, const TokenizerConfig& config) {
    return Tokenizer(config).tokenize(body);
}

struct Document {
    std::string id;
    std::string title;
    std::string body;
    std::size_t body_length = 0;  // scalar values
    std::vector<WordId> tokens;
    /// Parallel to `tokens` for internally tokenized documents; empty when the
    /// record supplied its own tokens.
    std::vector<Span> token_spans;
    bool pretokenized = false;

    /// Documents whose token list is empty stay readable but are excluded
    /// from the Text layer.
    bool in_model() const noexcept { return !tokens.empty(); }
};

class Vocabulary {
public:
    WordId intern(std::string_view term);
    void count(WordId id, std::uint64_t n = 1) { frequency_.at(id) += n; }

    std::optional<WordId> find(std::string_view term) const;
    const std::string& term(WordId id) const { return terms_.at(id); }
    std::uint64_t frequency(WordId id) const { return frequency_.at(id); }
    std::size_t size() const noexcept { return terms_.size(); }

    const std::vector<std::string>& terms() const noexcept { return terms_; }
    const std::vector<std::uint64_t>& frequencies() const noexcept { return frequency_; }

private:
    std::vector<std::string> terms_;
    std::vector<std::uint64_t> frequency_;
    std::unordered_map<std::string, WordId> index_;
};

struct CorpusStats {
    std::size_t n_documents = 0;
    std::size_t n_words = 0;
    std::uint64_t n_text_edges = 0;
    double mean_doc_length = 0.0;
};

/// Maps stems to the vocabulary ids whose term has that stem. Each term is
/// stemmed exactly once.
class StemIndex {
public:
    StemIndex() = default;
    StemIndex(const Vocabulary& vocabulary, const Tokenizer& tokenizer);

    std::span<const WordId> words_for(std::string_view stem) const;
    const std::string& stem_of(WordId id) const { return stem_of_.at(id); }

private:
    std::vector<std::string> stem_of_;
    std::unordered_map<std::string, std::vector<WordId>> words_;
};

struct KeywordCandidate {
    std::string stem;
    std::vector<std::string> surface_forms;  // first-occurrence order
    std::vector<WordId> word_ids;            // ascending
};

std::vector<KeywordCandidate> stem_candidates(std::string_view passage, const Tokenizer& tokenizer,
                                              const StemIndex& stems);

class Corpus {
public:
    Corpus(Tokenizer tokenizer, Vocabulary vocabulary, std::vector<Document> documents);

    const Tokenizer& tokenizer() const noexcept { return tokenizer_; }
    const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
    const std::vector<Document>& documents() const noexcept { return documents_; }
    const CorpusStats& stats() const noexcept { return stats_; }
    const StemIndex& stems() const noexcept { return stems_; }

    const Document* find(std::string_view id) const;
    std::optional<std::size_t> index_of(std::string_view id) const;

    /// Candidates for a passage given by scalar offsets into a document.
    std::vector<KeywordCandidate> candidates_for(std::string_view doc_id, Span span) const;

private:
    Tokenizer tokenizer_;
    Vocabulary vocabulary_;
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::size_t> by_id_;
    CorpusStats stats_;
    StemIndex stems_;
};

CorpusStats compute_stats(const std::vector<Document>& documents, const Vocabulary& vocabulary);

/// Reads line-delimited JSON records (`id`, `title`, `body`, optional
/// `tokens`). Throws Error{DuplicateId} or Error{MalformedRecord}.
Corpus ingest_corpus(std::istream& source, const TokenizerConfig& config);
Corpus ingest_corpus_file(const std::filesystem::path& path, const TokenizerConfig& config);

}  // namespace quarry
