#include "quarry/corpus.hpp"

namespace quarry {

namespace {

// Working buffer for one word. Indices follow the original description:
// `end` is one past the last live character of the word.
class PorterWord {
public:
    explicit PorterWord(std::string_view word) : b_(word), end_(word.size()) {}

    std::string result() const { return b_.substr(0, end_); }

    void step1a() {
        if (ends("sses")) {
            end_ -= 2;
        } else if (ends("ies")) {
            set_to(3, "i");
        } else if (ends("ss")) {
        } else if (ends("s")) {
            end_ -= 1;
        }
    }

    void step1b() {
        if (ends("eed")) {
            if (measure(end_ - 3) > 0) end_ -= 1;
            return;
        }
        std::size_t suffix = 0;
        if (ends("ed") && has_vowel(end_ - 2)) {
            suffix = 2;
        } else if (ends("ing") && has_vowel(end_ - 3)) {
            suffix = 3;
        }
        if (suffix == 0) return;
        end_ -= suffix;
        if (ends("at") || ends("bl") || ends("iz")) {
            b_.resize(end_);
            b_.push_back('e');
            end_ += 1;
        } else if (double_consonant(end_)) {
            const char last = b_[end_ - 1];
            if (last != 'l' && last != 's' && last != 'z') end_ -= 1;
        } else if (measure(end_) == 1 && cvc(end_)) {
            b_.resize(end_);
            b_.push_back('e');
            end_ += 1;
        }
    }

    void step1c() {
        if (ends("y") && has_vowel(end_ - 1)) b_[end_ - 1] = 'i';
    }

    void step2() {
        static constexpr std::pair<std::string_view, std::string_view> rules[] = {
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},   {"anci", "ance"},
            {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},     {"entli", "ent"},
            {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
            {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
        };
        apply_first(rules, 0);
    }

    void step3() {
        static constexpr std::pair<std::string_view, std::string_view> rules[] = {
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
            {"ical", "ic"},  {"ful", ""},   {"ness", ""},
        };
        apply_first(rules, 0);
    }

    void step4() {
        static constexpr std::string_view suffixes[] = {
            "al",  "ance", "ence", "er",  "ic",  "able", "ible", "ant", "ement", "ment",
            "ent", "ion",  "ou",   "ism", "ate", "iti",  "ous",  "ive", "ize",
        };
        for (std::string_view suffix : suffixes) {
            if (!ends(suffix)) continue;
            const std::size_t stem = end_ - suffix.size();
            bool ok = measure(stem) > 1;
            if (suffix == "ion") ok = ok && stem > 0 && (b_[stem - 1] == 's' || b_[stem - 1] == 't');
            if (ok) end_ = stem;
            return;
        }
    }

    void step5() {
        if (ends("e")) {
            const std::size_t stem = end_ - 1;
            const int m = measure(stem);
            if (m > 1 || (m == 1 && !cvc(stem))) end_ = stem;
        }
        if (ends("ll") && measure(end_ - 1) > 1) end_ -= 1;
    }

private:
    bool consonant(std::size_t i) const {
        switch (b_[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u': return false;
            case 'y': return i == 0 ? true : !consonant(i - 1);
            default: return true;
        }
    }

    // Number of VC sequences in b_[0, stem_end).
    int measure(std::size_t stem_end) const {
        int m = 0;
        std::size_t i = 0;
        while (i < stem_end && consonant(i)) ++i;
        while (i < stem_end) {
            while (i < stem_end && !consonant(i)) ++i;
            if (i >= stem_end) break;
            while (i < stem_end && consonant(i)) ++i;
            ++m;
        }
        return m;
    }

    bool has_vowel(std::size_t stem_end) const {
        for (std::size_t i = 0; i < stem_end; ++i) {
            if (!consonant(i)) return true;
        }
        return false;
    }

    bool double_consonant(std::size_t stem_end) const {
        return stem_end >= 2 && b_[stem_end - 1] == b_[stem_end - 2] && consonant(stem_end - 1);
    }

    // consonant-vowel-consonant ending, last consonant not w, x or y
    bool cvc(std::size_t stem_end) const {
        if (stem_end < 3) return false;
        const std::size_t i = stem_end - 1;
        if (!consonant(i) || consonant(i - 1) || !consonant(i - 2)) return false;
        return b_[i] != 'w' && b_[i] != 'x' && b_[i] != 'y';
    }

    bool ends(std::string_view suffix) const {
        return suffix.size() <= end_ && std::string_view(b_).substr(end_ - suffix.size(), suffix.size()) == suffix;
    }

    void set_to(std::size_t drop, std::string_view replacement) {
        b_.resize(end_ - drop);
        b_.append(replacement);
        end_ = b_.size();
    }

    template <std::size_t N>
    void apply_first(const std::pair<std::string_view, std::string_view> (&rules)[N], int min_measure) {
        for (const auto& [suffix, replacement] : rules) {
            if (!ends(suffix)) continue;
            if (measure(end_ - suffix.size()) > min_measure) set_to(suffix.size(), replacement);
            return;
        }
    }

    std::string b_;
    std::size_t end_;
};

}  // namespace

std::string porter_stem(std::string_view word) {
    if (word.empty()) return {};
    PorterWord w(word);
    w.step1a();
    w.step1b();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5();
    return w.result();
}

}  // namespace quarry
