#include "commvec/text.hpp"

#include <array>
#include <cctype>
#include <utility>

namespace commvec::text {

namespace {

// The NLTK English list with apostrophe forms removed (the tokenizer splits
// on apostrophes, so "don't" arrives as "don" + "t").
constexpr std::array kStopWords = {
    "i",        "me",      "my",         "myself", "we",     "our",     "ours",    "ourselves", "you",
    "your",     "yours",   "yourself",   "yourselves", "he", "him",     "his",     "himself",   "she",
    "her",      "hers",    "herself",    "it",     "its",    "itself",  "they",    "them",      "their",
    "theirs",   "themselves", "what",    "which",  "who",    "whom",    "this",    "that",      "these",
    "those",    "am",      "is",         "are",    "was",    "were",    "be",      "been",      "being",
    "have",     "has",     "had",        "having", "do",     "does",    "did",     "doing",     "a",
    "an",       "the",     "and",        "but",    "if",     "or",      "because", "as",        "until",
    "while",    "of",      "at",         "by",     "for",    "with",    "about",   "against",   "between",
    "into",     "through", "during",     "before", "after",  "above",   "below",   "to",        "from",
    "up",       "down",    "in",         "out",    "on",     "off",     "over",    "under",     "again",
    "further",  "then",    "once",       "here",   "there",  "when",    "where",   "why",       "how",
    "all",      "any",     "both",       "each",   "few",    "more",    "most",    "other",     "some",
    "such",     "no",      "nor",        "not",    "only",   "own",     "same",    "so",        "than",
    "too",      "very",    "s",          "t",      "can",    "will",    "just",    "don",       "should",
    "now",      "d",       "ll",         "m",      "o",      "re",      "ve",      "y",         "ain",
    "aren",     "couldn",  "didn",       "doesn",  "hadn",   "hasn",    "haven",   "isn",       "ma",
    "mightn",   "mustn",   "needn",      "shan",   "shouldn", "wasn",   "weren",   "won",       "wouldn",
};

// ------------------------------------------------------------ Porter

class PorterStemmer {
public:
    explicit PorterStemmer(std::string word) : w_(std::move(word)) {}

    std::string run() {
        step1a();
        step1b();
        step1c();
        step2();
        step3();
        step4();
        step5a();
        step5b();
        return std::move(w_);
    }

private:
    static bool is_vowel_letter(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

    // Consonant test over s[0..i]; 'y' is a consonant at the start or
    // after a vowel.
    static bool cons(std::string_view s, std::size_t i) {
        if (is_vowel_letter(s[i])) return false;
        if (s[i] == 'y') return i == 0 ? true : !cons(s, i - 1);
        return true;
    }

    static int measure(std::string_view s) {
        int m = 0;
        bool prev_vowel = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const bool c = cons(s, i);
            if (c && prev_vowel) ++m;
            prev_vowel = !c;
        }
        return m;
    }

    static bool has_vowel(std::string_view s) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!cons(s, i)) return true;
        }
        return false;
    }

    static bool double_cons(std::string_view s) {
        const auto n = s.size();
        return n >= 2 && s[n - 1] == s[n - 2] && cons(s, n - 1);
    }

    static bool cvc(std::string_view s) {
        const auto n = s.size();
        if (n < 3) return false;
        const char last = s[n - 1];
        return cons(s, n - 3) && !cons(s, n - 2) && cons(s, n - 1) && last != 'w' && last != 'x' && last != 'y';
    }

    bool ends(std::string_view suffix) const {
        return w_.size() >= suffix.size() && std::string_view(w_).substr(w_.size() - suffix.size()) == suffix;
    }

    std::string_view stem_before(std::string_view suffix) const {
        return std::string_view(w_).substr(0, w_.size() - suffix.size());
    }

    void replace(std::string_view suffix, std::string_view with) {
        w_.resize(w_.size() - suffix.size());
        w_.append(with);
    }

    struct Rule {
        std::string_view suffix;
        std::string_view replacement;
    };

    // First rule whose suffix matches decides; its condition is checked on
    // the remaining stem and the word is left alone if it fails.
    template <std::size_t N, typename Cond>
    void apply(const std::array<Rule, N>& rules, Cond cond) {
        for (const auto& r : rules) {
            if (ends(r.suffix)) {
                if (cond(stem_before(r.suffix))) replace(r.suffix, r.replacement);
                return;
            }
        }
    }

    void step1a() {
        static constexpr std::array<Rule, 4> rules{{{"sses", "ss"}, {"ies", "i"}, {"ss", "ss"}, {"s", ""}}};
        apply(rules, [](std::string_view) { return true; });
    }

    void step1b() {
        if (ends("eed")) {
            if (measure(stem_before("eed")) > 0) replace("eed", "ee");
            return;
        }
        bool stripped = false;
        for (std::string_view suffix : {std::string_view("ed"), std::string_view("ing")}) {
            if (ends(suffix) && has_vowel(stem_before(suffix))) {
                replace(suffix, "");
                stripped = true;
                break;
            }
        }
        if (!stripped) return;
        if (ends("at")) {
            replace("at", "ate");
        } else if (ends("bl")) {
            replace("bl", "ble");
        } else if (ends("iz")) {
            replace("iz", "ize");
        } else if (double_cons(w_)) {
            const char last = w_.back();
            if (last != 'l' && last != 's' && last != 'z') w_.pop_back();
        } else if (measure(w_) == 1 && cvc(w_)) {
            w_.push_back('e');
        }
    }

    void step1c() {
        if (ends("y") && has_vowel(stem_before("y"))) w_.back() = 'i';
    }

    void step2() {
        static constexpr std::array<Rule, 20> rules{{
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},   {"anci", "ance"},   {"izer", "ize"},
            {"abli", "able"},   {"alli", "al"},     {"entli", "ent"},   {"eli", "e"},       {"ousli", "ous"},
            {"ization", "ize"}, {"ation", "ate"},   {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"},
            {"fulness", "ful"}, {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
        }};
        apply(rules, [](std::string_view s) { return measure(s) > 0; });
    }

    void step3() {
        static constexpr std::array<Rule, 7> rules{{
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"}, {"ical", "ic"}, {"ful", ""}, {"ness", ""},
        }};
        apply(rules, [](std::string_view s) { return measure(s) > 0; });
    }

    void step4() {
        static constexpr std::array<Rule, 19> rules{{
            {"al", ""},   {"ance", ""}, {"ence", ""}, {"er", ""},  {"ic", ""},  {"able", ""}, {"ible", ""},
            {"ant", ""},  {"ement", ""}, {"ment", ""}, {"ent", ""}, {"ion", ""}, {"ou", ""},   {"ism", ""},
            {"ate", ""},  {"iti", ""},  {"ous", ""},  {"ive", ""}, {"ize", ""},
        }};
        for (const auto& r : rules) {
            if (!ends(r.suffix)) continue;
            const auto stem = stem_before(r.suffix);
            bool ok = measure(stem) > 1;
            if (r.suffix == "ion") ok = ok && !stem.empty() && (stem.back() == 's' || stem.back() == 't');
            if (ok) replace(r.suffix, "");
            return;
        }
    }

    void step5a() {
        if (!ends("e")) return;
        const auto stem = stem_before("e");
        const int m = measure(stem);
        if (m > 1 || (m == 1 && !cvc(stem))) w_.pop_back();
    }

    void step5b() {
        if (ends("ll") && measure(std::string_view(w_).substr(0, w_.size() - 1)) > 1) w_.pop_back();
    }

    std::string w_;
};

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool starts_with(std::string_view s, std::size_t pos, std::string_view prefix) {
    return s.substr(pos, prefix.size()) == prefix;
}

}  // namespace

const std::unordered_set<std::string>& stop_words() {
    static const std::unordered_set<std::string> words(kStopWords.begin(), kStopWords.end());
    return words;
}

std::string porter_stem(std::string_view word) {
    if (word.empty()) return {};
    return PorterStemmer(std::string(word)).run();
}

std::vector<std::string> tokenize(std::string_view body) {
    std::string s(body);
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    std::vector<std::string> out;
    const auto n = s.size();
    std::size_t i = 0;
    auto at_boundary = [&](std::size_t pos) { return pos == 0 || !is_word_char(static_cast<unsigned char>(s[pos - 1])); };
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    auto is_name_char = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    };

    while (i < n) {
        if (at_boundary(i) && (starts_with(s, i, "http://") || starts_with(s, i, "https://") || starts_with(s, i, "www."))) {
            while (i < n && !is_space(s[i])) ++i;
            out.emplace_back(kUrlToken);
            continue;
        }
        if (at_boundary(i) && starts_with(s, i, "u/") && i + 2 < n && is_name_char(s[i + 2])) {
            i += 2;
            while (i < n && is_name_char(s[i])) ++i;
            out.emplace_back(kUserToken);
            continue;
        }
        if (s[i] == '@' && at_boundary(i) && i + 1 < n && is_name_char(s[i + 1])) {
            ++i;
            while (i < n && is_name_char(s[i])) ++i;
            out.emplace_back(kUserToken);
            continue;
        }
        if (is_word_char(static_cast<unsigned char>(s[i]))) {
            const auto start = i;
            while (i < n && is_word_char(static_cast<unsigned char>(s[i]))) ++i;
            out.emplace_back(s.substr(start, i - start));
            continue;
        }
        ++i;
    }
    return out;
}

std::vector<std::string> preprocess(std::string_view body) {
    const auto& stops = stop_words();
    std::vector<std::string> out;
    for (auto& tok : tokenize(body)) {
        if (tok == kUrlToken || tok == kUserToken) {
            out.push_back(std::move(tok));
        } else if (stops.count(tok) == 0) {
            out.push_back(porter_stem(tok));
        }
    }
    return out;
}

}  // namespace commvec::text
