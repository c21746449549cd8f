#include "textfusion/textrep.hpp"

#include <algorithm>
#include <cctype>

#include "textfusion/errors.hpp"

namespace textfusion {

namespace {

std::size_t letter_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (std::isalpha(static_cast<unsigned char>(c))) ++n;
    return n;
}

std::string trim(const std::string& text) {
    std::size_t begin = 0, end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return text.substr(begin, end - begin);
}

}  // namespace

std::vector<SpottedWord> filter_words(const std::vector<SpottedWord>& words) {
    std::vector<SpottedWord> kept;
    kept.reserve(words.size());
    for (const SpottedWord& w : words) {
        SpottedWord trimmed{trim(w.text), w.score};
        if (letter_count(trimmed.text) >= 3) kept.push_back(std::move(trimmed));
    }
    return kept;
}

std::size_t compute_nmax(const std::vector<std::vector<SpottedWord>>& training_words,
                         const EmbeddingTable& table) {
    if (training_words.empty())
        throw UsageError("compute_nmax: empty training set");
    std::size_t n_max = 1;
    for (const auto& words : training_words) {
        std::size_t survivors = 0;
        for (const SpottedWord& w : filter_words(words))
            if (lookup(table, w.text) != nullptr) ++survivors;
        n_max = std::max(n_max, survivors);
    }
    return n_max;
}

TextFeature build_text_feature(const std::vector<SpottedWord>& words,
                               const EmbeddingTable& table, std::size_t n_max,
                               TextBuildStats* stats) {
    if (n_max < 1) throw UsageError("build_text_feature: n_max must be at least 1");

    TextBuildStats local;
    local.input_words = words.size();

    std::vector<SpottedWord> kept = filter_words(words);
    local.filtered_short = words.size() - kept.size();

    struct Survivor {
        SpottedWord word;
        std::string folded;
        const Vec* embedding;
    };
    std::vector<Survivor> survivors;
    survivors.reserve(kept.size());
    for (SpottedWord& w : kept) {
        const Vec* embedding = lookup(table, w.text);
        if (!embedding) {
            ++local.oov_dropped;
            continue;
        }
        std::string folded = normalize_token(w.text);
        survivors.push_back({std::move(w), std::move(folded), embedding});
    }

    // Score descending; ties broken by lowercase text then input order, so
    // the result is invariant under permutations of the input list.
    std::stable_sort(survivors.begin(), survivors.end(),
                     [](const Survivor& a, const Survivor& b) {
                         if (a.word.score != b.word.score) return a.word.score > b.word.score;
                         return a.folded < b.folded;
                     });

    if (survivors.size() > n_max) {
        local.truncated = survivors.size() - n_max;
        survivors.resize(n_max);
    }
    local.retained = survivors.size();

    TextFeature feature;
    feature.matrix = DenseMatrix(table.dim, n_max);
    feature.mask.assign(n_max, 0);
    feature.words.reserve(survivors.size());
    for (std::size_t i = 0; i < survivors.size(); ++i) {
        const Vec& e = *survivors[i].embedding;
        for (std::size_t r = 0; r < table.dim; ++r) feature.matrix.at(r, i) = e[r];
        feature.mask[i] = 1;
        feature.words.push_back(survivors[i].word.text);
    }
    if (stats) *stats += local;
    return feature;
}

}  // namespace textfusion
