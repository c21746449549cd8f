#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "textfusion/embeddings.hpp"
#include "textfusion/matrix.hpp"

namespace textfusion {

// One word returned by the text reading system, with its recognition
// confidence (higher = more confident).
struct SpottedWord {
    std::string text;
    double score = 0.0;

    bool operator==(const SpottedWord&) const = default;
};

// Fixed-width text representation: column i of `matrix` is the embedding of
// words[i]; mask-true entries form a prefix and padded columns are exactly
// zero.
struct TextFeature {
    DenseMatrix matrix;              // t_dim x n_max
    BoolVec mask;                    // length n_max
    std::vector<std::string> words;  // retained words, column order

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m ? 1 : 0;
        return n;
    }
};

// Keeps words with at least 3 letters after trimming (alphabetic characters;
// short words are recognizer false positives more often than not). Order
// preserved, no deduplication.
std::vector<SpottedWord> filter_words(const std::vector<SpottedWord>& words);

// Width of the text feature: the maximum, over training samples, of the
// number of words surviving the filter and the embedding lookup. Never below
// 1 so the tensor shape stays well-formed for a text-free corpus.
std::size_t compute_nmax(const std::vector<std::vector<SpottedWord>>& training_words,
                         const EmbeddingTable& table);

struct TextBuildStats {
    std::size_t input_words = 0;
    std::size_t filtered_short = 0;
    std::size_t oov_dropped = 0;
    std::size_t truncated = 0;
    std::size_t retained = 0;

    TextBuildStats& operator+=(const TextBuildStats& other) {
        input_words += other.input_words;
        filtered_short += other.filtered_short;
        oov_dropped += other.oov_dropped;
        truncated += other.truncated;
        retained += other.retained;
        return *this;
    }
};

// Filter, drop out-of-vocabulary words, sort by score descending (ties:
// lowercase text, then input order), take the first n_max, zero-pad the rest.
TextFeature build_text_feature(const std::vector<SpottedWord>& words,
                               const EmbeddingTable& table, std::size_t n_max,
                               TextBuildStats* stats = nullptr);

}  // namespace textfusion
