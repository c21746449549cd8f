#pragma once

#include "textfusion/matrix.hpp"
#include "textfusion/textrep.hpp"

namespace textfusion {

// Bilinear form scoring the relevance of each word to the image.
struct AttentionParams {
    DenseMatrix u;  // v_dim x t_dim
};

// z_i = f_v^T * U * f_t_i, computed as (f_v^T U) once and dotted against each
// word column.
Vec attention_logits(const Vec& visual, const AttentionParams& params,
                     const TextFeature& text);

struct AttentionCache {
    Vec visual;
    bool valid = false;
};

struct AttentionOutput {
    Vec weights;   // length n_max; masked columns exactly 0
    Vec attended;  // length t_dim; zero vector when no word is valid
    AttentionCache cache;
};

// Softmax the bilinear scores over the valid words (padded columns are masked
// out, they carry no text), then pool the word vectors by the weights.
AttentionOutput attention_forward(const Vec& visual, const AttentionParams& params,
                                  const TextFeature& text);

struct AttentionGrads {
    DenseMatrix u;
    Vec visual;
    DenseMatrix text_matrix;  // masked columns stay exactly zero
};

AttentionGrads attention_backward(const Vec& upstream, const AttentionParams& params,
                                  const TextFeature& text, const AttentionOutput& out);

// Mean of the valid columns; zero vector when none. Computed as the
// uniform-weight case of the attention pooling so the two paths agree
// bit-for-bit when U = 0.
Vec average_pool(const TextFeature& text);

// attended = sum_i weights[i] * column_i(matrix), skipping masked columns.
Vec pool_columns(const DenseMatrix& matrix, const Vec& weights, const BoolVec& mask);

}  // namespace textfusion
