#include "textfusion/attention.hpp"

#include <sstream>

#include "textfusion/errors.hpp"
#include "textfusion/nn.hpp"

namespace textfusion {

namespace {

void check_dims(const Vec& visual, const AttentionParams& params,
                const TextFeature& text, const char* op) {
    if (params.u.rows != visual.size() || params.u.cols != text.matrix.rows) {
        std::ostringstream os;
        os << op << ": U " << params.u.rows << "x" << params.u.cols
           << " vs visual length " << visual.size() << ", text dim "
           << text.matrix.rows;
        throw ShapeError(os.str());
    }
    if (text.mask.size() != text.matrix.cols) {
        std::ostringstream os;
        os << op << ": mask length " << text.mask.size() << " vs " << text.matrix.cols
           << " word columns";
        throw ShapeError(os.str());
    }
}

}  // namespace

Vec attention_logits(const Vec& visual, const AttentionParams& params,
                     const TextFeature& text) {
    check_dims(visual, params, text, "attention_logits");
    const std::size_t t_dim = params.u.cols;
    // r = f_v^T U
    Vec r(t_dim, 0.0);
    for (std::size_t i = 0; i < params.u.rows; ++i) {
        const double fv = visual[i];
        const double* urow = params.u.row(i);
        for (std::size_t j = 0; j < t_dim; ++j) r[j] += fv * urow[j];
    }
    Vec logits(text.matrix.cols, 0.0);
    for (std::size_t c = 0; c < text.matrix.cols; ++c) {
        double z = 0.0;
        for (std::size_t j = 0; j < t_dim; ++j) z += r[j] * text.matrix.at(j, c);
        logits[c] = z;
    }
    return logits;
}

Vec pool_columns(const DenseMatrix& matrix, const Vec& weights, const BoolVec& mask) {
    Vec out(matrix.rows, 0.0);
    for (std::size_t c = 0; c < matrix.cols; ++c) {
        if (!mask[c]) continue;
        const double w = weights[c];
        for (std::size_t r = 0; r < matrix.rows; ++r) out[r] += w * matrix.at(r, c);
    }
    return out;
}

AttentionOutput attention_forward(const Vec& visual, const AttentionParams& params,
                                  const TextFeature& text) {
    AttentionOutput out;
    out.weights = masked_softmax(attention_logits(visual, params, text), text.mask);
    out.attended = pool_columns(text.matrix, out.weights, text.mask);
    out.cache.visual = visual;
    out.cache.valid = true;
    return out;
}

AttentionGrads attention_backward(const Vec& upstream, const AttentionParams& params,
                                  const TextFeature& text, const AttentionOutput& out) {
    if (!out.cache.valid)
        throw UsageError("attention_backward: forward cache missing");
    const Vec& visual = out.cache.visual;
    check_dims(visual, params, text, "attention_backward");
    if (upstream.size() != text.matrix.rows) {
        std::ostringstream os;
        os << "attention_backward: upstream length " << upstream.size()
           << " vs attended length " << text.matrix.rows;
        throw ShapeError(os.str());
    }

    const std::size_t n_cols = text.matrix.cols;
    const std::size_t t_dim = text.matrix.rows;
    const std::size_t v_dim = visual.size();

    AttentionGrads g;
    g.u = DenseMatrix(v_dim, t_dim);
    g.visual.assign(v_dim, 0.0);
    g.text_matrix = DenseMatrix(t_dim, n_cols);

    // dL/dw_i = upstream . column_i; softmax Jacobian over the valid set
    Vec dweights(n_cols, 0.0);
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (!text.mask[c]) continue;
        double acc = 0.0;
        for (std::size_t r = 0; r < t_dim; ++r) acc += upstream[r] * text.matrix.at(r, c);
        dweights[c] = acc;
    }
    double weighted_sum = 0.0;
    for (std::size_t c = 0; c < n_cols; ++c)
        if (text.mask[c]) weighted_sum += out.weights[c] * dweights[c];
    Vec dlogits(n_cols, 0.0);
    for (std::size_t c = 0; c < n_cols; ++c)
        if (text.mask[c]) dlogits[c] = out.weights[c] * (dweights[c] - weighted_sum);

    // Direct pooling term plus the logit path z_i = f_v^T U t_i.
    // s = T * dlogits collects the per-column contributions once:
    //   grad_U = outer(f_v, s), grad_f_v = U s.
    Vec s(t_dim, 0.0);
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (!text.mask[c]) continue;
        const double dz = dlogits[c];
        for (std::size_t r = 0; r < t_dim; ++r) s[r] += dz * text.matrix.at(r, c);
    }
    for (std::size_t i = 0; i < v_dim; ++i) {
        const double fv = visual[i];
        double* grow = g.u.row(i);
        const double* urow = params.u.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < t_dim; ++j) {
            grow[j] = fv * s[j];
            acc += urow[j] * s[j];
        }
        g.visual[i] = acc;
    }

    // r = f_v^T U reused for the per-column text gradient
    Vec r(t_dim, 0.0);
    for (std::size_t i = 0; i < v_dim; ++i) {
        const double fv = visual[i];
        const double* urow = params.u.row(i);
        for (std::size_t j = 0; j < t_dim; ++j) r[j] += fv * urow[j];
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
        if (!text.mask[c]) continue;
        const double w = out.weights[c];
        const double dz = dlogits[c];
        for (std::size_t j = 0; j < t_dim; ++j)
            g.text_matrix.at(j, c) = upstream[j] * w + dz * r[j];
    }
    return g;
}

Vec average_pool(const TextFeature& text) {
    const std::size_t valid = text.valid_count();
    Vec weights(text.matrix.cols, 0.0);
    if (valid == 0) return Vec(text.matrix.rows, 0.0);
    const double w = 1.0 / static_cast<double>(valid);
    for (std::size_t c = 0; c < text.matrix.cols; ++c)
        if (text.mask[c]) weights[c] = w;
    return pool_columns(text.matrix, weights, text.mask);
}

}  // namespace textfusion
