#include "textfusion/model.hpp"

#include <cmath>
#include <sstream>

#include "textfusion/errors.hpp"
#include "textfusion/rng.hpp"

namespace textfusion {

void ModelConfig::validate() const {
    if (v_dim < 1 || t_dim < 1 || fused_v_dim < 1)
        throw UsageError("ModelConfig: dimensions must be at least 1");
    if (num_classes < 2)
        throw UsageError("ModelConfig: num_classes must be at least 2, got " +
                         std::to_string(num_classes));
    for (double b : beta)
        if (!(b >= 0.0)) throw UsageError("ModelConfig: beta entries must be >= 0");
    if (!(beta[0] > 0.0)) throw UsageError("ModelConfig: beta[0] must be > 0");
}

ModelParams make_params(const ModelConfig& config) {
    ModelParams p;
    p.attention.u = DenseMatrix(config.v_dim, config.t_dim);
    p.proj.weight = DenseMatrix(config.fused_v_dim, config.v_dim);
    p.proj.bias.assign(config.fused_v_dim, 0.0);
    p.bn_visual = BatchNormState::create(config.fused_v_dim);
    p.bn_text = BatchNormState::create(config.t_dim);
    // All-zero tensors, including batch-norm scale and running variance, so
    // the same structure doubles as a gradient accumulator.
    p.bn_visual.gamma.assign(config.fused_v_dim, 0.0);
    p.bn_visual.running_var.assign(config.fused_v_dim, 0.0);
    p.bn_text.gamma.assign(config.t_dim, 0.0);
    p.bn_text.running_var.assign(config.t_dim, 0.0);
    p.head_fused.weight = DenseMatrix(config.num_classes, config.fused_dim());
    p.head_fused.bias.assign(config.num_classes, 0.0);
    p.head_visual.weight = DenseMatrix(config.num_classes, config.v_dim);
    p.head_visual.bias.assign(config.num_classes, 0.0);
    p.head_text.weight = DenseMatrix(config.num_classes + 1, config.t_dim);
    p.head_text.bias.assign(config.num_classes + 1, 0.0);
    return p;
}

namespace {

void fill_fan_uniform(DenseMatrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : m.data) v = rng.uniform(-a, a);
}

}  // namespace

ModelParams init_params(const ModelConfig& config) {
    config.validate();
    ModelParams p = make_params(config);
    p.bn_visual.gamma.assign(config.fused_v_dim, 1.0);
    p.bn_visual.running_var.assign(config.fused_v_dim, 1.0);
    p.bn_text.gamma.assign(config.t_dim, 1.0);
    p.bn_text.running_var.assign(config.t_dim, 1.0);
    Rng rng(mix_seed(config.seed, 0));
    fill_fan_uniform(p.attention.u, config.v_dim, config.t_dim, rng);
    fill_fan_uniform(p.proj.weight, config.v_dim, config.fused_v_dim, rng);
    fill_fan_uniform(p.head_fused.weight, config.fused_dim(), config.num_classes, rng);
    fill_fan_uniform(p.head_visual.weight, config.v_dim, config.num_classes, rng);
    fill_fan_uniform(p.head_text.weight, config.t_dim, config.num_classes + 1, rng);
    return p;
}

std::vector<ParamView> param_views(ModelParams& p) {
    std::vector<ParamView> views;
    auto add_matrix = [&](const std::string& name, DenseMatrix& m, bool decay) {
        views.push_back({name, m.data.data(), m.data.size(), decay});
    };
    auto add_vector = [&](const std::string& name, Vec& v, bool decay) {
        views.push_back({name, v.data(), v.size(), decay});
    };
    add_matrix("attention.U", p.attention.u, true);
    add_matrix("proj.W", p.proj.weight, true);
    add_vector("proj.b", p.proj.bias, false);
    add_vector("bn_visual.gamma", p.bn_visual.gamma, false);
    add_vector("bn_visual.beta", p.bn_visual.beta, false);
    add_vector("bn_text.gamma", p.bn_text.gamma, false);
    add_vector("bn_text.beta", p.bn_text.beta, false);
    add_matrix("head_fused.W", p.head_fused.weight, true);
    add_vector("head_fused.b", p.head_fused.bias, false);
    add_matrix("head_visual.W", p.head_visual.weight, true);
    add_vector("head_visual.b", p.head_visual.bias, false);
    add_matrix("head_text.W", p.head_text.weight, true);
    add_vector("head_text.b", p.head_text.bias, false);
    return views;
}

Vec pack_params(ModelParams& params) {
    Vec flat;
    for (const ParamView& view : param_views(params))
        flat.insert(flat.end(), view.data, view.data + view.size);
    return flat;
}

void unpack_params(ModelParams& params, const Vec& flat) {
    std::size_t offset = 0;
    for (const ParamView& view : param_views(params)) {
        if (offset + view.size > flat.size())
            throw ShapeError("unpack_params: flat vector too short");
        for (std::size_t i = 0; i < view.size; ++i) view.data[i] = flat[offset + i];
        offset += view.size;
    }
    if (offset != flat.size())
        throw ShapeError("unpack_params: flat vector length " +
                         std::to_string(flat.size()) + ", expected " +
                         std::to_string(offset));
}

std::string describe_param_coordinate(ModelParams& params, std::size_t flat_index) {
    std::size_t offset = 0;
    for (const ParamView& view : param_views(params)) {
        if (flat_index < offset + view.size) {
            std::ostringstream os;
            os << view.name << "[" << flat_index - offset << "]";
            return os.str();
        }
        offset += view.size;
    }
    return "<out of range>";
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::fused: return "fused";
        case Variant::visual_only: return "visual_only";
        case Variant::text_only: return "text_only";
        case Variant::average_pool: return "average_pool";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    if (name == "fused") return Variant::fused;
    if (name == "visual_only") return Variant::visual_only;
    if (name == "text_only") return Variant::text_only;
    if (name == "average_pool") return Variant::average_pool;
    throw UsageError("unknown variant '" + name +
                     "' (expected fused, visual_only, text_only or average_pool)");
}

std::size_t text_head_target(const PreparedSample& sample, std::size_t num_classes) {
    return sample.text.valid_count() == 0 ? num_classes : sample.label;
}

namespace {

void check_batch(const ModelConfig& config, std::span<const PreparedSample> batch,
                 BatchNormMode mode) {
    if (batch.empty()) throw UsageError("forward: empty batch");
    if (mode == BatchNormMode::train && batch.size() < 2)
        throw UsageError("forward: train mode needs a batch of at least 2 samples");
    for (const PreparedSample& s : batch) {
        if (s.visual.size() != config.v_dim) {
            std::ostringstream os;
            os << "forward: sample '" << s.id << "' visual length " << s.visual.size()
               << " vs configured v_dim " << config.v_dim;
            throw ShapeError(os.str());
        }
        if (s.text.matrix.rows != config.t_dim) {
            std::ostringstream os;
            os << "forward: sample '" << s.id << "' text dim " << s.text.matrix.rows
               << " vs configured t_dim " << config.t_dim;
            throw ShapeError(os.str());
        }
        if (s.label >= config.num_classes) {
            std::ostringstream os;
            os << "forward: sample '" << s.id << "' label " << s.label << " vs "
               << config.num_classes << " classes";
            throw IndexError(os.str());
        }
    }
}

Vec uniform_pool_weights(const TextFeature& text) {
    Vec weights(text.matrix.cols, 0.0);
    const std::size_t valid = text.valid_count();
    if (valid == 0) return weights;
    const double w = 1.0 / static_cast<double>(valid);
    for (std::size_t c = 0; c < text.matrix.cols; ++c)
        if (text.mask[c]) weights[c] = w;
    return weights;
}

ForwardResult forward_impl(const ModelParams& params, const ModelConfig& config,
                           std::span<const PreparedSample> batch, Variant variant,
                           BatchNormMode mode, bool update_running,
                           BatchNormState* bn_visual_mut, BatchNormState* bn_text_mut) {
    check_batch(config, batch, mode);
    const std::size_t n = batch.size();
    ForwardResult res;
    res.mode = mode;

    if (variant == Variant::visual_only) {
        res.logits_visual.reserve(n);
        for (const PreparedSample& s : batch)
            res.logits_visual.push_back(
                affine_forward(s.visual, params.head_visual.weight, params.head_visual.bias));
        return res;
    }

    // Word pooling: bilinear attention weights for the fused variant, the
    // classical average for the ablation arms.
    res.attended.reserve(n);
    res.pooling_weights.reserve(n);
    if (variant == Variant::fused) res.attention_out.reserve(n);
    for (const PreparedSample& s : batch) {
        if (variant == Variant::fused) {
            AttentionOutput out = attention_forward(s.visual, params.attention, s.text);
            res.pooling_weights.push_back(out.weights);
            res.attended.push_back(out.attended);
            res.attention_out.push_back(std::move(out));
        } else {
            res.pooling_weights.push_back(uniform_pool_weights(s.text));
            res.attended.push_back(average_pool(s.text));
        }
    }

    if (variant == Variant::text_only) {
        res.logits_text.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            res.logits_text.push_back(affine_forward(res.attended[i],
                                                     params.head_text.weight,
                                                     params.head_text.bias));
        return res;
    }

    // Fusion path: project, batch-normalize both modalities, concatenate.
    res.projected = DenseMatrix(n, config.fused_v_dim);
    DenseMatrix attended_batch(n, config.t_dim);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec row = affine_forward(batch[i].visual, params.proj.weight, params.proj.bias);
        for (std::size_t f = 0; f < config.fused_v_dim; ++f) res.projected.at(i, f) = row[f];
        for (std::size_t f = 0; f < config.t_dim; ++f)
            attended_batch.at(i, f) = res.attended[i][f];
    }

    DenseMatrix bn_visual_out, bn_text_out;
    if (mode == BatchNormMode::train) {
        bn_visual_out = batchnorm_forward(res.projected, *bn_visual_mut, mode,
                                          &res.bn_visual_cache, update_running);
        bn_text_out = batchnorm_forward(attended_batch, *bn_text_mut, mode,
                                        &res.bn_text_cache, update_running);
    } else {
        bn_visual_out = batchnorm_infer(res.projected, params.bn_visual);
        bn_text_out = batchnorm_infer(attended_batch, params.bn_text);
    }

    res.fused_feature.reserve(n);
    res.logits_fused.reserve(n);
    res.logits_visual.reserve(n);
    res.logits_text.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec fc(config.fused_dim());
        for (std::size_t f = 0; f < config.fused_v_dim; ++f) fc[f] = bn_visual_out.at(i, f);
        for (std::size_t f = 0; f < config.t_dim; ++f)
            fc[config.fused_v_dim + f] = bn_text_out.at(i, f);
        res.logits_fused.push_back(
            affine_forward(fc, params.head_fused.weight, params.head_fused.bias));
        res.logits_visual.push_back(affine_forward(batch[i].visual, params.head_visual.weight,
                                                   params.head_visual.bias));
        // The text head reads raw f_a, not its normalized form.
        res.logits_text.push_back(affine_forward(res.attended[i], params.head_text.weight,
                                                 params.head_text.bias));
        res.fused_feature.push_back(std::move(fc));
    }
    return res;
}

}  // namespace

ForwardResult forward_train(ModelParams& params, const ModelConfig& config,
                            std::span<const PreparedSample> batch, Variant variant,
                            bool update_running) {
    return forward_impl(params, config, batch, variant, BatchNormMode::train,
                        update_running, &params.bn_visual, &params.bn_text);
}

ForwardResult forward_infer(const ModelParams& params, const ModelConfig& config,
                            std::span<const PreparedSample> batch, Variant variant) {
    return forward_impl(params, config, batch, variant, BatchNormMode::infer, false,
                        nullptr, nullptr);
}

namespace {

void add_outer(DenseMatrix& acc, const Vec& a, const Vec& b) {
    for (std::size_t r = 0; r < acc.rows; ++r) {
        double* row = acc.row(r);
        const double ar = a[r];
        for (std::size_t c = 0; c < acc.cols; ++c) row[c] += ar * b[c];
    }
}

void add_scaled(Vec& acc, const Vec& v, double scale) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * v[i];
}

Vec mat_t_vec(const DenseMatrix& w, const Vec& u) {
    Vec out(w.cols, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double ur = u[r];
        const double* row = w.row(r);
        for (std::size_t c = 0; c < w.cols; ++c) out[c] += row[c] * ur;
    }
    return out;
}

}  // namespace

LossResult combined_loss(ModelParams& params, const ModelConfig& config,
                         std::span<const PreparedSample> batch,
                         const std::array<double, 3>& beta, Variant variant,
                         bool update_running) {
    LossResult result;
    result.grads = make_params(config);
    result.forward = forward_train(params, config, batch, variant, update_running);
    const ForwardResult& fwd = result.forward;
    const std::size_t n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    ModelParams& g = result.grads;

    if (variant == Variant::visual_only) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto [loss, grad] = softmax_xent(fwd.logits_visual[i], batch[i].label);
            sum += loss;
            Vec gh = grad;
            for (double& v : gh) v *= inv_n;
            add_outer(g.head_visual.weight, gh, batch[i].visual);
            add_scaled(g.head_visual.bias, gh, 1.0);
        }
        result.loss.visual = sum * inv_n;
        result.loss.total = result.loss.visual;
        return result;
    }

    if (variant == Variant::text_only) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t target = text_head_target(batch[i], config.num_classes);
            auto [loss, grad] = softmax_xent(fwd.logits_text[i], target);
            sum += loss;
            Vec gh = grad;
            for (double& v : gh) v *= inv_n;
            add_outer(g.head_text.weight, gh, fwd.attended[i]);
            add_scaled(g.head_text.bias, gh, 1.0);
        }
        result.loss.text = sum * inv_n;
        result.loss.total = result.loss.text;
        return result;
    }

    // Full model (fused or average_pool pooling).
    const double scale_fused = beta[0] * inv_n;
    const double scale_visual = beta[1] * inv_n;
    const double scale_text = beta[2] * inv_n;

    DenseMatrix up_bn_visual(n, config.fused_v_dim);
    DenseMatrix up_bn_text(n, config.t_dim);
    std::vector<Vec> up_attended_direct(n);
    double sum_fused = 0.0, sum_visual = 0.0, sum_text = 0.0;

    for (std::size_t i = 0; i < n; ++i) {
        auto [l1, gl1] = softmax_xent(fwd.logits_fused[i], batch[i].label);
        auto [l2, gl2] = softmax_xent(fwd.logits_visual[i], batch[i].label);
        auto [l3, gl3] = softmax_xent(fwd.logits_text[i],
                                      text_head_target(batch[i], config.num_classes));
        sum_fused += l1;
        sum_visual += l2;
        sum_text += l3;

        for (double& v : gl1) v *= scale_fused;
        add_outer(g.head_fused.weight, gl1, fwd.fused_feature[i]);
        add_scaled(g.head_fused.bias, gl1, 1.0);
        const Vec g_fc = mat_t_vec(params.head_fused.weight, gl1);
        for (std::size_t f = 0; f < config.fused_v_dim; ++f)
            up_bn_visual.at(i, f) = g_fc[f];
        for (std::size_t f = 0; f < config.t_dim; ++f)
            up_bn_text.at(i, f) = g_fc[config.fused_v_dim + f];

        for (double& v : gl2) v *= scale_visual;
        add_outer(g.head_visual.weight, gl2, batch[i].visual);
        add_scaled(g.head_visual.bias, gl2, 1.0);

        for (double& v : gl3) v *= scale_text;
        add_outer(g.head_text.weight, gl3, fwd.attended[i]);
        add_scaled(g.head_text.bias, gl3, 1.0);
        up_attended_direct[i] = mat_t_vec(params.head_text.weight, gl3);
    }

    const BatchNormGrads bnv = batchnorm_backward(up_bn_visual, fwd.bn_visual_cache,
                                                  params.bn_visual);
    const BatchNormGrads bnt = batchnorm_backward(up_bn_text, fwd.bn_text_cache,
                                                  params.bn_text);
    g.bn_visual.gamma = bnv.gamma;
    g.bn_visual.beta = bnv.beta;
    g.bn_text.gamma = bnt.gamma;
    g.bn_text.beta = bnt.beta;

    for (std::size_t i = 0; i < n; ++i) {
        Vec g_proj(config.fused_v_dim);
        for (std::size_t f = 0; f < config.fused_v_dim; ++f)
            g_proj[f] = bnv.batch.at(i, f);
        add_outer(g.proj.weight, g_proj, batch[i].visual);
        add_scaled(g.proj.bias, g_proj, 1.0);

        Vec g_attended = up_attended_direct[i];
        for (std::size_t f = 0; f < config.t_dim; ++f) g_attended[f] += bnt.batch.at(i, f);
        if (variant == Variant::fused) {
            const AttentionGrads ag = attention_backward(g_attended, params.attention,
                                                         batch[i].text,
                                                         fwd.attention_out[i]);
            for (std::size_t k = 0; k < g.attention.u.data.size(); ++k)
                g.attention.u.data[k] += ag.u.data[k];
        }
    }

    result.loss.fused = sum_fused * inv_n;
    result.loss.visual = sum_visual * inv_n;
    result.loss.text = sum_text * inv_n;
    result.loss.total = beta[0] * result.loss.fused + beta[1] * result.loss.visual +
                        beta[2] * result.loss.text;
    return result;
}

namespace {

Vec softmax_scores(const Vec& logits) {
    BoolVec mask(logits.size(), 1);
    return masked_softmax(logits, mask);
}

}  // namespace

std::vector<Prediction> predict(const ModelParams& params, const ModelConfig& config,
                                std::span<const PreparedSample> batch, Variant variant) {
    const ForwardResult fwd = forward_infer(params, config, batch, variant);
    std::vector<Prediction> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Vec scores;
        switch (variant) {
            case Variant::fused:
            case Variant::average_pool:
                scores = softmax_scores(fwd.logits_fused[i]);
                break;
            case Variant::visual_only:
                scores = softmax_scores(fwd.logits_visual[i]);
                break;
            case Variant::text_only:
                // Softmax over K+1 including the no-text class; report the K
                // real classes.
                scores = softmax_scores(fwd.logits_text[i]);
                scores.resize(config.num_classes);
                break;
        }
        std::size_t best = 0;
        for (std::size_t k = 1; k < scores.size(); ++k)
            if (scores[k] > scores[best]) best = k;
        out.push_back({best, std::move(scores)});
    }
    return out;
}

Vec extract_retrieval_feature(const ModelParams& params, const ModelConfig& config,
                              const PreparedSample& sample, Variant variant) {
    const std::span<const PreparedSample> batch(&sample, 1);
    const ForwardResult fwd = forward_infer(params, config, batch, variant);
    switch (variant) {
        case Variant::fused:
        case Variant::average_pool:
            return fwd.fused_feature[0];
        case Variant::visual_only:
            return sample.visual;
        case Variant::text_only:
            return fwd.attended[0];
    }
    throw UsageError("extract_retrieval_feature: unknown variant");
}

}  // namespace textfusion
