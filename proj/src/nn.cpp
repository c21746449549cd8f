#include "textfusion/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "textfusion/errors.hpp"

namespace textfusion {

namespace {

std::string shape_str(const DenseMatrix& m) {
    std::ostringstream os;
    os << m.rows << "x" << m.cols;
    return os.str();
}

}  // namespace

Vec affine_forward(const Vec& input, const DenseMatrix& weight, const Vec& bias) {
    if (weight.cols != input.size() || weight.rows != bias.size()) {
        std::ostringstream os;
        os << "affine_forward: weight " << shape_str(weight) << " vs input length "
           << input.size() << ", bias length " << bias.size();
        throw ShapeError(os.str());
    }
    Vec out(weight.rows);
    for (std::size_t r = 0; r < weight.rows; ++r) {
        double acc = bias[r];
        const double* wrow = weight.row(r);
        for (std::size_t c = 0; c < weight.cols; ++c) acc += wrow[c] * input[c];
        out[r] = acc;
    }
    return out;
}

AffineGrads affine_backward(const Vec& upstream, const Vec& input,
                            const DenseMatrix& weight) {
    if (weight.cols != input.size() || weight.rows != upstream.size()) {
        std::ostringstream os;
        os << "affine_backward: weight " << shape_str(weight) << " vs input length "
           << input.size() << ", upstream length " << upstream.size();
        throw ShapeError(os.str());
    }
    AffineGrads g;
    g.weight = DenseMatrix(weight.rows, weight.cols);
    for (std::size_t r = 0; r < weight.rows; ++r)
        for (std::size_t c = 0; c < weight.cols; ++c)
            g.weight.at(r, c) = upstream[r] * input[c];
    g.bias = upstream;
    g.input.assign(weight.cols, 0.0);
    for (std::size_t r = 0; r < weight.rows; ++r) {
        const double* wrow = weight.row(r);
        for (std::size_t c = 0; c < weight.cols; ++c) g.input[c] += wrow[c] * upstream[r];
    }
    return g;
}

Vec masked_softmax(const Vec& logits, const BoolVec& mask) {
    if (logits.size() != mask.size()) {
        std::ostringstream os;
        os << "masked_softmax: logits length " << logits.size() << " vs mask length "
           << mask.size();
        throw ShapeError(os.str());
    }
    Vec out(logits.size(), 0.0);
    double max_logit = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (mask[i]) {
            any = true;
            max_logit = std::max(max_logit, logits[i]);
        }
    }
    if (!any) return out;
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (mask[i]) denom += std::exp(logits[i] - max_logit);
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (mask[i]) out[i] = std::exp(logits[i] - max_logit) / denom;
    return out;
}

std::pair<double, Vec> softmax_xent(const Vec& logits, std::size_t target) {
    if (target >= logits.size()) {
        std::ostringstream os;
        os << "softmax_xent: target " << target << " out of range for " << logits.size()
           << " logits";
        throw IndexError(os.str());
    }
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) denom += std::exp(z - max_logit);
    const double log_denom = std::log(denom);
    const double loss = log_denom - (logits[target] - max_logit);
    Vec grad(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        grad[i] = std::exp(logits[i] - max_logit) / denom;
    grad[target] -= 1.0;
    return {loss, grad};
}

BatchNormState BatchNormState::create(std::size_t features) {
    BatchNormState s;
    s.gamma.assign(features, 1.0);
    s.beta.assign(features, 0.0);
    s.running_mean.assign(features, 0.0);
    s.running_var.assign(features, 1.0);
    return s;
}

DenseMatrix batchnorm_forward(const DenseMatrix& batch, BatchNormState& state,
                              BatchNormMode mode, BatchNormCache* cache,
                              bool update_running) {
    const std::size_t features = state.features();
    if (batch.cols != features) {
        std::ostringstream os;
        os << "batchnorm_forward: batch " << batch.rows << "x" << batch.cols
           << " vs state over " << features << " features";
        throw ShapeError(os.str());
    }
    if (mode == BatchNormMode::infer) return batchnorm_infer(batch, state);
    if (batch.rows < 2)
        throw UsageError("batchnorm_forward: train mode needs at least 2 rows, got " +
                         std::to_string(batch.rows));

    const std::size_t n = batch.rows;
    Vec mean(features, 0.0), var(features, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t f = 0; f < features; ++f) mean[f] += batch.at(r, f);
    for (std::size_t f = 0; f < features; ++f) mean[f] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t f = 0; f < features; ++f) {
            const double d = batch.at(r, f) - mean[f];
            var[f] += d * d;
        }
    for (std::size_t f = 0; f < features; ++f) var[f] /= static_cast<double>(n);

    Vec inv_std(features);
    for (std::size_t f = 0; f < features; ++f)
        inv_std[f] = 1.0 / std::sqrt(var[f] + state.epsilon);

    DenseMatrix xhat(n, features);
    DenseMatrix out(n, features);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t f = 0; f < features; ++f) {
            const double h = (batch.at(r, f) - mean[f]) * inv_std[f];
            xhat.at(r, f) = h;
            out.at(r, f) = state.gamma[f] * h + state.beta[f];
        }

    if (update_running) {
        const double m = state.momentum;
        for (std::size_t f = 0; f < features; ++f) {
            state.running_mean[f] = (1.0 - m) * state.running_mean[f] + m * mean[f];
            state.running_var[f] = (1.0 - m) * state.running_var[f] + m * var[f];
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
        cache->valid = true;
    }
    return out;
}

DenseMatrix batchnorm_infer(const DenseMatrix& batch, const BatchNormState& state) {
    const std::size_t features = state.features();
    if (batch.cols != features) {
        std::ostringstream os;
        os << "batchnorm_infer: batch " << batch.rows << "x" << batch.cols
           << " vs state over " << features << " features";
        throw ShapeError(os.str());
    }
    DenseMatrix out(batch.rows, features);
    for (std::size_t r = 0; r < batch.rows; ++r)
        for (std::size_t f = 0; f < features; ++f) {
            const double h = (batch.at(r, f) - state.running_mean[f]) /
                             std::sqrt(state.running_var[f] + state.epsilon);
            out.at(r, f) = state.gamma[f] * h + state.beta[f];
        }
    return out;
}

BatchNormGrads batchnorm_backward(const DenseMatrix& upstream,
                                  const BatchNormCache& cache,
                                  const BatchNormState& state) {
    if (!cache.valid)
        throw UsageError("batchnorm_backward: forward cache missing (infer-mode or "
                         "cache-less forward call)");
    if (!upstream.same_shape(cache.xhat)) {
        std::ostringstream os;
        os << "batchnorm_backward: upstream " << upstream.rows << "x" << upstream.cols
           << " vs cached forward " << cache.xhat.rows << "x" << cache.xhat.cols;
        throw ShapeError(os.str());
    }
    const std::size_t n = upstream.rows;
    const std::size_t features = upstream.cols;

    BatchNormGrads g;
    g.gamma.assign(features, 0.0);
    g.beta.assign(features, 0.0);
    g.batch = DenseMatrix(n, features);

    // dxhat = upstream * gamma; dx folds in the mean and variance paths:
    // dx = inv_std/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
    Vec sum_dxhat(features, 0.0), sum_dxhat_xhat(features, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t f = 0; f < features; ++f) {
            const double up = upstream.at(r, f);
            const double h = cache.xhat.at(r, f);
            g.beta[f] += up;
            g.gamma[f] += up * h;
            const double dxhat = up * state.gamma[f];
            sum_dxhat[f] += dxhat;
            sum_dxhat_xhat[f] += dxhat * h;
        }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t f = 0; f < features; ++f) {
            const double dxhat = upstream.at(r, f) * state.gamma[f];
            g.batch.at(r, f) =
                cache.inv_std[f] * inv_n *
                (static_cast<double>(n) * dxhat - sum_dxhat[f] -
                 cache.xhat.at(r, f) * sum_dxhat_xhat[f]);
        }
    return g;
}

GradCheckResult gradcheck(const std::function<ValueGrad(const Vec&)>& fn,
                          const Vec& params, double step) {
    if (step <= 0.0) throw UsageError("gradcheck: step must be positive");
    GradCheckResult result;
    const ValueGrad at_params = fn(params);
    if (!std::isfinite(at_params.value)) {
        result.finite = false;
        result.bad_index = 0;
        return result;
    }
    if (at_params.grad.size() != params.size())
        throw ShapeError("gradcheck: analytic gradient length " +
                         std::to_string(at_params.grad.size()) + " vs params length " +
                         std::to_string(params.size()));

    Vec perturbed = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        perturbed[i] = params[i] + step;
        const double plus = fn(perturbed).value;
        perturbed[i] = params[i] - step;
        const double minus = fn(perturbed).value;
        perturbed[i] = params[i];
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            result.finite = false;
            result.bad_index = i;
            return result;
        }
        const double numeric = (plus - minus) / (2.0 * step);
        const double analytic = at_params.grad[i];
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
        const double rel = std::fabs(analytic - numeric) / denom;
        if (rel > result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_index = i;
            result.analytic_at_worst = analytic;
            result.numeric_at_worst = numeric;
        }
    }
    return result;
}

}  // namespace textfusion
