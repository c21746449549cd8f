#pragma once

#include <cstddef>
#include <functional>
#include <utility>

#include "textfusion/matrix.hpp"

namespace textfusion {

// out = weight * input + bias
Vec affine_forward(const Vec& input, const DenseMatrix& weight, const Vec& bias);

struct AffineGrads {
    DenseMatrix weight;  // outer(upstream, input)
    Vec bias;            // upstream
    Vec input;           // weight^T * upstream
};

AffineGrads affine_backward(const Vec& upstream, const Vec& input,
                            const DenseMatrix& weight);

// Softmax over the entries whose mask is true; masked-out entries get exactly
// zero. An all-false mask yields the all-zero vector (samples without any
// retained word are legal inputs downstream). Max-shifted for stability.
Vec masked_softmax(const Vec& logits, const BoolVec& mask);

// loss = -log softmax(logits)[target], grad = softmax(logits) - onehot(target)
std::pair<double, Vec> softmax_xent(const Vec& logits, std::size_t target);

enum class BatchNormMode { train, infer };

struct BatchNormState {
    Vec gamma;
    Vec beta;
    Vec running_mean;
    Vec running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;

    static BatchNormState create(std::size_t features);
    std::size_t features() const { return gamma.size(); }
};

struct BatchNormCache {
    DenseMatrix xhat;
    Vec inv_std;
    bool valid = false;
};

// Train mode standardizes with batch statistics (biased variance) and, unless
// suppressed, folds them into the running stats:
//   running <- (1 - momentum) * running + momentum * batch_stat
// Infer mode standardizes with the running stats. Train mode requires at
// least two rows. Rows are samples, columns are features.
DenseMatrix batchnorm_forward(const DenseMatrix& batch, BatchNormState& state,
                              BatchNormMode mode, BatchNormCache* cache = nullptr,
                              bool update_running = true);

// Infer-mode forward against read-only state.
DenseMatrix batchnorm_infer(const DenseMatrix& batch, const BatchNormState& state);

struct BatchNormGrads {
    DenseMatrix batch;
    Vec gamma;
    Vec beta;
};

// Gradient of the train-mode forward, including the coupling through the
// batch mean and variance.
BatchNormGrads batchnorm_backward(const DenseMatrix& upstream,
                                  const BatchNormCache& cache,
                                  const BatchNormState& state);

struct ValueGrad {
    double value = 0.0;
    Vec grad;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    // false if some loss evaluation came back non-finite; bad_index is the
    // coordinate whose perturbation triggered it.
    bool finite = true;
    std::size_t bad_index = 0;

    bool passed(double tolerance) const { return finite && max_rel_error < tolerance; }
};

// Central-difference check of fn's analytic gradient at params. Per
// coordinate the error is |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8). fn must be pure.
GradCheckResult gradcheck(const std::function<ValueGrad(const Vec&)>& fn,
                          const Vec& params, double step);

}  // namespace textfusion
