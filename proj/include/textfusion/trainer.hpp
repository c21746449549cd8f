#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "textfusion/checkpoint.hpp"
#include "textfusion/dataio.hpp"
#include "textfusion/embeddings.hpp"
#include "textfusion/model.hpp"

namespace textfusion {

struct TrainConfig {
    std::size_t batch_size = 64;
    double base_lr = 0.01;
    std::size_t lr_drop_start = 7000;   // iterations at base_lr
    std::size_t lr_drop_period = 10000; // then divide every this many
    double lr_drop_factor = 10.0;
    std::size_t max_iters = 30000;
    double momentum = 0.9;
    double weight_decay = 0.0001;
    std::array<double, 3> beta{1.0, 0.5, 0.5};
    std::uint64_t seed = 0;

    void validate() const;
};

// base_lr until lr_drop_start, then divided by lr_drop_factor once plus once
// more per elapsed lr_drop_period. Non-increasing in iter.
double lr_at(std::size_t iter, const TrainConfig& config);

// Velocity buffers mirroring the trainable tensors, in param_views order.
struct OptimizerState {
    std::vector<Vec> velocity;
    std::size_t iteration = 0;

    static OptimizerState create(ModelParams& params);
};

// v <- momentum * v - lr * (g + weight_decay * p); p <- p + v.
// Biases and batch-norm scale/shift are exempt from weight decay.
void sgd_step(ModelParams& params, ModelParams& grads, OptimizerState& state,
              double lr, const TrainConfig& config);

struct LossHistoryRow {
    std::size_t iter = 0;
    double lr = 0.0;
    double total = 0.0;
    double fused = 0.0;
    double visual = 0.0;
    double text = 0.0;
};

std::string loss_history_csv(const std::vector<LossHistoryRow>& history);

struct TrainResult {
    Model model;
    std::vector<LossHistoryRow> history;
};

// Builds text features against `table`, initializes from model_config.seed,
// and runs max_iters SGD steps over seeded epoch reshuffles of the training
// split (short datasets are upsampled by reshuffled repetition). Identical
// configs, dataset and seed give bit-identical parameters.
TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const DatasetManifest& dataset, const EmbeddingTable& table,
                  Variant variant);

// The per-sample inputs the model consumes, built once per run.
std::vector<PreparedSample> prepare_samples(const std::vector<const Sample*>& samples,
                                            const EmbeddingTable& table,
                                            std::size_t n_max,
                                            TextBuildStats* stats = nullptr);

}  // namespace textfusion
