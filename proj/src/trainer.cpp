#include "textfusion/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "textfusion/errors.hpp"
#include "textfusion/rng.hpp"

namespace textfusion {

void TrainConfig::validate() const {
    if (batch_size < 2)
        throw UsageError("TrainConfig: batch_size must be at least 2 (batch-norm "
                         "contract), got " + std::to_string(batch_size));
    if (!(base_lr > 0.0) || !(lr_drop_factor > 0.0))
        throw UsageError("TrainConfig: rates must be positive");
    if (lr_drop_period < 1) throw UsageError("TrainConfig: lr_drop_period must be >= 1");
    if (max_iters < 1) throw UsageError("TrainConfig: max_iters must be >= 1");
    if (!(momentum >= 0.0) || !(weight_decay >= 0.0))
        throw UsageError("TrainConfig: momentum and weight_decay must be >= 0");
    for (double b : beta)
        if (!(b >= 0.0)) throw UsageError("TrainConfig: beta entries must be >= 0");
}

double lr_at(std::size_t iter, const TrainConfig& config) {
    if (iter < config.lr_drop_start) return config.base_lr;
    const std::size_t drops = 1 + (iter - config.lr_drop_start) / config.lr_drop_period;
    return config.base_lr / std::pow(config.lr_drop_factor, static_cast<double>(drops));
}

OptimizerState OptimizerState::create(ModelParams& params) {
    OptimizerState state;
    for (const ParamView& view : param_views(params))
        state.velocity.emplace_back(view.size, 0.0);
    return state;
}

void sgd_step(ModelParams& params, ModelParams& grads, OptimizerState& state,
              double lr, const TrainConfig& config) {
    const std::vector<ParamView> pviews = param_views(params);
    const std::vector<ParamView> gviews = param_views(grads);
    if (state.velocity.size() != pviews.size())
        throw ShapeError("sgd_step: optimizer state does not match parameter layout");
    for (std::size_t t = 0; t < pviews.size(); ++t) {
        const ParamView& pv = pviews[t];
        const ParamView& gv = gviews[t];
        Vec& velocity = state.velocity[t];
        if (gv.size != pv.size || velocity.size() != pv.size)
            throw ShapeError("sgd_step: tensor '" + pv.name + "' size mismatch");
        const double decay = pv.decay ? config.weight_decay : 0.0;
        for (std::size_t i = 0; i < pv.size; ++i) {
            const double g = gv.data[i] + decay * pv.data[i];
            velocity[i] = config.momentum * velocity[i] - lr * g;
            pv.data[i] += velocity[i];
        }
    }
    ++state.iteration;
}

std::string loss_history_csv(const std::vector<LossHistoryRow>& history) {
    std::ostringstream os;
    os << "iteration,lr,L,L1,L2,L3\n";
    char buf[160];
    for (const LossHistoryRow& row : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.iter,
                      row.lr, row.total, row.fused, row.visual, row.text);
        os << buf;
    }
    return os.str();
}

std::vector<PreparedSample> prepare_samples(const std::vector<const Sample*>& samples,
                                            const EmbeddingTable& table,
                                            std::size_t n_max, TextBuildStats* stats) {
    std::vector<PreparedSample> prepared;
    prepared.reserve(samples.size());
    for (const Sample* s : samples) {
        PreparedSample p;
        p.id = s->id;
        p.label = s->label;
        p.visual = s->visual;
        p.text = build_text_feature(s->words, table, n_max, stats);
        prepared.push_back(std::move(p));
    }
    return prepared;
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& train_config,
                  const DatasetManifest& dataset, const EmbeddingTable& table,
                  Variant variant) {
    model_config.validate();
    train_config.validate();
    if (dataset.samples.empty()) throw UsageError("train: empty dataset");
    const std::vector<const Sample*> train_split = dataset.split_samples(Split::train);
    if (train_split.empty()) throw UsageError("train: no samples in the train split");

    std::size_t n_max;
    if (dataset.n_max) {
        n_max = *dataset.n_max;
    } else {
        std::vector<std::vector<SpottedWord>> words;
        words.reserve(train_split.size());
        for (const Sample* s : train_split) words.push_back(s->words);
        n_max = compute_nmax(words, table);
    }

    const std::vector<PreparedSample> prepared =
        prepare_samples(train_split, table, n_max);

    TrainResult result;
    result.model.config = model_config;
    result.model.variant = variant;
    result.model.n_max = n_max;
    result.model.params = init_params(model_config);

    OptimizerState opt = OptimizerState::create(result.model.params);
    Rng shuffle_rng(mix_seed(train_config.seed, 21));

    // Epoch stream: a reshuffled pass over the training indices, repeated as
    // needed, so batches are full even when the dataset is smaller than
    // batch_size.
    std::vector<std::size_t> order(prepared.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // force a shuffle before the first batch

    std::vector<PreparedSample> batch;
    result.history.reserve(train_config.max_iters);
    for (std::size_t iter = 0; iter < train_config.max_iters; ++iter) {
        batch.clear();
        while (batch.size() < train_config.batch_size) {
            if (cursor == order.size()) {
                shuffle_rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(prepared[order[cursor]]);
            ++cursor;
        }
        const double lr = lr_at(iter, train_config);
        LossResult step = combined_loss(result.model.params, model_config, batch,
                                        train_config.beta, variant, true);
        sgd_step(result.model.params, step.grads, opt, lr, train_config);
        result.history.push_back({iter, lr, step.loss.total, step.loss.fused,
                                  step.loss.visual, step.loss.text});
    }
    return result;
}

}  // namespace textfusion
