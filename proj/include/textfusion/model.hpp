#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "textfusion/attention.hpp"
#include "textfusion/matrix.hpp"
#include "textfusion/nn.hpp"
#include "textfusion/textrep.hpp"

namespace textfusion {

struct ModelConfig {
    std::size_t v_dim = 1024;
    std::size_t t_dim = 300;
    std::size_t fused_v_dim = 512;
    std::size_t num_classes = 0;
    std::array<double, 3> beta{1.0, 0.5, 0.5};  // fused, visual, text loss weights
    std::uint64_t seed = 0;

    std::size_t fused_dim() const { return fused_v_dim + t_dim; }
    void validate() const;
};

struct Affine {
    DenseMatrix weight;
    Vec bias;
};

// Everything trainable, plus the batch-norm running statistics.
struct ModelParams {
    AttentionParams attention;  // v_dim x t_dim
    Affine proj;                // v_dim -> fused_v_dim
    BatchNormState bn_visual;   // over fused_v_dim
    BatchNormState bn_text;     // over t_dim
    Affine head_fused;          // fused_v_dim + t_dim -> K
    Affine head_visual;         // v_dim -> K
    Affine head_text;           // t_dim -> K+1, class K = "no recognized text"
};

// Zero-filled tensors with the configured shapes (gradient accumulators).
ModelParams make_params(const ModelConfig& config);

// Seeded initialization: weight matrices uniform in +-sqrt(6/(fan_in+fan_out)),
// biases zero, batch-norm at identity.
ModelParams init_params(const ModelConfig& config);

// Stable, named iteration over the trainable tensors. The optimizer, the
// checkpoint writer, and gradient packing all share this order. `decay` is
// false for biases and batch-norm scale/shift, which are exempt from weight
// decay.
struct ParamView {
    std::string name;
    double* data;
    std::size_t size;
    bool decay;
};

std::vector<ParamView> param_views(ModelParams& params);

Vec pack_params(ModelParams& params);
void unpack_params(ModelParams& params, const Vec& flat);

// Maps a flat coordinate (pack_params order) to "tensor_name[offset]".
std::string describe_param_coordinate(ModelParams& params, std::size_t flat_index);

enum class Variant { fused, visual_only, text_only, average_pool };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

// A sample with its text feature already built against an embedding table.
struct PreparedSample {
    std::string id;
    std::size_t label = 0;
    Vec visual;
    TextFeature text;
};

// Head-3 target: the extra class K for samples with no retained word,
// otherwise the sample label.
std::size_t text_head_target(const PreparedSample& sample, std::size_t num_classes);

struct ForwardResult {
    // Per-sample outputs.
    std::vector<Vec> logits_fused;
    std::vector<Vec> logits_visual;
    std::vector<Vec> logits_text;
    std::vector<Vec> fused_feature;      // f_c = [bn(f_v'), bn(f_a)]
    std::vector<Vec> pooling_weights;    // attention (or uniform) word weights
    std::vector<Vec> attended;           // f_a, pre batch-norm

    // Backward caches.
    DenseMatrix projected;               // batch x fused_v_dim, pre batch-norm
    std::vector<AttentionOutput> attention_out;
    BatchNormCache bn_visual_cache;
    BatchNormCache bn_text_cache;
    BatchNormMode mode = BatchNormMode::infer;
};

// Train-mode forward; uses batch statistics (batch must have >= 2 samples) and
// updates the running stats unless suppressed.
ForwardResult forward_train(ModelParams& params, const ModelConfig& config,
                            std::span<const PreparedSample> batch, Variant variant,
                            bool update_running = true);

// Infer-mode forward against the running statistics; any batch size >= 1.
ForwardResult forward_infer(const ModelParams& params, const ModelConfig& config,
                            std::span<const PreparedSample> batch, Variant variant);

struct LossBreakdown {
    double total = 0.0;
    double fused = 0.0;   // mean over the batch, unweighted
    double visual = 0.0;
    double text = 0.0;
};

struct LossResult {
    LossBreakdown loss;
    ModelParams grads;
    ForwardResult forward;
};

// total = beta_1 * mean(L_fused) + beta_2 * mean(L_visual) + beta_3 * mean(L_text)
// with gradients for every trainable tensor. Variants visual_only/text_only
// reduce to their single head (beta ignored).
LossResult combined_loss(ModelParams& params, const ModelConfig& config,
                         std::span<const PreparedSample> batch,
                         const std::array<double, 3>& beta, Variant variant,
                         bool update_running = true);

struct Prediction {
    std::size_t cls = 0;
    Vec scores;  // K softmax scores; ties resolved to the lowest index
};

std::vector<Prediction> predict(const ModelParams& params, const ModelConfig& config,
                                std::span<const PreparedSample> batch, Variant variant);

// The input vector of the fused classifier (f_c), the product feature used
// for retrieval. Computed in infer mode.
Vec extract_retrieval_feature(const ModelParams& params, const ModelConfig& config,
                              const PreparedSample& sample, Variant variant);

}  // namespace textfusion
