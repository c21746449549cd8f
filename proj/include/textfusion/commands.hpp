#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "textfusion/model.hpp"

namespace textfusion::cli {

// Flat key=value run configuration ('#' comments allowed). Unknown keys are
// rejected once the consumer has read everything it understands.
class KeyValueConfig {
public:
    static KeyValueConfig load(const std::string& path);
    static KeyValueConfig parse(const std::string& text,
                                const std::string& origin = "<string>");

    std::string get_string(const std::string& key, const std::string& fallback);
    std::string require_string(const std::string& key);
    double get_double(const std::string& key, double fallback);
    std::size_t get_count(const std::string& key, std::size_t fallback);
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);

    // Throws if any key was never read.
    void reject_unknown() const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> consumed_;
    std::string origin_;
};

struct SynthOptions {
    std::string kind;  // overfit | text_only | noisy
    std::size_t k = 3;
    std::size_t per_class = 20;
    std::size_t v_dim = 16;
    std::size_t noise = 3;  // noisy only
    std::uint64_t seed = 0;
    std::string out;
    std::string embeddings_out;  // optional: materialize the fixture table
    std::string sidecar;         // optional: write visuals to a float32 sidecar
};

struct TrainOptions {
    std::string config_path;
};

struct EvalOptions {
    std::string checkpoint;
    std::string manifest;
    std::string embeddings;  // path or "fixture"
    std::string split = "test";
    std::string report_dir;
};

struct RetrieveOptions {
    std::string checkpoint;
    std::string manifest;
    std::string embeddings;
    std::string report_dir;
};

struct GradcheckOptions {
    std::uint64_t seed = 0;
    std::size_t v_dim = 12;
    std::size_t t_dim = 8;
    std::size_t fused_v_dim = 6;
    std::size_t num_classes = 3;
    std::size_t n_max = 3;
    std::size_t batch = 4;
    double step = 1e-5;
    double tolerance = 1e-4;
    bool corrupt = false;  // testing hook: perturb one analytic gradient
};

// Each command returns a process exit code: 0 on success, nonzero on any
// validation failure. Output files are written via write-then-rename, so a
// failed run leaves no partial file behind.
int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);
int cmd_retrieve(const RetrieveOptions& options, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const GradcheckOptions& options, std::ostream& out, std::ostream& err);

// Shared by cmd_gradcheck and the acceptance suite: max relative error of the
// analytic gradient of the combined loss over every trainable tensor, on a
// seeded random micro-batch (one sample is text-free).
struct ModelGradcheck {
    double max_rel_error = 0.0;
    std::string worst_coordinate;
    bool finite = true;
};

ModelGradcheck run_model_gradcheck(const GradcheckOptions& options);

}  // namespace textfusion::cli
