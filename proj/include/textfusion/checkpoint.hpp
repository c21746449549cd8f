#pragma once

#include <string>

#include "textfusion/model.hpp"

namespace textfusion {

// A trained model: configuration, the variant it was trained as, the text
// feature width it was trained with, and every tensor including batch-norm
// running statistics.
struct Model {
    ModelConfig config;
    Variant variant = Variant::fused;
    std::size_t n_max = 1;
    ModelParams params;
};

// Structured-text checkpoint with hexadecimal float values; write-then-read
// reproduces every tensor bit-exactly.
std::string checkpoint_text(const Model& model);
void save_checkpoint(const Model& model, const std::string& path);
Model parse_checkpoint(const std::string& text, const std::string& origin = "<string>");
Model load_checkpoint(const std::string& path);

// Writes to `path + ".tmp"` and renames into place, so failures never leave a
// partial file at `path`.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace textfusion
