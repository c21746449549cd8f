#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "textfusion/embeddings.hpp"

namespace textfusion {

// Tiny bundled embedding table (dim 10) used by the synthetic datasets and
// the test suite. The canonical content is generated here; the copy under
// data/ is written from this text.

// One keyword per synthetic class, in class order.
const std::vector<std::string>& synth_keywords();

// Two non-keyword words associated with each class.
const std::vector<std::string>& synth_extras(std::size_t cls);

std::size_t max_synth_classes();

std::string fixture_embedding_text();
const EmbeddingTable& fixture_embedding_table();

constexpr std::size_t kFixtureDim = 10;

}  // namespace textfusion
