#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "textfusion/matrix.hpp"

namespace textfusion {

// Pretrained word-embedding table. Tokens are stored lowercase; vectors all
// share one dimension. Immutable after load, safe for concurrent lookup.
struct EmbeddingTable {
    std::size_t dim = 0;
    std::unordered_map<std::string, Vec> entries;

    std::size_t size() const { return entries.size(); }
};

// Trim surrounding whitespace and lowercase. OCR output is typically
// uppercase while embedding tokens are lowercase, so lookups fold case.
std::string normalize_token(std::string_view token);

// Text format: one entry per line, `token v1 v2 ... vd`, d constant across
// lines, no header. Duplicate tokens: last occurrence wins.
EmbeddingTable load_embeddings(const std::string& path,
                               std::optional<std::size_t> expected_dim = std::nullopt);

// Parse from an in-memory string (same format); `origin` names the source in
// error messages.
EmbeddingTable parse_embeddings(std::string_view text,
                                std::optional<std::size_t> expected_dim = std::nullopt,
                                const std::string& origin = "<string>");

// Case-folded, trimmed lookup. Absence is a value, not an error.
const Vec* lookup(const EmbeddingTable& table, std::string_view token);

}  // namespace textfusion
