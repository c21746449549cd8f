#include "textfusion/fixture.hpp"

#include <cstdio>
#include <sstream>

#include "textfusion/errors.hpp"
#include "textfusion/rng.hpp"

namespace textfusion {

namespace {

const std::vector<std::string> kKeywords = {
    "amber", "basil", "cedar", "dahlia", "ebony",
    "fennel", "garnet", "hazel", "indigo", "juniper",
};

const std::vector<std::vector<std::string>> kExtras = {
    {"arch", "atlas"},   {"brook", "birch"}, {"cliff", "coral"}, {"delta", "dune"},
    {"ember", "elm"},    {"fern", "flint"},  {"grove", "gale"},  {"harbor", "heath"},
    {"isle", "ivory"},   {"jade", "jetty"},
};

// A few everyday tokens for loader and text-feature tests.
const std::vector<std::string> kGenericWords = {
    "cafe", "coffee", "espresso", "bakery", "bread",
    "open", "shop", "store", "fresh", "daily",
};

}  // namespace

const std::vector<std::string>& synth_keywords() { return kKeywords; }

const std::vector<std::string>& synth_extras(std::size_t cls) {
    if (cls >= kExtras.size())
        throw UsageError("synth_extras: class " + std::to_string(cls) + " out of range");
    return kExtras[cls];
}

std::size_t max_synth_classes() { return kKeywords.size(); }

std::string fixture_embedding_text() {
    std::vector<std::string> tokens;
    tokens.reserve(kKeywords.size() + 2 * kExtras.size() + kGenericWords.size());
    for (const auto& w : kKeywords) tokens.push_back(w);
    for (const auto& pair : kExtras)
        for (const auto& w : pair) tokens.push_back(w);
    for (const auto& w : kGenericWords) tokens.push_back(w);

    Rng rng(0x7f1e2d3c4b5a6978ull);
    std::ostringstream os;
    char buf[32];
    for (const std::string& token : tokens) {
        os << token;
        for (std::size_t d = 0; d < kFixtureDim; ++d) {
            std::snprintf(buf, sizeof buf, "%.9g", rng.uniform(-1.0, 1.0));
            os << ' ' << buf;
        }
        os << '\n';
    }
    return os.str();
}

const EmbeddingTable& fixture_embedding_table() {
    static const EmbeddingTable table =
        parse_embeddings(fixture_embedding_text(), kFixtureDim, "<fixture>");
    return table;
}

}  // namespace textfusion
