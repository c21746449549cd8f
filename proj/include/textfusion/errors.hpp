#pragma once

#include <stdexcept>
#include <string>

namespace textfusion {

// Dimension mismatch between operands. Messages name both shapes.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed input file. Messages carry the line number where known.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Contract violated by the caller (empty dataset, missing cache, ...).
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

}  // namespace textfusion
