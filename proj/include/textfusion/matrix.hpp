#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace textfusion {

using Vec = std::vector<double>;
using BoolVec = std::vector<std::uint8_t>;

// Row-major dense matrix of doubles. Every weight matrix and batch in the
// project lives in one of these; shape checks happen at operation boundaries.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    DenseMatrix(std::size_t r, std::size_t c, Vec values)
        : rows(r), cols(c), data(std::move(values)) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    Vec column(std::size_t c) const {
        Vec out(rows);
        for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
        return out;
    }

    bool same_shape(const DenseMatrix& other) const {
        return rows == other.rows && cols == other.cols;
    }

    bool operator==(const DenseMatrix& other) const = default;
};

}  // namespace textfusion
