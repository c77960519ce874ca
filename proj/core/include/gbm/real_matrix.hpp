#pragma once

#include <cstddef>
#include <vector>

namespace gbm {

// Dense row-major matrix of doubles.
struct RealMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values; // n_rows * n_cols, row-major

    RealMatrix() = default;
    RealMatrix(std::size_t rows, std::size_t cols)
        : n_rows(rows), n_cols(cols), values(rows * cols, 0.0) {}

    double at(std::size_t i, std::size_t j) const { return values[i * n_cols + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * n_cols + j]; }

    const double* row(std::size_t i) const { return values.data() + i * n_cols; }
    double* row(std::size_t i) { return values.data() + i * n_cols; }

    bool operator==(const RealMatrix& other) const = default;
};

RealMatrix select_rows(const RealMatrix& x, const std::vector<std::size_t>& idx);
RealMatrix concat_rows(const RealMatrix& a, const RealMatrix& b);

// Compensated (Kahan) accumulator. Used wherever a sum feeds a quantity with
// a tight tolerance, so the result does not depend on accumulation order at
// more than a couple of ulps.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double y = x - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }

    double value() const { return sum; }
};

} // namespace gbm
