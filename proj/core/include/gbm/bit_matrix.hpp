#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gbm {

// Dense binary matrix. Rows are packed into 64-bit words, least significant
// bit first, each row starting on a fresh word; padding bits in the last word
// of a row are always zero, so whole-word equality and popcounts are valid.
class BitMatrix {
public:
    BitMatrix() = default;
    BitMatrix(std::size_t n_rows, std::size_t n_cols);

    std::size_t rows() const { return n_rows_; }
    std::size_t cols() const { return n_cols_; }
    std::size_t words_per_row() const { return words_per_row_; }

    bool get(std::size_t i, std::size_t j) const {
        return (words_[i * words_per_row_ + (j >> 6)] >> (j & 63)) & 1ull;
    }

    void set(std::size_t i, std::size_t j, bool v) {
        std::uint64_t& w = words_[i * words_per_row_ + (j >> 6)];
        std::uint64_t mask = 1ull << (j & 63);
        if (v) w |= mask; else w &= ~mask;
    }

    std::uint64_t word(std::size_t i, std::size_t w) const {
        return words_[i * words_per_row_ + w];
    }

    const std::uint64_t* row_words(std::size_t i) const {
        return words_.data() + i * words_per_row_;
    }

    std::vector<std::uint8_t> row(std::size_t i) const;

    // Copies row `src` of `from` into row `dst` of this matrix (widths must match).
    void copy_row_from(const BitMatrix& from, std::size_t src, std::size_t dst);

    bool operator==(const BitMatrix& other) const = default;

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::size_t words_per_row_ = 0;
    std::vector<std::uint64_t> words_;
};

// Packs 0/1 rows. All rows must have equal length (shape error otherwise);
// an empty list yields a 0 x 0 matrix.
BitMatrix pack_rows(const std::vector<std::vector<std::uint8_t>>& rows);

// Per-column mean of a non-empty matrix (empty-input error otherwise).
std::vector<double> column_means(const BitMatrix& z);

// New matrix made of the given rows, in the given order.
BitMatrix select_rows(const BitMatrix& z, const std::vector<std::size_t>& idx);

// Rows of `a` followed by rows of `b` (widths must match).
BitMatrix concat_rows(const BitMatrix& a, const BitMatrix& b);

} // namespace gbm
