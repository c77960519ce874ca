#include "gbm/bit_matrix.hpp"

#include "gbm/error.hpp"

#include <cstring>
#include <string>

namespace gbm {

BitMatrix::BitMatrix(std::size_t n_rows, std::size_t n_cols)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      words_per_row_((n_cols + 63) / 64),
      words_(n_rows * words_per_row_, 0ull) {}

std::vector<std::uint8_t> BitMatrix::row(std::size_t i) const {
    std::vector<std::uint8_t> out(n_cols_);
    for (std::size_t j = 0; j < n_cols_; ++j) out[j] = get(i, j) ? 1 : 0;
    return out;
}

void BitMatrix::copy_row_from(const BitMatrix& from, std::size_t src, std::size_t dst) {
    if (from.n_cols_ != n_cols_)
        throw GbmError(ErrorCode::shape, "copy_row_from: column counts differ");
    std::memcpy(words_.data() + dst * words_per_row_,
                from.words_.data() + src * from.words_per_row_,
                words_per_row_ * sizeof(std::uint64_t));
}

BitMatrix pack_rows(const std::vector<std::vector<std::uint8_t>>& rows) {
    if (rows.empty()) return BitMatrix();
    std::size_t d = rows[0].size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d)
            throw GbmError(ErrorCode::shape,
                           "pack_rows: row " + std::to_string(i) + " has " +
                               std::to_string(rows[i].size()) + " entries, expected " +
                               std::to_string(d));
    }
    BitMatrix z(rows.size(), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (rows[i][j]) z.set(i, j, true);
    return z;
}

std::vector<double> column_means(const BitMatrix& z) {
    if (z.rows() == 0)
        throw GbmError(ErrorCode::empty_input, "column_means needs at least one row");
    // Counts are integers, so the sums are exact regardless of row order.
    std::vector<std::uint64_t> counts(z.cols(), 0);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const std::uint64_t* w = z.row_words(i);
        for (std::size_t wi = 0; wi < z.words_per_row(); ++wi) {
            std::uint64_t bits = w[wi];
            while (bits) {
                unsigned b = static_cast<unsigned>(__builtin_ctzll(bits));
                counts[wi * 64 + b] += 1;
                bits &= bits - 1;
            }
        }
    }
    std::vector<double> means(z.cols());
    for (std::size_t j = 0; j < z.cols(); ++j)
        means[j] = static_cast<double>(counts[j]) / static_cast<double>(z.rows());
    return means;
}

BitMatrix select_rows(const BitMatrix& z, const std::vector<std::size_t>& idx) {
    BitMatrix out(idx.size(), z.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.copy_row_from(z, idx[i], i);
    return out;
}

BitMatrix concat_rows(const BitMatrix& a, const BitMatrix& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    if (a.cols() != b.cols())
        throw GbmError(ErrorCode::shape, "concat_rows: column counts differ");
    BitMatrix out(a.rows() + b.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) out.copy_row_from(a, i, i);
    for (std::size_t i = 0; i < b.rows(); ++i) out.copy_row_from(b, i, a.rows() + i);
    return out;
}

} // namespace gbm
