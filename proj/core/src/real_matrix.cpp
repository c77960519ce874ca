#include "gbm/real_matrix.hpp"

#include "gbm/error.hpp"

#include <cstring>

namespace gbm {

RealMatrix select_rows(const RealMatrix& x, const std::vector<std::size_t>& idx) {
    RealMatrix out(idx.size(), x.n_cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::memcpy(out.row(i), x.row(idx[i]), x.n_cols * sizeof(double));
    return out;
}

RealMatrix concat_rows(const RealMatrix& a, const RealMatrix& b) {
    if (a.n_rows == 0) return b;
    if (b.n_rows == 0) return a;
    if (a.n_cols != b.n_cols)
        throw GbmError(ErrorCode::shape, "concat_rows: column counts differ");
    RealMatrix out(a.n_rows + b.n_rows, a.n_cols);
    std::memcpy(out.values.data(), a.values.data(), a.values.size() * sizeof(double));
    std::memcpy(out.values.data() + a.values.size(), b.values.data(),
                b.values.size() * sizeof(double));
    return out;
}

} // namespace gbm
