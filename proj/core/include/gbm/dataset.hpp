#pragma once

#include "gbm/bit_matrix.hpp"
#include "gbm/real_matrix.hpp"

#include <cstdint>
#include <map>
#include <variant>
#include <vector>

namespace gbm {

// Embedding rows plus one class label per row. The payload is either binary
// (bit-packed) or real-valued, matching the two payload kinds of the file
// format in io.hpp.
struct LabeledEmbeddings {
    std::variant<BitMatrix, RealMatrix> data;
    std::vector<std::uint32_t> labels;

    LabeledEmbeddings() : data(BitMatrix()) {}
    LabeledEmbeddings(BitMatrix z, std::vector<std::uint32_t> y);
    LabeledEmbeddings(RealMatrix x, std::vector<std::uint32_t> y);

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const;
    bool is_binary() const { return std::holds_alternative<BitMatrix>(data); }

    // Payload accessors; throw a shape error when the kind does not match.
    const BitMatrix& bits() const;
    const RealMatrix& reals() const;
};

// Rows of each class, keyed by class id. Requires a binary payload.
std::map<std::uint32_t, BitMatrix> split_by_class(const LabeledEmbeddings& ds);

// Subset with only the rows whose label is in `classes` (order preserved).
LabeledEmbeddings filter_by_classes(const LabeledEmbeddings& ds,
                                    const std::vector<std::uint32_t>& classes);

LabeledEmbeddings concat(const LabeledEmbeddings& a, const LabeledEmbeddings& b);

} // namespace gbm
