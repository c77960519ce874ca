#include "gbm/dataset.hpp"

#include "gbm/error.hpp"

#include <string>
#include <unordered_set>

namespace gbm {

LabeledEmbeddings::LabeledEmbeddings(BitMatrix z, std::vector<std::uint32_t> y)
    : data(std::move(z)), labels(std::move(y)) {
    if (std::get<BitMatrix>(data).rows() != labels.size())
        throw GbmError(ErrorCode::shape, "label count does not match row count");
}

LabeledEmbeddings::LabeledEmbeddings(RealMatrix x, std::vector<std::uint32_t> y)
    : data(std::move(x)), labels(std::move(y)) {
    if (std::get<RealMatrix>(data).n_rows != labels.size())
        throw GbmError(ErrorCode::shape, "label count does not match row count");
}

std::size_t LabeledEmbeddings::dim() const {
    return is_binary() ? bits().cols() : reals().n_cols;
}

const BitMatrix& LabeledEmbeddings::bits() const {
    if (!is_binary())
        throw GbmError(ErrorCode::shape, "dataset holds real-valued rows, expected binary");
    return std::get<BitMatrix>(data);
}

const RealMatrix& LabeledEmbeddings::reals() const {
    if (is_binary())
        throw GbmError(ErrorCode::shape, "dataset holds binary rows, expected real-valued");
    return std::get<RealMatrix>(data);
}

std::map<std::uint32_t, BitMatrix> split_by_class(const LabeledEmbeddings& ds) {
    const BitMatrix& z = ds.bits();
    std::map<std::uint32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) by_class[ds.labels[i]].push_back(i);
    std::map<std::uint32_t, BitMatrix> out;
    for (const auto& [c, idx] : by_class) out.emplace(c, select_rows(z, idx));
    return out;
}

LabeledEmbeddings filter_by_classes(const LabeledEmbeddings& ds,
                                    const std::vector<std::uint32_t>& classes) {
    std::unordered_set<std::uint32_t> keep(classes.begin(), classes.end());
    std::vector<std::size_t> idx;
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (keep.count(ds.labels[i])) {
            idx.push_back(i);
            labels.push_back(ds.labels[i]);
        }
    }
    if (ds.is_binary()) return LabeledEmbeddings(select_rows(ds.bits(), idx), std::move(labels));
    return LabeledEmbeddings(select_rows(ds.reals(), idx), std::move(labels));
}

LabeledEmbeddings concat(const LabeledEmbeddings& a, const LabeledEmbeddings& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    if (a.is_binary() != b.is_binary())
        throw GbmError(ErrorCode::shape, "concat: payload kinds differ");
    std::vector<std::uint32_t> labels = a.labels;
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
    if (a.is_binary())
        return LabeledEmbeddings(concat_rows(a.bits(), b.bits()), std::move(labels));
    return LabeledEmbeddings(concat_rows(a.reals(), b.reals()), std::move(labels));
}

} // namespace gbm
