#include "gbm/io.hpp"

#include "gbm/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace gbm {

namespace {

struct ByteWriter {
    std::vector<std::uint8_t> buf;

    void u8(std::uint8_t v) { buf.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const std::uint8_t* p, std::size_t n) { buf.insert(buf.end(), p, p + n); }
};

struct ByteReader {
    const std::uint8_t* p;
    std::size_t n;
    std::size_t pos = 0;

    void need(std::size_t k, const char* what) {
        if (pos + k > n)
            throw GbmError(ErrorCode::truncated,
                           std::string("file ends inside ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return p[pos++];
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    const std::uint8_t* raw(std::size_t k, const char* what) {
        need(k, what);
        const std::uint8_t* out = p + pos;
        pos += k;
        return out;
    }
    bool eof() const { return pos == n; }
};

void expect_magic(ByteReader& r, const char* magic, const char* format) {
    const std::uint8_t* m = r.raw(4, "magic");
    if (std::memcmp(m, magic, 4) != 0)
        throw GbmError(ErrorCode::parse, std::string("not a ") + format + " file (bad magic)");
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GbmError(ErrorCode::io, "cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw GbmError(ErrorCode::io, "cannot read " + path);
    return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw GbmError(ErrorCode::io, "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw GbmError(ErrorCode::io, "cannot write " + path);
}

// Bit-packed embedding rows: each row padded to a whole byte, LSB first.
void write_packed_rows(ByteWriter& w, const BitMatrix& z) {
    std::size_t bytes_per_row = (z.cols() + 7) / 8;
    std::vector<std::uint8_t> row(bytes_per_row);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        std::fill(row.begin(), row.end(), 0);
        for (std::size_t j = 0; j < z.cols(); ++j)
            if (z.get(i, j)) row[j >> 3] |= static_cast<std::uint8_t>(1u << (j & 7));
        w.bytes(row.data(), row.size());
    }
}

BitMatrix read_packed_rows(ByteReader& r, std::size_t n, std::size_t d) {
    std::size_t bytes_per_row = (d + 7) / 8;
    BitMatrix z(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* row = r.raw(bytes_per_row, "bit-packed payload");
        for (std::size_t j = 0; j < d; ++j)
            if ((row[j >> 3] >> (j & 7)) & 1u) z.set(i, j, true);
        // padding must be zero
        for (std::size_t j = d; j < bytes_per_row * 8; ++j)
            if ((row[j >> 3] >> (j & 7)) & 1u)
                throw GbmError(ErrorCode::parse, "nonzero padding bits in row " +
                                                     std::to_string(i));
    }
    return z;
}

void expect_eof(ByteReader& r) {
    if (!r.eof()) throw GbmError(ErrorCode::parse, "trailing bytes after payload");
}

void append_model(ByteWriter& w, const ModelVariant& model) {
    if (std::holds_alternative<BmmParams>(model)) {
        const BmmParams& m = std::get<BmmParams>(model);
        w.bytes(reinterpret_cast<const std::uint8_t*>("GBMM"), 4);
        w.u32(static_cast<std::uint32_t>(m.k));
        w.u32(static_cast<std::uint32_t>(m.d));
        w.u8(0);
        for (double v : m.pi) w.f64(v);
        for (double v : m.mu) w.f64(v);
    } else {
        const QuantizedBmm& m = std::get<QuantizedBmm>(model);
        if (m.q < 1 || m.q > 32)
            throw GbmError(ErrorCode::parameter, "quantized model needs q in [1, 32]");
        w.bytes(reinterpret_cast<const std::uint8_t*>("GBMM"), 4);
        w.u32(static_cast<std::uint32_t>(m.k));
        w.u32(static_cast<std::uint32_t>(m.d));
        w.u8(static_cast<std::uint8_t>(m.q));
        for (double v : m.pi) w.f64(v);
        std::size_t total_bits = m.levels.size() * m.q;
        std::vector<std::uint8_t> packed((total_bits + 7) / 8, 0);
        std::size_t bitpos = 0;
        for (std::uint32_t level : m.levels) {
            for (std::uint32_t b = 0; b < m.q; ++b, ++bitpos)
                if ((level >> b) & 1u)
                    packed[bitpos >> 3] |= static_cast<std::uint8_t>(1u << (bitpos & 7));
        }
        w.bytes(packed.data(), packed.size());
    }
}

ModelVariant parse_model(ByteReader& r) {
    expect_magic(r, "GBMM", "mixture model");
    std::uint32_t k = r.u32("component count");
    std::uint32_t d = r.u32("dimension");
    std::uint8_t q = r.u8("precision");
    if (k == 0) throw GbmError(ErrorCode::parse, "model has zero components");
    if (d == 0) throw GbmError(ErrorCode::parse, "model has zero dimensions");
    if (q > 32) throw GbmError(ErrorCode::parse, "model precision above 32 bits");
    std::vector<double> pi(k);
    for (std::uint32_t c = 0; c < k; ++c) {
        pi[c] = r.f64("mixing weights");
        if (!std::isfinite(pi[c]) || pi[c] < 0.0)
            throw GbmError(ErrorCode::parse, "mixing weights must be finite and non-negative");
    }
    if (q == 0) {
        BmmParams m(k, d);
        m.pi = std::move(pi);
        for (std::size_t i = 0; i < m.mu.size(); ++i) {
            m.mu[i] = r.f64("probabilities");
            if (!(m.mu[i] >= 0.0 && m.mu[i] <= 1.0))
                throw GbmError(ErrorCode::parse, "probabilities must be in [0, 1]");
        }
        return m;
    }
    QuantizedBmm m;
    m.k = k;
    m.d = d;
    m.q = q;
    m.pi = std::move(pi);
    m.levels.resize(static_cast<std::size_t>(k) * d);
    std::size_t total_bits = m.levels.size() * q;
    const std::uint8_t* packed = r.raw((total_bits + 7) / 8, "quantized probabilities");
    std::size_t bitpos = 0;
    for (std::uint32_t& level : m.levels) {
        std::uint32_t v = 0;
        for (std::uint32_t b = 0; b < q; ++b, ++bitpos)
            if ((packed[bitpos >> 3] >> (bitpos & 7)) & 1u) v |= 1u << b;
        level = v;
    }
    for (; bitpos < ((total_bits + 7) / 8) * 8; ++bitpos)
        if ((packed[bitpos >> 3] >> (bitpos & 7)) & 1u)
            throw GbmError(ErrorCode::parse, "nonzero padding bits in level payload");
    return m;
}

} // namespace

std::vector<std::uint8_t> embeddings_to_bytes(const LabeledEmbeddings& ds) {
    ByteWriter w;
    w.bytes(reinterpret_cast<const std::uint8_t*>("GBM1"), 4);
    w.u8(ds.is_binary() ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u32(static_cast<std::uint32_t>(ds.dim()));
    for (std::uint32_t label : ds.labels) w.u32(label);
    if (ds.is_binary()) {
        write_packed_rows(w, ds.bits());
    } else {
        for (double v : ds.reals().values) w.f64(v);
    }
    return std::move(w.buf);
}

LabeledEmbeddings embeddings_from_bytes(const std::vector<std::uint8_t>& bytes) {
    ByteReader r{bytes.data(), bytes.size()};
    expect_magic(r, "GBM1", "embeddings");
    std::uint8_t kind = r.u8("payload kind");
    if (kind > 1)
        throw GbmError(ErrorCode::parse,
                       "unknown payload kind " + std::to_string(kind));
    std::uint32_t n = r.u32("row count");
    std::uint32_t d = r.u32("dimension");
    std::vector<std::uint32_t> labels(n);
    for (std::uint32_t i = 0; i < n; ++i) labels[i] = r.u32("labels");
    if (kind == 0) {
        BitMatrix z = read_packed_rows(r, n, d);
        expect_eof(r);
        return LabeledEmbeddings(std::move(z), std::move(labels));
    }
    RealMatrix x(n, d);
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        x.values[i] = r.f64("real payload");
        if (!std::isfinite(x.values[i]))
            throw GbmError(ErrorCode::parse, "real payload must be finite");
    }
    expect_eof(r);
    return LabeledEmbeddings(std::move(x), std::move(labels));
}

void save_embeddings(const std::string& path, const LabeledEmbeddings& ds) {
    write_file(path, embeddings_to_bytes(ds));
}

LabeledEmbeddings load_embeddings(const std::string& path) {
    return embeddings_from_bytes(read_file(path));
}

std::vector<std::uint8_t> model_to_bytes(const ModelVariant& model) {
    ByteWriter w;
    append_model(w, model);
    return std::move(w.buf);
}

void save_model(const std::string& path, const ModelVariant& model) {
    write_file(path, model_to_bytes(model));
}

ModelVariant load_model(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file(path);
    ByteReader r{bytes.data(), bytes.size()};
    ModelVariant m = parse_model(r);
    expect_eof(r);
    return m;
}

std::vector<std::uint8_t> store_to_bytes(const GbmStore& store) {
    ByteWriter w;
    for (const ClassEntry& entry : store.entries()) {
        w.u32(entry.class_id);
        w.u32(static_cast<std::uint32_t>(entry.n_train));
        append_model(w, entry.model);
    }
    return std::move(w.buf);
}

void save_store(const std::string& path, const GbmStore& store) {
    write_file(path, store_to_bytes(store));
}

GbmStore load_store(const std::string& path, ClassWeighting weighting) {
    std::vector<std::uint8_t> bytes = read_file(path);
    if (bytes.empty()) throw GbmError(ErrorCode::empty_input, "store file has no entries");
    ByteReader r{bytes.data(), bytes.size()};
    std::vector<ClassEntry> entries;
    while (!r.eof()) {
        ClassEntry entry;
        entry.class_id = r.u32("class id");
        entry.n_train = r.u32("training row count");
        ModelVariant m = parse_model(r);
        if (!std::holds_alternative<QuantizedBmm>(m))
            throw GbmError(ErrorCode::parse, "store entries must hold quantized models");
        entry.model = std::get<QuantizedBmm>(std::move(m));
        entries.push_back(std::move(entry));
    }
    const QuantizedBmm& first = entries.front().model;
    GbmStore store(first.d, first.k, first.q, weighting);
    for (ClassEntry& entry : entries) store.append_entry(std::move(entry));
    return store;
}

void save_codec(const std::string& path, std::uint32_t p, const RangeCalibration& cal) {
    if (p < 1) throw GbmError(ErrorCode::parameter, "thermometer needs p >= 1");
    if (cal.lo.size() != cal.hi.size())
        throw GbmError(ErrorCode::shape, "calibration lo/hi sizes differ");
    ByteWriter w;
    w.bytes(reinterpret_cast<const std::uint8_t*>("GBMT"), 4);
    w.u32(p);
    w.u32(static_cast<std::uint32_t>(cal.d()));
    for (std::size_t j = 0; j < cal.d(); ++j) {
        w.f64(cal.lo[j]);
        w.f64(cal.hi[j]);
    }
    write_file(path, w.buf);
}

std::pair<std::uint32_t, RangeCalibration> load_codec(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file(path);
    ByteReader r{bytes.data(), bytes.size()};
    expect_magic(r, "GBMT", "thermometer codec");
    std::uint32_t p = r.u32("precision");
    if (p < 1) throw GbmError(ErrorCode::parse, "codec has p = 0");
    std::uint32_t d = r.u32("dimension");
    RangeCalibration cal;
    cal.lo.resize(d);
    cal.hi.resize(d);
    for (std::uint32_t j = 0; j < d; ++j) {
        cal.lo[j] = r.f64("ranges");
        cal.hi[j] = r.f64("ranges");
        if (!std::isfinite(cal.lo[j]) || !std::isfinite(cal.hi[j]) || !(cal.lo[j] < cal.hi[j]))
            throw GbmError(ErrorCode::parse, "codec ranges must be finite with lo < hi");
    }
    expect_eof(r);
    return {p, std::move(cal)};
}

void save_classifier(const std::string& path, const LinearClassifier& clf) {
    ByteWriter w;
    w.bytes(reinterpret_cast<const std::uint8_t*>("GBMC"), 4);
    w.u32(static_cast<std::uint32_t>(clf.n_classes()));
    w.u32(static_cast<std::uint32_t>(clf.input_dim()));
    w.u8(static_cast<std::uint8_t>(clf.input_kind()));
    for (std::uint32_t id : clf.class_ids()) w.u32(id);
    for (double v : clf.weights()) w.f64(v);
    for (double v : clf.biases()) w.f64(v);
    write_file(path, w.buf);
}

LinearClassifier load_classifier(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file(path);
    ByteReader r{bytes.data(), bytes.size()};
    expect_magic(r, "GBMC", "classifier checkpoint");
    std::uint32_t n_classes = r.u32("class count");
    std::uint32_t input_dim = r.u32("input dimension");
    std::uint8_t kind = r.u8("input kind");
    if (kind > 1) throw GbmError(ErrorCode::parse, "unknown input kind");
    std::vector<std::uint32_t> ids(n_classes);
    for (std::uint32_t i = 0; i < n_classes; ++i) ids[i] = r.u32("class ids");
    std::vector<double> w(static_cast<std::size_t>(n_classes) * input_dim);
    for (double& v : w) v = r.f64("weights");
    std::vector<double> b(n_classes);
    for (double& v : b) v = r.f64("biases");
    expect_eof(r);
    return LinearClassifier(static_cast<InputKind>(kind), input_dim, std::move(ids),
                            std::move(w), std::move(b));
}

} // namespace gbm
