#pragma once

#include "gbm/binarizer.hpp"
#include "gbm/bmm.hpp"
#include "gbm/classifier.hpp"
#include "gbm/dataset.hpp"
#include "gbm/memory.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gbm {

// All formats are little-endian.
//
// Embeddings ("GBM1"): magic, u8 payload kind (0 bit-packed, 1 real64),
// u32 N, u32 D, N x u32 labels, payload. Bit-packed rows are padded to a
// byte boundary per row, least significant bit first, padding zero; real
// payloads are N x D float64 row-major.
//
// Mixture model ("GBMM"): magic, u32 K, u32 D, u8 q (0 = unquantized
// real64 mu), K x f64 pi, then either K x D f64 mu or K*D q-bit levels
// packed least significant bit first and padded with zeros to a byte
// boundary.
//
// Store: a plain sequence of class records, each u32 class_id, u32 n_train,
// then a mixture model record. Appending a class appends bytes; earlier
// records are untouched.
//
// Thermometer codec sidecar ("GBMT"): magic, u32 p, u32 D, D x (f64 lo,
// f64 hi).
//
// Classifier checkpoint ("GBMC"): magic, u32 n_classes, u32 input_dim,
// u8 input kind (0 binary, 1 real), n_classes x u32 class ids ascending,
// n_classes x input_dim f64 weights row-major, n_classes x f64 biases.

void save_embeddings(const std::string& path, const LabeledEmbeddings& ds);
LabeledEmbeddings load_embeddings(const std::string& path);
std::vector<std::uint8_t> embeddings_to_bytes(const LabeledEmbeddings& ds);
LabeledEmbeddings embeddings_from_bytes(const std::vector<std::uint8_t>& bytes);

using ModelVariant = std::variant<BmmParams, QuantizedBmm>;

void save_model(const std::string& path, const ModelVariant& model);
ModelVariant load_model(const std::string& path);
std::vector<std::uint8_t> model_to_bytes(const ModelVariant& model);

void save_store(const std::string& path, const GbmStore& store);
GbmStore load_store(const std::string& path, ClassWeighting weighting = ClassWeighting::uniform);
std::vector<std::uint8_t> store_to_bytes(const GbmStore& store);

void save_codec(const std::string& path, std::uint32_t p, const RangeCalibration& cal);
std::pair<std::uint32_t, RangeCalibration> load_codec(const std::string& path);

void save_classifier(const std::string& path, const LinearClassifier& clf);
LinearClassifier load_classifier(const std::string& path);

} // namespace gbm
