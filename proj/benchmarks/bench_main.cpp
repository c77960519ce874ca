#include <benchmark/benchmark.h>

#include "gbm/binarizer.hpp"
#include "gbm/bit_matrix.hpp"
#include "gbm/bmm.hpp"
#include "gbm/classifier.hpp"
#include "gbm/rng.hpp"

#include <cstdint>
#include <vector>

namespace {

gbm::BitMatrix random_bits(std::size_t n, std::size_t d, std::uint64_t seed) {
    gbm::SeededRng rng(seed);
    gbm::BitMatrix z(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) z.set(i, j, rng.next_bernoulli(0.5));
    return z;
}

gbm::BmmParams random_params(std::size_t k, std::size_t d, std::uint64_t seed) {
    gbm::SeededRng rng(seed);
    gbm::BmmParams p(k, d);
    for (double& v : p.mu) v = 0.1 + 0.8 * rng.next_double();
    return p;
}

void bm_e_step(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    gbm::BitMatrix z = random_bits(400, 256, 1);
    gbm::BmmParams params = random_params(k, 256, 2);
    for (auto _ : state) benchmark::DoNotOptimize(gbm::e_step(z, params));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 400);
}
BENCHMARK(bm_e_step)->Arg(1)->Arg(2)->Arg(4);

void bm_fit(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    gbm::BitMatrix z = random_bits(400, 256, 3);
    gbm::EmConfig cfg;
    cfg.k = k;
    for (auto _ : state) {
        gbm::SeededRng rng(4);
        benchmark::DoNotOptimize(gbm::fit(z, cfg, rng));
    }
}
BENCHMARK(bm_fit)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void bm_sample(benchmark::State& state) {
    gbm::BmmParams params = random_params(2, 256, 5);
    gbm::SeededRng rng(6);
    for (auto _ : state) benchmark::DoNotOptimize(gbm::sample(params, 128, rng));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 128);
}
BENCHMARK(bm_sample);

void bm_logits_packed(benchmark::State& state) {
    const std::size_t d = 1024;
    gbm::BitMatrix z = random_bits(256, d, 7);
    gbm::SeededRng rng(8);
    std::vector<double> w(20 * d);
    for (double& v : w) v = rng.next_normal();
    gbm::LinearClassifier clf(gbm::InputKind::binary, d, [] {
        std::vector<std::uint32_t> ids(20);
        for (std::uint32_t i = 0; i < 20; ++i) ids[i] = i;
        return ids;
    }(), w, std::vector<double>(20, 0.0));
    for (auto _ : state) benchmark::DoNotOptimize(clf.logits(z));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 256);
}
BENCHMARK(bm_logits_packed);

void bm_therm_encode(benchmark::State& state) {
    gbm::SeededRng rng(9);
    gbm::RealMatrix x(512, 128);
    for (double& v : x.values) v = rng.next_normal();
    gbm::RangeCalibration cal = gbm::calibrate_range(x);
    for (auto _ : state) benchmark::DoNotOptimize(gbm::therm_encode(x, cal, 8));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 512);
}
BENCHMARK(bm_therm_encode);

void bm_pack_rows(benchmark::State& state) {
    gbm::SeededRng rng(10);
    std::vector<std::vector<std::uint8_t>> rows(256, std::vector<std::uint8_t>(512));
    for (auto& row : rows)
        for (auto& bit : row) bit = rng.next_bernoulli(0.5) ? 1 : 0;
    for (auto _ : state) benchmark::DoNotOptimize(gbm::pack_rows(rows));
}
BENCHMARK(bm_pack_rows);

} // namespace

BENCHMARK_MAIN();
