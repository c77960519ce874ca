#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gbm/binarizer.hpp"
#include "gbm/classifier.hpp"
#include "gbm/error.hpp"
#include "gbm/rng.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

using namespace gbm;

namespace {

#define CHECK_GBM_THROWS(code_expected, expr)                                            \
    do {                                                                                 \
        bool threw_ = false;                                                             \
        try {                                                                            \
            (void)(expr);                                                                \
        } catch (const GbmError& e_) {                                                   \
            threw_ = true;                                                               \
            CHECK(e_.code() == (code_expected));                                         \
        }                                                                                \
        CHECK(threw_);                                                                   \
    } while (0)

RangeCalibration unit_range(std::size_t d) {
    RangeCalibration cal;
    cal.lo.assign(d, 0.0);
    cal.hi.assign(d, 1.0);
    return cal;
}

RealMatrix single_row(const std::vector<double>& values) {
    RealMatrix x(1, values.size());
    for (std::size_t j = 0; j < values.size(); ++j) x.at(0, j) = values[j];
    return x;
}

} // namespace

TEST_CASE("calibration uses first and ninety-ninth percentiles") {
    SeededRng rng(1);
    RealMatrix x(10000, 1);
    for (std::size_t i = 0; i < 10000; ++i) x.at(i, 0) = 10.0 * rng.next_double();
    RangeCalibration cal = calibrate_range(x);
    CHECK(std::abs(cal.lo[0] - 0.1) <= 0.2);
    CHECK(std::abs(cal.hi[0] - 9.9) <= 0.2);
}

TEST_CASE("calibration widens constant columns") {
    RealMatrix x(5, 2);
    for (std::size_t i = 0; i < 5; ++i) {
        x.at(i, 0) = 3.0;
        x.at(i, 1) = static_cast<double>(i);
    }
    RangeCalibration cal = calibrate_range(x);
    CHECK(cal.lo[0] == doctest::Approx(3.0));
    CHECK(cal.hi[0] == doctest::Approx(4.0));
    CHECK(cal.lo[1] < cal.hi[1]);
}

TEST_CASE("calibration of two rows spans them") {
    RealMatrix x(2, 1);
    x.at(0, 0) = 0.0;
    x.at(1, 0) = 1.0;
    RangeCalibration cal = calibrate_range(x);
    CHECK(cal.lo[0] == doctest::Approx(0.0));
    CHECK(cal.hi[0] == doctest::Approx(1.0));
}

TEST_CASE("calibration needs at least two rows") {
    CHECK_GBM_THROWS(ErrorCode::empty_input, calibrate_range(RealMatrix(0, 3)));
    CHECK_GBM_THROWS(ErrorCode::empty_input, calibrate_range(RealMatrix(1, 3)));
}

TEST_CASE("thermometer encoding matches the worked examples") {
    RangeCalibration cal = unit_range(1);

    BitMatrix mid = therm_encode(single_row({0.6}), cal, 4);
    CHECK(mid.row(0) == std::vector<std::uint8_t>{1, 1, 0, 0});

    BitMatrix top = therm_encode(single_row({1.0}), cal, 4);
    CHECK(top.row(0) == std::vector<std::uint8_t>{1, 1, 1, 1});

    BitMatrix below = therm_encode(single_row({-2.0}), cal, 4);
    CHECK(below.row(0) == std::vector<std::uint8_t>{0, 0, 0, 0});

    BitMatrix above = therm_encode(single_row({7.5}), cal, 4);
    CHECK(above.row(0) == std::vector<std::uint8_t>{1, 1, 1, 1});
}

TEST_CASE("thermometer encoding rejects mismatched widths and bad p") {
    RangeCalibration cal = unit_range(2);
    CHECK_GBM_THROWS(ErrorCode::shape, therm_encode(single_row({0.5}), cal, 4));
    CHECK_GBM_THROWS(ErrorCode::parameter, therm_encode(single_row({0.5, 0.5}), cal, 0));
}

TEST_CASE("thermometer decoding averages each segment") {
    BitMatrix two_of_four = pack_rows({{1, 1, 0, 0}});
    CHECK(therm_decode(two_of_four, 4).at(0, 0) == doctest::Approx(0.5));

    BitMatrix full = pack_rows({{1, 1, 1, 1}});
    CHECK(therm_decode(full, 4).at(0, 0) == doctest::Approx(1.0));

    BitMatrix scattered = pack_rows({{1, 0, 1, 0}});
    CHECK(therm_decode(scattered, 4).at(0, 0) == doctest::Approx(0.5));

    BitMatrix wide = pack_rows({{1, 1, 0, 0, 1, 1, 1, 0}});
    RealMatrix decoded = therm_decode(wide, 4);
    CHECK(decoded.n_cols == 2);
    CHECK(decoded.at(0, 1) == doctest::Approx(0.75));
}

TEST_CASE("thermometer decoding rejects indivisible widths") {
    BitMatrix bits = pack_rows({{1, 0, 1}});
    CHECK_GBM_THROWS(ErrorCode::shape, therm_decode(bits, 2));
}

TEST_CASE("thermometer encoding is monotone per feature") {
    RangeCalibration cal = unit_range(1);
    SeededRng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        double a = rng.next_double();
        double b = rng.next_double();
        if (a > b) std::swap(a, b);
        BitMatrix za = therm_encode(single_row({a}), cal, 8);
        BitMatrix zb = therm_encode(single_row({b}), cal, 8);
        for (std::size_t j = 0; j < 8; ++j)
            if (za.get(0, j)) CHECK(zb.get(0, j));
    }
}

TEST_CASE("thermometer roundtrip stays within one level") {
    for (std::uint32_t p : {1u, 2u, 4u, 8u}) {
        RangeCalibration cal = unit_range(1);
        for (int g = 0; g <= 1000; ++g) {
            double z = g / 1000.0;
            RealMatrix back = therm_decode(therm_encode(single_row({z}), cal, p), p);
            CHECK(std::abs(back.at(0, 0) - z) <= 1.0 / static_cast<double>(p));
        }
    }
}

TEST_CASE("thermometer encoding is idempotent through decode") {
    RangeCalibration cal = unit_range(3);
    SeededRng rng(3);
    for (std::uint32_t p : {1u, 3u, 4u}) {
        RealMatrix x(20, 3);
        for (double& v : x.values) v = rng.next_double();
        BitMatrix once = therm_encode(x, cal, p);
        BitMatrix twice = therm_encode(therm_decode(once, p), cal, p);
        CHECK(once == twice);
    }
}

TEST_CASE("encoded rows are valid thermometer codes") {
    RangeCalibration cal = unit_range(4);
    SeededRng rng(4);
    RealMatrix x(50, 4);
    for (double& v : x.values) v = 3.0 * rng.next_double() - 1.0;
    BitMatrix z = therm_encode(x, cal, 6);
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t f = 0; f < 4; ++f)
            for (std::size_t j = 1; j < 6; ++j)
                if (z.get(i, f * 6 + j)) CHECK(z.get(i, f * 6 + j - 1));
}

TEST_CASE("heaviside forward thresholds projections at zero") {
    HeavisideProjection proj;
    proj.d = 2;
    proj.f = 1;
    proj.w = {1.0, 0.0, 0.0, 1.0};
    BitMatrix z = heaviside_forward(single_row({0.3, -0.2}), proj);
    CHECK(z.get(0, 0));
    CHECK_FALSE(z.get(0, 1));
}

TEST_CASE("heaviside maps an exact zero preactivation to a set bit") {
    HeavisideProjection proj;
    proj.d = 1;
    proj.f = 1;
    proj.w = {1.0};
    BitMatrix z = heaviside_forward(single_row({0.0}), proj);
    CHECK(z.get(0, 0));
}

TEST_CASE("heaviside output is invariant to positive row rescaling") {
    SeededRng rng(5);
    HeavisideProjection proj = HeavisideProjection::random_init(4, 2, rng);
    RealMatrix x(6, 4);
    for (double& v : x.values) v = rng.next_normal();
    BitMatrix base = heaviside_forward(x, proj);

    HeavisideProjection scaled = proj;
    for (std::size_t r = 0; r < scaled.out_dim(); ++r)
        for (std::size_t j = 0; j < 4; ++j) scaled.w[r * 4 + j] *= 7.5;
    CHECK(heaviside_forward(x, scaled) == base);
}

TEST_CASE("heaviside forward rejects mismatched widths") {
    HeavisideProjection proj;
    proj.d = 3;
    proj.f = 1;
    proj.w.assign(9, 0.5);
    CHECK_GBM_THROWS(ErrorCode::shape, heaviside_forward(single_row({1.0, 2.0}), proj));
}

TEST_CASE("straight-through gradients match the linear layer inside the window") {
    HeavisideProjection proj;
    proj.d = 2;
    proj.f = 1;
    proj.ste_clip = 1.0;
    proj.w = {1.0, 2.0, 3.0, 4.0};
    RealMatrix x = single_row({0.1, -0.05});
    RealMatrix upstream(1, 2);
    upstream.at(0, 0) = 0.5;
    upstream.at(0, 1) = -1.0;

    HeavisideGrads grads = heaviside_backward(upstream, x, proj);
    CHECK(grads.grad_x.at(0, 0) == doctest::Approx(0.5 * 1.0 - 1.0 * 3.0));
    CHECK(grads.grad_x.at(0, 1) == doctest::Approx(0.5 * 2.0 - 1.0 * 4.0));
    CHECK(grads.grad_w[0] == doctest::Approx(0.5 * 0.1));
    CHECK(grads.grad_w[1] == doctest::Approx(0.5 * -0.05));
    CHECK(grads.grad_w[2] == doctest::Approx(-1.0 * 0.1));
    CHECK(grads.grad_w[3] == doctest::Approx(-1.0 * -0.05));
}

TEST_CASE("straight-through gradients vanish outside the window") {
    HeavisideProjection proj;
    proj.d = 2;
    proj.f = 1;
    proj.ste_clip = 0.05;
    proj.w = {1.0, 2.0, 3.0, 4.0};
    RealMatrix x = single_row({0.1, -0.04});
    // Preactivations are (0.02, 0.14): the first is inside the 0.05 window,
    // the second outside, so only row 0 contributes.
    RealMatrix upstream(1, 2);
    upstream.at(0, 0) = 0.5;
    upstream.at(0, 1) = -1.0;

    HeavisideGrads grads = heaviside_backward(upstream, x, proj);
    CHECK(grads.grad_x.at(0, 0) == doctest::Approx(0.5));
    CHECK(grads.grad_x.at(0, 1) == doctest::Approx(1.0));
    CHECK(grads.grad_w[0] == doctest::Approx(0.05));
    CHECK(grads.grad_w[1] == doctest::Approx(-0.02));
    CHECK(grads.grad_w[2] == doctest::Approx(0.0));
    CHECK(grads.grad_w[3] == doctest::Approx(0.0));

    HeavisideProjection tight = proj;
    tight.ste_clip = 1e-9;
    HeavisideGrads none = heaviside_backward(upstream, x, tight);
    CHECK(none.grad_x.at(0, 0) == doctest::Approx(0.0));
    for (double g : none.grad_w) CHECK(g == doctest::Approx(0.0));
}

TEST_CASE("joint training separates two well-spread classes") {
    SeededRng rng(6);
    const std::size_t n = 60;
    RealMatrix x(2 * n, 8);
    std::vector<std::uint32_t> labels(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
        double center = i < n ? 1.0 : -1.0;
        labels[i] = i < n ? 0 : 1;
        for (std::size_t j = 0; j < 8; ++j) x.at(i, j) = center + 0.1 * rng.next_normal();
    }

    HeavisideProjection proj = HeavisideProjection::random_init(8, 2, rng);
    LinearClassifier head(InputKind::binary, proj.out_dim());
    head.extend_outputs({0, 1});
    TrainConfig cfg;
    cfg.epochs = 50;
    HeavisideTrainResult result =
        train_heaviside(x, labels, std::move(proj), std::move(head), cfg, rng);

    LabeledEmbeddings encoded(heaviside_forward(x, result.proj), labels);
    CHECK(result.clf.evaluate(encoded) >= 0.95);
    REQUIRE(result.epoch_losses.size() == 50);
    CHECK(result.epoch_losses.back() <= result.epoch_losses.front());
}

TEST_CASE("zero training epochs leave the projection untouched") {
    SeededRng rng(7);
    HeavisideProjection proj = HeavisideProjection::random_init(4, 1, rng);
    std::vector<double> w_before = proj.w;
    LinearClassifier head(InputKind::binary, proj.out_dim());
    head.extend_outputs({0, 1});
    RealMatrix x(4, 4);
    std::vector<std::uint32_t> labels = {0, 1, 0, 1};
    TrainConfig cfg;
    cfg.epochs = 0;
    HeavisideTrainResult result =
        train_heaviside(x, labels, std::move(proj), std::move(head), cfg, rng);
    CHECK(result.proj.w == w_before);
    CHECK(result.epoch_losses.empty());
}

TEST_CASE("training twice with one seed gives identical weights") {
    RealMatrix x(20, 3);
    std::vector<std::uint32_t> labels(20);
    SeededRng data_rng(8);
    for (std::size_t i = 0; i < 20; ++i) {
        labels[i] = static_cast<std::uint32_t>(i % 2);
        for (std::size_t j = 0; j < 3; ++j)
            x.at(i, j) = (labels[i] ? 1.0 : -1.0) + 0.2 * data_rng.next_normal();
    }
    TrainConfig cfg;
    cfg.epochs = 10;

    auto run_once = [&](std::uint64_t seed) {
        SeededRng rng(seed);
        HeavisideProjection proj = HeavisideProjection::random_init(3, 2, rng);
        LinearClassifier head(InputKind::binary, proj.out_dim());
        head.extend_outputs({0, 1});
        return train_heaviside(x, labels, std::move(proj), std::move(head), cfg, rng);
    };
    HeavisideTrainResult a = run_once(42);
    HeavisideTrainResult b = run_once(42);
    CHECK(a.proj.w == b.proj.w);
    CHECK(a.clf.weights() == b.clf.weights());
    CHECK(a.epoch_losses == b.epoch_losses);
}

TEST_CASE("an exploding learning rate is reported as divergence") {
    SeededRng rng(9);
    RealMatrix x(64, 4);
    std::vector<std::uint32_t> labels(64);
    for (std::size_t i = 0; i < 64; ++i) {
        labels[i] = static_cast<std::uint32_t>(i % 2);
        for (std::size_t j = 0; j < 4; ++j) x.at(i, j) = rng.next_normal();
    }
    HeavisideProjection proj = HeavisideProjection::random_init(4, 2, rng);
    LinearClassifier head(InputKind::binary, proj.out_dim());
    head.extend_outputs({0, 1});
    TrainConfig cfg;
    cfg.learning_rate = 1e306;
    cfg.epochs = 40;
    cfg.batch_size = 16;
    CHECK_GBM_THROWS(ErrorCode::divergence,
                     train_heaviside(x, labels, std::move(proj), std::move(head), cfg, rng));
}
