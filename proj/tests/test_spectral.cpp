#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mptsnet/errors.hpp"
#include "mptsnet/spectral.hpp"
#include "oracles.hpp"

using namespace mptsnet;
namespace sp = mptsnet::spectral;

namespace {

std::vector<double> sine_series(std::size_t l, double bin, double amp = 1.0, double phase = 0.0) {
    std::vector<double> x(l);
    for (std::size_t t = 0; t < l; ++t)
        x[t] = amp * std::sin(2.0 * std::numbers::pi * bin * static_cast<double>(t) /
                                  static_cast<double>(l) +
                              phase);
    return x;
}

}  // namespace

TEST_SUITE_BEGIN("spectral");

TEST_CASE("amplitude spectrum peaks at the planted bin") {
    auto x = sine_series(100, 4.0);
    auto spec = sp::compute_amplitude_spectrum(x.data(), 1, 100);
    CHECK(spec.bins() == 51);
    std::size_t peak = 1;
    for (std::size_t b = 2; b < spec.bins(); ++b)
        if (spec.amp[b] > spec.amp[peak]) peak = b;
    CHECK(peak == 4);
}

TEST_CASE("constant series has zero amplitude off DC") {
    std::vector<double> x(64, 3.5);
    auto spec = sp::compute_amplitude_spectrum(x.data(), 1, 64);
    for (std::size_t b = 1; b < spec.bins(); ++b) CHECK(spec.amp[b] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(spec.amp[0] > 0.0);
}

TEST_CASE("two-variable average halves single-variable peaks") {
    const std::size_t l = 100;
    auto a = sine_series(l, 4.0);
    auto b = sine_series(l, 10.0);
    std::vector<double> X(2 * l);
    std::copy(a.begin(), a.end(), X.begin());
    std::copy(b.begin(), b.end(), X.begin() + static_cast<std::ptrdiff_t>(l));
    auto spec = sp::compute_amplitude_spectrum(X.data(), 2, l);
    auto solo = sp::compute_amplitude_spectrum(a.data(), 1, l);
    CHECK(spec.amp[4] == doctest::Approx(solo.amp[4] / 2.0).epsilon(1e-9));
    CHECK(spec.amp[10] == doctest::Approx(spec.amp[4]).epsilon(1e-9));
}

TEST_CASE("spectrum matches the naive DFT oracle") {
    std::mt19937 rng(101);
    std::uniform_int_distribution<std::size_t> len_dist(4, 128);
    std::uniform_int_distribution<std::size_t> dim_dist(1, 4);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t l = len_dist(rng);
        const std::size_t d = dim_dist(rng);
        std::vector<double> X(d * l);
        for (auto& v : X) v = val(rng);
        auto spec = sp::compute_amplitude_spectrum(X.data(), d, l);
        auto expect = oracles::naive_amplitude_spectrum(X, d, l);
        REQUIRE(spec.amp.size() == expect.size());
        for (std::size_t b = 0; b < expect.size(); ++b)
            CHECK(std::abs(spec.amp[b] - expect[b]) < 1e-6);
    }
}

TEST_CASE("non-finite input rejected") {
    std::vector<double> X(8, 0.0);
    X[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sp::compute_amplitude_spectrum(X.data(), 1, 8), DataError);
}

TEST_CASE("identify_main_periods selects the dominant bin") {
    auto x = sine_series(100, 4.0);
    auto spec = sp::compute_amplitude_spectrum(x.data(), 1, 100);
    auto set = sp::identify_main_periods(spec, 1);
    REQUIRE(set.entries.size() == 1);
    CHECK(set.entries[0].frequency == 4);
    CHECK(set.entries[0].period == 25);
    CHECK_FALSE(set.padded);
}

TEST_CASE("identify_main_periods direct top-k with explicit amplitudes") {
    sp::AmplitudeSpectrum spec;
    spec.series_length = 40;
    spec.amp.assign(21, 0.0);
    spec.amp[4] = 9.0;
    spec.amp[10] = 7.0;
    spec.amp[2] = 5.0;
    auto set = sp::identify_main_periods(spec, 2);
    REQUIRE(set.entries.size() == 2);
    CHECK(set.entries[0].frequency == 4);
    CHECK(set.entries[1].frequency == 10);
    CHECK(set.entries[0].period == 10);
    CHECK(set.entries[1].period == 4);
}

TEST_CASE("all-zero spectrum falls back to smallest frequencies with warning flag") {
    sp::AmplitudeSpectrum spec;
    spec.series_length = 30;
    spec.amp.assign(16, 0.0);
    auto set = sp::identify_main_periods(spec, 2);
    REQUIRE(set.entries.size() == 2);
    CHECK(set.entries[0].frequency == 1);
    CHECK(set.entries[1].frequency == 2);
    CHECK(set.padded);
}

TEST_CASE("identify_main_periods rejects k beyond floor(l/2)") {
    sp::AmplitudeSpectrum spec;
    spec.series_length = 10;
    spec.amp.assign(6, 1.0);
    CHECK_THROWS_AS(sp::identify_main_periods(spec, 6), ConfigError);
    CHECK_THROWS_AS(sp::identify_main_periods(spec, 0), ConfigError);
}

TEST_CASE("top-k selection matches the oracle on random spectra") {
    std::mt19937 rng(103);
    std::uniform_int_distribution<std::size_t> len_dist(8, 128);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t l = len_dist(rng);
        std::vector<double> X(l);
        for (auto& v : X) v = val(rng);
        auto spec = sp::compute_amplitude_spectrum(X.data(), 1, l);
        const std::size_t k = std::min<std::size_t>(3, l / 2);
        auto set = sp::identify_main_periods(spec, k);
        auto expect = oracles::naive_top_k(oracles::naive_amplitude_spectrum(X, 1, l), k);
        REQUIRE(set.entries.size() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(set.entries[i].frequency == expect[i]);
    }
}

TEST_CASE("permutation of the sample set leaves the period set unchanged") {
    std::mt19937 rng(104);
    const std::size_t m = 6, d = 2, l = 32;
    std::vector<double> values(m * d * l);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (auto& v : values) v = val(rng);

    auto base = sp::identify_main_periods(sp::mean_spectrum(values.data(), m, d, l), 3);

    std::vector<std::size_t> order{5, 2, 0, 4, 1, 3};
    std::vector<double> shuffled(values.size());
    for (std::size_t i = 0; i < m; ++i)
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(order[i] * d * l),
                  values.begin() + static_cast<std::ptrdiff_t>((order[i] + 1) * d * l),
                  shuffled.begin() + static_cast<std::ptrdiff_t>(i * d * l));
    auto permuted = sp::identify_main_periods(sp::mean_spectrum(shuffled.data(), m, d, l), 3);

    REQUIRE(base.entries.size() == permuted.entries.size());
    for (std::size_t i = 0; i < base.entries.size(); ++i) {
        CHECK(base.entries[i].frequency == permuted.entries[i].frequency);
        CHECK(base.entries[i].period == permuted.entries[i].period);
    }
}

TEST_CASE("pad_and_reshape exact fit and padded layouts") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    auto r = sp::pad_and_reshape(x.data(), 1, 6, 2, 3);  // f=2, p=3
    // [d=1, p=3, f=2]: column 0 = [1,2,3], column 1 = [4,5,6]
    CHECK(r == std::vector<double>{1, 4, 2, 5, 3, 6});

    const std::vector<double> y{1, 2, 3, 4, 5};
    auto rp = sp::pad_and_reshape(y.data(), 1, 5, 2, 3);
    CHECK(rp == std::vector<double>{1, 4, 2, 5, 3, 0});
}

TEST_CASE("pad_and_reshape round trips and zero-pads the tail") {
    std::mt19937 rng(105);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    const std::size_t d = 3, l = 17, f = 5;
    const std::size_t p = (l + f - 1) / f;  // 4, p*f = 20 > l
    std::vector<double> X(d * l);
    for (auto& v : X) v = val(rng);
    auto r = sp::pad_and_reshape(X.data(), d, l, f, p);
    auto back = sp::unreshape(r.data(), d, l, f, p);
    CHECK(back == X);
    // padded positions are exactly zero
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t j = 0; j < f; ++j)
            for (std::size_t t = 0; t < p; ++t)
                if (j * p + t >= l) CHECK(r[(c * p + t) * f + j] == 0.0);
}

TEST_CASE("pad_and_reshape rejects p*f < l") {
    std::vector<double> x(10, 0.0);
    CHECK_THROWS_AS(sp::pad_and_reshape(x.data(), 1, 10, 3, 3), ShapeError);
}

TEST_CASE("scaling input scales amplitudes and keeps the frequency set") {
    std::mt19937 rng(106);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    const std::size_t d = 2, l = 48;
    std::vector<double> X(d * l), X3(d * l);
    for (std::size_t i = 0; i < X.size(); ++i) {
        X[i] = val(rng);
        X3[i] = 3.0 * X[i];
    }
    auto a = sp::compute_amplitude_spectrum(X.data(), d, l);
    auto b = sp::compute_amplitude_spectrum(X3.data(), d, l);
    for (std::size_t bin = 0; bin < a.bins(); ++bin)
        CHECK(b.amp[bin] == doctest::Approx(3.0 * a.amp[bin]).epsilon(1e-9));
    auto sa = sp::identify_main_periods(a, 4);
    auto sb = sp::identify_main_periods(b, 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(sa.entries[i].frequency == sb.entries[i].frequency);
}

TEST_CASE("query_batch_amplitudes flags the sample's own period") {
    const std::size_t l = 64, d = 1, B = 2;
    sp::AmplitudeSpectrum spec;
    spec.series_length = l;
    spec.amp.assign(33, 0.0);
    spec.amp[8] = 2.0;
    spec.amp[4] = 1.0;
    auto periods = sp::identify_main_periods(spec, 2);

    std::vector<double> batch(B * d * l, 0.0);
    auto s = sine_series(l, 8.0);
    std::copy(s.begin(), s.end(), batch.begin());  // sample 0: bin 8; sample 1: zeros

    auto amps = sp::query_batch_amplitudes(batch.data(), B, d, l, periods);
    CHECK(amps[0] > 100.0 * std::abs(amps[1]));  // bin 8 dominates for sample 0
    CHECK(amps[2] == doctest::Approx(0.0));      // zero sample has zero amplitudes
    CHECK(amps[3] == doctest::Approx(0.0));

    // identical samples give identical rows
    std::copy(s.begin(), s.end(), batch.begin() + static_cast<std::ptrdiff_t>(d * l));
    auto amps2 = sp::query_batch_amplitudes(batch.data(), B, d, l, periods);
    CHECK(amps2[0] == amps2[2]);
    CHECK(amps2[1] == amps2[3]);

    sp::PeriodSet wrong = periods;
    wrong.source_length = 32;
    CHECK_THROWS_AS(sp::query_batch_amplitudes(batch.data(), B, d, 32, wrong), ShapeError);
}

TEST_CASE("segment maps agree with pad_and_reshape") {
    const std::size_t B = 2, C = 3, l = 7, f = 3, p = 3;
    std::mt19937 rng(107);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    std::vector<double> x(B * C * l);
    for (auto& v : x) v = val(rng);

    auto map = sp::segment_reshape_map(B, C, l, p, f);
    REQUIRE(map.size() == B * C * p * f);
    for (std::size_t b = 0; b < B; ++b) {
        auto expect = sp::pad_and_reshape(x.data() + b * C * l, C, l, f, p);
        for (std::size_t i = 0; i < expect.size(); ++i) {
            const auto src = map[b * C * p * f + i];
            const double got = src >= 0 ? x[static_cast<std::size_t>(src)] : 0.0;
            CHECK(got == expect[i]);
        }
    }
}

TEST_CASE("timeline broadcast map tiles segment features piecewise") {
    const std::size_t B = 1, C = 2, l = 5, f = 2, p = 3;
    auto map = sp::timeline_broadcast_map(B, C, l, p, f);
    // source layout [B, f, C]
    std::vector<double> g{10, 20, 30, 40};  // segment 0 -> (10,20), segment 1 -> (30,40)
    std::vector<double> out(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) out[i] = g[static_cast<std::size_t>(map[i])];
    CHECK(out == std::vector<double>{10, 10, 10, 30, 30, 20, 20, 20, 40, 40});
}

TEST_SUITE_END();
