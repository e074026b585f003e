#include "mptsnet/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "mptsnet/errors.hpp"

namespace mptsnet::spectral {

namespace {

using cplx = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// iterative radix-2 Cooley-Tukey, n a power of two
void fft_pow2(std::vector<cplx>& a, bool invert) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (invert ? 1.0 : -1.0);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (invert)
        for (auto& v : a) v /= static_cast<double>(n);
}

// Bluestein chirp-z: DFT of arbitrary length via one power-of-two convolution
std::vector<cplx> fft_bluestein(const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;

    std::vector<cplx> chirp(n);
    for (std::size_t i = 0; i < n; ++i) {
        // exp(-i*pi*i^2/n); reduce i^2 mod 2n to keep the angle small
        const std::size_t sq = (i * i) % (2 * n);
        const double ang = std::numbers::pi * static_cast<double>(sq) / static_cast<double>(n);
        chirp[i] = cplx(std::cos(ang), -std::sin(ang));
    }

    std::vector<cplx> a(m, cplx(0, 0)), b(m, cplx(0, 0));
    for (std::size_t i = 0; i < n; ++i) a[i] = x[i] * chirp[i];
    b[0] = std::conj(chirp[0]);
    for (std::size_t i = 1; i < n; ++i) b[i] = b[m - i] = std::conj(chirp[i]);

    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, true);

    std::vector<cplx> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * chirp[i];
    return out;
}

std::vector<cplx> fft_any(std::vector<cplx> x) {
    if (is_pow2(x.size())) {
        fft_pow2(x, false);
        return x;
    }
    return fft_bluestein(x);
}

}  // namespace

std::vector<cplx> rfft(const std::vector<double>& x) {
    std::vector<cplx> cx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) cx[i] = cplx(x[i], 0.0);
    auto full = fft_any(std::move(cx));
    full.resize(x.size() / 2 + 1);
    return full;
}

AmplitudeSpectrum compute_amplitude_spectrum(const double* X, std::size_t d, std::size_t l) {
    if (d < 1) throw DataError("amplitude spectrum: need at least one variable");
    if (l < 4) throw DataError("amplitude spectrum: series length must be >= 4, got " +
                               std::to_string(l));
    AmplitudeSpectrum spec;
    spec.series_length = l;
    spec.amp.assign(l / 2 + 1, 0.0);
    std::vector<double> row(l);
    for (std::size_t v = 0; v < d; ++v) {
        for (std::size_t t = 0; t < l; ++t) {
            const double val = X[v * l + t];
            if (!std::isfinite(val))
                throw DataError("amplitude spectrum: non-finite value at variable " +
                                std::to_string(v) + ", timestep " + std::to_string(t));
            row[t] = val;
        }
        auto bins = rfft(row);
        for (std::size_t b = 0; b < spec.amp.size(); ++b) spec.amp[b] += std::abs(bins[b]);
    }
    for (auto& a : spec.amp) a /= static_cast<double>(d);
    return spec;
}

AmplitudeSpectrum mean_spectrum(const double* values, std::size_t m, std::size_t d,
                                std::size_t l) {
    if (m < 1) throw DataError("mean spectrum: empty sample set");
    AmplitudeSpectrum acc;
    acc.series_length = l;
    acc.amp.assign(l / 2 + 1, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
        auto spec = compute_amplitude_spectrum(values + s * d * l, d, l);
        for (std::size_t b = 0; b < acc.amp.size(); ++b) acc.amp[b] += spec.amp[b];
    }
    for (auto& a : acc.amp) a /= static_cast<double>(m);
    return acc;
}

PeriodSet identify_main_periods(const AmplitudeSpectrum& spectrum, std::size_t k) {
    const std::size_t l = spectrum.series_length;
    const std::size_t half = l / 2;
    if (k < 1) throw ConfigError("identify_main_periods: k must be >= 1");
    if (k > half)
        throw ConfigError("identify_main_periods: k=" + std::to_string(k) +
                          " exceeds floor(l/2)=" + std::to_string(half));

    // candidate bins 1..half, ranked by amplitude desc, ties toward low freq
    std::vector<std::size_t> order(half);
    for (std::size_t i = 0; i < half; ++i) order[i] = i + 1;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (spectrum.amp[a] != spectrum.amp[b]) return spectrum.amp[a] > spectrum.amp[b];
        return a < b;
    });

    PeriodSet set;
    set.source_length = l;
    set.k = k;
    std::vector<bool> used(half + 1, false);
    for (std::size_t i = 0; i < order.size() && set.entries.size() < k; ++i) {
        const std::size_t f = order[i];
        if (spectrum.amp[f] <= 0.0) break;  // nonzero bins exhausted
        set.entries.push_back({f, (l + f - 1) / f, spectrum.amp[f]});
        used[f] = true;
    }
    if (set.entries.size() < k) {
        set.padded = true;
        for (std::size_t f = 1; f <= half && set.entries.size() < k; ++f) {
            if (used[f]) continue;
            set.entries.push_back({f, (l + f - 1) / f, spectrum.amp[f]});
        }
        std::fprintf(stderr,
                     "warning: spectrum has fewer than k=%zu nonzero bins; "
                     "padded period set with the smallest unused frequencies\n",
                     k);
    }
    return set;
}

std::vector<double> pad_and_reshape(const double* X, std::size_t d, std::size_t l,
                                    std::size_t frequency, std::size_t period) {
    if (period * frequency < l)
        throw ShapeError("pad_and_reshape: p*f = " + std::to_string(period * frequency) +
                         " < l = " + std::to_string(l));
    std::vector<double> out(d * period * frequency, 0.0);
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t j = 0; j < frequency; ++j)
            for (std::size_t t = 0; t < period; ++t) {
                const std::size_t src = j * period + t;
                if (src < l) out[(c * period + t) * frequency + j] = X[c * l + src];
            }
    return out;
}

std::vector<double> unreshape(const double* reshaped, std::size_t d, std::size_t l,
                              std::size_t frequency, std::size_t period) {
    std::vector<double> out(d * l, 0.0);
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t j = 0; j < frequency; ++j)
            for (std::size_t t = 0; t < period; ++t) {
                const std::size_t dst = j * period + t;
                if (dst < l) out[c * l + dst] = reshaped[(c * period + t) * frequency + j];
            }
    return out;
}

std::vector<double> query_batch_amplitudes(const double* batch, std::size_t B, std::size_t d,
                                           std::size_t l, const PeriodSet& periods) {
    if (periods.source_length != l)
        throw ShapeError("query_batch_amplitudes: batch length " + std::to_string(l) +
                         " != period set source length " + std::to_string(periods.source_length));
    std::vector<double> out(B * periods.entries.size(), 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        auto spec = compute_amplitude_spectrum(batch + b * d * l, d, l);
        for (std::size_t i = 0; i < periods.entries.size(); ++i)
            out[b * periods.entries.size() + i] = spec.amp[periods.entries[i].frequency];
    }
    return out;
}

std::vector<std::int64_t> segment_reshape_map(std::size_t B, std::size_t C, std::size_t l,
                                              std::size_t p, std::size_t f) {
    if (p * f < l) throw ShapeError("segment_reshape_map: p*f < l");
    std::vector<std::int64_t> map(B * C * p * f, -1);
    std::size_t at = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t base = (b * C + c) * l;
            for (std::size_t t = 0; t < p; ++t)
                for (std::size_t j = 0; j < f; ++j) {
                    const std::size_t src = j * p + t;
                    map[at++] = src < l ? static_cast<std::int64_t>(base + src) : -1;
                }
        }
    return map;
}

std::vector<std::int64_t> timeline_broadcast_map(std::size_t B, std::size_t C, std::size_t l,
                                                 std::size_t p, std::size_t f) {
    if (p * f < l) throw ShapeError("timeline_broadcast_map: p*f < l");
    std::vector<std::int64_t> map(B * C * l);
    std::size_t at = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < l; ++t)
                map[at++] = static_cast<std::int64_t>((b * f + t / p) * C + c);
    return map;
}

}  // namespace mptsnet::spectral
