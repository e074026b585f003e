#pragma once

// Test-only oracles, kept independent of the implementation paths they
// check: a brute-force O(n^2) DFT and a central finite-difference gradient
// checker.

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "mptsnet/tensor.hpp"

namespace oracles {

// |DFT| per bin 0..floor(n/2), straight from the definition
inline std::vector<double> naive_dft_amplitudes(const std::vector<double>& x) {
    const std::size_t n = x.size();
    const double two_pi = 6.283185307179586476925286766559;
    std::vector<double> amp(n / 2 + 1, 0.0);
    for (std::size_t b = 0; b < amp.size(); ++b) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = two_pi * static_cast<double>(b) * static_cast<double>(t) /
                               static_cast<double>(n);
            re += x[t] * std::cos(ang);
            im -= x[t] * std::sin(ang);
        }
        amp[b] = std::hypot(re, im);
    }
    return amp;
}

// mean-over-variables naive amplitude spectrum of [d, l] data
inline std::vector<double> naive_amplitude_spectrum(const std::vector<double>& X, std::size_t d,
                                                    std::size_t l) {
    std::vector<double> acc(l / 2 + 1, 0.0);
    for (std::size_t v = 0; v < d; ++v) {
        std::vector<double> row(X.begin() + static_cast<std::ptrdiff_t>(v * l),
                                X.begin() + static_cast<std::ptrdiff_t>((v + 1) * l));
        auto amp = naive_dft_amplitudes(row);
        for (std::size_t b = 0; b < acc.size(); ++b) acc[b] += amp[b];
    }
    for (auto& a : acc) a /= static_cast<double>(d);
    return acc;
}

// top-k bins in 1..floor(l/2) by amplitude, ties toward the lower bin,
// selection by repeated scan (no shared sorting code with the implementation)
inline std::vector<std::size_t> naive_top_k(const std::vector<double>& amp, std::size_t k) {
    std::vector<std::size_t> picked;
    std::vector<bool> used(amp.size(), false);
    while (picked.size() < k) {
        std::size_t best = 0;
        double best_amp = -1.0;
        for (std::size_t b = 1; b < amp.size(); ++b) {
            if (used[b]) continue;
            if (amp[b] > best_amp) {
                best_amp = amp[b];
                best = b;
            }
        }
        picked.push_back(best);
        used[best] = true;
    }
    return picked;
}

using DTensor = mptsnet::TensorT<double>;
using DTape = mptsnet::TapeT<double>;

inline DTensor random_tensor(mptsnet::Shape shape, std::mt19937& rng, double lo = -1.0,
                             double hi = 1.0, bool requires_grad = true) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> vals(mptsnet::numel(shape));
    for (auto& v : vals) v = dist(rng);
    DTensor t(std::move(shape), std::move(vals));
    t.set_requires_grad(requires_grad);
    return t;
}

// Max relative error between analytic gradients and central finite
// differences over every element of every leaf. `make_loss` must rebuild the
// scalar loss from the leaves' current values on each call.
inline double fd_max_rel_err(std::vector<DTensor> leaves,
                             const std::function<DTensor()>& make_loss, double step = 1e-3) {
    for (auto& leaf : leaves) {
        leaf.set_requires_grad(true);
        leaf.zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        DTape tape;
        DTape::Scope scope(tape);
        DTensor loss = make_loss();
        tape.backward(loss);
        for (auto& leaf : leaves) analytic.push_back(leaf.grad());
    }
    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            const double saved = leaf.value()[i];
            leaf.value()[i] = saved + step;
            const double up = make_loss().item();
            leaf.value()[i] = saved - step;
            const double down = make_loss().item();
            leaf.value()[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double a = analytic[li][i];
            const double denom = std::max({std::abs(a), std::abs(fd), 0.01});
            worst = std::max(worst, std::abs(a - fd) / denom);
        }
    }
    return worst;
}

// fixed random projection to collapse a tensor output to a scalar loss;
// the seed pins the projection so repeated calls build the same loss
inline DTensor project_to_scalar(const DTensor& out, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> w(out.size());
    for (auto& v : w) v = dist(rng);
    DTensor weights(out.shape(), std::move(w));
    DTensor prod = mptsnet::mul(out, weights);
    DTensor flat = mptsnet::reshape(prod, {out.size()});
    return mptsnet::mul(mptsnet::mean(flat, 0), static_cast<double>(out.size()));
}

}  // namespace oracles
