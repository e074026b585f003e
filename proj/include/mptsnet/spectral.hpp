#pragma once

// Frequency-domain analysis: amplitude spectra, top-k main-period selection,
// periodic segmentation geometry and per-batch amplitude queries.

#include <complex>
#include <cstdint>
#include <cstddef>
#include <vector>

namespace mptsnet::spectral {

/// Mean-over-variables FFT magnitude, bins 0..floor(l/2).
struct AmplitudeSpectrum {
    std::vector<double> amp;
    std::size_t series_length = 0;

    std::size_t bins() const { return amp.size(); }
};

struct PeriodEntry {
    std::size_t frequency = 0;  // bin index, 1..floor(l/2)
    std::size_t period = 0;     // ceil(l / frequency)
    double amplitude = 0.0;
};

/// The k dominant (frequency, period, amplitude) triples of a training set,
/// sorted by descending amplitude with ties toward the lower frequency.
struct PeriodSet {
    std::vector<PeriodEntry> entries;
    std::size_t source_length = 0;
    std::size_t k = 0;
    bool padded = false;  // spectrum had fewer than k nonzero bins
};

/// Forward FFT of a real series; returns bins 0..floor(n/2).
/// Radix-2 for power-of-two lengths, Bluestein otherwise.
std::vector<std::complex<double>> rfft(const std::vector<double>& x);

/// Per-variable FFT magnitude averaged across the d variables.
/// X is row-major [d, l]; requires l >= 4, d >= 1, finite values.
AmplitudeSpectrum compute_amplitude_spectrum(const double* X, std::size_t d, std::size_t l);

/// Unweighted mean of per-sample spectra over m samples, values [m, d, l].
AmplitudeSpectrum mean_spectrum(const double* values, std::size_t m, std::size_t d,
                                std::size_t l);

/// Top-k bins of an aggregated spectrum, DC excluded. If fewer than k bins
/// are nonzero, the set is filled with the smallest unused frequencies and
/// the padded flag is raised.
PeriodSet identify_main_periods(const AmplitudeSpectrum& spectrum, std::size_t k);

/// Zero-pad X [d, l] on the right to p*f and fold into [d, p, f]; column j
/// holds timesteps [j*p, (j+1)*p).
std::vector<double> pad_and_reshape(const double* X, std::size_t d, std::size_t l,
                                    std::size_t frequency, std::size_t period);

/// Inverse of pad_and_reshape restricted to the original l timesteps.
std::vector<double> unreshape(const double* reshaped, std::size_t d, std::size_t l,
                              std::size_t frequency, std::size_t period);

/// Per-sample mean-over-variables amplitude at each dataset-level frequency.
/// batch is row-major [B, d, l]; result is row-major [B, k].
std::vector<double> query_batch_amplitudes(const double* batch, std::size_t B, std::size_t d,
                                           std::size_t l, const PeriodSet& periods);

// Index maps consumed by the differentiable gather op. -1 marks zero fill.

/// [B, C, l] -> [B, C, p, f]
std::vector<std::int64_t> segment_reshape_map(std::size_t B, std::size_t C, std::size_t l,
                                              std::size_t p, std::size_t f);

/// [B, f, C] -> [B, C, l]: segment features broadcast piecewise-constant
/// across their p timesteps, truncated to l.
std::vector<std::int64_t> timeline_broadcast_map(std::size_t B, std::size_t C, std::size_t l,
                                                 std::size_t p, std::size_t f);

}  // namespace mptsnet::spectral
