#pragma once

#include "fan/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

/**
 * Real-signal DFT utilities and frequency residual learning.
 *
 * Conventions:
 *  - forward transform is unnormalized, z[w] = sum_t x[t] exp(-2 pi i w t / L);
 *  - the inverse applies the 1/L factor;
 *  - only the half spectrum w = 0 .. floor(L/2) is stored. Selecting a bin
 *    implicitly selects its conjugate partner;
 *  - amplitude is |z[w]| / L.
 *
 * All functions are pure and thread-safe.
 */
namespace fan::spectral {

/// Number of half-spectrum bins for a window of `length` samples.
constexpr std::size_t bin_count(std::size_t length) noexcept { return length / 2 + 1; }

/// Per-channel half spectra of an L x D window.
struct Spectrum {
	std::vector<std::vector<Complex>> coeffs; // D channels, each bin_count(origin_len) bins
	std::size_t origin_len = 0;

	std::size_t channels() const noexcept { return coeffs.size(); }
	std::size_t bins() const noexcept { return bin_count(origin_len); }
};

/// Per-channel ascending bin indices selected for removal.
struct FrequencyMask {
	std::vector<std::vector<std::size_t>> indices;
	std::size_t k = 0;

	std::size_t channels() const noexcept { return indices.size(); }
	bool operator==(const FrequencyMask&) const = default;
};

/// x_non + x_res reproduces the input window.
struct Decomposition {
	Matrix x_non;
	Matrix x_res;
	FrequencyMask mask;
};

std::vector<Complex> rdft(std::span<const double> x);
Spectrum rdft(const Matrix& window);

/// Inverse of rdft. Imaginary parts of bin 0 and (even L) bin L/2 are ignored.
std::vector<double> irdft(std::span<const Complex> z, std::size_t length);
Matrix irdft(const Spectrum& spectrum);

std::vector<double> amplitude(std::span<const Complex> z, std::size_t length);

/// atan2(Im, Re) in (-pi, pi]; a zero coefficient has phase 0.
std::vector<double> phase(std::span<const Complex> z);

/**
 * The min(k, B) indices with the largest amplitude, returned ascending.
 * Ties go to the lower bin index.
 */
std::vector<std::size_t> top_k_indices(std::span<const double> amp, std::size_t k);

/// Keeps z[w] for w in `mask`, zeroes the rest.
std::vector<Complex> filter_spectrum(std::span<const Complex> z, std::span<const std::size_t> mask);

/// Instance-wise, channel-wise top-k frequency removal.
Decomposition frl_decompose(const Matrix& window, std::size_t k);

/// Same decomposition with a caller-supplied mask. Column c uses mask channel c % mask.channels().
Decomposition frl_decompose_with_mask(const Matrix& window, const FrequencyMask& mask);

/// Per-channel amplitude spectrum averaged over windows; B x D.
Matrix mean_amplitude(std::span<const Matrix> windows);

/**
 * Number of bins whose amplitude, averaged over every window and channel, is at
 * least `ratio` times the largest such average. Always >= 1.
 */
std::size_t select_k_by_amplitude_rule(std::span<const Matrix> windows, double ratio = 0.1);

/// Top-k of the training-set average amplitude, one mask shared by every instance.
FrequencyMask global_mask(std::span<const Matrix> windows, std::size_t k);

/**
 * Population variance across windows of each bin's amplitude, summed over bins
 * and averaged over channels. Smaller means a more stationary spectrum.
 */
double spectral_variance(std::span<const Matrix> windows);

/// Fraction of windows in which each bin is among the per-channel top-k; B x D.
Matrix frequency_selection_density(std::span<const Matrix> windows, std::size_t k);

} // namespace fan::spectral
