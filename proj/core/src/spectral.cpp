#include "fan/spectral.hpp"

#include "fan/error.hpp"
#include "fan/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace fan::spectral {

namespace {

inline double magnitude(const Complex& z) noexcept {
	return std::sqrt(z.real() * z.real() + z.imag() * z.imag());
}

void require_finite(std::span<const double> x) {
	for (std::size_t i = 0; i < x.size(); ++i) {
		if (!std::isfinite(x[i])) {
			fail(ErrorKind::InvalidInput, "non-finite sample at index " + std::to_string(i));
		}
	}
}

void require_window(const Matrix& window) {
	if (window.rows() < 2) {
		fail(ErrorKind::InvalidLength, "window length must be >= 2, got " + std::to_string(window.rows()));
	}
	if (window.cols() < 1) {
		fail(ErrorKind::Shape, "window has no channels");
	}
	if (!window.allFinite()) {
		fail(ErrorKind::InvalidInput, "window contains non-finite values");
	}
}

void require_same_shape(std::span<const Matrix> windows) {
	for (const Matrix& w : windows) {
		if (w.rows() != windows[0].rows() || w.cols() != windows[0].cols()) {
			fail(ErrorKind::Shape, "windows differ in shape");
		}
	}
}

// Amplitude spectrum of one channel without input validation (hot path).
void channel_amplitude(std::span<const double> x, std::span<double> out, std::vector<Complex>& buffer,
                       std::vector<Complex>& spectrum) {
	const std::size_t length = x.size();
	buffer.assign(x.begin(), x.end());
	spectrum.resize(length);
	fft_plan(length).forward(buffer, spectrum);
	const double inv = 1.0 / static_cast<double>(length);
	for (std::size_t w = 0; w < out.size(); ++w) {
		out[w] = magnitude(spectrum[w]) * inv;
	}
}

} // namespace

std::vector<Complex> rdft(std::span<const double> x) {
	if (x.size() < 2) {
		fail(ErrorKind::InvalidLength, "rdft needs at least 2 samples, got " + std::to_string(x.size()));
	}
	require_finite(x);
	std::vector<Complex> buffer(x.begin(), x.end());
	std::vector<Complex> full(x.size());
	fft_plan(x.size()).forward(buffer, full);
	full.resize(bin_count(x.size()));
	return full;
}

Spectrum rdft(const Matrix& window) {
	require_window(window);
	Spectrum s;
	s.origin_len = static_cast<std::size_t>(window.rows());
	s.coeffs.reserve(static_cast<std::size_t>(window.cols()));
	for (Eigen::Index d = 0; d < window.cols(); ++d) {
		s.coeffs.push_back(rdft(column_span(window, d)));
	}
	return s;
}

std::vector<double> irdft(std::span<const Complex> z, std::size_t length) {
	if (length == 0 || z.size() != bin_count(length)) {
		fail(ErrorKind::Shape, "spectrum has " + std::to_string(z.size()) + " bins, length " +
		                           std::to_string(length) + " needs " + std::to_string(bin_count(length)));
	}
	std::vector<Complex> full(length);
	full[0] = Complex(z[0].real(), 0.0);
	for (std::size_t w = 1; w < z.size(); ++w) {
		full[w] = z[w];
		full[length - w] = std::conj(z[w]);
	}
	if (length % 2 == 0) {
		full[length / 2] = Complex(z[length / 2].real(), 0.0);
	}
	std::vector<Complex> time(length);
	fft_plan(length).backward(full, time);
	std::vector<double> x(length);
	const double inv = 1.0 / static_cast<double>(length);
	for (std::size_t t = 0; t < length; ++t) {
		x[t] = time[t].real() * inv;
	}
	return x;
}

Matrix irdft(const Spectrum& spectrum) {
	Matrix out(static_cast<Eigen::Index>(spectrum.origin_len), static_cast<Eigen::Index>(spectrum.channels()));
	for (std::size_t d = 0; d < spectrum.channels(); ++d) {
		const std::vector<double> x = irdft(spectrum.coeffs[d], spectrum.origin_len);
		std::copy(x.begin(), x.end(), out.col(static_cast<Eigen::Index>(d)).data());
	}
	return out;
}

std::vector<double> amplitude(std::span<const Complex> z, std::size_t length) {
	if (length == 0) {
		fail(ErrorKind::InvalidLength, "amplitude needs a positive window length");
	}
	std::vector<double> a(z.size());
	const double inv = 1.0 / static_cast<double>(length);
	for (std::size_t w = 0; w < z.size(); ++w) {
		a[w] = magnitude(z[w]) * inv;
	}
	return a;
}

std::vector<double> phase(std::span<const Complex> z) {
	std::vector<double> p(z.size());
	for (std::size_t w = 0; w < z.size(); ++w) {
		if (z[w] == Complex(0.0, 0.0)) {
			p[w] = 0.0;
			continue;
		}
		// atan2 returns -pi for (-x, -0.0); fold onto the half-open range.
		const double angle = std::atan2(z[w].imag(), z[w].real());
		p[w] = angle == -std::numbers::pi ? std::numbers::pi : angle;
	}
	return p;
}

std::vector<std::size_t> top_k_indices(std::span<const double> amp, std::size_t k) {
	if (k < 1) {
		fail(ErrorKind::InvalidParameter, "top-k needs k >= 1");
	}
	std::vector<std::size_t> order(amp.size());
	std::iota(order.begin(), order.end(), std::size_t{0});
	const std::size_t take = std::min(k, amp.size());
	auto by_amplitude = [&](std::size_t a, std::size_t b) {
		if (amp[a] != amp[b]) {
			return amp[a] > amp[b];
		}
		return a < b;
	};
	std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), by_amplitude);
	order.resize(take);
	std::sort(order.begin(), order.end());
	return order;
}

std::vector<Complex> filter_spectrum(std::span<const Complex> z, std::span<const std::size_t> mask) {
	std::vector<Complex> kept(z.size(), Complex(0.0, 0.0));
	for (std::size_t w : mask) {
		if (w >= z.size()) {
			fail(ErrorKind::Index, "mask bin " + std::to_string(w) + " outside spectrum of " +
			                           std::to_string(z.size()) + " bins");
		}
		kept[w] = z[w];
	}
	return kept;
}

Decomposition frl_decompose(const Matrix& window, std::size_t k) {
	if (k < 1) {
		fail(ErrorKind::InvalidParameter, "FRL needs k >= 1");
	}
	require_window(window);
	const auto length = static_cast<std::size_t>(window.rows());
	Decomposition out;
	out.x_non.resize(window.rows(), window.cols());
	out.mask.k = k;
	out.mask.indices.reserve(static_cast<std::size_t>(window.cols()));
	for (Eigen::Index d = 0; d < window.cols(); ++d) {
		const std::vector<Complex> z = rdft(column_span(window, d));
		std::vector<std::size_t> idx = top_k_indices(amplitude(z, length), k);
		const std::vector<double> x_non = irdft(filter_spectrum(z, idx), length);
		std::copy(x_non.begin(), x_non.end(), out.x_non.col(d).data());
		out.mask.indices.push_back(std::move(idx));
	}
	out.x_res = window - out.x_non;
	return out;
}

Decomposition frl_decompose_with_mask(const Matrix& window, const FrequencyMask& mask) {
	require_window(window);
	if (mask.channels() == 0 || window.cols() % static_cast<Eigen::Index>(mask.channels()) != 0) {
		fail(ErrorKind::Shape, "mask has " + std::to_string(mask.channels()) + " channels, window has " +
		                           std::to_string(window.cols()));
	}
	const auto length = static_cast<std::size_t>(window.rows());
	Decomposition out;
	out.x_non.resize(window.rows(), window.cols());
	out.mask.k = mask.k;
	for (Eigen::Index c = 0; c < window.cols(); ++c) {
		const auto& idx = mask.indices[static_cast<std::size_t>(c) % mask.channels()];
		const std::vector<Complex> z = rdft(column_span(window, c));
		const std::vector<double> x_non = irdft(filter_spectrum(z, idx), length);
		std::copy(x_non.begin(), x_non.end(), out.x_non.col(c).data());
		out.mask.indices.push_back(idx);
	}
	out.x_res = window - out.x_non;
	return out;
}

Matrix mean_amplitude(std::span<const Matrix> windows) {
	if (windows.empty()) {
		fail(ErrorKind::InvalidInput, "no windows");
	}
	require_same_shape(windows);
	const Eigen::Index length = windows[0].rows();
	if (length < 2) {
		fail(ErrorKind::InvalidLength, "window length must be >= 2");
	}
	const auto bins = static_cast<Eigen::Index>(bin_count(static_cast<std::size_t>(length)));
	Matrix sum = Matrix::Zero(bins, windows[0].cols());
	std::vector<Complex> buffer;
	std::vector<Complex> spectrum;
	std::vector<double> amp(static_cast<std::size_t>(bins));
	for (const Matrix& w : windows) {
		if (!w.allFinite()) {
			fail(ErrorKind::InvalidInput, "window contains non-finite values");
		}
		for (Eigen::Index d = 0; d < w.cols(); ++d) {
			channel_amplitude(column_span(w, d), amp, buffer, spectrum);
			for (Eigen::Index b = 0; b < bins; ++b) {
				sum(b, d) += amp[static_cast<std::size_t>(b)];
			}
		}
	}
	return sum / static_cast<double>(windows.size());
}

std::size_t select_k_by_amplitude_rule(std::span<const Matrix> windows, double ratio) {
	if (!(ratio > 0.0 && ratio <= 1.0)) {
		fail(ErrorKind::InvalidParameter, "ratio must lie in (0, 1]");
	}
	const Vector avg = mean_amplitude(windows).rowwise().mean();
	const double threshold = ratio * avg.maxCoeff();
	// Relative slack so that tones of equal amplitude survive FFT rounding.
	const double slack = 1e-12 * avg.maxCoeff();
	std::size_t k = 0;
	for (Eigen::Index b = 0; b < avg.size(); ++b) {
		if (avg(b) >= threshold - slack) {
			++k;
		}
	}
	return std::max<std::size_t>(k, 1);
}

FrequencyMask global_mask(std::span<const Matrix> windows, std::size_t k) {
	const Matrix avg = mean_amplitude(windows);
	FrequencyMask mask;
	mask.k = k;
	for (Eigen::Index d = 0; d < avg.cols(); ++d) {
		mask.indices.push_back(top_k_indices(column_span(avg, d), k));
	}
	return mask;
}

double spectral_variance(std::span<const Matrix> windows) {
	if (windows.size() < 2) {
		fail(ErrorKind::InvalidInput, "spectral variance needs at least 2 windows");
	}
	require_same_shape(windows);
	const Eigen::Index length = windows[0].rows();
	const Eigen::Index channels = windows[0].cols();
	const auto bins = static_cast<Eigen::Index>(bin_count(static_cast<std::size_t>(length)));
	// Welford per (bin, channel) keeps the result stable for large window counts.
	Matrix mean = Matrix::Zero(bins, channels);
	Matrix m2 = Matrix::Zero(bins, channels);
	std::vector<Complex> buffer;
	std::vector<Complex> spectrum;
	std::vector<double> amp(static_cast<std::size_t>(bins));
	double count = 0.0;
	for (const Matrix& w : windows) {
		if (!w.allFinite()) {
			fail(ErrorKind::InvalidInput, "window contains non-finite values");
		}
		count += 1.0;
		for (Eigen::Index d = 0; d < channels; ++d) {
			channel_amplitude(column_span(w, d), amp, buffer, spectrum);
			for (Eigen::Index b = 0; b < bins; ++b) {
				const double a = amp[static_cast<std::size_t>(b)];
				const double delta = a - mean(b, d);
				mean(b, d) += delta / count;
				m2(b, d) += delta * (a - mean(b, d));
			}
		}
	}
	const Matrix variance = m2 / count;
	return variance.colwise().sum().mean();
}

Matrix frequency_selection_density(std::span<const Matrix> windows, std::size_t k) {
	if (k < 1) {
		fail(ErrorKind::InvalidParameter, "density needs k >= 1");
	}
	if (windows.empty()) {
		fail(ErrorKind::InvalidInput, "no windows");
	}
	require_same_shape(windows);
	const Eigen::Index length = windows[0].rows();
	if (length < 2) {
		fail(ErrorKind::InvalidLength, "window length must be >= 2");
	}
	const auto bins = static_cast<Eigen::Index>(bin_count(static_cast<std::size_t>(length)));
	Matrix counts = Matrix::Zero(bins, windows[0].cols());
	std::vector<Complex> buffer;
	std::vector<Complex> spectrum;
	std::vector<double> amp(static_cast<std::size_t>(bins));
	for (const Matrix& w : windows) {
		if (!w.allFinite()) {
			fail(ErrorKind::InvalidInput, "window contains non-finite values");
		}
		for (Eigen::Index d = 0; d < w.cols(); ++d) {
			channel_amplitude(column_span(w, d), amp, buffer, spectrum);
			for (std::size_t b : top_k_indices(amp, k)) {
				counts(static_cast<Eigen::Index>(b), d) += 1.0;
			}
		}
	}
	return counts / static_cast<double>(windows.size());
}

} // namespace fan::spectral
