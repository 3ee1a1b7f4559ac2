#include "fan/fft.hpp"

#include "fan/error.hpp"

#include <memory>
#include <numbers>
#include <string>
#include <unordered_map>

namespace fan {

namespace {

std::vector<std::size_t> prime_factors(std::size_t n) {
	std::vector<std::size_t> factors;
	for (std::size_t p = 2; p * p <= n; ++p) {
		while (n % p == 0) {
			factors.push_back(p);
			n /= p;
		}
	}
	if (n > 1) {
		factors.push_back(n);
	}
	return factors;
}

// std::complex operator* goes through the C99 Annex G NaN recovery path.
inline Complex mul(const Complex& a, const Complex& b) noexcept {
	return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

} // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
	if (n == 0) {
		fail(ErrorKind::InvalidLength, "FFT length must be positive");
	}
	factors_ = prime_factors(n);
	for (std::size_t p : factors_) {
		max_factor_ = std::max(max_factor_, p);
	}
	forward_twiddles_.resize(n);
	backward_twiddles_.resize(n);
	for (std::size_t j = 0; j < n; ++j) {
		const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
		forward_twiddles_[j] = Complex(std::cos(angle), std::sin(angle));
		backward_twiddles_[j] = std::conj(forward_twiddles_[j]);
	}
}

void FftPlan::forward(std::span<const Complex> in, std::span<Complex> out) const {
	transform(in, out, false);
}

void FftPlan::backward(std::span<const Complex> in, std::span<Complex> out) const {
	transform(in, out, true);
}

void FftPlan::transform(std::span<const Complex> in, std::span<Complex> out, bool inverse) const {
	if (in.size() != n_ || out.size() != n_) {
		fail(ErrorKind::Shape, "FFT buffer size " + std::to_string(in.size()) + "/" +
		                           std::to_string(out.size()) + " does not match plan length " +
		                           std::to_string(n_));
	}
	if (in.data() == out.data()) {
		std::vector<Complex> copy(in.begin(), in.end());
		transform(copy, out, inverse);
		return;
	}
	std::vector<Complex> scratch(2 * max_factor_);
	recurse(out.data(), in.data(), n_, 1, 0, inverse, scratch.data());
}

// Decimation in time. On return out[0..n) holds the DFT of in[0], in[stride], ...
// The sub-transform for residue r lands in out[r*m .. r*m+m); the butterfly for
// output k reads out[k + r*m] for all r and writes the same index set, so it can
// run in place with p scratch values.
void FftPlan::recurse(Complex* out, const Complex* in, std::size_t n, std::size_t stride,
                      std::size_t level, bool inverse, Complex* scratch) const {
	if (n == 1) {
		out[0] = in[0];
		return;
	}
	const std::size_t p = factors_[level];
	const std::size_t m = n / p;
	for (std::size_t r = 0; r < p; ++r) {
		recurse(out + r * m, in + r * stride, m, stride * p, level + 1, inverse, scratch);
	}

	const Complex* tw = inverse ? backward_twiddles_.data() : forward_twiddles_.data();

	if (p == 2) {
		for (std::size_t k = 0; k < m; ++k) {
			const Complex a = out[k];
			const Complex b = mul(out[m + k], tw[k * stride]);
			out[k] = a + b;
			out[k + m] = a - b;
		}
		return;
	}
	if (p == 3) {
		// W_3 = -1/2 -+ i sqrt(3)/2
		const double s = (inverse ? 1.0 : -1.0) * std::numbers::sqrt3 / 2.0;
		for (std::size_t k = 0; k < m; ++k) {
			const Complex a = out[k];
			const Complex b = mul(out[m + k], tw[k * stride]);
			const Complex c = mul(out[2 * m + k], tw[2 * k * stride]);
			const Complex sum = b + c;
			const Complex diff = b - c;
			const Complex base = a - 0.5 * sum;
			const Complex rot(-s * diff.imag(), s * diff.real()); // i * s * diff
			out[k] = a + sum;
			out[k + m] = base + rot;
			out[k + 2 * m] = base - rot;
		}
		return;
	}

	Complex* rotated = scratch;
	Complex* result = scratch + p;
	const std::size_t root_step = n_ / p; // W_p = W_N^(N/p)
	for (std::size_t k = 0; k < m; ++k) {
		rotated[0] = out[k];
		for (std::size_t r = 1; r < p; ++r) {
			rotated[r] = mul(out[r * m + k], tw[r * k * stride]);
		}
		for (std::size_t q = 0; q < p; ++q) {
			Complex acc = rotated[0];
			std::size_t j = 0;
			for (std::size_t r = 1; r < p; ++r) {
				j += q;
				if (j >= p) {
					j -= p;
				}
				acc += mul(rotated[r], tw[j * root_step]);
			}
			result[q] = acc;
		}
		for (std::size_t q = 0; q < p; ++q) {
			out[k + q * m] = result[q];
		}
	}
}

const FftPlan& fft_plan(std::size_t n) {
	thread_local std::unordered_map<std::size_t, std::unique_ptr<FftPlan>> cache;
	auto it = cache.find(n);
	if (it == cache.end()) {
		it = cache.emplace(n, std::make_unique<FftPlan>(n)).first;
	}
	return *it->second;
}

} // namespace fan
