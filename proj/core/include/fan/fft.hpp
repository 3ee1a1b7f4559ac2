#pragma once

#include "fan/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace fan {

/**
 * Mixed-radix complex FFT for arbitrary lengths.
 *
 * The length is factored into primes; each stage costs O(n * p) for its prime
 * factor p, so smooth lengths (96, 720, ...) run in O(n log n) and a prime
 * length degenerates to a direct O(n^2) evaluation.
 *
 * A plan is immutable after construction and may be shared between threads.
 */
class FftPlan {
public:
	explicit FftPlan(std::size_t n);

	std::size_t size() const noexcept { return n_; }

	/// out[w] = sum_t in[t] exp(-2 pi i w t / n). Unnormalized.
	void forward(std::span<const Complex> in, std::span<Complex> out) const;

	/// out[t] = sum_w in[w] exp(+2 pi i w t / n). Unnormalized (no 1/n).
	void backward(std::span<const Complex> in, std::span<Complex> out) const;

private:
	void transform(std::span<const Complex> in, std::span<Complex> out, bool inverse) const;
	void recurse(Complex* out, const Complex* in, std::size_t n, std::size_t stride,
	             std::size_t level, bool inverse, Complex* scratch) const;

	std::size_t n_;
	std::vector<std::size_t> factors_;
	std::vector<Complex> forward_twiddles_;  // exp(-2 pi i j / n)
	std::vector<Complex> backward_twiddles_; // exp(+2 pi i j / n)
	std::size_t max_factor_ = 1;
};

/// Per-thread cached plan for length n.
const FftPlan& fft_plan(std::size_t n);

} // namespace fan
