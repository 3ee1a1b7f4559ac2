#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>

namespace fan {

/// Column-major dense matrix. Time runs down the rows, channels across columns.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

inline std::span<const double> column_span(const Matrix& m, Eigen::Index col) {
	return {m.col(col).data(), static_cast<std::size_t>(m.rows())};
}

inline std::span<double> column_span(Matrix& m, Eigen::Index col) {
	return {m.col(col).data(), static_cast<std::size_t>(m.rows())};
}

/**
 * SplitMix64 generator. Used for everything seeded in the library (parameter
 * init, shuffling, synthetic noise) so results are bitwise reproducible across
 * standard library implementations.
 */
class SplitMix64 {
public:
	explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

	std::uint64_t next() noexcept {
		std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
		z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
		z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
		return z ^ (z >> 31);
	}

	/// Uniform in [0, 1) with 53 bits of precision.
	double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

	double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

	/// Uniform integer in [0, bound) by rejection (bound > 0).
	std::uint64_t below(std::uint64_t bound) noexcept {
		const std::uint64_t limit = bound * (UINT64_MAX / bound);
		std::uint64_t r = next();
		while (r >= limit) {
			r = next();
		}
		return r % bound;
	}

	/// Standard normal via Box-Muller (one draw per call).
	double normal() noexcept;

private:
	std::uint64_t state_;
};

inline double SplitMix64::normal() noexcept {
	double u1 = uniform();
	while (u1 <= 0.0) {
		u1 = uniform();
	}
	const double u2 = uniform();
	constexpr double two_pi = 6.283185307179586476925286766559;
	return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) noexcept {
	for (std::size_t i = items.size(); i > 1; --i) {
		const std::size_t j = static_cast<std::size_t>(rng.below(i));
		std::swap(items[i - 1], items[j]);
	}
}

} // namespace fan
