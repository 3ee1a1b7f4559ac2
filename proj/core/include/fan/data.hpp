#pragma once

#include "fan/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fan::data {

/// N x D multivariate series.
struct SeriesFrame {
	Matrix values;
	std::vector<std::string> channel_names;
	std::string source;

	Eigen::Index length() const noexcept { return values.rows(); }
	Eigen::Index channels() const noexcept { return values.cols(); }
};

/// Checks N >= 2, finite values and unique channel names.
void validate(const SeriesFrame& frame);

/**
 * Reads a headered CSV. A leading column whose first data cell is not a number
 * (typically a timestamp) is skipped; LF and CRLF line endings are accepted.
 */
SeriesFrame load_csv(const std::filesystem::path& path);
SeriesFrame parse_csv(const std::string& text, const std::string& source = "<memory>");

/// LF line endings, numbers printed with 12 significant digits.
void write_csv(const SeriesFrame& frame, const std::filesystem::path& path);
std::string format_csv(const SeriesFrame& frame);

struct SplitRatios {
	double train = 0.7;
	double val = 0.2;
	double test = 0.1;
};

/// Row ranges [begin, end) of the chronological train/val/test split.
struct SplitBounds {
	std::array<Eigen::Index, 4> edges{}; // 0, train_end, val_end, N

	Eigen::Index begin(std::size_t part) const noexcept { return edges[part]; }
	Eigen::Index end(std::size_t part) const noexcept { return edges[part + 1]; }
};

SplitBounds split_bounds(Eigen::Index length, const SplitRatios& ratios);

struct SignalSpec {
	double period = 24.0;                   // in samples
	std::array<double, 4> anchors{1, 1, 1, 1}; // amplitude at start, train/val, val/test, end
};

/**
 * Channel i (1-based) is the sum of the first i signals,
 *   x_i[t] = sum_{j<=i} a_j(t) sin(2 pi t / T_j),
 * where a_j is the piecewise-linear interpolation of signal j's anchors placed
 * at rows 0, N*r_train, N*(r_train + r_val) and N-1.
 */
struct SyntheticSpec {
	std::vector<SignalSpec> signals;
	Eigen::Index dims = 1;
	Eigen::Index length = 10000;
	double noise_std = 0.0;
	std::uint64_t seed = 1;
};

/// Presets syn5 .. syn9: the first D of nine reference signals.
SyntheticSpec synthetic_preset(const std::string& name);
std::vector<std::string> synthetic_preset_names();

/// Amplitude of `signal` at row t of an N-row series.
double synthetic_amplitude(const SignalSpec& signal, Eigen::Index t, Eigen::Index length, const SplitRatios& ratios);

SeriesFrame generate_synthetic(const SyntheticSpec& spec, const SplitRatios& ratios = {});

struct DatasetStats {
	/// |mean(train) - mean(val+test)| / |mean(train)| per channel; +inf when the train mean is 0.
	Vector trend_variation;
	/// Sum over channels of the spectrum-averaged cross-window amplitude variance,
	/// each divided by the channel's mean absolute level.
	double seasonality_variation = 0.0;
	std::vector<std::string> warnings;
};

DatasetStats dataset_stats(const SeriesFrame& frame, const SplitRatios& ratios, Eigen::Index lookback);

/// FNV-1a 64-bit digest, used as a dataset fingerprint.
std::uint64_t fingerprint(const std::string& bytes) noexcept;

} // namespace fan::data
