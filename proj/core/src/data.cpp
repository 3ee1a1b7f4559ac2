#include "fan/data.hpp"

#include "fan/error.hpp"
#include "fan/spectral.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string_view>

namespace fan::data {

namespace {

std::string_view trim(std::string_view s) {
	while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
		s.remove_prefix(1);
	}
	while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
		s.remove_suffix(1);
	}
	return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
	std::vector<std::string_view> fields;
	std::size_t start = 0;
	while (true) {
		const std::size_t comma = line.find(',', start);
		if (comma == std::string_view::npos) {
			fields.push_back(trim(line.substr(start)));
			return fields;
		}
		fields.push_back(trim(line.substr(start, comma - start)));
		start = comma + 1;
	}
}

bool parse_number(std::string_view text, double& out) {
	if (!text.empty() && text.front() == '+') {
		text.remove_prefix(1);
	}
	if (text.empty()) {
		return false;
	}
	const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
	return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split_lines(std::string_view text) {
	std::vector<std::string_view> lines;
	std::size_t start = 0;
	while (start < text.size()) {
		std::size_t nl = text.find('\n', start);
		if (nl == std::string_view::npos) {
			nl = text.size();
		}
		std::string_view line = text.substr(start, nl - start);
		if (!line.empty() && line.back() == '\r') {
			line.remove_suffix(1);
		}
		lines.push_back(line);
		start = nl + 1;
	}
	while (!lines.empty() && trim(lines.back()).empty()) {
		lines.pop_back();
	}
	return lines;
}

std::string format_number(double v) {
	char buffer[32];
	const int n = std::snprintf(buffer, sizeof(buffer), "%.12g", v);
	return std::string(buffer, static_cast<std::size_t>(n));
}

} // namespace

void validate(const SeriesFrame& frame) {
	if (frame.values.rows() < 2) {
		fail(ErrorKind::InvalidInput, "series needs at least 2 rows, got " + std::to_string(frame.values.rows()));
	}
	if (frame.values.cols() < 1) {
		fail(ErrorKind::InvalidInput, "series has no channels");
	}
	if (static_cast<Eigen::Index>(frame.channel_names.size()) != frame.values.cols()) {
		fail(ErrorKind::Shape, "channel names do not match channel count");
	}
	if (!frame.values.allFinite()) {
		fail(ErrorKind::InvalidInput, "series contains non-finite values");
	}
	std::set<std::string> seen;
	for (const auto& name : frame.channel_names) {
		if (!seen.insert(name).second) {
			fail(ErrorKind::Format, "duplicate channel name '" + name + "'");
		}
	}
}

SeriesFrame parse_csv(const std::string& text, const std::string& source) {
	const auto lines = split_lines(text);
	if (lines.empty()) {
		fail(ErrorKind::Format, source + ": empty file");
	}
	const auto header = split_fields(lines[0]);
	if (lines.size() < 2) {
		fail(ErrorKind::Format, source + ": no data rows");
	}

	std::size_t skip = 0;
	{
		const auto first = split_fields(lines[1]);
		double probe = 0.0;
		if (!first.empty() && !parse_number(first[0], probe)) {
			skip = 1;
		}
	}
	if (header.size() <= skip) {
		fail(ErrorKind::Format, source + ": no numeric columns");
	}

	const std::size_t width = header.size();
	const auto rows = static_cast<Eigen::Index>(lines.size() - 1);
	const auto cols = static_cast<Eigen::Index>(width - skip);
	SeriesFrame frame;
	frame.source = source;
	frame.values.resize(rows, cols);
	for (std::size_t c = skip; c < width; ++c) {
		frame.channel_names.emplace_back(header[c]);
	}
	for (Eigen::Index r = 0; r < rows; ++r) {
		const auto line_no = static_cast<std::size_t>(r) + 2;
		const auto fields = split_fields(lines[static_cast<std::size_t>(r) + 1]);
		if (fields.size() != width) {
			fail(ErrorKind::Format, source + ": row " + std::to_string(line_no) + " has " +
			                            std::to_string(fields.size()) + " fields, header has " + std::to_string(width));
		}
		for (std::size_t c = skip; c < width; ++c) {
			double v = 0.0;
			if (!parse_number(fields[c], v) || !std::isfinite(v)) {
				fail(ErrorKind::Parse, source + ": row " + std::to_string(line_no) + ", column " +
				                           std::to_string(c + 1) + " ('" + std::string(header[c]) +
				                           "'): cannot parse '" + std::string(fields[c]) + "' as a finite number");
			}
			frame.values(r, static_cast<Eigen::Index>(c - skip)) = v;
		}
	}
	validate(frame);
	return frame;
}

SeriesFrame load_csv(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
	}
	std::ostringstream buffer;
	buffer << in.rdbuf();
	return parse_csv(buffer.str(), path.string());
}

std::string format_csv(const SeriesFrame& frame) {
	std::string out;
	for (std::size_t c = 0; c < frame.channel_names.size(); ++c) {
		if (c > 0) {
			out += ',';
		}
		out += frame.channel_names[c];
	}
	out += '\n';
	for (Eigen::Index r = 0; r < frame.values.rows(); ++r) {
		for (Eigen::Index c = 0; c < frame.values.cols(); ++c) {
			if (c > 0) {
				out += ',';
			}
			out += format_number(frame.values(r, c));
		}
		out += '\n';
	}
	return out;
}

void write_csv(const SeriesFrame& frame, const std::filesystem::path& path) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
	}
	out << format_csv(frame);
	if (!out) {
		fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
	}
}

SplitBounds split_bounds(Eigen::Index length, const SplitRatios& ratios) {
	if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0) ||
	    std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
		fail(ErrorKind::InvalidParameter, "split ratios must be positive and sum to 1");
	}
	const auto n = static_cast<double>(length);
	// Small offset so that 0.7 + 0.2 lands on 0.9 * N rather than one row below.
	const auto train_end = static_cast<Eigen::Index>(std::floor(n * ratios.train + 1e-6));
	const auto val_end = static_cast<Eigen::Index>(std::floor(n * (ratios.train + ratios.val) + 1e-6));
	SplitBounds bounds;
	bounds.edges = {0, train_end, val_end, length};
	return bounds;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

namespace {

const std::array<SignalSpec, 9>& reference_signals() {
	static const std::array<SignalSpec, 9> signals{{
	    {12.0, {0, 1, 2, 4}},
	    {16.0, {1, 3, 5, 6}},
	    {24.0, {3, 4, 6, 8}},
	    {36.0, {1, 2, 4, 5}},
	    {48.0, {1, 3, 5, 6}},
	    {60.0, {1, 3, 5, 6}},
	    {72.0, {1, 3, 5, 6}},
	    {84.0, {1, 3, 5, 6}},
	    {96.0, {1, 3, 5, 6}},
	}};
	return signals;
}

} // namespace

std::vector<std::string> synthetic_preset_names() {
	return {"syn5", "syn6", "syn7", "syn8", "syn9"};
}

SyntheticSpec synthetic_preset(const std::string& name) {
	for (const auto& preset : synthetic_preset_names()) {
		if (preset == name) {
			const int dims = name.back() - '0';
			SyntheticSpec spec;
			spec.signals.assign(reference_signals().begin(), reference_signals().begin() + dims);
			spec.dims = dims;
			return spec;
		}
	}
	fail(ErrorKind::InvalidParameter, "unknown preset '" + name + "' (valid: syn5, syn6, syn7, syn8, syn9)");
}

double synthetic_amplitude(const SignalSpec& signal, Eigen::Index t, Eigen::Index length, const SplitRatios& ratios) {
	const SplitBounds bounds = split_bounds(length, ratios);
	const std::array<double, 4> at{0.0, static_cast<double>(bounds.edges[1]), static_cast<double>(bounds.edges[2]),
	                               static_cast<double>(length - 1)};
	const auto tt = static_cast<double>(t);
	for (std::size_t seg = 0; seg < 3; ++seg) {
		if (tt <= at[seg + 1] || seg == 2) {
			const double span = at[seg + 1] - at[seg];
			if (span <= 0.0) {
				return signal.anchors[seg + 1];
			}
			const double frac = (tt - at[seg]) / span;
			if (frac == 1.0) {
				return signal.anchors[seg + 1];
			}
			return signal.anchors[seg] + frac * (signal.anchors[seg + 1] - signal.anchors[seg]);
		}
	}
	return signal.anchors[3];
}

SeriesFrame generate_synthetic(const SyntheticSpec& spec, const SplitRatios& ratios) {
	if (spec.dims < 1 || static_cast<std::size_t>(spec.dims) > spec.signals.size()) {
		fail(ErrorKind::InvalidParameter, "synthetic dims must lie in [1, number of signals]");
	}
	if (spec.length < 4) {
		fail(ErrorKind::InvalidParameter, "synthetic length must be >= 4");
	}
	if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
		fail(ErrorKind::InvalidParameter, "noise_std must be a finite value >= 0");
	}
	for (const auto& s : spec.signals) {
		if (!(s.period > 0.0) || !std::isfinite(s.period)) {
			fail(ErrorKind::InvalidParameter, "signal periods must be positive");
		}
		for (double a : s.anchors) {
			if (!std::isfinite(a)) {
				fail(ErrorKind::InvalidParameter, "amplitude anchors must be finite");
			}
		}
	}
	const Eigen::Index n = spec.length;
	const auto dims = spec.dims;
	// Column j of `tones` is signal j alone; channel i accumulates columns 0..i.
	Matrix tones(n, dims);
	for (Eigen::Index j = 0; j < dims; ++j) {
		const SignalSpec& signal = spec.signals[static_cast<std::size_t>(j)];
		for (Eigen::Index t = 0; t < n; ++t) {
			const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / signal.period;
			tones(t, j) = synthetic_amplitude(signal, t, n, ratios) * std::sin(phase);
		}
	}
	SeriesFrame frame;
	frame.values.resize(n, dims);
	frame.values.col(0) = tones.col(0);
	for (Eigen::Index i = 1; i < dims; ++i) {
		frame.values.col(i) = frame.values.col(i - 1) + tones.col(i);
	}
	if (spec.noise_std > 0.0) {
		SplitMix64 rng(spec.seed);
		for (Eigen::Index i = 0; i < dims; ++i) {
			for (Eigen::Index t = 0; t < n; ++t) {
				frame.values(t, i) += spec.noise_std * rng.normal();
			}
		}
	}
	for (Eigen::Index i = 0; i < dims; ++i) {
		frame.channel_names.push_back("ch" + std::to_string(i + 1));
	}
	frame.source = "synthetic";
	return frame;
}

// ---------------------------------------------------------------------------
// Dataset characterization

DatasetStats dataset_stats(const SeriesFrame& frame, const SplitRatios& ratios, Eigen::Index lookback) {
	validate(frame);
	if (lookback < 2) {
		fail(ErrorKind::InvalidLength, "lookback must be >= 2");
	}
	const Eigen::Index n = frame.length();
	const SplitBounds bounds = split_bounds(n, ratios);
	for (std::size_t part = 0; part < 3; ++part) {
		if (bounds.end(part) - bounds.begin(part) < lookback + 1) {
			fail(ErrorKind::InvalidInput, "each split needs at least 2 windows of length " + std::to_string(lookback));
		}
	}
	DatasetStats stats;
	const Eigen::Index train_rows = bounds.end(0);
	const Matrix& v = frame.values;
	const Vector train_mean = v.topRows(train_rows).colwise().mean().transpose();
	const Vector rest_mean = v.bottomRows(n - train_rows).colwise().mean().transpose();
	stats.trend_variation.resize(frame.channels());
	for (Eigen::Index d = 0; d < frame.channels(); ++d) {
		if (train_mean(d) == 0.0) {
			stats.trend_variation(d) = std::numeric_limits<double>::infinity();
			stats.warnings.push_back("channel '" + frame.channel_names[static_cast<std::size_t>(d)] +
			                         "' has zero training mean; trend variation reported as +inf");
		} else {
			stats.trend_variation(d) = std::abs((train_mean(d) - rest_mean(d)) / train_mean(d));
		}
	}

	// Per-channel variance summed over bins; divide by bin count for the spectrum average.
	const auto bins = static_cast<double>(spectral::bin_count(static_cast<std::size_t>(lookback)));
	for (Eigen::Index d = 0; d < frame.channels(); ++d) {
		std::vector<Matrix> channel;
		channel.reserve(static_cast<std::size_t>(n - lookback + 1));
		for (Eigen::Index s = 0; s + lookback <= n; ++s) {
			channel.emplace_back(v.col(d).segment(s, lookback));
		}
		const double variance = spectral::spectral_variance(channel) / bins;
		const double level = v.col(d).cwiseAbs().mean();
		if (level == 0.0) {
			if (variance != 0.0) {
				stats.seasonality_variation = std::numeric_limits<double>::infinity();
			}
			continue;
		}
		stats.seasonality_variation += variance / level;
	}
	return stats;
}

std::uint64_t fingerprint(const std::string& bytes) noexcept {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (unsigned char c : bytes) {
		h ^= c;
		h *= 0x100000001b3ULL;
	}
	return h;
}

} // namespace fan::data
