#pragma once

#include "fan/data.hpp"
#include "fan/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

/**
 * Front-end commands. Each command is an ordinary function so that tests and
 * the acceptance suite can run it in-process; `run` adds argument parsing and
 * the exit-code/error-line contract used by the `fan` executable.
 */
namespace fan::cli {

using Json = nlohmann::ordered_json;

/// Version string recorded in every manifest.
std::string tool_version();

struct SynthOptions {
	std::filesystem::path out;
	std::optional<std::string> preset;
	std::optional<std::filesystem::path> spec_file;
	std::uint64_t seed = 1;
	std::optional<Eigen::Index> length;
	std::optional<double> noise_std;
};

/// Writes the CSV and `<out>.manifest.json`; returns the manifest.
Json cmd_synth(const SynthOptions& options);

/// Training flags shared by `train` and `ablate`.
struct TrainingFlags {
	std::filesystem::path data;
	Eigen::Index lookback = 96;
	Eigen::Index horizon = 96;
	std::string k = "auto";
	double k_ratio = 0.1;
	std::vector<std::uint64_t> seeds{1};
	std::size_t batch_size = 32;
	double learning_rate = 3e-4;
	std::size_t max_epochs = 100;
	std::size_t patience = 5;
	Eigen::Index kernel = 25;
	std::vector<Eigen::Index> hidden{64, 128};
	bool predictor_bias = false;
	std::filesystem::path out = "runs";
	bool verbose = false;
};

struct TrainOptions {
	TrainingFlags flags;
	std::string normalizer = "fan";
	std::string backbone = "dlinear";
};

/**
 * Trains one model per seed and writes metrics.json, manifest.json,
 * history.json and one checkpoint per seed under flags.out. Returns the
 * metrics report.
 */
Json cmd_train(const TrainOptions& options, std::ostream& log);

struct AblateOptions {
	TrainingFlags flags;
	std::vector<std::string> variants{"full", "no-predict", "pure-backbone", "no-backbone"};
};

/// Known ablation variants, in canonical order.
std::vector<std::string> ablation_variant_names();

/// Trains every variant under identical seeds and budget; writes ablation.json and manifest.json.
Json cmd_ablate(const AblateOptions& options, std::ostream& log);

struct DiagnoseOptions {
	std::filesystem::path data;
	std::string k = "auto";
	double k_ratio = 0.1;
	Eigen::Index lookback = 96;
	std::optional<std::filesystem::path> out;
};

/// Stationarity and dataset diagnostics; optionally also written to `out`.
Json cmd_diagnose(const DiagnoseOptions& options, std::ostream& log);

/// Loads a CSV and returns it together with the fingerprint of its bytes.
struct LoadedData {
	data::SeriesFrame frame;
	std::uint64_t fingerprint = 0;
};
LoadedData load_dataset(const std::filesystem::path& path);

/// Sample mean and standard deviation (n - 1 denominator, 0 for a single value).
struct Summary {
	double mean = 0.0;
	double std = 0.0;
};
Summary summarize(const std::vector<double>& values);

/// Parses argv-style arguments (without the program name) and runs the command.
/// Returns the process exit code; errors are reported as one line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fan::cli
