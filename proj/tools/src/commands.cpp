#include "fan/cli/commands.hpp"

#include "fan/checkpoint.hpp"
#include "fan/error.hpp"
#include "fan/spectral.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#ifndef FAN_VERSION
#define FAN_VERSION "0.0.0"
#endif

namespace fan::cli {

namespace {

using normalizers::NormalizerKind;
using Clock = std::chrono::steady_clock;

std::string hex64(std::uint64_t v) {
	char buf[17];
	std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
	return buf;
}

std::string read_file(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		fail(ErrorKind::Io, "cannot open '" + path.string() + "' for reading");
	}
	std::ostringstream ss;
	ss << in.rdbuf();
	if (in.bad()) {
		fail(ErrorKind::Io, "read error on '" + path.string() + "'");
	}
	return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
	if (path.has_parent_path()) {
		std::error_code ec;
		std::filesystem::create_directories(path.parent_path(), ec);
		if (ec) {
			fail(ErrorKind::Io, "cannot create directory '" + path.parent_path().string() + "': " + ec.message());
		}
	}
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
	}
	out << text;
	out.flush();
	if (!out) {
		fail(ErrorKind::Io, "write error on '" + path.string() + "'");
	}
}

void write_json(const std::filesystem::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

void ensure_directory(const std::filesystem::path& dir) {
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	if (ec || !std::filesystem::is_directory(dir)) {
		fail(ErrorKind::Io, "cannot create output directory '" + dir.string() + "'");
	}
}

/// Non-finite numbers have no JSON representation; they are written as null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::optional<std::size_t> parse_k(const std::string& text) {
	if (text == "auto") {
		return std::nullopt;
	}
	std::size_t pos = 0;
	long long v = 0;
	try {
		v = std::stoll(text, &pos);
	} catch (const std::exception&) {
		pos = 0;
	}
	if (pos != text.size() || text.empty() || v < 1) {
		fail(ErrorKind::InvalidParameter, "--k must be a positive integer or 'auto', got '" + text + "'");
	}
	return static_cast<std::size_t>(v);
}

Json dataset_json(const std::filesystem::path& path, const LoadedData& loaded) {
	return Json{{"path", path.string()},
	            {"fingerprint", hex64(loaded.fingerprint)},
	            {"rows", loaded.frame.length()},
	            {"channels", loaded.frame.channels()},
	            {"channel_names", loaded.frame.channel_names}};
}

training::TrainConfig make_config(const TrainingFlags& flags, NormalizerKind normalizer,
                                  models::BackboneKind backbone) {
	training::TrainConfig c;
	c.lookback = flags.lookback;
	c.horizon = flags.horizon;
	c.k = parse_k(flags.k);
	c.k_ratio = flags.k_ratio;
	c.batch_size = flags.batch_size;
	c.learning_rate = flags.learning_rate;
	c.max_epochs = flags.max_epochs;
	c.patience = flags.patience;
	c.kernel = flags.kernel;
	c.hidden = flags.hidden;
	c.predictor_bias = flags.predictor_bias;
	c.normalizer = normalizer;
	c.backbone = backbone;
	c.validate();
	return c;
}

Json flags_json(const TrainingFlags& flags, const LoadedData& data) {
	Json k = flags.k == "auto" ? Json("auto") : Json(*parse_k(flags.k));
	return Json{{"lookback", flags.lookback},
	            {"horizon", flags.horizon},
	            {"k", k},
	            {"k_ratio", flags.k_ratio},
	            {"batch_size", flags.batch_size},
	            {"learning_rate", flags.learning_rate},
	            {"max_epochs", flags.max_epochs},
	            {"patience", flags.patience},
	            {"kernel", flags.kernel},
	            {"hidden", flags.hidden},
	            {"predictor_bias", flags.predictor_bias},
	            {"split", {{"train", 0.7}, {"val", 0.2}, {"test", 0.1}}},
	            {"dataset_fingerprint", hex64(data.fingerprint)}};
}

void check_seeds(const std::vector<std::uint64_t>& seeds) {
	if (seeds.empty()) {
		fail(ErrorKind::InvalidParameter, "at least one seed is required");
	}
	std::set<std::uint64_t> seen(seeds.begin(), seeds.end());
	if (seen.size() != seeds.size()) {
		fail(ErrorKind::InvalidParameter, "seeds must be distinct");
	}
}

/// K is a property of the training data and the rule, not of the seed.
std::size_t resolve_run_k(const data::SeriesFrame& frame, const training::TrainConfig& config) {
	if (config.k) {
		return *config.k;
	}
	const data::SplitBounds bounds = data::split_bounds(frame.length(), config.ratios);
	const training::Scaler scaler = training::Scaler::fit(frame.values.topRows(bounds.end(0)));
	auto scaled = std::make_shared<const Matrix>(scaler.transform(frame.values));
	const auto splits = training::make_windows(scaled, config.lookback, config.horizon, config.ratios);
	return training::resolve_k(config, splits.train);
}

struct SeedRun {
	std::uint64_t seed = 0;
	training::Metrics test;
	std::vector<training::EpochRecord> history;
	std::size_t best_epoch = 0;
	std::vector<models::NamedTensor> parameters;
};

SeedRun run_seed(const data::SeriesFrame& frame, training::TrainConfig config, std::uint64_t seed) {
	config.seed = seed;
	auto result = training::run_experiment(frame, config);
	SeedRun run;
	run.seed = seed;
	run.test = result.test;
	run.history = std::move(result.trained.history);
	run.best_epoch = result.trained.best_epoch;
	for (const auto& p : result.trained.pipeline->parameters()) {
		run.parameters.push_back({p.name, Eigen::Map<const Matrix>(p.value, p.rows, p.cols)});
	}
	return run;
}

Json per_seed_json(const std::vector<SeedRun>& runs) {
	Json rows = Json::array();
	for (const auto& r : runs) {
		rows.push_back({{"seed", r.seed},
		                {"mae", r.test.mae},
		                {"mse", r.test.mse},
		                {"epochs_ran", r.history.size()},
		                {"best_epoch", r.best_epoch}});
	}
	return rows;
}

std::pair<Json, Json> mean_std_json(const std::vector<SeedRun>& runs) {
	std::vector<double> mae;
	std::vector<double> mse;
	for (const auto& r : runs) {
		mae.push_back(r.test.mae);
		mse.push_back(r.test.mse);
	}
	const Summary a = summarize(mae);
	const Summary s = summarize(mse);
	return {Json{{"mae", a.mean}, {"mse", s.mean}}, Json{{"mae", a.std}, {"mse", s.std}}};
}

Json history_json(const std::vector<SeedRun>& runs) {
	Json seeds = Json::array();
	for (const auto& r : runs) {
		Json epochs = Json::array();
		for (const auto& e : r.history) {
			epochs.push_back({{"epoch", e.epoch},
			                  {"train_total", e.train_total},
			                  {"train_forecast", e.train_forecast},
			                  {"train_nonstat", e.train_nonstat},
			                  {"val_mse", e.val_mse},
			                  {"val_mae", e.val_mae}});
		}
		seeds.push_back({{"seed", r.seed}, {"best_epoch", r.best_epoch}, {"epochs", std::move(epochs)}});
	}
	return Json{{"per_seed", std::move(seeds)}};
}

double seconds_since(Clock::time_point start) {
	return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Variant {
	std::string name;
	NormalizerKind normalizer;
	bool uses_backbone;
};

const std::vector<Variant>& variant_table() {
	static const std::vector<Variant> table{
	    {"full", NormalizerKind::Fan, true},
	    {"no-predict", NormalizerKind::FanNoPredict, true},
	    {"pure-backbone", NormalizerKind::Identity, true},
	    {"no-backbone", NormalizerKind::Fan, false},
	};
	return table;
}

std::string join(const std::vector<std::string>& items) {
	std::string out;
	for (const auto& s : items) {
		out += (out.empty() ? "" : ", ") + s;
	}
	return out;
}

} // namespace

std::string tool_version() { return FAN_VERSION; }

Summary summarize(const std::vector<double>& values) {
	Summary s;
	if (values.empty()) {
		return s;
	}
	const auto n = static_cast<double>(values.size());
	s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
	if (values.size() > 1) {
		double ss = 0.0;
		for (double v : values) {
			ss += (v - s.mean) * (v - s.mean);
		}
		s.std = std::sqrt(ss / (n - 1.0));
	}
	return s;
}

LoadedData load_dataset(const std::filesystem::path& path) {
	LoadedData loaded;
	const std::string bytes = read_file(path);
	loaded.fingerprint = data::fingerprint(bytes);
	loaded.frame = data::parse_csv(bytes, path.string());
	return loaded;
}

// ---------------------------------------------------------------------------

Json cmd_synth(const SynthOptions& options) {
	if (options.preset.has_value() == options.spec_file.has_value()) {
		fail(ErrorKind::InvalidParameter, "synth needs exactly one of --preset or --spec");
	}
	data::SyntheticSpec spec;
	Json source;
	if (options.preset) {
		spec = data::synthetic_preset(*options.preset);
		source = {{"preset", *options.preset}};
	} else {
		Json doc;
		try {
			doc = Json::parse(read_file(*options.spec_file));
			for (const auto& s : doc.at("signals")) {
				data::SignalSpec sig;
				sig.period = s.at("period").get<double>();
				sig.anchors = s.at("anchors").get<std::array<double, 4>>();
				spec.signals.push_back(sig);
			}
			spec.dims = doc.value("dims", static_cast<Eigen::Index>(spec.signals.size()));
			spec.length = doc.value("length", spec.length);
			spec.noise_std = doc.value("noise_std", spec.noise_std);
		} catch (const Json::exception& e) {
			fail(ErrorKind::Parse, "bad spec file '" + options.spec_file->string() + "': " + e.what());
		}
		source = {{"spec_file", options.spec_file->string()}, {"spec", doc}};
	}
	spec.seed = options.seed;
	if (options.length) {
		spec.length = *options.length;
	}
	if (options.noise_std) {
		spec.noise_std = *options.noise_std;
	}
	const data::SeriesFrame frame = data::generate_synthetic(spec);
	const std::string csv = data::format_csv(frame);
	write_text(options.out, csv);

	Json signals = Json::array();
	for (const auto& s : spec.signals) {
		signals.push_back({{"period", s.period}, {"anchors", s.anchors}});
	}
	Json manifest{{"tool_version", tool_version()},
	              {"command", "synth"},
	              {"source", source},
	              {"seed", spec.seed},
	              {"length", spec.length},
	              {"dims", spec.dims},
	              {"noise_std", spec.noise_std},
	              {"signals", signals},
	              {"split", {{"train", 0.7}, {"val", 0.2}, {"test", 0.1}}},
	              {"output", options.out.string()},
	              {"fingerprint", hex64(data::fingerprint(csv))}};
	write_json(options.out.string() + ".manifest.json", manifest);
	return manifest;
}

Json cmd_train(const TrainOptions& options, std::ostream& log) {
	const auto start = Clock::now();
	const TrainingFlags& flags = options.flags;
	check_seeds(flags.seeds);
	const auto normalizer = normalizers::parse_normalizer(options.normalizer);
	const auto backbone = models::parse_backbone(options.backbone);
	training::TrainConfig config = make_config(flags, normalizer, backbone);
	const LoadedData loaded = load_dataset(flags.data);
	data::validate(loaded.frame);
	ensure_directory(flags.out);

	const std::size_t k = resolve_run_k(loaded.frame, config);
	config.k = k;

	std::vector<SeedRun> runs(flags.seeds.size());
	training::parallel_for(runs.size(), [&](std::size_t i) { runs[i] = run_seed(loaded.frame, config, flags.seeds[i]); });

	Json checkpoints = Json::array();
	for (const auto& r : runs) {
		const std::string name = "model_seed" + std::to_string(r.seed) + ".ckpt";
		models::write_checkpoint(flags.out / name, r.parameters);
		checkpoints.push_back(name);
		if (flags.verbose) {
			log << "seed " << r.seed << ": mse " << r.test.mse << ", mae " << r.test.mae << ", epochs "
			    << r.history.size() << "\n";
		}
	}

	Json cfg = flags_json(flags, loaded);
	cfg["normalizer"] = normalizers::to_string(normalizer);
	cfg["backbone"] = models::to_string(backbone);
	auto [mean, std] = mean_std_json(runs);
	Json metrics{{"config", cfg},
	             {"k_resolved", k},
	             {"seeds", flags.seeds},
	             {"per_seed", per_seed_json(runs)},
	             {"mean", mean},
	             {"std", std}};
	write_json(flags.out / "history.json", history_json(runs));
	Json manifest{{"tool_version", tool_version()},
	              {"command", "train"},
	              {"config", cfg},
	              {"dataset", dataset_json(flags.data, loaded)},
	              {"k_resolved", k},
	              {"seeds", flags.seeds},
	              {"artifacts",
	               {{"metrics", "metrics.json"}, {"history", "history.json"}, {"checkpoints", checkpoints}}}};
	write_json(flags.out / "manifest.json", manifest);
	metrics["wall_time_seconds"] = seconds_since(start);
	write_json(flags.out / "metrics.json", metrics);
	return metrics;
}

std::vector<std::string> ablation_variant_names() {
	std::vector<std::string> names;
	for (const auto& v : variant_table()) {
		names.push_back(v.name);
	}
	return names;
}

Json cmd_ablate(const AblateOptions& options, std::ostream& log) {
	const auto start = Clock::now();
	const TrainingFlags& flags = options.flags;
	check_seeds(flags.seeds);

	std::vector<Variant> chosen;
	for (const auto& name : options.variants) {
		const auto& table = variant_table();
		const auto it = std::find_if(table.begin(), table.end(), [&](const Variant& v) { return v.name == name; });
		if (it == table.end()) {
			fail(ErrorKind::InvalidParameter,
			     "unknown variant '" + name + "' (valid: " + join(ablation_variant_names()) + ")");
		}
		if (std::any_of(chosen.begin(), chosen.end(), [&](const Variant& v) { return v.name == name; })) {
			log << "warning: duplicate variant '" << name << "' ignored\n";
			continue;
		}
		chosen.push_back(*it);
	}
	if (chosen.empty()) {
		fail(ErrorKind::InvalidParameter, "no variants selected");
	}

	training::TrainConfig base = make_config(flags, NormalizerKind::Fan, models::BackboneKind::DLinear);
	const LoadedData loaded = load_dataset(flags.data);
	data::validate(loaded.frame);
	ensure_directory(flags.out);
	const std::size_t k = resolve_run_k(loaded.frame, base);
	base.k = k;

	const std::size_t n_seeds = flags.seeds.size();
	std::vector<SeedRun> runs(chosen.size() * n_seeds);
	training::parallel_for(runs.size(), [&](std::size_t job) {
		const Variant& v = chosen[job / n_seeds];
		training::TrainConfig config = base;
		config.normalizer = v.normalizer;
		config.backbone = v.uses_backbone ? models::BackboneKind::DLinear : models::BackboneKind::Zero;
		runs[job] = run_seed(loaded.frame, config, flags.seeds[job % n_seeds]);
	});

	Json variants = Json::array();
	for (std::size_t i = 0; i < chosen.size(); ++i) {
		const std::vector<SeedRun> part(runs.begin() + static_cast<std::ptrdiff_t>(i * n_seeds),
		                                runs.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_seeds));
		auto [mean, std] = mean_std_json(part);
		if (flags.verbose) {
			log << chosen[i].name << ": mean mse " << mean["mse"].get<double>() << "\n";
		}
		variants.push_back({{"name", chosen[i].name},
		                    {"normalizer", normalizers::to_string(chosen[i].normalizer)},
		                    {"backbone", chosen[i].uses_backbone ? "dlinear" : "zero"},
		                    {"per_seed", per_seed_json(part)},
		                    {"mean", mean},
		                    {"std", std}});
	}
	const Json cfg = flags_json(flags, loaded);
	Json report{{"config", cfg}, {"k_resolved", k}, {"seeds", flags.seeds}, {"variants", variants}};
	Json names = Json::array();
	for (const auto& v : chosen) {
		names.push_back(v.name);
	}
	write_json(flags.out / "manifest.json", Json{{"tool_version", tool_version()},
	                                              {"command", "ablate"},
	                                              {"config", cfg},
	                                              {"dataset", dataset_json(flags.data, loaded)},
	                                              {"k_resolved", k},
	                                              {"seeds", flags.seeds},
	                                              {"variants", names},
	                                              {"artifacts", {{"report", "ablation.json"}}}});
	report["wall_time_seconds"] = seconds_since(start);
	write_json(flags.out / "ablation.json", report);
	return report;
}

Json cmd_diagnose(const DiagnoseOptions& options, std::ostream& log) {
	const LoadedData loaded = load_dataset(options.data);
	const data::SeriesFrame& frame = loaded.frame;
	data::validate(frame);
	const Eigen::Index lookback = options.lookback;
	if (lookback < 2) {
		fail(ErrorKind::InvalidParameter, "--lookback must be >= 2");
	}
	const data::SplitRatios ratios;
	const data::DatasetStats stats = data::dataset_stats(frame, ratios, lookback);
	for (const auto& w : stats.warnings) {
		log << "warning: " << w << "\n";
	}

	// Spectral quantities are measured on the z-scored series, as the models see it.
	const data::SplitBounds bounds = data::split_bounds(frame.length(), ratios);
	const training::Scaler scaler = training::Scaler::fit(frame.values.topRows(bounds.end(0)));
	const Matrix scaled = scaler.transform(frame.values);

	std::vector<Matrix> train_windows;
	for (Eigen::Index s = 0; s + lookback <= bounds.end(0); ++s) {
		train_windows.emplace_back(scaled.middleRows(s, lookback));
	}
	const std::optional<std::size_t> requested = parse_k(options.k);
	const std::size_t k =
	    requested ? *requested : spectral::select_k_by_amplitude_rule(train_windows, options.k_ratio);

	std::vector<Matrix> windows;
	std::vector<Matrix> residuals;
	for (Eigen::Index s = 0; s + lookback <= frame.length(); ++s) {
		windows.emplace_back(scaled.middleRows(s, lookback));
		residuals.push_back(spectral::frl_decompose(windows.back(), k).x_res);
	}
	if (windows.size() < 2) {
		fail(ErrorKind::InvalidInput, "series too short: N=" + std::to_string(frame.length()) +
		                                  " rows gives fewer than 2 windows of L=" + std::to_string(lookback));
	}
	const double before = spectral::spectral_variance(windows);
	const double after = spectral::spectral_variance(residuals);
	const Matrix density = spectral::frequency_selection_density(windows, k);

	Json channels = Json::array();
	for (Eigen::Index d = 0; d < density.cols(); ++d) {
		channels.push_back({{"name", frame.channel_names[static_cast<std::size_t>(d)]},
		                    {"density", std::vector<double>(density.col(d).data(),
		                                                    density.col(d).data() + density.rows())}});
	}
	Json trend = Json::array();
	for (Eigen::Index d = 0; d < stats.trend_variation.size(); ++d) {
		trend.push_back(number(stats.trend_variation(d)));
	}
	Json report{{"tool_version", tool_version()},
	            {"dataset", dataset_json(options.data, loaded)},
	            {"lookback", lookback},
	            {"k", requested ? Json(*requested) : Json("auto")},
	            {"k_resolved", k},
	            {"windows", windows.size()},
	            {"spectral_variance", {{"before", before}, {"after", after}}},
	            {"selection_density", {{"bins", density.rows()}, {"channels", channels}}},
	            {"dataset_stats",
	             {{"trend_variation", trend},
	              {"seasonality_variation", number(stats.seasonality_variation)},
	              {"warnings", stats.warnings}}}};
	if (options.out) {
		write_json(*options.out, report);
	}
	return report;
}

// ---------------------------------------------------------------------------

namespace {

void add_training_flags(CLI::App* cmd, TrainingFlags& flags, std::vector<std::uint64_t>& seeds) {
	cmd->add_option("--data", flags.data, "Input CSV")->required();
	cmd->add_option("--lookback", flags.lookback, "Input window length L")->capture_default_str();
	cmd->add_option("--horizon", flags.horizon, "Forecast horizon H")->capture_default_str();
	cmd->add_option("--k", flags.k, "Frequencies to remove, or 'auto'")->capture_default_str();
	cmd->add_option("--k-ratio", flags.k_ratio, "Amplitude ratio used by --k auto")->capture_default_str();
	cmd->add_option("--batch-size", flags.batch_size)->capture_default_str();
	cmd->add_option("--lr", flags.learning_rate, "Adam learning rate")->capture_default_str();
	cmd->add_option("--epochs", flags.max_epochs, "Maximum epochs")->capture_default_str();
	cmd->add_option("--patience", flags.patience, "Early-stopping patience")->capture_default_str();
	cmd->add_option("--kernel", flags.kernel, "DLinear moving-average kernel")->capture_default_str();
	cmd->add_option("--hidden", flags.hidden, "Predictor hidden sizes, e.g. 64,128")
	    ->delimiter(',')
	    ->capture_default_str();
	cmd->add_flag("--predictor-bias", flags.predictor_bias, "Give predictor layers a bias");
	cmd->add_option("--out", flags.out, "Output directory")->capture_default_str();
	cmd->add_flag("--verbose", flags.verbose, "Per-seed progress on stderr");
	cmd->add_option("--seeds", seeds, "Comma-separated seeds")->delimiter(',');
}

std::string one_line(std::string text) {
	std::replace(text.begin(), text.end(), '\n', ' ');
	std::replace(text.begin(), text.end(), '\r', ' ');
	return text;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
	CLI::App app{"Frequency adaptive normalization for time-series forecasting", "fan"};
	app.set_version_flag("--version", tool_version());
	app.require_subcommand(1);

	SynthOptions synth;
	auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic composite-sinusoid dataset");
	synth_cmd->add_option("--out", synth.out, "Output CSV")->required();
	auto* preset_opt = synth_cmd->add_option("--preset", synth.preset, "syn5 .. syn9");
	auto* spec_opt = synth_cmd->add_option("--spec", synth.spec_file, "JSON generator spec");
	preset_opt->excludes(spec_opt);
	synth_cmd->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();
	synth_cmd->add_option("--length", synth.length, "Override the series length");
	synth_cmd->add_option("--noise", synth.noise_std, "Override the noise standard deviation");

	TrainOptions train;
	std::vector<std::uint64_t> train_seeds;
	std::optional<std::uint64_t> train_seed;
	auto* train_cmd = app.add_subcommand("train", "Train and evaluate one configuration");
	add_training_flags(train_cmd, train.flags, train_seeds);
	train_cmd->add_option("--normalizer", train.normalizer, "fan | fan-fixed | fan-no-predict | revin | none")
	    ->capture_default_str();
	train_cmd->add_option("--backbone", train.backbone, "dlinear | naive | zero")->capture_default_str();
	auto* seed_opt = train_cmd->add_option("--seed", train_seed, "Single seed");
	seed_opt->excludes("--seeds");

	AblateOptions ablate;
	std::vector<std::uint64_t> ablate_seeds;
	auto* ablate_cmd = app.add_subcommand("ablate", "Compare FAN ablation variants");
	add_training_flags(ablate_cmd, ablate.flags, ablate_seeds);
	ablate_cmd->add_option("--variants", ablate.variants, "full,no-predict,pure-backbone,no-backbone")
	    ->delimiter(',');

	DiagnoseOptions diagnose;
	auto* diagnose_cmd = app.add_subcommand("diagnose", "Spectral stationarity and dataset diagnostics");
	diagnose_cmd->add_option("--data", diagnose.data, "Input CSV")->required();
	diagnose_cmd->add_option("--k", diagnose.k, "Frequencies to remove, or 'auto'")->capture_default_str();
	diagnose_cmd->add_option("--k-ratio", diagnose.k_ratio)->capture_default_str();
	diagnose_cmd->add_option("--lookback", diagnose.lookback)->capture_default_str();
	diagnose_cmd->add_option("--out", diagnose.out, "Also write the report to this file");

	std::vector<std::string> reversed(args.rbegin(), args.rend());
	try {
		app.parse(reversed);
	} catch (const CLI::CallForHelp&) {
		out << app.help();
		return 0;
	} catch (const CLI::CallForAllHelp&) {
		out << app.help("", CLI::AppFormatMode::All);
		return 0;
	} catch (const CLI::CallForVersion&) {
		out << tool_version() << "\n";
		return 0;
	} catch (const CLI::ParseError& e) {
		err << "error: usage: " << one_line(e.what()) << "\n";
		return 2;
	}

	try {
		if (synth_cmd->parsed()) {
			const Json manifest = cmd_synth(synth);
			out << manifest.dump(2) << "\n";
		} else if (train_cmd->parsed()) {
			if (train_seed) {
				train.flags.seeds = {*train_seed};
			} else if (!train_seeds.empty()) {
				train.flags.seeds = train_seeds;
			}
			out << cmd_train(train, err).dump(2) << "\n";
		} else if (ablate_cmd->parsed()) {
			if (!ablate_seeds.empty()) {
				ablate.flags.seeds = ablate_seeds;
			}
			out << cmd_ablate(ablate, err).dump(2) << "\n";
		} else if (diagnose_cmd->parsed()) {
			out << cmd_diagnose(diagnose, err).dump(2) << "\n";
		}
	} catch (const Error& e) {
		err << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
		return 1;
	} catch (const std::exception& e) {
		err << "error: internal: " << one_line(e.what()) << "\n";
		return 1;
	}
	return 0;
}

} // namespace fan::cli
