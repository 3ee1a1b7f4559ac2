#include "fan/training.hpp"

#include "fan/error.hpp"
#include "fan/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace fan::training {

namespace {

constexpr std::uint64_t kShuffleStream = 0xA0761D6478BD642FULL;

const char* part_name(std::size_t part) {
	static const char* names[] = {"train", "val", "test"};
	return names[part];
}

} // namespace

// ---------------------------------------------------------------------------
// Windows

WindowSet::WindowSet(std::shared_ptr<const Matrix> series, Eigen::Index begin, Eigen::Index end,
                     Eigen::Index lookback, Eigen::Index horizon)
    : series_(std::move(series)), begin_(begin), end_(end), lookback_(lookback), horizon_(horizon) {
	if (!series_) {
		fail(ErrorKind::InvalidInput, "window set needs a series");
	}
	if (lookback < 1 || horizon < 1) {
		fail(ErrorKind::InvalidParameter, "lookback and horizon must be positive");
	}
	if (begin < 0 || end > series_->rows() || begin > end) {
		fail(ErrorKind::Index, "window range outside the series");
	}
	const Eigen::Index span = end - begin - lookback - horizon + 1;
	count_ = span > 0 ? static_cast<std::size_t>(span) : 0;
}

WindowPair WindowSet::at(std::size_t i) const {
	if (i >= count_) {
		fail(ErrorKind::Index, "window " + std::to_string(i) + " out of " + std::to_string(count_));
	}
	const Eigen::Index t = anchor(i);
	return {series_->middleRows(t - lookback_, lookback_), series_->middleRows(t, horizon_), t};
}

void WindowSet::gather(std::span<const std::size_t> indices, Matrix& x, Matrix& y) const {
	const Eigen::Index d = channels();
	const auto n = static_cast<Eigen::Index>(indices.size());
	x.resize(lookback_, n * d);
	y.resize(horizon_, n * d);
	for (Eigen::Index w = 0; w < n; ++w) {
		const std::size_t i = indices[static_cast<std::size_t>(w)];
		if (i >= count_) {
			fail(ErrorKind::Index, "window " + std::to_string(i) + " out of " + std::to_string(count_));
		}
		const Eigen::Index t = anchor(i);
		for (Eigen::Index c = 0; c < d; ++c) {
			x.col(w * d + c) = series_->col(c).segment(t - lookback_, lookback_);
			y.col(w * d + c) = series_->col(c).segment(t, horizon_);
		}
	}
}

std::vector<Matrix> WindowSet::inputs() const {
	std::vector<Matrix> out;
	out.reserve(count_);
	for (std::size_t i = 0; i < count_; ++i) {
		out.emplace_back(series_->middleRows(anchor(i) - lookback_, lookback_));
	}
	return out;
}

WindowSplits make_windows(std::shared_ptr<const Matrix> series, Eigen::Index lookback, Eigen::Index horizon,
                          const data::SplitRatios& ratios) {
	if (!series) {
		fail(ErrorKind::InvalidInput, "no series");
	}
	const Eigen::Index n = series->rows();
	if (lookback < 1 || horizon < 1) {
		fail(ErrorKind::InvalidParameter, "lookback and horizon must be positive");
	}
	if (n < lookback + horizon + 10) {
		fail(ErrorKind::InvalidInput, "series too short: N=" + std::to_string(n) + " rows, L=" +
		                                  std::to_string(lookback) + ", H=" + std::to_string(horizon) +
		                                  " (need N >= L + H + 10)");
	}
	const data::SplitBounds bounds = data::split_bounds(n, ratios);
	std::array<WindowSet, 3> sets;
	for (std::size_t part = 0; part < 3; ++part) {
		sets[part] = WindowSet(series, bounds.begin(part), bounds.end(part), lookback, horizon);
		if (sets[part].empty()) {
			fail(ErrorKind::InvalidInput,
			     "series too short: N=" + std::to_string(n) + ", L=" + std::to_string(lookback) +
			         ", H=" + std::to_string(horizon) + "; " + part_name(part) + " split has " +
			         std::to_string(bounds.end(part) - bounds.begin(part)) + " rows but a window needs " +
			         std::to_string(lookback + horizon));
		}
	}
	return {std::move(sets[0]), std::move(sets[1]), std::move(sets[2])};
}

// ---------------------------------------------------------------------------
// Scaler

Scaler Scaler::fit(const Matrix& rows) {
	if (rows.rows() < 1) {
		fail(ErrorKind::InvalidInput, "scaler needs at least one row");
	}
	Scaler s;
	s.mean = rows.colwise().mean().transpose();
	const Matrix centered = rows.rowwise() - s.mean.transpose();
	s.stdev = (centered.colwise().squaredNorm().transpose() / static_cast<double>(rows.rows()))
	              .cwiseSqrt()
	              .cwiseMax(kMinStd);
	return s;
}

Matrix Scaler::transform(const Matrix& values) const {
	if (values.cols() != mean.size()) {
		fail(ErrorKind::Shape, "scaler fitted on a different channel count");
	}
	return (values.rowwise() - mean.transpose()).array().rowwise() / stdev.transpose().array();
}

Matrix Scaler::inverse(const Matrix& values) const {
	if (values.cols() != mean.size()) {
		fail(ErrorKind::Shape, "scaler fitted on a different channel count");
	}
	Matrix out = values.array().rowwise() * stdev.transpose().array();
	out.rowwise() += mean.transpose();
	return out;
}

// ---------------------------------------------------------------------------
// Optimizer

void adam_step(std::span<const models::ParamRef> params, AdamState& state, double lr) {
	if (!(lr > 0.0)) {
		fail(ErrorKind::InvalidParameter, "learning rate must be positive");
	}
	if (state.m.empty()) {
		for (const auto& p : params) {
			state.m.push_back(Vector::Zero(p.size()));
			state.v.push_back(Vector::Zero(p.size()));
		}
	}
	if (state.m.size() != params.size()) {
		fail(ErrorKind::Shape, "optimizer state does not match the parameter list");
	}
	for (std::size_t i = 0; i < params.size(); ++i) {
		if (state.m[i].size() != params[i].size()) {
			fail(ErrorKind::Shape, "optimizer state shape mismatch for " + params[i].name);
		}
		if (!Eigen::Map<const Vector>(params[i].grad, params[i].size()).allFinite()) {
			fail(ErrorKind::NonFinite, "non-finite gradient in " + params[i].name);
		}
	}

	++state.step;
	const double t = static_cast<double>(state.step);
	const double correction1 = 1.0 - std::pow(state.beta1, t);
	const double correction2 = 1.0 - std::pow(state.beta2, t);
	for (std::size_t i = 0; i < params.size(); ++i) {
		Eigen::Map<Vector> value(params[i].value, params[i].size());
		const Eigen::Map<const Vector> grad(params[i].grad, params[i].size());
		Vector& m = state.m[i];
		Vector& v = state.v[i];
		m = state.beta1 * m + (1.0 - state.beta1) * grad;
		v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseAbs2();
		value.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + state.eps);
	}
}

bool EarlyStopper::update(double score) {
	++epoch_;
	if (score < best_) {
		best_ = score;
		best_epoch_ = epoch_;
		stale_ = 0;
		return true;
	}
	++stale_;
	return false;
}

// ---------------------------------------------------------------------------
// Training loop

void TrainConfig::validate() const {
	if (lookback < 2 || horizon < 2) {
		fail(ErrorKind::InvalidParameter, "lookback and horizon must be >= 2");
	}
	if (k && *k < 1) {
		fail(ErrorKind::InvalidParameter, "k must be >= 1");
	}
	if (!(k_ratio > 0.0 && k_ratio <= 1.0)) {
		fail(ErrorKind::InvalidParameter, "k ratio must lie in (0, 1]");
	}
	if (batch_size < 1 || max_epochs < 1 || patience < 1 || patience > max_epochs) {
		fail(ErrorKind::InvalidParameter, "batch size, epochs and patience must be positive with patience <= epochs");
	}
	if (!(learning_rate > 0.0)) {
		fail(ErrorKind::InvalidParameter, "learning rate must be positive");
	}
}

Metrics evaluate(const Pipeline& pipeline, const WindowSet& windows) {
	if (windows.empty()) {
		fail(ErrorKind::InvalidInput, "cannot evaluate on an empty window set");
	}
	double abs_sum = 0.0;
	double sq_sum = 0.0;
	double count = 0.0;
	std::vector<std::size_t> idx;
	Matrix x;
	Matrix y;
	for (std::size_t start = 0; start < windows.size(); start += kEvalBatch) {
		const std::size_t stop = std::min(windows.size(), start + kEvalBatch);
		idx.resize(stop - start);
		std::iota(idx.begin(), idx.end(), start);
		windows.gather(idx, x, y);
		const Matrix err = pipeline.predict(x) - y;
		abs_sum += err.cwiseAbs().sum();
		sq_sum += err.squaredNorm();
		count += static_cast<double>(err.size());
	}
	return {abs_sum / count, sq_sum / count};
}

std::size_t resolve_k(const TrainConfig& config, const WindowSet& train) {
	if (config.k) {
		return *config.k;
	}
	const std::vector<Matrix> inputs = train.inputs();
	return spectral::select_k_by_amplitude_rule(inputs, config.k_ratio);
}

std::unique_ptr<Pipeline> build_pipeline(const TrainConfig& config, std::size_t k, const WindowSet& train) {
	PipelineConfig pc;
	pc.normalizer = config.normalizer;
	pc.backbone = config.backbone;
	pc.lookback = config.lookback;
	pc.horizon = config.horizon;
	pc.k = k;
	pc.kernel = config.kernel;
	pc.hidden = config.hidden;
	pc.predictor_bias = config.predictor_bias;
	pc.seed = config.seed;
	std::optional<spectral::FrequencyMask> mask;
	if (config.normalizer == normalizers::NormalizerKind::FanFixed) {
		const std::vector<Matrix> inputs = train.inputs();
		mask = spectral::global_mask(inputs, k);
	}
	return std::make_unique<Pipeline>(pc, mask);
}

TrainResult train(const TrainConfig& config, const WindowSplits& splits) {
	config.validate();
	if (splits.train.empty() || splits.val.empty()) {
		fail(ErrorKind::InvalidInput, "training needs non-empty train and validation windows");
	}
	if (splits.train.lookback() != config.lookback || splits.train.horizon() != config.horizon) {
		fail(ErrorKind::Shape, "windows were built for a different lookback/horizon");
	}

	TrainResult result;
	result.k = resolve_k(config, splits.train);
	result.pipeline = build_pipeline(config, result.k, splits.train);
	Pipeline& pipeline = *result.pipeline;
	const std::vector<models::ParamRef> params = pipeline.parameters();
	Matrix x;
	Matrix y;

	auto snapshot = [&params] {
		std::vector<Vector> copy;
		copy.reserve(params.size());
		for (const auto& p : params) {
			copy.emplace_back(Eigen::Map<const Vector>(p.value, p.size()));
		}
		return copy;
	};
	std::vector<Vector> best = snapshot();

	// Prior-loss targets depend only on the data; compute them once.
	Matrix y_non_cache;
	const Eigen::Index channels = splits.train.channels();
	if (pipeline.uses_y_non()) {
		y_non_cache.resize(config.horizon, static_cast<Eigen::Index>(splits.train.size()) * channels);
		std::vector<std::size_t> idx;
		for (std::size_t start = 0; start < splits.train.size(); start += kEvalBatch) {
			const std::size_t stop = std::min(splits.train.size(), start + kEvalBatch);
			idx.resize(stop - start);
			std::iota(idx.begin(), idx.end(), start);
			splits.train.gather(idx, x, y);
			y_non_cache.middleCols(static_cast<Eigen::Index>(start) * channels, y.cols()) =
			    normalizers::compute_y_non(y, result.k);
		}
	}
	Matrix y_non;

	AdamState adam;
	EarlyStopper stopper(config.patience);
	SplitMix64 rng(config.seed ^ kShuffleStream);
	std::vector<std::size_t> order(splits.train.size());
	std::iota(order.begin(), order.end(), std::size_t{0});

	for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
		shuffle(std::span<std::size_t>(order), rng);
		EpochRecord record;
		record.epoch = epoch;
		double weight = 0.0;
		std::size_t batch_no = 0;
		for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
			const std::size_t stop = std::min(order.size(), start + config.batch_size);
			const std::span<const std::size_t> batch(order.data() + start, stop - start);
			splits.train.gather(batch, x, y);
			pipeline.zero_grad();
			const Matrix* target = nullptr;
			if (y_non_cache.size() > 0) {
				y_non.resize(y.rows(), y.cols());
				for (std::size_t w = 0; w < batch.size(); ++w) {
					y_non.middleCols(static_cast<Eigen::Index>(w) * channels, channels) =
					    y_non_cache.middleCols(static_cast<Eigen::Index>(batch[w]) * channels, channels);
				}
				target = &y_non;
			}
			const LossParts parts = pipeline.accumulate_gradients(x, y, target);
			if (!std::isfinite(parts.total)) {
				fail(ErrorKind::NonFinite, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
				                               std::to_string(batch_no));
			}
			try {
				adam_step(params, adam, config.learning_rate);
			} catch (const Error& e) {
				fail(e.kind(), std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
				                   std::to_string(batch_no));
			}
			const auto n = static_cast<double>(batch.size());
			record.train_total += n * parts.total;
			record.train_forecast += n * parts.forecast;
			record.train_nonstat += n * parts.nonstat;
			weight += n;
		}
		record.train_total /= weight;
		record.train_forecast /= weight;
		record.train_nonstat /= weight;

		const Metrics val = evaluate(pipeline, splits.val);
		record.val_mse = val.mse;
		record.val_mae = val.mae;
		result.history.push_back(record);
		if (stopper.update(val.mse)) {
			best = snapshot();
		}
		if (stopper.should_stop()) {
			break;
		}
	}

	for (std::size_t i = 0; i < params.size(); ++i) {
		Eigen::Map<Vector>(params[i].value, params[i].size()) = best[i];
	}
	result.best_epoch = stopper.best_epoch();
	return result;
}

ExperimentResult run_experiment(const data::SeriesFrame& frame, const TrainConfig& config) {
	data::validate(frame);
	config.validate();
	const data::SplitBounds bounds = data::split_bounds(frame.length(), config.ratios);
	ExperimentResult out;
	out.scaler = Scaler::fit(frame.values.topRows(bounds.end(0)));
	auto scaled = std::make_shared<const Matrix>(out.scaler.transform(frame.values));
	const WindowSplits splits = make_windows(scaled, config.lookback, config.horizon, config.ratios);
	out.trained = train(config, splits);
	out.k = out.trained.k;
	out.test = evaluate(*out.trained.pipeline, splits.test);
	out.val = evaluate(*out.trained.pipeline, splits.val);
	return out;
}

std::size_t thread_budget() {
	if (const char* env = std::getenv("FAN_THREADS")) {
		char* end = nullptr;
		const long v = std::strtol(env, &end, 10);
		if (end != env && v >= 1) {
			return static_cast<std::size_t>(v);
		}
	}
	return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
	const std::size_t workers = std::min(count, thread_budget());
	if (workers <= 1) {
		for (std::size_t i = 0; i < count; ++i) {
			fn(i);
		}
		return;
	}
	std::atomic<std::size_t> next{0};
	std::vector<std::exception_ptr> errors(count);
	std::vector<std::thread> threads;
	threads.reserve(workers);
	for (std::size_t w = 0; w < workers; ++w) {
		threads.emplace_back([&] {
			for (std::size_t i = next++; i < count; i = next++) {
				try {
					fn(i);
				} catch (...) {
					errors[i] = std::current_exception();
				}
			}
		});
	}
	for (auto& t : threads) {
		t.join();
	}
	for (auto& e : errors) {
		if (e) {
			std::rethrow_exception(e);
		}
	}
}

} // namespace fan::training
