#pragma once

#include "fan/data.hpp"
#include "fan/models.hpp"
#include "fan/pipeline.hpp"
#include "fan/types.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fan::training {

/// x = series[t - L, t), y = series[t, t + H).
struct WindowPair {
	Matrix x;
	Matrix y;
	Eigen::Index t = 0;
};

/**
 * Stride-1 windows confined to rows [begin, end) of a shared series. Windows
 * are materialized on demand; the set itself only stores the series handle.
 */
class WindowSet {
public:
	WindowSet() = default;
	WindowSet(std::shared_ptr<const Matrix> series, Eigen::Index begin, Eigen::Index end, Eigen::Index lookback,
	          Eigen::Index horizon);

	std::size_t size() const noexcept { return count_; }
	bool empty() const noexcept { return count_ == 0; }
	Eigen::Index lookback() const noexcept { return lookback_; }
	Eigen::Index horizon() const noexcept { return horizon_; }
	Eigen::Index channels() const noexcept { return series_ ? series_->cols() : 0; }
	Eigen::Index begin_row() const noexcept { return begin_; }
	Eigen::Index end_row() const noexcept { return end_; }

	/// First target row of window i.
	Eigen::Index anchor(std::size_t i) const noexcept { return begin_ + lookback_ + static_cast<Eigen::Index>(i); }

	WindowPair at(std::size_t i) const;

	/**
	 * Stacks the selected windows channel-wise: column w * D + d holds channel d
	 * of window indices[w]. x is L x (n D), y is H x (n D).
	 */
	void gather(std::span<const std::size_t> indices, Matrix& x, Matrix& y) const;

	/// All inputs as L x D matrices, in order.
	std::vector<Matrix> inputs() const;

private:
	std::shared_ptr<const Matrix> series_;
	Eigen::Index begin_ = 0;
	Eigen::Index end_ = 0;
	Eigen::Index lookback_ = 0;
	Eigen::Index horizon_ = 0;
	std::size_t count_ = 0;
};

struct WindowSplits {
	WindowSet train;
	WindowSet val;
	WindowSet test;
};

/// Chronological split of the rows, then windows inside each part.
WindowSplits make_windows(std::shared_ptr<const Matrix> series, Eigen::Index lookback, Eigen::Index horizon,
                          const data::SplitRatios& ratios = {});

/// Per-channel z-score fitted on training rows only.
struct Scaler {
	Vector mean;
	Vector stdev;

	static constexpr double kMinStd = 1e-8;

	static Scaler fit(const Matrix& rows);
	Matrix transform(const Matrix& values) const;
	Matrix inverse(const Matrix& values) const;
};

struct AdamState {
	double beta1 = 0.9;
	double beta2 = 0.999;
	double eps = 1e-8;
	std::int64_t step = 0;
	std::vector<Vector> m;
	std::vector<Vector> v;
};

/// Bias-corrected Adam update. Throws NonFinite if any gradient is not finite.
void adam_step(std::span<const models::ParamRef> params, AdamState& state, double lr);

/// Tracks the best validation score and when to stop.
class EarlyStopper {
public:
	explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

	/// Returns true when `score` improves on the best so far.
	bool update(double score);
	bool should_stop() const noexcept { return stale_ >= patience_; }
	double best() const noexcept { return best_; }
	std::size_t best_epoch() const noexcept { return best_epoch_; }

private:
	std::size_t patience_;
	std::size_t epoch_ = 0;
	std::size_t best_epoch_ = 0;
	std::size_t stale_ = 0;
	double best_ = std::numeric_limits<double>::infinity();
};

struct Metrics {
	double mae = 0.0;
	double mse = 0.0;
};

struct TrainConfig {
	Eigen::Index lookback = 96;
	Eigen::Index horizon = 96;
	std::optional<std::size_t> k; // nullopt: resolve with the amplitude rule
	double k_ratio = 0.1;
	std::size_t batch_size = 32;
	double learning_rate = 3e-4;
	std::size_t max_epochs = 100;
	std::size_t patience = 5;
	std::uint64_t seed = 1;
	normalizers::NormalizerKind normalizer = normalizers::NormalizerKind::Fan;
	models::BackboneKind backbone = models::BackboneKind::DLinear;
	Eigen::Index kernel = 25;
	std::vector<Eigen::Index> hidden = {64, 128};
	bool predictor_bias = false;
	data::SplitRatios ratios;

	void validate() const;
};

struct EpochRecord {
	std::size_t epoch = 0;
	double train_total = 0.0;
	double train_forecast = 0.0;
	double train_nonstat = 0.0;
	double val_mse = 0.0;
	double val_mae = 0.0;
};

struct TrainResult {
	std::unique_ptr<Pipeline> pipeline;
	std::vector<EpochRecord> history;
	std::size_t best_epoch = 0;
	std::size_t k = 0;
};

/// Windows the evaluation loop pushes through the pipeline at once.
inline constexpr std::size_t kEvalBatch = 256;

/// Mean absolute and squared error over every window, step and channel.
Metrics evaluate(const Pipeline& pipeline, const WindowSet& windows);

/// K from the amplitude rule on the training inputs.
std::size_t resolve_k(const TrainConfig& config, const WindowSet& train);

/// Builds the pipeline described by `config` (computing the global mask when needed).
std::unique_ptr<Pipeline> build_pipeline(const TrainConfig& config, std::size_t k, const WindowSet& train);

/**
 * Minibatch Adam on the dual loss with early stopping on validation MSE.
 * The returned pipeline holds the best-validation parameters.
 */
TrainResult train(const TrainConfig& config, const WindowSplits& splits);

struct ExperimentResult {
	TrainResult trained;
	Metrics test;
	Metrics val;
	std::size_t k = 0;
	Scaler scaler;
};

/// Scale (train statistics), window, resolve K, train, and score the test split.
ExperimentResult run_experiment(const data::SeriesFrame& frame, const TrainConfig& config);

/// Thread budget: FAN_THREADS if set, else hardware concurrency (at least 1).
std::size_t thread_budget();

/// Runs fn(i) for i in [0, count) on up to thread_budget() threads; results stay ordered.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace fan::training
