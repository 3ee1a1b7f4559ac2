#pragma once

#include "fan/models.hpp"
#include "fan/normalizers.hpp"
#include "fan/spectral.hpp"
#include "fan/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace fan::training {

struct LossParts {
	double total = 0.0;
	double forecast = 0.0;
	double nonstat = 0.0;
};

/// MSE(y_hat, y) + MSE(y_non_hat, y_non), each averaged over all entries.
LossParts dual_loss(const Matrix& y_hat, const Matrix& y, const Matrix& y_non_hat, const Matrix& y_non);

/// Forecast-only MSE, for pipelines without a non-stationary estimate.
double mse(const Matrix& y_hat, const Matrix& y);

struct PipelineConfig {
	normalizers::NormalizerKind normalizer = normalizers::NormalizerKind::Fan;
	models::BackboneKind backbone = models::BackboneKind::DLinear;
	Eigen::Index lookback = 96;
	Eigen::Index horizon = 96;
	std::size_t k = 1;
	Eigen::Index kernel = 25;
	std::vector<Eigen::Index> hidden = {64, 128};
	bool predictor_bias = false;
	std::uint64_t seed = 1;
};

/**
 * normalize -> backbone -> denormalize, plus the training loss and its
 * gradients. Inputs are L x n batches (n = windows * channels); targets H x n.
 */
class Pipeline {
public:
	/// `global_mask` is required for the fixed-frequency normalizer and ignored otherwise.
	explicit Pipeline(const PipelineConfig& config, const std::optional<spectral::FrequencyMask>& global_mask = {});

	const PipelineConfig& config() const noexcept { return config_; }

	Matrix predict(const Matrix& x) const;

	LossParts loss(const Matrix& x, const Matrix& y) const;

	/**
	 * Adds this batch's gradients to the parameter gradient buffers and returns
	 * its loss. `y_non` optionally supplies precomputed prior-loss targets
	 * (compute_y_non(y, k)); they are derived from y when null.
	 */
	LossParts accumulate_gradients(const Matrix& x, const Matrix& y, const Matrix* y_non = nullptr);

	/// True when the loss includes the non-stationary term (any FAN variant).
	bool uses_y_non() const noexcept;

	std::vector<models::ParamRef> parameters();
	void zero_grad();

	normalizers::ReversibleNormalizer& normalizer() noexcept { return *normalizer_; }
	const normalizers::ReversibleNormalizer& normalizer() const noexcept { return *normalizer_; }
	models::Backbone& backbone() noexcept { return backbone_; }

private:
	struct Pass {
		normalizers::Normalized normalized;
		models::BackboneTape backbone_tape;
		Matrix y_hat;
	};

	Pass run(const Matrix& x, bool record) const;
	LossParts score(const Pass& pass, const Matrix& y, const Matrix* given_y_non, Matrix* y_non) const;

	PipelineConfig config_;
	std::unique_ptr<normalizers::ReversibleNormalizer> normalizer_;
	models::Backbone backbone_;
};

} // namespace fan::training
