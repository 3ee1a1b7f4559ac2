#pragma once

#include "fan/models.hpp"
#include "fan/spectral.hpp"
#include "fan/types.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace fan::normalizers {

enum class NormalizerKind {
	Fan,          // instance-wise top-k removal + learned horizon predictor
	FanFixed,     // one global frequency set for every instance
	FanNoPredict, // ablation: reuse X_non periodically instead of predicting
	Revin,        // per-instance z-score
	Identity,     // pure backbone
};

std::string to_string(NormalizerKind kind);
NormalizerKind parse_normalizer(const std::string& name);

struct FanState {
	Matrix x;     // retained input, L x n
	Matrix x_non; // L x n
	spectral::FrequencyMask mask;
	Matrix y_non_hat; // H x n, set by denormalize
	models::PredictorTape tape;
};

struct RevinState {
	Vector mean;
	Vector stdev;
};

using NormState = std::variant<std::monostate, FanState, RevinState>;

struct Normalized {
	Matrix x_res;
	NormState state;
};

/**
 * Symmetric instance normalization around a backbone.
 *
 * Columns are independent series (one channel of one window); a batch of
 * windows is just a wider matrix.
 */
class ReversibleNormalizer {
public:
	virtual ~ReversibleNormalizer() = default;

	virtual NormalizerKind kind() const noexcept = 0;

	virtual Normalized normalize(const Matrix& x) const = 0;

	/// Restores the removed component on the backbone output. May record into `state`.
	virtual Matrix denormalize(const Matrix& y_res, NormState& state) const = 0;

	/**
	 * Backpropagates through denormalize. `grad_y` is dL/dY_hat and
	 * `grad_y_non` (may be null) the extra dL/dY_non_hat of the prior loss.
	 * Accumulates parameter gradients and returns dL/dY_res.
	 */
	virtual Matrix denormalize_backward(const Matrix& grad_y, const Matrix* grad_y_non, const NormState& state);

	virtual std::vector<models::ParamRef> trainable_parameters() { return {}; }
	virtual void zero_grad() {}

	/// The normalizer produces an explicit Y_non estimate that the prior loss supervises.
	virtual bool has_prior_loss() const noexcept { return false; }
};

/// Y's own top-k reconstruction: the target of the prior loss.
Matrix compute_y_non(const Matrix& y, std::size_t k);

class FanNormalizer : public ReversibleNormalizer {
public:
	FanNormalizer(std::size_t k, models::PredictorConfig predictor, std::uint64_t seed);

	NormalizerKind kind() const noexcept override { return NormalizerKind::Fan; }
	Normalized normalize(const Matrix& x) const override;
	Matrix denormalize(const Matrix& y_res, NormState& state) const override;
	Matrix denormalize_backward(const Matrix& grad_y, const Matrix* grad_y_non, const NormState& state) override;
	std::vector<models::ParamRef> trainable_parameters() override { return predictor_.parameters(); }
	void zero_grad() override { predictor_.zero_grad(); }
	bool has_prior_loss() const noexcept override { return true; }

	std::size_t k() const noexcept { return k_; }
	models::Predictor& predictor() noexcept { return predictor_; }
	const models::Predictor& predictor() const noexcept { return predictor_; }

protected:
	std::size_t k_;
	models::Predictor predictor_;
};

/// FAN with a frequency set fixed once from the training data.
class FanFixedNormalizer : public FanNormalizer {
public:
	FanFixedNormalizer(spectral::FrequencyMask global, models::PredictorConfig predictor, std::uint64_t seed);

	NormalizerKind kind() const noexcept override { return NormalizerKind::FanFixed; }
	Normalized normalize(const Matrix& x) const override;

	const spectral::FrequencyMask& global_mask() const noexcept { return global_; }

private:
	spectral::FrequencyMask global_;
};

/// FAN decomposition whose Y_non is X_non continued periodically over the horizon.
class FanNoPredictNormalizer : public ReversibleNormalizer {
public:
	FanNoPredictNormalizer(std::size_t k, Eigen::Index horizon);

	NormalizerKind kind() const noexcept override { return NormalizerKind::FanNoPredict; }
	Normalized normalize(const Matrix& x) const override;
	Matrix denormalize(const Matrix& y_res, NormState& state) const override;

private:
	std::size_t k_;
	Eigen::Index horizon_;
};

class RevinNormalizer : public ReversibleNormalizer {
public:
	static constexpr double kEps = 1e-5;

	NormalizerKind kind() const noexcept override { return NormalizerKind::Revin; }
	Normalized normalize(const Matrix& x) const override;
	Matrix denormalize(const Matrix& y_res, NormState& state) const override;
	Matrix denormalize_backward(const Matrix& grad_y, const Matrix* grad_y_non, const NormState& state) override;
};

class IdentityNormalizer : public ReversibleNormalizer {
public:
	NormalizerKind kind() const noexcept override { return NormalizerKind::Identity; }
	Normalized normalize(const Matrix& x) const override { return {x, std::monostate{}}; }
	Matrix denormalize(const Matrix& y_res, NormState&) const override { return y_res; }
};

/// Periodic continuation of an L-row signal to `horizon` rows.
Matrix tile_rows(const Matrix& x, Eigen::Index horizon);

} // namespace fan::normalizers
