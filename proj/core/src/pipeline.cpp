#include "fan/pipeline.hpp"

#include "fan/error.hpp"

#include <string>

namespace fan::training {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
	if (a.rows() != b.rows() || a.cols() != b.cols()) {
		fail(ErrorKind::Shape, std::string(what) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
		                           " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
	}
}

// Distinct init streams for the two parameter groups.
constexpr std::uint64_t kBackboneStream = 0x0000000000000000ULL;
constexpr std::uint64_t kPredictorStream = 0x5DEECE66DULL;

} // namespace

double mse(const Matrix& y_hat, const Matrix& y) {
	require_same_shape(y_hat, y, "mse");
	if (y.size() == 0) {
		fail(ErrorKind::Shape, "mse of an empty matrix");
	}
	return (y_hat - y).squaredNorm() / static_cast<double>(y.size());
}

LossParts dual_loss(const Matrix& y_hat, const Matrix& y, const Matrix& y_non_hat, const Matrix& y_non) {
	LossParts parts;
	parts.forecast = mse(y_hat, y);
	parts.nonstat = mse(y_non_hat, y_non);
	parts.total = parts.forecast + parts.nonstat;
	return parts;
}

Pipeline::Pipeline(const PipelineConfig& config, const std::optional<spectral::FrequencyMask>& global_mask)
    : config_(config) {
	using normalizers::NormalizerKind;
	models::PredictorConfig predictor{config.lookback, config.horizon, config.hidden, config.predictor_bias};
	const std::uint64_t predictor_seed = config.seed ^ kPredictorStream;
	switch (config.normalizer) {
	case NormalizerKind::Fan:
		normalizer_ = std::make_unique<normalizers::FanNormalizer>(config.k, predictor, predictor_seed);
		break;
	case NormalizerKind::FanFixed:
		if (!global_mask) {
			fail(ErrorKind::InvalidParameter, "fixed-frequency FAN requires a global mask");
		}
		normalizer_ = std::make_unique<normalizers::FanFixedNormalizer>(*global_mask, predictor, predictor_seed);
		break;
	case NormalizerKind::FanNoPredict:
		normalizer_ = std::make_unique<normalizers::FanNoPredictNormalizer>(config.k, config.horizon);
		break;
	case NormalizerKind::Revin:
		normalizer_ = std::make_unique<normalizers::RevinNormalizer>();
		break;
	case NormalizerKind::Identity:
		normalizer_ = std::make_unique<normalizers::IdentityNormalizer>();
		break;
	}
	backbone_ = models::Backbone({config.backbone, config.lookback, config.horizon, config.kernel},
	                             config.seed ^ kBackboneStream);
}

Pipeline::Pass Pipeline::run(const Matrix& x, bool record) const {
	if (x.rows() != config_.lookback) {
		fail(ErrorKind::Shape, "pipeline expects " + std::to_string(config_.lookback) + " input rows, got " +
		                           std::to_string(x.rows()));
	}
	Pass pass;
	pass.normalized = normalizer_->normalize(x);
	const Matrix y_res = backbone_.forward(pass.normalized.x_res, record ? &pass.backbone_tape : nullptr);
	pass.y_hat = normalizer_->denormalize(y_res, pass.normalized.state);
	return pass;
}

bool Pipeline::uses_y_non() const noexcept {
	using normalizers::NormalizerKind;
	const NormalizerKind kind = normalizer_->kind();
	return kind == NormalizerKind::Fan || kind == NormalizerKind::FanFixed || kind == NormalizerKind::FanNoPredict;
}

LossParts Pipeline::score(const Pass& pass, const Matrix& y, const Matrix* given_y_non, Matrix* y_non_out) const {
	const auto* fan = std::get_if<normalizers::FanState>(&pass.normalized.state);
	if (fan == nullptr) {
		LossParts parts;
		parts.forecast = mse(pass.y_hat, y);
		parts.total = parts.forecast;
		return parts;
	}
	if (given_y_non != nullptr) {
		if (y_non_out != nullptr) {
			*y_non_out = *given_y_non;
		}
		return dual_loss(pass.y_hat, y, fan->y_non_hat, *given_y_non);
	}
	Matrix y_non = normalizers::compute_y_non(y, config_.k);
	const LossParts parts = dual_loss(pass.y_hat, y, fan->y_non_hat, y_non);
	if (y_non_out != nullptr) {
		*y_non_out = std::move(y_non);
	}
	return parts;
}

Matrix Pipeline::predict(const Matrix& x) const {
	return run(x, false).y_hat;
}

LossParts Pipeline::loss(const Matrix& x, const Matrix& y) const {
	const Pass pass = run(x, false);
	return score(pass, y, nullptr, nullptr);
}

LossParts Pipeline::accumulate_gradients(const Matrix& x, const Matrix& y, const Matrix* given_y_non) {
	const Pass pass = run(x, true);
	Matrix y_non;
	const LossParts parts = score(pass, y, given_y_non, &y_non);

	const double scale = 2.0 / static_cast<double>(y.size());
	const Matrix grad_y = scale * (pass.y_hat - y);
	Matrix grad_y_res;
	if (normalizer_->has_prior_loss()) {
		const auto& fan = std::get<normalizers::FanState>(pass.normalized.state);
		const Matrix grad_y_non = scale * (fan.y_non_hat - y_non);
		grad_y_res = normalizer_->denormalize_backward(grad_y, &grad_y_non, pass.normalized.state);
	} else {
		grad_y_res = normalizer_->denormalize_backward(grad_y, nullptr, pass.normalized.state);
	}
	backbone_.backward(pass.backbone_tape, grad_y_res, false);
	return parts;
}

std::vector<models::ParamRef> Pipeline::parameters() {
	std::vector<models::ParamRef> out = backbone_.parameters();
	for (auto& p : normalizer_->trainable_parameters()) {
		out.push_back(std::move(p));
	}
	return out;
}

void Pipeline::zero_grad() {
	backbone_.zero_grad();
	normalizer_->zero_grad();
}

} // namespace fan::training
