#include "fan/normalizers.hpp"

#include "fan/error.hpp"

#include <cmath>

namespace fan::normalizers {

std::string to_string(NormalizerKind kind) {
	switch (kind) {
	case NormalizerKind::Fan:
		return "fan";
	case NormalizerKind::FanFixed:
		return "fan-fixed";
	case NormalizerKind::FanNoPredict:
		return "fan-no-predict";
	case NormalizerKind::Revin:
		return "revin";
	case NormalizerKind::Identity:
		return "none";
	}
	return "unknown";
}

NormalizerKind parse_normalizer(const std::string& name) {
	if (name == "fan") {
		return NormalizerKind::Fan;
	}
	if (name == "fan-fixed") {
		return NormalizerKind::FanFixed;
	}
	if (name == "fan-no-predict") {
		return NormalizerKind::FanNoPredict;
	}
	if (name == "revin") {
		return NormalizerKind::Revin;
	}
	if (name == "none" || name == "identity") {
		return NormalizerKind::Identity;
	}
	fail(ErrorKind::InvalidParameter,
	     "unknown normalizer '" + name + "' (expected fan, fan-fixed, fan-no-predict, revin or none)");
}

Matrix ReversibleNormalizer::denormalize_backward(const Matrix& grad_y, const Matrix*, const NormState&) {
	return grad_y;
}

Matrix compute_y_non(const Matrix& y, std::size_t k) {
	return spectral::frl_decompose(y, k).x_non;
}

Matrix tile_rows(const Matrix& x, Eigen::Index horizon) {
	Matrix out(horizon, x.cols());
	for (Eigen::Index h = 0; h < horizon; ++h) {
		out.row(h) = x.row(h % x.rows());
	}
	return out;
}

namespace {

const FanState& fan_state(const NormState& state) {
	const auto* s = std::get_if<FanState>(&state);
	if (s == nullptr) {
		fail(ErrorKind::State, "denormalize received a state not produced by a FAN normalize");
	}
	return *s;
}

FanState& fan_state(NormState& state) {
	return const_cast<FanState&>(fan_state(static_cast<const NormState&>(state)));
}

Normalized from_decomposition(const Matrix& x, spectral::Decomposition&& d) {
	Normalized out;
	FanState state;
	state.x = x;
	state.x_non = std::move(d.x_non);
	state.mask = std::move(d.mask);
	out.x_res = std::move(d.x_res);
	out.state = std::move(state);
	return out;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
	if (a.rows() != b.rows() || a.cols() != b.cols()) {
		fail(ErrorKind::Shape, std::string(what) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
		                           " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
	}
}

} // namespace

// ---------------------------------------------------------------------------

FanNormalizer::FanNormalizer(std::size_t k, models::PredictorConfig predictor, std::uint64_t seed)
    : k_(k), predictor_(std::move(predictor), seed) {
	if (k_ < 1) {
		fail(ErrorKind::InvalidParameter, "FAN needs k >= 1");
	}
}

Normalized FanNormalizer::normalize(const Matrix& x) const {
	return from_decomposition(x, spectral::frl_decompose(x, k_));
}

Matrix FanNormalizer::denormalize(const Matrix& y_res, NormState& state) const {
	FanState& s = fan_state(state);
	if (y_res.cols() != s.x.cols()) {
		fail(ErrorKind::Shape, "backbone output has " + std::to_string(y_res.cols()) + " columns, state has " +
		                           std::to_string(s.x.cols()));
	}
	s.y_non_hat = predictor_.forward(s.x_non, s.x, &s.tape);
	require_same_shape(y_res, s.y_non_hat, "FAN denormalize");
	return y_res + s.y_non_hat;
}

Matrix FanNormalizer::denormalize_backward(const Matrix& grad_y, const Matrix* grad_y_non, const NormState& state) {
	const FanState& s = fan_state(state);
	if (grad_y_non != nullptr) {
		require_same_shape(grad_y, *grad_y_non, "FAN backward");
		predictor_.backward(s.tape, grad_y + *grad_y_non);
	} else {
		predictor_.backward(s.tape, grad_y);
	}
	return grad_y;
}

FanFixedNormalizer::FanFixedNormalizer(spectral::FrequencyMask global, models::PredictorConfig predictor,
                                       std::uint64_t seed)
    : FanNormalizer(global.k, std::move(predictor), seed), global_(std::move(global)) {
	if (global_.channels() == 0) {
		fail(ErrorKind::InvalidParameter, "fixed-frequency FAN needs a non-empty global mask");
	}
}

Normalized FanFixedNormalizer::normalize(const Matrix& x) const {
	return from_decomposition(x, spectral::frl_decompose_with_mask(x, global_));
}

FanNoPredictNormalizer::FanNoPredictNormalizer(std::size_t k, Eigen::Index horizon) : k_(k), horizon_(horizon) {
	if (k_ < 1) {
		fail(ErrorKind::InvalidParameter, "FAN needs k >= 1");
	}
}

Normalized FanNoPredictNormalizer::normalize(const Matrix& x) const {
	return from_decomposition(x, spectral::frl_decompose(x, k_));
}

Matrix FanNoPredictNormalizer::denormalize(const Matrix& y_res, NormState& state) const {
	FanState& s = fan_state(state);
	s.y_non_hat = tile_rows(s.x_non, horizon_);
	require_same_shape(y_res, s.y_non_hat, "FAN (no predict) denormalize");
	return y_res + s.y_non_hat;
}

// ---------------------------------------------------------------------------

Normalized RevinNormalizer::normalize(const Matrix& x) const {
	if (x.rows() < 2) {
		fail(ErrorKind::InvalidLength, "RevIN needs windows of length >= 2");
	}
	RevinState state;
	state.mean = x.colwise().mean().transpose();
	const Matrix centered = x.rowwise() - state.mean.transpose();
	state.stdev = (centered.colwise().squaredNorm().transpose() / static_cast<double>(x.rows()))
	                  .cwiseSqrt()
	                  .cwiseMax(kEps);
	Normalized out;
	out.x_res = centered.array().rowwise() / state.stdev.transpose().array();
	out.state = std::move(state);
	return out;
}

Matrix RevinNormalizer::denormalize(const Matrix& y_res, NormState& state) const {
	const auto* s = std::get_if<RevinState>(&state);
	if (s == nullptr) {
		fail(ErrorKind::State, "RevIN denormalize received a foreign state");
	}
	if (y_res.cols() != s->mean.size()) {
		fail(ErrorKind::Shape, "RevIN denormalize: column count mismatch");
	}
	Matrix out = y_res.array().rowwise() * s->stdev.transpose().array();
	out.rowwise() += s->mean.transpose();
	return out;
}

Matrix RevinNormalizer::denormalize_backward(const Matrix& grad_y, const Matrix*, const NormState& state) {
	const auto& s = std::get<RevinState>(state);
	return grad_y.array().rowwise() * s.stdev.transpose().array();
}

} // namespace fan::normalizers
