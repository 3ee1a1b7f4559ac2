#include "fan/models.hpp"

#include "fan/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fan::models {

namespace {

std::string shape_of(const Matrix& m) {
	return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_rows(const Matrix& m, Eigen::Index rows, const char* what) {
	if (m.rows() != rows) {
		fail(ErrorKind::Shape, std::string(what) + ": expected " + std::to_string(rows) + " rows, got " + shape_of(m));
	}
}

} // namespace

// ---------------------------------------------------------------------------
// DenseLayer

DenseLayer::DenseLayer(Eigen::Index in, Eigen::Index out, bool has_bias)
    : weight(Matrix::Zero(out, in)), bias(Vector::Zero(out)), grad_weight(Matrix::Zero(out, in)),
      grad_bias(Vector::Zero(out)), has_bias_(has_bias) {
	if (in < 1 || out < 1) {
		fail(ErrorKind::Shape, "dense layer dimensions must be positive");
	}
}

void DenseLayer::init_uniform(SplitMix64& rng) {
	const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
	// Row-major fill order is part of the reproducibility contract.
	for (Eigen::Index r = 0; r < weight.rows(); ++r) {
		for (Eigen::Index c = 0; c < weight.cols(); ++c) {
			weight(r, c) = rng.uniform(-bound, bound);
		}
	}
	bias.setZero();
}

Matrix DenseLayer::forward(const Matrix& x) const {
	require_rows(x, in_features(), "dense forward");
	Matrix out(out_features(), x.cols());
	out.noalias() = weight * x;
	if (has_bias_) {
		out.colwise() += bias;
	}
	return out;
}

Matrix DenseLayer::backward(const Matrix& x, const Matrix& grad_out, bool want_grad_in) {
	require_rows(x, in_features(), "dense backward input");
	require_rows(grad_out, out_features(), "dense backward grad");
	if (x.cols() != grad_out.cols()) {
		fail(ErrorKind::Shape, "dense backward: input " + shape_of(x) + " vs grad " + shape_of(grad_out));
	}
	grad_weight.noalias() += grad_out * x.transpose();
	if (has_bias_) {
		grad_bias += grad_out.rowwise().sum();
	}
	if (!want_grad_in) {
		return {};
	}
	Matrix grad_in(in_features(), x.cols());
	grad_in.noalias() = weight.transpose() * grad_out;
	return grad_in;
}

void DenseLayer::zero_grad() {
	grad_weight.setZero();
	grad_bias.setZero();
}

void DenseLayer::collect(std::vector<ParamRef>& out, const std::string& prefix) {
	out.push_back({prefix + ".weight", weight.data(), grad_weight.data(), weight.rows(), weight.cols()});
	if (has_bias_) {
		out.push_back({prefix + ".bias", bias.data(), grad_bias.data(), bias.rows(), 1});
	}
}

Matrix relu(const Matrix& x) {
	return x.cwiseMax(0.0);
}

Matrix relu_backward(const Matrix& x, const Matrix& grad_out) {
	if (x.rows() != grad_out.rows() || x.cols() != grad_out.cols()) {
		fail(ErrorKind::Shape, "relu backward: input " + shape_of(x) + " vs grad " + shape_of(grad_out));
	}
	return (x.array() > 0.0).select(grad_out, 0.0);
}

// ---------------------------------------------------------------------------
// Predictor

Predictor::Predictor(PredictorConfig config, std::uint64_t seed) : config_(std::move(config)) {
	const auto& hidden = config_.hidden;
	if (config_.lookback < 1 || config_.horizon < 1) {
		fail(ErrorKind::InvalidParameter, "predictor lookback and horizon must be positive");
	}
	if (hidden.size() < 2) {
		fail(ErrorKind::InvalidParameter, "predictor needs at least two hidden sizes");
	}
	const bool bias = config_.bias;
	layers_.emplace_back(config_.lookback, hidden[0], bias);
	layers_.emplace_back(hidden[0] + config_.lookback, hidden[1], bias);
	for (std::size_t i = 2; i < hidden.size(); ++i) {
		layers_.emplace_back(hidden[i - 1], hidden[i], bias);
	}
	layers_.emplace_back(hidden.back(), config_.horizon, bias);

	SplitMix64 rng(seed);
	for (auto& layer : layers_) {
		layer.init_uniform(rng);
	}
}

Matrix Predictor::forward(const Matrix& x_non, const Matrix& x, PredictorTape* tape) const {
	require_rows(x_non, config_.lookback, "predictor x_non");
	require_rows(x, config_.lookback, "predictor x");
	if (x_non.cols() != x.cols()) {
		fail(ErrorKind::Shape, "predictor inputs " + shape_of(x_non) + " and " + shape_of(x) + " disagree");
	}
	if (layers_.empty()) {
		fail(ErrorKind::State, "predictor is not initialised");
	}
	if (tape) {
		tape->valid = false;
		tape->inputs.clear();
		tape->preacts.clear();
	}

	Matrix pre = layers_[0].forward(x_non);
	Matrix concat(layers_[1].in_features(), x.cols());
	concat.topRows(pre.rows()) = relu(pre);
	concat.bottomRows(x.rows()) = x;
	if (tape) {
		tape->inputs.push_back(x_non);
		tape->preacts.push_back(std::move(pre));
	}

	Matrix h = std::move(concat);
	for (std::size_t i = 1; i + 1 < layers_.size(); ++i) {
		Matrix p = layers_[i].forward(h);
		Matrix next = relu(p);
		if (tape) {
			tape->inputs.push_back(std::move(h));
			tape->preacts.push_back(std::move(p));
		}
		h = std::move(next);
	}
	Matrix out = layers_.back().forward(h);
	if (tape) {
		tape->inputs.push_back(std::move(h));
		tape->valid = true;
	}
	return out;
}

Predictor::InputGrads Predictor::backward(const PredictorTape& tape, const Matrix& grad_out) {
	if (!tape.valid || tape.inputs.size() != layers_.size()) {
		fail(ErrorKind::State, "predictor backward called without a recorded forward pass");
	}
	require_rows(grad_out, config_.horizon, "predictor grad_out");
	Matrix grad = layers_.back().backward(tape.inputs.back(), grad_out);
	for (std::size_t i = layers_.size() - 1; i-- > 1;) {
		grad = layers_[i].backward(tape.inputs[i], relu_backward(tape.preacts[i], grad));
	}
	// grad is now w.r.t. [ReLU(W1 x_non); x].
	const Eigen::Index first = layers_[0].out_features();
	InputGrads out;
	out.x = grad.bottomRows(config_.lookback);
	out.x_non = layers_[0].backward(tape.inputs[0], relu_backward(tape.preacts[0], grad.topRows(first)));
	return out;
}

std::vector<ParamRef> Predictor::parameters() {
	std::vector<ParamRef> out;
	for (std::size_t i = 0; i < layers_.size(); ++i) {
		layers_[i].collect(out, "predictor.layer" + std::to_string(i));
	}
	return out;
}

void Predictor::zero_grad() {
	for (auto& layer : layers_) {
		layer.zero_grad();
	}
}

// ---------------------------------------------------------------------------
// Backbone

std::string to_string(BackboneKind kind) {
	switch (kind) {
	case BackboneKind::DLinear:
		return "dlinear";
	case BackboneKind::Naive:
		return "naive";
	case BackboneKind::Zero:
		return "zero";
	}
	return "unknown";
}

BackboneKind parse_backbone(const std::string& name) {
	if (name == "dlinear") {
		return BackboneKind::DLinear;
	}
	if (name == "naive") {
		return BackboneKind::Naive;
	}
	if (name == "zero") {
		return BackboneKind::Zero;
	}
	fail(ErrorKind::InvalidParameter, "unknown backbone '" + name + "' (expected dlinear, naive or zero)");
}

Backbone::Backbone(BackboneConfig config, std::uint64_t seed) : config_(config) {
	if (config_.lookback < 1 || config_.horizon < 1) {
		fail(ErrorKind::InvalidParameter, "backbone lookback and horizon must be positive");
	}
	if (config_.kind != BackboneKind::DLinear) {
		return;
	}
	if (config_.kernel < 1 || config_.kernel % 2 == 0 || config_.kernel > config_.lookback) {
		fail(ErrorKind::InvalidParameter, "moving-average kernel must be odd and <= lookback, got " +
		                                      std::to_string(config_.kernel));
	}
	trend_ = DenseLayer(config_.lookback, config_.horizon);
	seasonal_ = DenseLayer(config_.lookback, config_.horizon);
	SplitMix64 rng(seed);
	trend_.init_uniform(rng);
	seasonal_.init_uniform(rng);

	const Eigen::Index length = config_.lookback;
	const Eigen::Index half = config_.kernel / 2;
	const double weight = 1.0 / static_cast<double>(config_.kernel);
	average_ = Matrix::Zero(length, length);
	for (Eigen::Index t = 0; t < length; ++t) {
		for (Eigen::Index j = -half; j <= half; ++j) {
			const Eigen::Index src = std::clamp<Eigen::Index>(t + j, 0, length - 1);
			average_(t, src) += weight;
		}
	}
}

// y = Wt (A x) + Ws (x - A x) + bt + bs = [Ws + (Wt - Ws) A] x + bt + bs,
// so a single effective weight serves forward and backward.
Matrix Backbone::forward(const Matrix& x, BackboneTape* tape) const {
	require_rows(x, config_.lookback, "backbone input");
	if (tape) {
		tape->input = x;
		tape->valid = true;
	}
	switch (config_.kind) {
	case BackboneKind::Naive:
		return x.row(x.rows() - 1).replicate(config_.horizon, 1);
	case BackboneKind::Zero:
		return Matrix::Zero(config_.horizon, x.cols());
	case BackboneKind::DLinear:
		break;
	}
	Matrix effective = seasonal_.weight;
	effective.noalias() += (trend_.weight - seasonal_.weight) * average_;
	Matrix out(config_.horizon, x.cols());
	out.noalias() = effective * x;
	out.colwise() += trend_.bias + seasonal_.bias;
	return out;
}

Matrix Backbone::backward(const BackboneTape& tape, const Matrix& grad_out, bool want_grad_in) {
	if (!tape.valid) {
		fail(ErrorKind::State, "backbone backward called without a recorded forward pass");
	}
	require_rows(grad_out, config_.horizon, "backbone grad_out");
	if (grad_out.cols() != tape.input.cols()) {
		fail(ErrorKind::Shape, "backbone grad " + shape_of(grad_out) + " vs input " + shape_of(tape.input));
	}
	switch (config_.kind) {
	case BackboneKind::Naive: {
		if (!want_grad_in) {
			return {};
		}
		Matrix grad_in = Matrix::Zero(config_.lookback, grad_out.cols());
		grad_in.row(config_.lookback - 1) = grad_out.colwise().sum();
		return grad_in;
	}
	case BackboneKind::Zero:
		return want_grad_in ? Matrix(Matrix::Zero(config_.lookback, grad_out.cols())) : Matrix();
	case BackboneKind::DLinear:
		break;
	}
	Matrix grad_effective(config_.horizon, config_.lookback);
	grad_effective.noalias() = grad_out * tape.input.transpose();
	Matrix grad_trend(config_.horizon, config_.lookback);
	grad_trend.noalias() = grad_effective * average_.transpose();
	trend_.grad_weight += grad_trend;
	seasonal_.grad_weight += grad_effective - grad_trend;
	const Vector grad_b = grad_out.rowwise().sum();
	trend_.grad_bias += grad_b;
	seasonal_.grad_bias += grad_b;
	if (!want_grad_in) {
		return {};
	}
	Matrix effective = seasonal_.weight;
	effective.noalias() += (trend_.weight - seasonal_.weight) * average_;
	Matrix grad_in(config_.lookback, grad_out.cols());
	grad_in.noalias() = effective.transpose() * grad_out;
	return grad_in;
}

std::vector<ParamRef> Backbone::parameters() {
	std::vector<ParamRef> out;
	if (config_.kind == BackboneKind::DLinear) {
		trend_.collect(out, "backbone.trend");
		seasonal_.collect(out, "backbone.seasonal");
	}
	return out;
}

void Backbone::zero_grad() {
	if (config_.kind == BackboneKind::DLinear) {
		trend_.zero_grad();
		seasonal_.zero_grad();
	}
}

} // namespace fan::models
