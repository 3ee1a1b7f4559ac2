#pragma once

#include "fan/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

/**
 * Differentiable building blocks with hand-written reverse-mode gradients.
 *
 * Every batched tensor is laid out with features down the rows and samples
 * across the columns, so a batch of B windows with D channels is a matrix with
 * B * D columns. Parameters are shared across channels.
 */
namespace fan::models {

/// Non-owning view of one trainable tensor and its gradient buffer.
struct ParamRef {
	std::string name;
	double* value = nullptr;
	double* grad = nullptr;
	Eigen::Index rows = 0;
	Eigen::Index cols = 0;

	Eigen::Index size() const noexcept { return rows * cols; }
};

class DenseLayer {
public:
	DenseLayer() = default;
	DenseLayer(Eigen::Index in, Eigen::Index out, bool has_bias = true);

	bool has_bias() const noexcept { return has_bias_; }

	Eigen::Index in_features() const noexcept { return weight.cols(); }
	Eigen::Index out_features() const noexcept { return weight.rows(); }

	/// Weights uniform in +-1/sqrt(in), bias zero.
	void init_uniform(SplitMix64& rng);

	/// W x + b for each column of x.
	Matrix forward(const Matrix& x) const;

	/// Accumulates dL/dW and dL/db; returns W^T grad_out (empty when !want_grad_in).
	Matrix backward(const Matrix& x, const Matrix& grad_out, bool want_grad_in = true);

	void zero_grad();
	void collect(std::vector<ParamRef>& out, const std::string& prefix);

	Matrix weight;
	Vector bias;
	Matrix grad_weight;
	Vector grad_bias;

private:
	bool has_bias_ = true;
};

Matrix relu(const Matrix& x);

/// Subgradient 0 at x == 0.
Matrix relu_backward(const Matrix& x, const Matrix& grad_out);

struct PredictorConfig {
	Eigen::Index lookback = 96;
	Eigen::Index horizon = 96;
	/// First entry is the width of ReLU(W1 x_non); the rest follow the concat.
	std::vector<Eigen::Index> hidden = {64, 128};
	/// Adds zero-initialized biases to every layer. Off: W3 ReLU(W2 [ReLU(W1 x_non); x]).
	bool bias = false;
};

/// Activations recorded by Predictor::forward for the backward pass.
struct PredictorTape {
	bool valid = false;
	std::vector<Matrix> inputs;      // input of each layer
	std::vector<Matrix> preacts;     // pre-activation of each hidden layer
};

/**
 * Horizon forecaster for the principal frequency component:
 *   y_non = W_out ReLU(... ReLU(W_2 [ReLU(W_1 x_non); x]))
 * applied per channel with shared weights.
 */
class Predictor {
public:
	Predictor() = default;
	Predictor(PredictorConfig config, std::uint64_t seed);

	const PredictorConfig& config() const noexcept { return config_; }

	Matrix forward(const Matrix& x_non, const Matrix& x, PredictorTape* tape = nullptr) const;

	struct InputGrads {
		Matrix x_non;
		Matrix x;
	};

	/// Accumulates parameter gradients; returns gradients w.r.t. both inputs.
	InputGrads backward(const PredictorTape& tape, const Matrix& grad_out);

	std::vector<ParamRef> parameters();
	void zero_grad();

	std::vector<DenseLayer>& layers() noexcept { return layers_; }
	const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

private:
	PredictorConfig config_;
	std::vector<DenseLayer> layers_;
};

enum class BackboneKind { DLinear, Naive, Zero };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone(const std::string& name);

struct BackboneConfig {
	BackboneKind kind = BackboneKind::DLinear;
	Eigen::Index lookback = 96;
	Eigen::Index horizon = 96;
	Eigen::Index kernel = 25; // moving-average window, odd
};

struct BackboneTape {
	bool valid = false;
	Matrix input;
};

/**
 * Forecasting model for the residual.
 *
 * dlinear: replicate-padded moving average splits the input into trend and
 * remainder; each is mapped lookback -> horizon by its own linear layer and the
 * results are summed. naive: repeats the last input value. zero: always 0.
 */
class Backbone {
public:
	Backbone() = default;
	Backbone(BackboneConfig config, std::uint64_t seed);

	const BackboneConfig& config() const noexcept { return config_; }

	Matrix forward(const Matrix& x, BackboneTape* tape = nullptr) const;
	Matrix backward(const BackboneTape& tape, const Matrix& grad_out, bool want_grad_in = true);

	/// trend = moving_average() * x.
	const Matrix& moving_average() const noexcept { return average_; }

	std::vector<ParamRef> parameters();
	void zero_grad();

	DenseLayer& trend_linear() noexcept { return trend_; }
	DenseLayer& seasonal_linear() noexcept { return seasonal_; }

private:
	BackboneConfig config_;
	DenseLayer trend_;
	DenseLayer seasonal_;
	Matrix average_;
};

} // namespace fan::models
