#include "fan/error.hpp"
#include "fan/normalizers.hpp"
#include "fan/pipeline.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <vector>

using namespace fan;
using namespace fan::normalizers;
using Catch::Matchers::WithinAbs;

namespace {

models::PredictorConfig small_predictor() {
	models::PredictorConfig config;
	config.lookback = 16;
	config.horizon = 8;
	config.hidden = {12, 10};
	return config;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

Matrix tone_matrix(std::size_t length, std::vector<testing::Tone> parts) { return testing::tones(length, parts); }

} // namespace

TEST_CASE("FAN normalize removes the top-K tones", "[normalizers]") {
	FanNormalizer fan(2, small_predictor(), 1);
	SECTION("pure K-tone input leaves nothing") {
		const Matrix x = tone_matrix(16, {{1, 2.0, 0.3}, {4, 1.0, -0.5}});
		const auto n = fan.normalize(x);
		CHECK(max_abs(n.x_res) < 1e-9);
	}
	SECTION("decomposition identity and retained input") {
		SplitMix64 rng(1);
		const Matrix x = testing::random_matrix(16, 3, rng);
		const Matrix copy = x;
		const auto n = fan.normalize(x);
		const auto& state = std::get<FanState>(n.state);
		CHECK(max_abs(n.x_res + state.x_non - x) < 1e-9);
		CHECK(state.x == x);
		CHECK(x == copy);
		CHECK(state.mask.channels() == 3);
	}
}

TEST_CASE("FAN with K=1 on two tones leaves the weaker tone", "[normalizers]") {
	FanNormalizer fan(1, small_predictor(), 1);
	const Matrix x = tone_matrix(16, {{2, 3.0, 0.1}, {5, 1.0, 0.9}});
	const Matrix weaker = tone_matrix(16, {{5, 1.0, 0.9}});
	CHECK(max_abs(fan.normalize(x).x_res - weaker) < 1e-8);
}

TEST_CASE("FAN denormalize adds the predictor output", "[normalizers]") {
	FanNormalizer fan(1, small_predictor(), 2);
	SplitMix64 rng(2);
	const Matrix x = testing::random_matrix(16, 3, rng);
	const Matrix y_res = testing::random_matrix(8, 3, rng);

	auto n = fan.normalize(x);
	const Matrix zero_res = fan.denormalize(Matrix::Zero(8, 3), n.state);
	const auto& state = std::get<FanState>(n.state);
	CHECK(zero_res == fan.predictor().forward(state.x_non, state.x));
	CHECK(state.y_non_hat == zero_res);

	for (auto& p : fan.trainable_parameters()) {
		std::fill(p.value, p.value + p.size(), 0.0);
	}
	auto m = fan.normalize(x);
	CHECK(fan.denormalize(y_res, m.state) == y_res);
	CHECK_THROWS_AS(fan.denormalize(Matrix::Zero(7, 3), m.state), Error);
}

TEST_CASE("compute_y_non", "[normalizers]") {
	const Matrix y = tone_matrix(24, {{3, 1.5, 0.2}});
	CHECK(max_abs(compute_y_non(y, 1) - y) < 1e-8);
	SplitMix64 rng(3);
	const Matrix r = testing::random_matrix(24, 2, rng);
	const Matrix y_non = compute_y_non(r, 3);
	const auto d = spectral::frl_decompose(r, 3);
	CHECK(y_non == d.x_non);
	CHECK(max_abs(y_non + d.x_res - r) < 1e-9);
}

TEST_CASE("FAN-fixed uses one mask for every instance", "[normalizers]") {
	SECTION("constant dominant tone: fixed and instance-wise agree") {
		std::vector<Matrix> windows;
		for (int w = 0; w < 5; ++w) {
			windows.push_back(tone_matrix(16, {{3, 2.0, 0.4 * w}, {6, 0.3, -0.2 * w}}));
		}
		const auto mask = spectral::global_mask(windows, 1);
		FanFixedNormalizer fixed(mask, small_predictor(), 1);
		FanNormalizer instance(1, small_predictor(), 1);
		for (const auto& w : windows) {
			CHECK(max_abs(fixed.normalize(w).x_res - instance.normalize(w).x_res) < 1e-12);
		}
	}
	SECTION("alternating dominant tones") {
		std::vector<Matrix> windows;
		for (int w = 0; w < 6; ++w) {
			const std::size_t bin = w % 2 == 0 ? 2 : 5;
			windows.push_back(tone_matrix(16, {{bin, 1.0 + 0.1 * w, 0.3}}));
		}
		const auto mask = spectral::global_mask(windows, 1);
		FanFixedNormalizer fixed(mask, small_predictor(), 1);
		FanNormalizer instance(1, small_predictor(), 1);
		int left_over = 0;
		for (const auto& w : windows) {
			CHECK(max_abs(instance.normalize(w).x_res) < 1e-9);
			if (max_abs(fixed.normalize(w).x_res) > 0.5) {
				++left_over;
			}
		}
		CHECK(left_over == 3);
	}
}

TEST_CASE("FAN no-predict tiles the input component", "[normalizers]") {
	FanNoPredictNormalizer fan(1, 20);
	const Matrix x = tone_matrix(8, {{1, 1.0, 0.0}});
	auto n = fan.normalize(x);
	const Matrix y = fan.denormalize(Matrix::Zero(20, 1), n.state);
	for (Eigen::Index h = 0; h < 20; ++h) {
		CHECK_THAT(y(h, 0), WithinAbs(x(h % 8, 0), 1e-12));
	}
	CHECK(fan.trainable_parameters().empty());
}

TEST_CASE("RevIN", "[normalizers]") {
	RevinNormalizer revin;
	SECTION("constant window") {
		const Matrix x = Matrix::Constant(16, 2, 4.25);
		auto n = revin.normalize(x);
		CHECK(n.x_res.isZero(0.0));
		const Matrix back = revin.denormalize(Matrix::Zero(8, 2), n.state);
		CHECK((back.array() == 4.25).all());
		CHECK((std::get<RevinState>(n.state).stdev.array() >= RevinNormalizer::kEps).all());
	}
	SECTION("round trip with an oracle backbone") {
		SplitMix64 rng(4);
		const Matrix x = testing::random_matrix(16, 3, rng, 4.0);
		auto n = revin.normalize(x);
		const auto& s = std::get<RevinState>(n.state);
		CHECK(max_abs(n.x_res.colwise().mean()) < 1e-12);
		const Matrix y = testing::random_matrix(8, 3, rng, 4.0);
		Matrix y_norm = y;
		for (Eigen::Index c = 0; c < 3; ++c) {
			y_norm.col(c) = (y.col(c).array() - s.mean(c)) / s.stdev(c);
		}
		CHECK(max_abs(revin.denormalize(y_norm, n.state) - y) < 1e-9);
	}
}

TEST_CASE("frequency ramp: RevIN statistics stay flat while FAN masks move", "[normalizers]") {
	RevinNormalizer revin;
	FanNormalizer fan(1, small_predictor(), 1);
	std::vector<spectral::FrequencyMask> masks;
	for (std::size_t bin : {1u, 3u, 6u}) {
		const Matrix segment = tone_matrix(16, {{bin, 2.0, 0.0}});
		const auto r = revin.normalize(segment);
		const auto& s = std::get<RevinState>(r.state);
		CHECK(std::abs(s.mean(0)) < 1e-12);
		CHECK_THAT(s.stdev(0), WithinAbs(std::sqrt(2.0), 1e-9));
		masks.push_back(std::get<FanState>(fan.normalize(segment).state).mask);
	}
	CHECK(masks[0] != masks[1]);
	CHECK(masks[1] != masks[2]);
	CHECK(masks[0] != masks[2]);
}

TEST_CASE("identity normalizer", "[normalizers]") {
	IdentityNormalizer id;
	SplitMix64 rng(5);
	const Matrix x = testing::random_matrix(16, 2, rng);
	auto n = id.normalize(x);
	CHECK(n.x_res == x);
	CHECK(std::holds_alternative<std::monostate>(n.state));
	CHECK(id.denormalize(x, n.state) == x);

	training::PipelineConfig config;
	config.normalizer = NormalizerKind::Identity;
	config.lookback = 16;
	config.horizon = 8;
	config.kernel = 5;
	training::Pipeline pipeline(config);
	CHECK(pipeline.predict(x) == pipeline.backbone().forward(x));
}

TEST_CASE("FAN masks are scale-invariant", "[normalizers][property]") {
	FanNormalizer fan(3, small_predictor(), 1);
	SplitMix64 rng(6);
	for (int trial = 0; trial < 20; ++trial) {
		const Matrix x = testing::random_matrix(16, 3, rng);
		const double alpha = rng.uniform(0.001, 1000.0);
		CHECK(std::get<FanState>(fan.normalize(x).state).mask ==
		      std::get<FanState>(fan.normalize(alpha * x).state).mask);
	}
}

TEST_CASE("normalizer names parse", "[normalizers]") {
	CHECK(parse_normalizer("fan") == NormalizerKind::Fan);
	CHECK(parse_normalizer("fan-fixed") == NormalizerKind::FanFixed);
	CHECK(parse_normalizer("revin") == NormalizerKind::Revin);
	CHECK(parse_normalizer("none") == NormalizerKind::Identity);
	CHECK(to_string(NormalizerKind::Identity) == "none");
	CHECK_THROWS_AS(parse_normalizer("san"), Error);
}
