#include "fan/error.hpp"
#include "fan/pipeline.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <vector>

using namespace fan;
using namespace fan::training;
using normalizers::NormalizerKind;
using Catch::Matchers::WithinAbs;

namespace {

PipelineConfig small(NormalizerKind kind, models::BackboneKind backbone = models::BackboneKind::DLinear) {
	PipelineConfig config;
	config.normalizer = kind;
	config.backbone = backbone;
	config.lookback = 16;
	config.horizon = 8;
	config.kernel = 5;
	config.k = 2;
	config.hidden = {12, 10};
	return config;
}

} // namespace

TEST_CASE("dual loss closed forms", "[pipeline]") {
	SplitMix64 rng(1);
	const Matrix y = testing::random_matrix(8, 3, rng);
	const Matrix y_non = testing::random_matrix(8, 3, rng);
	const auto perfect = dual_loss(y, y, y_non, y_non);
	CHECK(perfect.total == 0.0);
	const auto shifted = dual_loss(y, y, y_non.array() + 0.5, y_non);
	CHECK_THAT(shifted.total, WithinAbs(0.25, 1e-15));
	CHECK(shifted.forecast == 0.0);
	CHECK_THAT(shifted.nonstat, WithinAbs(0.25, 1e-15));
	const Matrix y_hat = testing::random_matrix(8, 3, rng);
	const auto parts = dual_loss(y_hat, y, y_non, y);
	CHECK(parts.forecast >= 0.0);
	CHECK(parts.nonstat >= 0.0);
	CHECK(parts.total == parts.forecast + parts.nonstat);
	CHECK_THROWS_AS(dual_loss(y, Matrix::Zero(8, 2), y, y), Error);
}

TEST_CASE("gradient of the forecast MSE is 2(y_hat - y) / n", "[pipeline][gradient]") {
	SplitMix64 rng(2);
	Matrix y_hat = testing::random_matrix(8, 3, rng);
	const Matrix y = testing::random_matrix(8, 3, rng);
	Matrix grad = 2.0 * (y_hat - y) / static_cast<double>(y.size());
	std::vector<models::ParamRef> ref{{"y_hat", y_hat.data(), grad.data(), 8, 3}};
	const auto check = testing::finite_difference_check(ref, [&] { return dual_loss(y_hat, y, y, y).total; });
	CHECK(check.worst_relative < 1e-4);
}

TEST_CASE("pipeline loss gradients match finite differences", "[pipeline][gradient]") {
	const std::vector<PipelineConfig> configs{
	    small(NormalizerKind::Fan),
	    small(NormalizerKind::Fan, models::BackboneKind::Zero),
	    small(NormalizerKind::Fan, models::BackboneKind::Naive),
	    small(NormalizerKind::FanNoPredict),
	    small(NormalizerKind::Revin),
	    small(NormalizerKind::Identity),
	};
	SplitMix64 rng(3);
	for (auto config : configs) {
		config.seed = rng.next();
		Pipeline pipeline(config);
		auto params = pipeline.parameters();
		const Matrix x = testing::random_matrix(16, 6, rng, 2.0);
		const Matrix y = testing::random_matrix(8, 6, rng, 2.0);
		pipeline.zero_grad();
		const auto parts = pipeline.accumulate_gradients(x, y);
		CHECK(parts.total == pipeline.loss(x, y).total);
		if (params.empty()) {
			continue;
		}
		INFO(normalizers::to_string(config.normalizer) << " + " << models::to_string(config.backbone));
		const auto check = testing::finite_difference_check(params, [&] { return pipeline.loss(x, y).total; });
		CHECK(check.worst_relative < 1e-4);
	}
}

TEST_CASE("FAN-fixed pipeline gradients", "[pipeline][gradient]") {
	spectral::FrequencyMask mask;
	mask.k = 2;
	mask.indices = {{0, 3}};
	Pipeline pipeline(small(NormalizerKind::FanFixed), mask);
	SplitMix64 rng(4);
	const Matrix x = testing::random_matrix(16, 4, rng);
	const Matrix y = testing::random_matrix(8, 4, rng);
	pipeline.zero_grad();
	(void)pipeline.accumulate_gradients(x, y);
	auto params = pipeline.parameters();
	CHECK(testing::finite_difference_check(params, [&] { return pipeline.loss(x, y).total; }).worst_relative < 1e-4);
	CHECK_THROWS_AS(Pipeline(small(NormalizerKind::FanFixed)), Error);
}

TEST_CASE("prior-loss targets can be supplied", "[pipeline]") {
	Pipeline a(small(NormalizerKind::Fan));
	Pipeline b(small(NormalizerKind::Fan));
	SplitMix64 rng(5);
	const Matrix x = testing::random_matrix(16, 3, rng);
	const Matrix y = testing::random_matrix(8, 3, rng);
	const Matrix y_non = normalizers::compute_y_non(y, 2);
	a.zero_grad();
	b.zero_grad();
	const auto la = a.accumulate_gradients(x, y);
	const auto lb = b.accumulate_gradients(x, y, &y_non);
	CHECK(la.total == lb.total);
	auto pa = a.parameters();
	auto pb = b.parameters();
	for (std::size_t i = 0; i < pa.size(); ++i) {
		for (Eigen::Index j = 0; j < pa[i].size(); ++j) {
			CHECK(pa[i].grad[j] == pb[i].grad[j]);
		}
	}
	CHECK(a.uses_y_non());
	CHECK_FALSE(Pipeline(small(NormalizerKind::Revin)).uses_y_non());
}

TEST_CASE("pipeline rejects wrong input length", "[pipeline]") {
	Pipeline p(small(NormalizerKind::Revin));
	try {
		(void)p.predict(Matrix::Zero(15, 1));
		FAIL("expected an error");
	} catch (const Error& e) {
		CHECK(e.kind() == ErrorKind::Shape);
	}
}
