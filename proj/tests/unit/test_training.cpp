#include "fan/error.hpp"
#include "fan/training.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <numbers>
#include <vector>

using namespace fan;
using namespace fan::training;
using normalizers::NormalizerKind;
using Catch::Matchers::WithinAbs;

namespace {

std::shared_ptr<const Matrix> ramp(Eigen::Index n, Eigen::Index d = 1) {
	auto m = std::make_shared<Matrix>(n, d);
	for (Eigen::Index r = 0; r < n; ++r) {
		for (Eigen::Index c = 0; c < d; ++c) {
			(*m)(r, c) = static_cast<double>(r) + 1000.0 * static_cast<double>(c);
		}
	}
	return m;
}

TrainConfig quick(NormalizerKind kind, Eigen::Index lookback = 16, Eigen::Index horizon = 8) {
	TrainConfig config;
	config.lookback = lookback;
	config.horizon = horizon;
	config.kernel = 5;
	config.hidden = {16, 16};
	config.normalizer = kind;
	config.max_epochs = 20;
	config.patience = 5;
	config.learning_rate = 1e-2;
	config.k = 1;
	return config;
}

data::SeriesFrame frame_from(const Matrix& values) {
	data::SeriesFrame f;
	f.values = values;
	for (Eigen::Index c = 0; c < values.cols(); ++c) {
		f.channel_names.push_back("c" + std::to_string(c));
	}
	return f;
}

} // namespace

TEST_CASE("window counts follow the split", "[training]") {
	const auto series = ramp(1000);
	const auto bounds = data::split_bounds(1000, {});
	CHECK(bounds.edges == std::array<Eigen::Index, 4>{0, 700, 900, 1000});
	const WindowSet train(series, bounds.begin(0), bounds.end(0), 96, 96);
	CHECK(train.size() == 509);
	// Enumeration cross-check: every anchor t with x and y inside [0, 700).
	std::size_t count = 0;
	for (Eigen::Index t = 0; t <= 1000; ++t) {
		if (t - 96 >= 0 && t + 96 <= 700) {
			++count;
		}
	}
	CHECK(count == 509);
	CHECK(WindowSet(series, 700, 900, 96, 96).size() == 9);
	// The 100-row test split cannot hold a 192-row window.
	CHECK_THROWS_AS(make_windows(series, 96, 96), Error);

	const auto splits = make_windows(ramp(2000), 96, 96);
	CHECK(splits.train.size() == 1400 - 192 + 1);
	CHECK(splits.val.size() == 400 - 192 + 1);
	CHECK(splits.test.size() == 200 - 192 + 1);
	CHECK(splits.val.begin_row() == 1400);
	CHECK(splits.test.begin_row() == 1800);
}

TEST_CASE("windows hold contiguous slices and never cross splits", "[training]") {
	const auto series = ramp(400, 2);
	const auto splits = make_windows(series, 24, 12);
	for (const WindowSet* set : {&splits.train, &splits.val, &splits.test}) {
		for (std::size_t i = 0; i < set->size(); ++i) {
			const auto w = set->at(i);
			CHECK(w.t == set->anchor(i));
			CHECK(w.x(0, 0) == static_cast<double>(w.t - 24));
			CHECK(w.x(23, 1) == static_cast<double>(w.t - 1) + 1000.0);
			CHECK(w.y(0, 0) == static_cast<double>(w.t));
			CHECK(w.y(11, 0) == static_cast<double>(w.t + 11));
			CHECK(w.t - 24 >= set->begin_row());
			CHECK(w.t + 12 <= set->end_row());
		}
	}
	const auto last_train = splits.train.at(splits.train.size() - 1);
	CHECK(last_train.t + 12 - 1 < splits.val.begin_row());
}

TEST_CASE("gather lays windows out channel by channel", "[training]") {
	const auto splits = make_windows(ramp(400, 3), 8, 4);
	const std::vector<std::size_t> idx{5, 2};
	Matrix x;
	Matrix y;
	splits.train.gather(idx, x, y);
	REQUIRE(x.cols() == 6);
	REQUIRE(y.rows() == 4);
	for (std::size_t w = 0; w < 2; ++w) {
		const auto pair = splits.train.at(idx[w]);
		for (Eigen::Index d = 0; d < 3; ++d) {
			CHECK(x.col(static_cast<Eigen::Index>(w) * 3 + d) == pair.x.col(d));
			CHECK(y.col(static_cast<Eigen::Index>(w) * 3 + d) == pair.y.col(d));
		}
	}
}

TEST_CASE("make_windows sizing errors", "[training]") {
	try {
		(void)make_windows(ramp(100), 96, 96);
		FAIL("expected an error");
	} catch (const Error& e) {
		CHECK(e.kind() == ErrorKind::InvalidInput);
		const std::string msg = e.what();
		CHECK(msg.find("N=100") != std::string::npos);
		CHECK(msg.find("L=96") != std::string::npos);
		CHECK(msg.find("H=96") != std::string::npos);
	}
	// N = L + H + 10 passes the length gate but leaves the test split empty.
	CHECK_THROWS_AS(make_windows(ramp(202), 96, 96), Error);
}

TEST_CASE("scaler", "[training]") {
	SplitMix64 rng(1);
	const Matrix rows = testing::random_matrix(200, 3, rng, 5.0);
	const Scaler s = Scaler::fit(rows);
	const Matrix t = s.transform(rows);
	for (Eigen::Index c = 0; c < 3; ++c) {
		CHECK(std::abs(t.col(c).mean()) < 1e-12);
		CHECK_THAT(std::sqrt(t.col(c).squaredNorm() / 200.0), WithinAbs(1.0, 1e-12));
	}
	CHECK((s.inverse(t) - rows).cwiseAbs().maxCoeff() < 1e-9);
	const Scaler flat = Scaler::fit(Matrix::Constant(10, 1, 3.0));
	CHECK(flat.stdev(0) == Scaler::kMinStd);
}

TEST_CASE("scaler sees only training rows", "[training][property]") {
	SplitMix64 rng(2);
	const data::SeriesFrame frame = frame_from(testing::random_matrix(300, 2, rng));
	TrainConfig config = quick(NormalizerKind::Revin);
	config.max_epochs = 1;
	config.patience = 1;
	const auto a = run_experiment(frame, config);
	data::SeriesFrame shuffled = frame;
	// Reverse the val and test rows.
	shuffled.values.bottomRows(90) = frame.values.bottomRows(90).colwise().reverse();
	const auto b = run_experiment(shuffled, config);
	CHECK(a.scaler.mean == b.scaler.mean);
	CHECK(a.scaler.stdev == b.scaler.stdev);
}

TEST_CASE("adam", "[training]") {
	SECTION("zero gradient leaves parameters unchanged") {
		Vector w = Vector::LinSpaced(5, -1, 1);
		const Vector before = w;
		Vector g = Vector::Zero(5);
		std::vector<models::ParamRef> p{{"w", w.data(), g.data(), 5, 1}};
		AdamState state;
		adam_step(p, state, 1e-3);
		CHECK(w == before);
		CHECK(state.step == 1);
	}
	SECTION("single step from zero state") {
		Vector w(3);
		w << 1.0, -2.0, 0.5;
		Vector g(3);
		g << 0.3, -4.0, 1e-9;
		const Vector before = w;
		std::vector<models::ParamRef> p{{"w", w.data(), g.data(), 3, 1}};
		AdamState state;
		adam_step(p, state, 0.01);
		for (int i = 0; i < 3; ++i) {
			// m_hat = g, v_hat = g^2 after one step.
			const double expected = before(i) - 0.01 * g(i) / (std::abs(g(i)) + 1e-8);
			CHECK_THAT(w(i), WithinAbs(expected, 1e-15));
		}
	}
	SECTION("non-finite gradients abort") {
		Vector w = Vector::Zero(2);
		Vector g(2);
		g << 1.0, std::numeric_limits<double>::quiet_NaN();
		std::vector<models::ParamRef> p{{"w", w.data(), g.data(), 2, 1}};
		AdamState state;
		try {
			adam_step(p, state, 0.1);
			FAIL("expected an error");
		} catch (const Error& e) {
			CHECK(e.kind() == ErrorKind::NonFinite);
		}
	}
	SECTION("ten steps are bitwise reproducible") {
		auto run = [] {
			Vector w = Vector::LinSpaced(4, 0, 1);
			Vector g(4);
			std::vector<models::ParamRef> p{{"w", w.data(), g.data(), 4, 1}};
			AdamState state;
			for (int step = 0; step < 10; ++step) {
				g = w.array().sin() + 0.1 * step;
				adam_step(p, state, 0.05);
			}
			return w;
		};
		CHECK(run() == run());
	}
}

TEST_CASE("early stopper follows a synthetic overfitting curve", "[training]") {
	EarlyStopper stopper(3);
	const std::vector<double> curve{1.0, 0.8, 0.6, 0.65, 0.7, 0.59, 0.7, 0.8, 0.9};
	std::vector<bool> improved;
	std::size_t epochs = 0;
	for (double v : curve) {
		improved.push_back(stopper.update(v));
		++epochs;
		if (stopper.should_stop()) {
			break;
		}
	}
	CHECK(epochs == 9);
	CHECK(stopper.best_epoch() == 6);
	CHECK(stopper.best() == 0.59);
	CHECK(improved == std::vector<bool>{true, true, true, false, false, true, false, false, false});
}

TEST_CASE("evaluate closed forms", "[training]") {
	SECTION("naive backbone on a unit-slope line") {
		const auto splits = make_windows(ramp(300), 16, 8);
		PipelineConfig pc;
		pc.normalizer = NormalizerKind::Identity;
		pc.backbone = models::BackboneKind::Naive;
		pc.lookback = 16;
		pc.horizon = 8;
		const Pipeline p(pc);
		// Persistence error at step h is h + 1.
		double mae = 0.0;
		double mse = 0.0;
		for (int h = 1; h <= 8; ++h) {
			mae += h;
			mse += h * h;
		}
		const Metrics m = evaluate(p, splits.test);
		CHECK_THAT(m.mae, WithinAbs(mae / 8.0, 1e-12));
		CHECK_THAT(m.mse, WithinAbs(mse / 8.0, 1e-12));
	}
	SECTION("constant series gives zero error and offsets give one") {
		auto flat = std::make_shared<const Matrix>(Matrix::Constant(300, 2, 1.5));
		const auto splits = make_windows(flat, 16, 8);
		PipelineConfig pc;
		pc.normalizer = NormalizerKind::Identity;
		pc.backbone = models::BackboneKind::Naive;
		pc.lookback = 16;
		pc.horizon = 8;
		const Metrics zero = evaluate(Pipeline(pc), splits.test);
		CHECK(zero.mae == 0.0);
		CHECK(zero.mse == 0.0);

		pc.backbone = models::BackboneKind::Zero;
		auto ones = std::make_shared<const Matrix>(Matrix::Constant(300, 2, -1.0));
		const Metrics one = evaluate(Pipeline(pc), make_windows(ones, 16, 8).test);
		CHECK(one.mae == 1.0);
		CHECK(one.mse == 1.0);
	}
	SECTION("empty set") {
		PipelineConfig pc;
		CHECK_THROWS_AS(evaluate(Pipeline(pc), WindowSet{}), Error);
	}
}

TEST_CASE("config validation", "[training]") {
	TrainConfig c;
	CHECK_NOTHROW(c.validate());
	c.patience = 200;
	CHECK_THROWS_AS(c.validate(), Error);
	c = TrainConfig{};
	c.k = 0;
	CHECK_THROWS_AS(c.validate(), Error);
	c = TrainConfig{};
	c.learning_rate = 0.0;
	CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("train restores the best validation parameters", "[training]") {
	SplitMix64 rng(3);
	Matrix values(400, 2);
	for (Eigen::Index r = 0; r < 400; ++r) {
		values(r, 0) = std::sin(2.0 * std::numbers::pi * r / 8.0) + 0.3 * rng.normal();
		values(r, 1) = std::cos(2.0 * std::numbers::pi * r / 16.0) + 0.3 * rng.normal();
	}
	auto series = std::make_shared<const Matrix>(values);
	const auto splits = make_windows(series, 16, 8);
	for (auto kind : {NormalizerKind::Fan, NormalizerKind::Revin}) {
		TrainConfig config = quick(kind);
		config.max_epochs = 15;
		config.patience = 3;
		const auto result = train(config, splits);
		REQUIRE(!result.history.empty());
		double best = result.history.front().val_mse;
		std::size_t best_epoch = 1;
		for (const auto& rec : result.history) {
			if (rec.val_mse < best) {
				best = rec.val_mse;
				best_epoch = rec.epoch;
			}
		}
		CHECK(result.best_epoch == best_epoch);
		CHECK(evaluate(*result.pipeline, splits.val).mse == best);
	}
}

TEST_CASE("training is deterministic", "[training][property]") {
	SplitMix64 rng(4);
	const data::SeriesFrame frame = frame_from(testing::random_matrix(300, 2, rng));
	TrainConfig config = quick(NormalizerKind::Fan);
	config.max_epochs = 3;
	config.patience = 3;
	const auto a = run_experiment(frame, config);
	const auto b = run_experiment(frame, config);
	CHECK(a.test.mse == b.test.mse);
	CHECK(a.test.mae == b.test.mae);
	REQUIRE(a.trained.history.size() == b.trained.history.size());
	for (std::size_t i = 0; i < a.trained.history.size(); ++i) {
		CHECK(a.trained.history[i].train_total == b.trained.history[i].train_total);
	}
}

TEST_CASE("constant series is learned to near zero loss", "[training]") {
	const data::SeriesFrame frame = frame_from(Matrix::Constant(300, 2, 3.0));
	TrainConfig config = quick(NormalizerKind::Identity);
	config.max_epochs = 20;
	config.patience = 20;
	const auto result = run_experiment(frame, config);
	// Scaled values are all zero, so the zero-bias DLinear starts exact and stays exact.
	CHECK(result.trained.history.back().train_total < 1e-6);
	CHECK(result.test.mse < 1e-6);

}

TEST_CASE("a stationary tone is carried entirely by the predictor", "[training]") {
	Matrix values(600, 1);
	for (Eigen::Index r = 0; r < 600; ++r) {
		values(r, 0) = std::sin(2.0 * std::numbers::pi * static_cast<double>(r) / 8.0);
	}
	TrainConfig config = quick(NormalizerKind::Fan);
	config.backbone = models::BackboneKind::Zero;
	config.max_epochs = 40;
	config.patience = 40;
	config.learning_rate = 3e-3;
	const auto result = run_experiment(frame_from(values), config);
	CHECK(result.test.mse < 1e-3);
}

TEST_CASE("K resolution", "[training]") {
	Matrix values(400, 1);
	for (Eigen::Index r = 0; r < 400; ++r) {
		const double t = static_cast<double>(r);
		values(r, 0) = std::sin(2.0 * std::numbers::pi * t / 8.0) + std::sin(2.0 * std::numbers::pi * t / 4.0);
	}
	const auto splits = make_windows(std::make_shared<const Matrix>(values), 16, 8);
	TrainConfig config = quick(NormalizerKind::Fan);
	config.k.reset();
	CHECK(resolve_k(config, splits.train) == 2);
	config.k = 3;
	CHECK(resolve_k(config, splits.train) == 3);
}

TEST_CASE("thread budget honours FAN_THREADS", "[training]") {
	::setenv("FAN_THREADS", "3", 1);
	CHECK(thread_budget() == 3);
	::setenv("FAN_THREADS", "junk", 1);
	CHECK(thread_budget() >= 1);
	::unsetenv("FAN_THREADS");
	std::vector<int> out(50, 0);
	parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
	for (std::size_t i = 0; i < out.size(); ++i) {
		CHECK(out[i] == static_cast<int>(i * i));
	}
}
