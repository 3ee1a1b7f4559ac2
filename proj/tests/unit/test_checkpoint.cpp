#include "fan/checkpoint.hpp"
#include "fan/error.hpp"
#include "fan/pipeline.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace fan;
using namespace fan::models;

namespace {

std::filesystem::path temp_file(const std::string& name) {
	return std::filesystem::temp_directory_path() / ("fan_test_" + name);
}

training::PipelineConfig small() {
	training::PipelineConfig c;
	c.lookback = 16;
	c.horizon = 8;
	c.kernel = 5;
	c.hidden = {8, 8};
	c.k = 2;
	return c;
}

} // namespace

TEST_CASE("checkpoint tensors round trip bitwise", "[checkpoint]") {
	SplitMix64 rng(1);
	std::vector<NamedTensor> tensors{{"a", testing::random_matrix(3, 4, rng)}, {"b.weight", Matrix(1, 1)}};
	tensors[1].value(0, 0) = -0.0;
	tensors[0].value(0, 0) = std::numeric_limits<double>::denorm_min();
	tensors[0].value(1, 0) = std::nextafter(1.0, 2.0);
	const auto path = temp_file("tensors.ckpt");
	write_checkpoint(path, tensors);
	const auto back = read_checkpoint(path);
	std::filesystem::remove(path);
	REQUIRE(back.size() == 2);
	for (std::size_t i = 0; i < 2; ++i) {
		CHECK(back[i].name == tensors[i].name);
		REQUIRE(back[i].value.rows() == tensors[i].value.rows());
		REQUIRE(back[i].value.cols() == tensors[i].value.cols());
		for (Eigen::Index j = 0; j < back[i].value.size(); ++j) {
			CHECK(std::bit_cast<std::uint64_t>(back[i].value(j)) == std::bit_cast<std::uint64_t>(tensors[i].value(j)));
		}
	}
}

TEST_CASE("pipeline parameters save and load", "[checkpoint]") {
	training::Pipeline source(small());
	auto c = small();
	c.seed = 99;
	training::Pipeline target(c);
	SplitMix64 rng(2);
	const Matrix x = testing::random_matrix(16, 3, rng);
	REQUIRE(source.predict(x) != target.predict(x));
	const auto path = temp_file("pipeline.ckpt");
	const auto sp = source.parameters();
	save_parameters(path, sp);
	const auto tp = target.parameters();
	load_parameters(path, tp);
	CHECK(source.predict(x) == target.predict(x));

	auto other = small();
	other.hidden = {8, 9};
	training::Pipeline mismatched(other);
	const auto mp = mismatched.parameters();
	try {
		load_parameters(path, mp);
		FAIL("expected an error");
	} catch (const Error& e) {
		CHECK(e.kind() == ErrorKind::Shape);
	}
	std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected", "[checkpoint]") {
	const auto path = temp_file("bad.ckpt");
	{
		std::ofstream out(path, std::ios::binary);
		out << "NOTACKPT";
	}
	CHECK_THROWS_AS(read_checkpoint(path), Error);
	{
		std::ofstream out(path, std::ios::binary);
		out << "FANCKPT1";
		const std::uint32_t count = 3;
		out.write(reinterpret_cast<const char*>(&count), sizeof count);
	}
	CHECK_THROWS_AS(read_checkpoint(path), Error);
	std::filesystem::remove(path);
	CHECK_THROWS_AS(read_checkpoint(path), Error);
}
