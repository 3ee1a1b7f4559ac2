#include "fan/checkpoint.hpp"

#include "fan/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace fan::models {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'A', 'N', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
	out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
	T v{};
	in.read(reinterpret_cast<char*>(&v), sizeof(T));
	if (!in) {
		fail(ErrorKind::Format, "truncated checkpoint '" + path.string() + "'");
	}
	return v;
}

} // namespace

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) {
		fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
	}
	out.write(kMagic, sizeof(kMagic));
	put(out, static_cast<std::uint32_t>(tensors.size()));
	for (const auto& t : tensors) {
		put(out, static_cast<std::uint32_t>(t.name.size()));
		out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
		put(out, static_cast<std::int64_t>(t.value.rows()));
		put(out, static_cast<std::int64_t>(t.value.cols()));
		out.write(reinterpret_cast<const char*>(t.value.data()),
		          static_cast<std::streamsize>(t.value.size() * static_cast<Eigen::Index>(sizeof(double))));
	}
	if (!out) {
		fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
	}
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
	}
	char magic[8] = {};
	in.read(magic, sizeof(magic));
	if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
		fail(ErrorKind::Format, "'" + path.string() + "' is not a FAN checkpoint");
	}
	const auto count = get<std::uint32_t>(in, path);
	std::vector<NamedTensor> tensors;
	tensors.reserve(count);
	for (std::uint32_t i = 0; i < count; ++i) {
		NamedTensor t;
		t.name.resize(get<std::uint32_t>(in, path));
		in.read(t.name.data(), static_cast<std::streamsize>(t.name.size()));
		const auto rows = get<std::int64_t>(in, path);
		const auto cols = get<std::int64_t>(in, path);
		if (!in || rows < 0 || cols < 0 || rows * cols > (std::int64_t{1} << 32)) {
			fail(ErrorKind::Format, "corrupt tensor header in '" + path.string() + "'");
		}
		t.value.resize(rows, cols);
		in.read(reinterpret_cast<char*>(t.value.data()),
		        static_cast<std::streamsize>(t.value.size() * static_cast<Eigen::Index>(sizeof(double))));
		if (!in) {
			fail(ErrorKind::Format, "truncated checkpoint '" + path.string() + "'");
		}
		tensors.push_back(std::move(t));
	}
	return tensors;
}

void save_parameters(const std::filesystem::path& path, std::span<const ParamRef> params) {
	std::vector<NamedTensor> tensors;
	tensors.reserve(params.size());
	for (const auto& p : params) {
		tensors.push_back({p.name, Eigen::Map<const Matrix>(p.value, p.rows, p.cols)});
	}
	write_checkpoint(path, tensors);
}

void load_parameters(const std::filesystem::path& path, std::span<const ParamRef> params) {
	const auto tensors = read_checkpoint(path);
	if (tensors.size() != params.size()) {
		fail(ErrorKind::Shape, "checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
		                           std::to_string(params.size()));
	}
	for (std::size_t i = 0; i < params.size(); ++i) {
		const auto& t = tensors[i];
		if (t.name != params[i].name || t.value.rows() != params[i].rows || t.value.cols() != params[i].cols) {
			fail(ErrorKind::Shape, "checkpoint tensor '" + t.name + "' does not match parameter '" +
			                           params[i].name + "'");
		}
	}
	for (std::size_t i = 0; i < params.size(); ++i) {
		Eigen::Map<Matrix>(params[i].value, params[i].rows, params[i].cols) = tensors[i].value;
	}
}

} // namespace fan::models
