#pragma once

#include "fan/models.hpp"
#include "fan/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

/**
 * Parameter checkpoints.
 *
 * Binary layout, all integers and floats little-endian:
 *
 *   char[8]  magic "FANCKPT1"
 *   u32      tensor count
 *   repeated:
 *     u32    name length, then the name bytes (UTF-8, no terminator)
 *     i64    rows
 *     i64    cols
 *     f64    rows * cols values, column-major
 *
 * Values are stored as raw IEEE-754 bits, so save/load round-trips exactly.
 */
namespace fan::models {

struct NamedTensor {
	std::string name;
	Matrix value;
};

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

void save_parameters(const std::filesystem::path& path, std::span<const ParamRef> params);

/// Fails unless names and shapes match `params` exactly and in order.
void load_parameters(const std::filesystem::path& path, std::span<const ParamRef> params);

} // namespace fan::models
