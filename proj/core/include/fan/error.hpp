#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fan {

enum class ErrorKind {
	InvalidInput,
	InvalidLength,
	InvalidParameter,
	Shape,
	Index,
	State,
	Io,
	Parse,
	Format,
	NonFinite,
};

/// Machine-parsable category name, e.g. "shape" or "invalid-input".
std::string_view to_string(ErrorKind kind) noexcept;

/**
 * Every failure raised by the library carries a category so that front ends
 * can report a stable error class without parsing messages.
 */
class Error : public std::runtime_error {
public:
	Error(ErrorKind kind, const std::string& message);

	ErrorKind kind() const noexcept { return kind_; }

private:
	ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

} // namespace fan
