#include "fan/error.hpp"

namespace fan {

std::string_view to_string(ErrorKind kind) noexcept {
	switch (kind) {
	case ErrorKind::InvalidInput:
		return "invalid-input";
	case ErrorKind::InvalidLength:
		return "invalid-length";
	case ErrorKind::InvalidParameter:
		return "invalid-parameter";
	case ErrorKind::Shape:
		return "shape";
	case ErrorKind::Index:
		return "index";
	case ErrorKind::State:
		return "state";
	case ErrorKind::Io:
		return "io";
	case ErrorKind::Parse:
		return "parse";
	case ErrorKind::Format:
		return "format";
	case ErrorKind::NonFinite:
		return "non-finite";
	}
	return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) {
	throw Error(kind, message);
}

} // namespace fan
