#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sce {

// Contract violations: shape mismatches, non-unit rows, bad modes.
struct ContractViolation : std::runtime_error {
    explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// Config-file problems: syntax, unknown keys, out-of-range values.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and format failures; message carries the offending path.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void format_parts(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_parts(std::ostringstream& os, const T& part, const Rest&... rest) {
    os << part;
    format_parts(os, rest...);
}
}  // namespace detail

template <typename... Parts>
std::string format_msg(const Parts&... parts) {
    std::ostringstream os;
    detail::format_parts(os, parts...);
    return os.str();
}

}  // namespace sce

#define SCE_CHECK(cond, ...)                                                  \
    do {                                                                      \
        if (!(cond)) throw ::sce::ContractViolation(::sce::format_msg(__VA_ARGS__)); \
    } while (0)
