#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qdl/qstate.hpp"

namespace qdl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitTamper = 3;

/// Parses "re" or "re+imi" / "re-imi". Returns nullopt on malformed input.
std::optional<Amplitude> parse_amplitude(const std::string& text);
/// Two comma-separated amplitudes.
std::optional<Ket> parse_state(const std::string& text);

/// Entry point shared by the qdl tool and the tests. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace qdl::cli
