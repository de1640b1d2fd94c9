#pragma once

#include <iosfwd>

namespace kcde::cli {

constexpr const char* tool_version = "0.1.0";

//! Entry point behind the kcde executable. Reports go to `out` unless a
//! command writes a file; errors are printed to `err` as one JSON object.
//!
//! Exit codes: 0 success, 2 bad usage, 3 bad data, 4 anything else.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace kcde::cli
