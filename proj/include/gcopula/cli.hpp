#pragma once

#include <iosfwd>

namespace gcopula {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitFit = 3;

/// Entry point of the gcopula command line tool. Subcommands: impute,
/// stream, evaluate. Input "-" reads `in`; output "-" writes `out`.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace gcopula
