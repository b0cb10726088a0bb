#pragma once

namespace nlinr {

/// Entry point behind the command-line tool. Exit codes: 0 success, 1 usage,
/// 2 I/O failure, 3 numeric failure.
int run_cli(int argc, const char* const* argv);

}  // namespace nlinr
