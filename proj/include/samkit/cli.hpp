#pragma once

namespace samkit {

/// Full command line entry point: parses argv, runs one pipeline stage and
/// reports a one-line outcome. Returns a process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace samkit
