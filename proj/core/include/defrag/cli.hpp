#pragma once

namespace defrag {

// Full command-line front end: train | eval | features | selftest.
// Returns the process exit code: 0 ok, 1 runtime failure, 2 usage or
// config error.
int run_cli(int argc, const char* const* argv);

}  // namespace defrag
