#pragma once

namespace evoclass {

// Full CLI: parse argv, dispatch, map errors to exit codes
// (0 ok, 2 config/argument, 3 data/format, 4 numeric).
int run_cli(int argc, const char* const* argv);

}  // namespace evoclass
