#pragma once

#include <ostream>

namespace qsat {

/// Entry point for `qsat synth|train|evaluate|predict|serve`. Returns the
/// process exit code: 0 success, 1 training or evaluation failure, 2 usage
/// or validation error.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace qsat
