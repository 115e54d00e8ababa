#pragma once

#include <string>
#include <vector>

namespace plab {

/// Command-line front end: gen-data, pretrain, clean, eval, sweep, pareto,
/// report, dump-poisoned. Every subcommand reads --config plus positional
/// key.path=value overrides. Returns the process exit code; errors print a
/// structured message to stderr.
int cli_dispatch(const std::vector<std::string>& args);

} // namespace plab
