#pragma once

#include <string>
#include <vector>

namespace lumir::cli {

// Subcommands: datagen, train, restore, eval, cluster-diagnose.
// Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
int run(const std::vector<std::string>& args);

}  // namespace lumir::cli
