#pragma once

#include <string>
#include <vector>

namespace sce {

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string detail;
};

// Self-checks behind the `verify` subcommand: the loss decomposition
// identity over a randomized grid, gradient checks of the differentiable
// ops and of the full training objective, distribution/normalization
// properties, queue FIFO behaviour, and schedule endpoints. Cheap enough
// to run on every build.
std::vector<CheckResult> run_verify();

}  // namespace sce
