#pragma once

#include <cstdint>
#include <ostream>

namespace gzsda {

struct SelfCheckOptions {
    std::uint64_t seed = 7;
    // Test hook: corrupts one analytic gradient before the comparison so the
    // failure path of the check itself can be exercised.
    bool perturb_gradient = false;
};

// Gradient checks, KL properties and determinism probes. Prints one line per
// check and returns true iff everything passed.
bool run_selfcheck(std::ostream& out, const SelfCheckOptions& options = {});

}  // namespace gzsda
