#pragma once

// Central finite-difference verification of every kernel backward pass and
// of the fully unrolled model, all at 64-bit regardless of the build's
// training precision.

#include <string>
#include <vector>

namespace cslm {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// corrupt_fixture injects a deliberately wrong backward as a negative
// control; the harness must flag it.
std::vector<GradCheckResult> run_gradcheck(bool corrupt_fixture = false);

bool gradcheck_passed(const std::vector<GradCheckResult>& results);

} // namespace cslm
