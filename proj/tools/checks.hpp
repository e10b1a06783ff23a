#pragma once

#include <ostream>

namespace dbest::cli {

// Oracle and invariant suites on small designs. Prints one PASS/FAIL line
// per check and returns the number of failures.
int run_checks(std::ostream& os);

}  // namespace dbest::cli
