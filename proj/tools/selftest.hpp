#pragma once

#include <cstdint>

namespace egp::tools {

/// Quick invariant suite behind the `selftest` verb: operator closure,
/// protected evaluation, voting equivalence, certainty bounds, a
/// Kruskal-Wallis cross-check and the Mahalanobis/Euclidean reduction.
/// Prints one line per check; returns the number of failed checks.
int run_selftest(std::uint64_t seed);

}  // namespace egp::tools
