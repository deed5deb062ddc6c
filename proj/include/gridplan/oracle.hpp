#pragma once

#include <vector>

#include "gridplan/policy.hpp"

namespace gridplan::oracle {

struct OracleResult {
  bool feasible = false;
  IVec a;
  int cost = -1;
  long candidates = 0;  // policy-validated candidates
};

/// Exhaustive reference solver: walks combination-feasible binary selections
/// in ascending cost order (revolving-door order within each cost level),
/// validates each with the policy over all scenarios, and returns the
/// lexicographically smallest feasible selection of the cheapest feasible
/// level. Refuses instances with more than `guard` options.
OracleResult brute_force(const Network& net, const UpgradeCatalog& catalog,
                         const std::vector<Scenario>& scenarios, const Policy& policy,
                         int threads = 1, int guard = 24);

/// Revolving-door enumeration of all size-t subsets of {0..n-1} as bitmasks;
/// consecutive masks differ by exactly one swapped element.
std::vector<std::uint32_t> revolving_door(int n, int t);

}  // namespace gridplan::oracle
