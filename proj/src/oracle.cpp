#include "gridplan/oracle.hpp"

#include <algorithm>
#include <stdexcept>

#include "gridplan/parallel.hpp"

namespace gridplan::oracle {

namespace {

// G(n,t) = G(n-1,t), then G(n-1,t-1) reversed with element n-1 added; the
// seam changes one element, giving the revolving-door property.
void gen(int n, int t, std::vector<std::uint32_t>& out) {
  if (t == 0) {
    out.push_back(0);
    return;
  }
  if (t == n) {
    out.push_back((n == 32 ? 0xffffffffu : (1u << n) - 1u));
    return;
  }
  gen(n - 1, t, out);
  size_t start = out.size();
  gen(n - 1, t - 1, out);
  std::reverse(out.begin() + static_cast<std::ptrdiff_t>(start), out.end());
  for (size_t i = start; i < out.size(); ++i) out[i] |= (1u << (n - 1));
}

IVec mask_to_a(std::uint32_t mask, int n) {
  IVec a = IVec::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (mask & (1u << i)) a(i) = 1;
  }
  return a;
}

bool lex_less(std::uint32_t lhs, std::uint32_t rhs, int n) {
  for (int i = 0; i < n; ++i) {
    int l = (lhs >> i) & 1u, r = (rhs >> i) & 1u;
    if (l != r) return l < r;
  }
  return false;
}

}  // namespace

std::vector<std::uint32_t> revolving_door(int n, int t) {
  std::vector<std::uint32_t> out;
  gen(n, t, out);
  return out;
}

OracleResult brute_force(const Network& net, const UpgradeCatalog& catalog,
                         const std::vector<Scenario>& scenarios, const Policy& policy,
                         int threads, int guard) {
  const int n = catalog.n_u;
  if (n > guard) {
    throw std::invalid_argument("oracle: instance has " + std::to_string(n) +
                                " options, guard is " + std::to_string(guard));
  }
  OracleResult res;
  for (int cost = 0; cost <= n; ++cost) {
    std::vector<std::uint32_t> level = revolving_door(n, cost);
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t mask : level) {
      if (catalog.combination_feasible(mask_to_a(mask, n))) candidates.push_back(mask);
    }
    if (candidates.empty()) continue;
    std::vector<char> ok(candidates.size(), 0);
    parallel_for(static_cast<int>(candidates.size()), threads, [&](int idx) {
      IVec a = mask_to_a(candidates[static_cast<size_t>(idx)], n);
      bool all = true;
      for (const Scenario& sc : scenarios) {
        if (!evaluate_policy(policy, net, catalog, a, sc).feasible) {
          all = false;
          break;
        }
      }
      ok[static_cast<size_t>(idx)] = all ? 1 : 0;
    });
    res.candidates += static_cast<long>(candidates.size());
    bool found = false;
    std::uint32_t best = 0;
    for (size_t i = 0; i < candidates.size(); ++i) {
      if (!ok[i]) continue;
      if (!found || lex_less(candidates[i], best, n)) {
        best = candidates[i];
        found = true;
      }
    }
    if (found) {
      res.feasible = true;
      res.a = mask_to_a(best, n);
      res.cost = cost;
      return res;
    }
  }
  res.feasible = false;
  return res;
}

}  // namespace gridplan::oracle
