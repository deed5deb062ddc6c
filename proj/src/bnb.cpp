#include "gridplan/bnb.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "gridplan/parallel.hpp"

namespace gridplan::bnb {

std::string to_string(SolveReport::Status st) {
  switch (st) {
    case SolveReport::Status::Optimal: return "optimal";
    case SolveReport::Status::Infeasible: return "infeasible";
    case SolveReport::Status::BudgetExhausted: return "budget-exhausted";
    case SolveReport::Status::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

int branch_index(const Vec& a_hat, std::uint32_t I0, std::uint32_t I1, Real int_tol) {
  int best = -1;
  Real best_frac = int_tol;
  for (Eigen::Index i = 0; i < a_hat.size(); ++i) {
    if ((I0 | I1) & (1u << i)) continue;
    Real frac = std::min(a_hat(i), 1.0 - a_hat(i));
    if (frac > best_frac) {
      best_frac = frac;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<const benders::BendersCut*> inherit_cuts(const std::vector<BnbNode>& tree, int node) {
  std::vector<const benders::BendersCut*> cuts;
  for (int n = node; n >= 0; n = tree[static_cast<size_t>(n)].parent) {
    for (const auto& cut : tree[static_cast<size_t>(n)].cuts) cuts.push_back(&cut);
  }
  return benders::dedup_cuts(cuts);
}

std::vector<benders::NoGood> inherit_no_goods(const std::vector<BnbNode>& tree, int node) {
  std::vector<benders::NoGood> out;
  for (int n = node; n >= 0; n = tree[static_cast<size_t>(n)].parent) {
    for (const auto& ng : tree[static_cast<size_t>(n)].no_goods) out.push_back(ng);
  }
  return out;
}

int select_node(const std::vector<BnbNode>& tree, NodeOrder order) {
  int best = -1;
  for (int n = 0; n < static_cast<int>(tree.size()); ++n) {
    const BnbNode& node = tree[static_cast<size_t>(n)];
    if (node.state != BnbNode::State::Open) continue;
    if (best < 0) {
      best = n;
      continue;
    }
    const BnbNode& cur = tree[static_cast<size_t>(best)];
    switch (order) {
      case NodeOrder::Best:
        if (node.bound < cur.bound) best = n;
        break;
      case NodeOrder::Dfs:
        if (node.depth > cur.depth || (node.depth == cur.depth && node.id > cur.id)) best = n;
        break;
      case NodeOrder::Fifo:
        break;  // lowest id wins; first open already kept
    }
  }
  return best;
}

namespace {

std::uint32_t to_mask(const Vec& a, Real int_tol) {
  std::uint32_t mask = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) > 1.0 - int_tol) {
      mask |= (1u << i);
    } else if (a(i) > int_tol) {
      return 0xffffffffu;  // fractional
    }
  }
  return mask;
}

IVec mask_to_a(std::uint32_t mask, int n) {
  IVec a = IVec::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (mask & (1u << i)) a(i) = 1;
  }
  return a;
}

struct PolicyMemo {
  std::unordered_map<std::uint32_t, bool> outcome;
};

bool policy_feasible_all(const StandardFormProblem& sfp, const Policy& policy, std::uint32_t mask,
                         PolicyMemo& memo, int threads) {
  auto it = memo.outcome.find(mask);
  if (it != memo.outcome.end()) return it->second;
  IVec a = mask_to_a(mask, sfp.n_u);
  std::vector<char> ok(static_cast<size_t>(sfp.K), 0);
  parallel_for(sfp.K, threads, [&](int k) {
    PolicyOutcome out = evaluate_policy(policy, sfp.net, sfp.catalog, a,
                                        sfp.scenarios[static_cast<size_t>(k)]);
    ok[static_cast<size_t>(k)] = out.feasible ? 1 : 0;
  });
  bool all = true;
  for (char c : ok) all = all && c;
  memo.outcome.emplace(mask, all);
  return all;
}

}  // namespace

SolveReport run(const StandardFormProblem& sfp, const Policy& policy, const BnbParams& params) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  SolveReport rep;
  const int n_u = sfp.n_u;
  long budget = params.max_nodes > 0
                    ? params.max_nodes
                    : 10L * (1L << std::min(n_u, 24));
  const int threads = params.threads > 0 ? params.threads : default_threads();

  std::vector<BnbNode> tree;
  tree.push_back(BnbNode{});
  PolicyMemo memo;
  std::unordered_map<std::uint32_t, char> rejected;  // unique policy-cut registry
  Real U = kInf, L = -kInf;
  std::uint32_t best_mask = 0;

  auto emit = [&](const BnbNode& node, const std::string& event) {
    rep.node_trace.push_back({node.id, node.depth, node.bound, U, L, event});
    if (params.progress) {
      (*params.progress) << "node=" << node.id << " depth=" << node.depth
                         << " bound=" << node.bound << " U=" << U << " L=" << L
                         << " event=" << event << "\n";
    }
  };

  auto open_min_bound = [&]() {
    Real lo = kInf;
    bool any = false;
    for (const BnbNode& node : tree) {
      if (node.state == BnbNode::State::Open) {
        lo = std::min(lo, node.bound);
        any = true;
      }
    }
    return any ? lo : kInf;
  };

  auto finish = [&](SolveReport::Status st) {
    rep.status = st;
    rep.U = U;
    rep.L = L;
    rep.has_incumbent = is_finite(U);
    if (rep.has_incumbent) {
      rep.a = mask_to_a(best_mask, n_u);
      rep.objective = U;
    }
    rep.wall_seconds =
        std::chrono::duration_cast<std::chrono::duration<Real>>(Clock::now() - t0).count();
    return rep;
  };

  while (true) {
    Real open_lo = open_min_bound();
    L = std::max(L, std::min(open_lo, U));
    if (!is_finite(open_lo) && open_lo > 0) {  // no open nodes
      L = is_finite(U) ? U : kInf;
      return finish(is_finite(U) ? SolveReport::Status::Optimal
                                 : SolveReport::Status::Infeasible);
    }
    if (U - L <= params.epsilon) {
      return finish(SolveReport::Status::Optimal);
    }
    if (rep.nodes >= budget) {
      return finish(SolveReport::Status::BudgetExhausted);
    }

    int ni = select_node(tree, params.order);
    BnbNode& node = tree[static_cast<size_t>(ni)];
    if (node.bound >= U) {
      node.state = BnbNode::State::Pruned;
      emit(node, "pruned");
      continue;
    }
    ++rep.nodes;

    // Solve the node relaxation: at most B Benders iterations with inherited
    // cuts, or one monolithic conic solve. The policy loop re-enters after
    // each no-good cut.
    while (true) {
      bool converged = false;
      Vec a_hat;
      Real bound = node.bound;
      bool infeasible = false, unresolved = false;
      std::string note;

      if (params.mode == SolveMode::Benders) {
        benders::IterateParams ip;
        ip.B = params.B;
        ip.tol = params.benders_tol;
        ip.threads = threads;
        ip.conic = params.conic;
        ip.node_id = node.id;
        auto inherited = inherit_cuts(tree, ni);
        auto no_goods = inherit_no_goods(tree, ni);
        benders::IterateResult itr =
            benders::benders_iterate(sfp, node.I0, node.I1, inherited, no_goods, ip);
        rep.benders_iterations_total += itr.iterations;
        for (auto& cut : itr.new_cuts) node.cuts.push_back(std::move(cut));
        for (const auto& row : itr.trace) rep.iter_trace.push_back(row);
        switch (itr.kind) {
          case benders::IterateResult::Kind::Converged:
            converged = true;
            a_hat = itr.a_hat;
            bound = itr.bound;
            break;
          case benders::IterateResult::Kind::BoundOnly:
            bound = itr.bound;
            break;
          case benders::IterateResult::Kind::Infeasible:
            infeasible = true;
            break;
          case benders::IterateResult::Kind::Unresolved:
            unresolved = true;
            note = itr.note;
            break;
        }
      } else {
        NodeRelaxation nr = build_node_relaxation(sfp, node.I0, node.I1);
        MonolithicResult mono = solve_monolithic(nr, params.conic);
        ++rep.benders_iterations_total;
        if (mono.status == conic::Status::Optimal) {
          converged = true;
          a_hat = mono.a;
          bound = mono.objective;
        } else if (mono.status == conic::Status::Infeasible) {
          infeasible = true;
        } else {
          unresolved = true;
          note = conic::to_string(mono.status);
        }
      }

      if (infeasible) {
        node.bound = kInf;
        node.state = BnbNode::State::Infeasible;
        emit(node, "infeasible");
        break;
      }
      if (unresolved) {
        // conic failure: keep the node open with its old bound, never prune
        rep.note = note;
        emit(node, "unresolved");
        break;
      }

      node.bound = std::max(node.bound, bound);
      if (node.bound >= U) {
        node.state = BnbNode::State::Pruned;
        emit(node, "pruned");
        break;
      }
      if (!converged) {
        emit(node, "bound");  // stays open; picked up again with its new cuts
        break;
      }

      std::uint32_t mask = to_mask(a_hat, params.int_tol);
      if (mask == 0xffffffffu) {
        int ell = branch_index(a_hat, node.I0, node.I1, params.int_tol);
        if (ell < 0) {
          // numerically integral after all
          mask = to_mask(a_hat, 0.5);
        } else {
          BnbNode child0, child1;
          child0.id = static_cast<int>(tree.size());
          child0.parent = ni;
          child0.depth = node.depth + 1;
          child0.I0 = node.I0 | (1u << ell);
          child0.I1 = node.I1;
          child0.bound = node.bound;
          child1 = child0;
          child1.id = child0.id + 1;
          child1.I0 = node.I0;
          child1.I1 = node.I1 | (1u << ell);
          node.state = BnbNode::State::Branched;
          emit(node, "branched");
          tree.push_back(std::move(child0));
          tree.push_back(std::move(child1));
          break;
        }
      }
      // integral candidate: validate through the operating policy
      bool ok = policy_feasible_all(sfp, policy, mask, memo, threads);
      if (ok) {
        Real cost = static_cast<Real>(mask_to_a(mask, n_u).sum());
        if (cost < U) {
          U = cost;
          best_mask = mask;
        }
        node.state = BnbNode::State::IntegralAccepted;
        emit(node, "incumbent");
        break;
      }
      if (rejected.emplace(mask, 1).second) ++rep.policy_cuts;
      node.no_goods.push_back({mask, n_u});
      emit(node, "policy-cut");
      // back to the solve step with the new cut
    }
  }
}

}  // namespace gridplan::bnb
