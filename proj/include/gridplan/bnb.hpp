#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gridplan/benders.hpp"
#include "gridplan/policy.hpp"
#include "gridplan/relaxation.hpp"
#include "gridplan/standard_form.hpp"

namespace gridplan::bnb {

enum class NodeOrder { Best, Dfs, Fifo };
enum class SolveMode { Benders, Monolithic };

struct BnbParams {
  int B = 6;
  Real epsilon = 0.5;
  long max_nodes = -1;  // -1: 10 * 2^n_u safety cap
  NodeOrder order = NodeOrder::Best;
  SolveMode mode = SolveMode::Benders;
  int threads = 0;  // 0: hardware concurrency
  Real int_tol = 1e-6;
  Real benders_tol = 1e-6;
  conic::Options conic;
  std::ostream* progress = nullptr;  // one machine-readable line per node event
};

struct BnbNode {
  enum class State { Open, Branched, Pruned, IntegralAccepted, Infeasible };
  int id = 0;
  int parent = -1;
  int depth = 0;
  std::uint32_t I0 = 0, I1 = 0;
  Real bound = -kInf;  // L^N, never below the parent's bound
  State state = State::Open;
  std::vector<benders::BendersCut> cuts;     // generated at this node
  std::vector<benders::NoGood> no_goods;     // policy cuts added at this node
};

struct NodeEvent {
  int node = 0;
  int depth = 0;
  Real bound = 0;  // L^N
  Real U = kInf;
  Real L = -kInf;
  std::string event;  // branched|pruned|incumbent|policy-cut|infeasible|bound|unresolved
};

struct SolveReport {
  enum class Status { Optimal, Infeasible, BudgetExhausted, NumericalFailure };
  Status status = Status::BudgetExhausted;
  bool has_incumbent = false;
  IVec a;  // best upgrade selection when has_incumbent
  Real objective = kInf;
  Real U = kInf;
  Real L = -kInf;
  long nodes = 0;  // processing events
  long policy_cuts = 0;
  long benders_iterations_total = 0;
  std::vector<NodeEvent> node_trace;
  std::vector<benders::IterRecord> iter_trace;
  Real wall_seconds = 0;
  std::string note;
};

std::string to_string(SolveReport::Status st);

/// Fig.-style combined branch-and-bound with limited Benders iterations per
/// node, ancestor cut inheritance, policy validation of integral candidates
/// and no-good cuts for rejected ones.
SolveReport run(const StandardFormProblem& sfp, const Policy& policy, const BnbParams& params);

/// Most-fractional branching index (ties to the lowest index), skipping
/// entries fixed by I0/I1. Returns -1 when a_hat is integral on free indices.
int branch_index(const Vec& a_hat, std::uint32_t I0, std::uint32_t I1, Real int_tol);

/// Union of the ancestors' and own cut ledgers, deduplicated.
std::vector<const benders::BendersCut*> inherit_cuts(const std::vector<BnbNode>& tree, int node);
std::vector<benders::NoGood> inherit_no_goods(const std::vector<BnbNode>& tree, int node);

/// Index of the next node to process among open ones, or -1.
int select_node(const std::vector<BnbNode>& tree, NodeOrder order);

}  // namespace gridplan::bnb
