#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gridplan/conic.hpp"
#include "gridplan/standard_form.hpp"

namespace gridplan::benders {

/// Affine feasibility cut in the upgrade vector: c + w . a <= 0.
struct BendersCut {
  Real c = 0;
  Vec w;
  int node = -1;
  int iter = -1;

  Real value(const Vec& a) const { return c + w.dot(a); }
};

/// One stacked row of G^k: side +1 reads (expr_h - hi_h) <= 0, side -1 reads
/// (lo_h - expr_h) <= 0, where expr_h = tr(Q_h Z) + q_h.y + m_h.a. Voltage
/// rows are excluded: they sit in the subproblem sets X^k.
struct GRow {
  int h;
  int side;
};

std::vector<GRow> g_rows(const StandardFormProblem& sfp);

struct SubproblemResult {
  conic::Status status = conic::Status::NumericalFailure;
  Real gamma = kInf;
  Vec lambda;  // multipliers of the G rows, >= 0
  Mat Z;
  Vec y;
};

/// Problem S^k: minimal uniform violation of scenario k's G rows over X^k at
/// the fixed master point a_hat.
SubproblemResult solve_subproblem_k(const StandardFormProblem& sfp, const Vec& a_hat, int k,
                                    const conic::Options& opts = {});

/// Stacked subproblem S over an explicit scenario subset (all K scenarios =
/// the monolithic subproblem); lambda is returned per scenario in `kset`.
struct StackedResult {
  conic::Status status = conic::Status::NumericalFailure;
  Real gamma = kInf;
  std::vector<Vec> lambda;  // aligned with kset
};
StackedResult solve_subproblem_stacked(const StandardFormProblem& sfp, const Vec& a_hat,
                                       const std::vector<int>& kset,
                                       const conic::Options& opts = {});

struct Aggregate {
  Real gamma_star = kInf;
  std::vector<int> kset;          // scenarios attaining gamma_star (tie tol)
  std::vector<Vec> lambda;        // per scenario k in 0..K-1; zero outside kset
  conic::Status status = conic::Status::Optimal;
};

/// gamma* = max_k gamma^k with the K-set rule for multipliers: the single
/// attaining scenario's multipliers are reused as-is, ties trigger a reduced
/// joint solve over the tied scenarios.
Aggregate aggregate_subproblems(const StandardFormProblem& sfp, const Vec& a_hat,
                                const std::vector<SubproblemResult>& results, Real tie_tol = 1e-7,
                                const conic::Options& opts = {});

/// Builds the cut c(lambda) + w(lambda).a <= 0. w aggregates the rows'
/// m-coefficients; c solves one independent SDP per scenario with nonzero
/// multipliers (min over X^k of lambda' G^k at a = 0).
BendersCut generate_cut(const StandardFormProblem& sfp, const std::vector<Vec>& lambda,
                        const conic::Options& opts = {}, int threads = 1);

struct NoGood {
  std::uint32_t mask = 0;  // the excluded binary point
  int n = 0;
};

struct MasterResult {
  conic::Status status = conic::Status::NumericalFailure;
  Vec a_hat;
  Real objective = kInf;
};

/// LP master: minimize 1'a over the node box (fixings applied), A a <= b,
/// all Benders cuts and all no-good cuts.
MasterResult solve_master(const StandardFormProblem& sfp, std::uint32_t I0, std::uint32_t I1,
                          const std::vector<const BendersCut*>& cuts,
                          const std::vector<NoGood>& no_goods, const conic::Options& opts = {});

struct IterRecord {
  int node;
  int iter;
  Real master_obj;
  Real gamma_star;
  int kset_size;
  int cuts_added;
};

struct IterateResult {
  enum class Kind { Converged, BoundOnly, Infeasible, Unresolved } kind = Kind::Unresolved;
  Vec a_hat;
  Real bound = -kInf;  // last master objective (valid node lower bound)
  std::vector<BendersCut> new_cuts;
  std::vector<IterRecord> trace;
  int iterations = 0;
  std::string note;
};

struct IterateParams {
  int B = 6;
  Real tol = 1e-6;
  Real tie_tol = 1e-7;
  int threads = 1;
  conic::Options conic;
  int node_id = -1;
};

/// At most B alternations of master and subproblems (Benders decomposition);
/// converged iff gamma* <= tol, in which case a_hat solves the node
/// relaxation. Conic failures leave the node unresolved, never pruned.
IterateResult benders_iterate(const StandardFormProblem& sfp, std::uint32_t I0, std::uint32_t I1,
                              const std::vector<const BendersCut*>& inherited,
                              const std::vector<NoGood>& no_goods, const IterateParams& params);

/// Removes duplicates at 1e-9 granularity on (w, c).
std::vector<const BendersCut*> dedup_cuts(const std::vector<const BendersCut*>& cuts);

}  // namespace gridplan::benders
