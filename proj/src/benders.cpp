#include "gridplan/benders.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "gridplan/parallel.hpp"

namespace gridplan::benders {

std::vector<GRow> g_rows(const StandardFormProblem& sfp) {
  std::vector<GRow> rows;
  for (int h = 0; h < sfp.H; ++h) {
    const QuadConstraint& c = sfp.constraints[static_cast<size_t>(h)];
    if (c.kind == ConstraintKind::Voltage) continue;
    if (is_finite(c.hi)) rows.push_back({h, +1});
    if (is_finite(c.lo)) rows.push_back({h, -1});
  }
  return rows;
}

namespace {

// X^k rows: voltage magnitude rows on Z plus the power balance polyhedron on y.
void add_xk_rows(conic::ConeProblem& cp, const StandardFormProblem& sfp, int k, int zb, int yb) {
  for (const QuadConstraint& c : sfp.constraints) {
    if (c.kind != ConstraintKind::Voltage) continue;
    if (is_finite(c.hi)) {
      int r = cp.add_row(conic::Sense::Le, c.hi);
      for (const auto& e : c.Q.entries) cp.add_coef_psd(r, zb, e.i, e.j, e.v);
    }
    if (is_finite(c.lo)) {
      int r = cp.add_row(conic::Sense::Ge, c.lo);
      for (const auto& e : c.Q.entries) cp.add_coef_psd(r, zb, e.i, e.j, e.v);
    }
  }
  for (const BalanceRow& row : sfp.balance) {
    Real dk = row.d[static_cast<size_t>(k)];
    if (!is_finite(dk)) continue;
    int r = cp.add_row(conic::Sense::Le, dk);
    for (const auto& t : row.coeffs) cp.add_coef(r, yb, t.idx, t.v);
  }
}

// One G row as a conic row: expr - gamma <= rhs(side, a_hat).
int add_g_row(conic::ConeProblem& cp, const StandardFormProblem& sfp, const GRow& g,
              const Vec& a_hat, int zb, int yb, int gamma_block) {
  const QuadConstraint& c = sfp.constraints[static_cast<size_t>(g.h)];
  Real ma = 0;
  for (const auto& t : c.m) ma += t.v * a_hat(t.idx);
  Real rhs = g.side > 0 ? c.hi - ma : -c.lo + ma;
  int r = cp.add_row(conic::Sense::Le, rhs);
  const Real sgn = g.side > 0 ? 1.0 : -1.0;
  for (const auto& e : c.Q.entries) cp.add_coef_psd(r, zb, e.i, e.j, sgn * e.v);
  for (const auto& t : c.q) cp.add_coef(r, yb, t.idx, sgn * t.v);
  cp.add_coef(r, gamma_block, 0, -1.0);
  return r;
}

}  // namespace

SubproblemResult solve_subproblem_k(const StandardFormProblem& sfp, const Vec& a_hat, int k,
                                    const conic::Options& opts) {
  const auto rows = g_rows(sfp);
  conic::ConeProblem cp;
  int gb = cp.add_free(1);
  int zb = cp.add_psd(sfp.z_dim());
  int yb = cp.add_free(sfp.y_dim());
  cp.set_obj(gb, 0, 1.0);
  std::vector<int> g_ids;
  g_ids.reserve(rows.size());
  for (const GRow& g : rows) g_ids.push_back(add_g_row(cp, sfp, g, a_hat, zb, yb, gb));
  add_xk_rows(cp, sfp, k, zb, yb);

  conic::ConeSolution sol = conic::solve(cp, opts);
  SubproblemResult out;
  out.status = sol.status;
  if (sol.status != conic::Status::Optimal) return out;
  out.gamma = sol.obj;
  out.lambda = conic::extract_duals(sol, g_ids);
  out.Z = sol.psd(zb);
  out.y = sol.scalar(yb);
  return out;
}

StackedResult solve_subproblem_stacked(const StandardFormProblem& sfp, const Vec& a_hat,
                                       const std::vector<int>& kset, const conic::Options& opts) {
  const auto rows = g_rows(sfp);
  conic::ConeProblem cp;
  int gb = cp.add_free(1);
  cp.set_obj(gb, 0, 1.0);
  std::vector<std::vector<int>> g_ids(kset.size());
  for (size_t i = 0; i < kset.size(); ++i) {
    int zb = cp.add_psd(sfp.z_dim());
    int yb = cp.add_free(sfp.y_dim());
    for (const GRow& g : rows) {
      g_ids[i].push_back(add_g_row(cp, sfp, g, a_hat, zb, yb, gb));
    }
    add_xk_rows(cp, sfp, kset[i], zb, yb);
  }
  conic::ConeSolution sol = conic::solve(cp, opts);
  StackedResult out;
  out.status = sol.status;
  if (sol.status != conic::Status::Optimal) return out;
  out.gamma = sol.obj;
  for (size_t i = 0; i < kset.size(); ++i) {
    out.lambda.push_back(conic::extract_duals(sol, g_ids[i]));
  }
  return out;
}

Aggregate aggregate_subproblems(const StandardFormProblem& sfp, const Vec& a_hat,
                                const std::vector<SubproblemResult>& results, Real tie_tol,
                                const conic::Options& opts) {
  Aggregate agg;
  const int K = static_cast<int>(results.size());
  const int R = static_cast<int>(g_rows(sfp).size());
  agg.lambda.assign(static_cast<size_t>(K), Vec::Zero(R));
  agg.gamma_star = -kInf;
  for (int k = 0; k < K; ++k) {
    if (results[static_cast<size_t>(k)].status != conic::Status::Optimal) {
      agg.status = results[static_cast<size_t>(k)].status;
      return agg;
    }
    agg.gamma_star = std::max(agg.gamma_star, results[static_cast<size_t>(k)].gamma);
  }
  for (int k = 0; k < K; ++k) {
    if (results[static_cast<size_t>(k)].gamma >= agg.gamma_star - tie_tol) {
      agg.kset.push_back(k);
    }
  }
  if (agg.kset.size() == 1) {
    int k = agg.kset.front();
    agg.lambda[static_cast<size_t>(k)] = results[static_cast<size_t>(k)].lambda;
  } else {
    StackedResult joint = solve_subproblem_stacked(sfp, a_hat, agg.kset, opts);
    if (joint.status != conic::Status::Optimal) {
      agg.status = joint.status;
      return agg;
    }
    for (size_t i = 0; i < agg.kset.size(); ++i) {
      agg.lambda[static_cast<size_t>(agg.kset[i])] = joint.lambda[i];
    }
  }
  agg.status = conic::Status::Optimal;
  return agg;
}

BendersCut generate_cut(const StandardFormProblem& sfp, const std::vector<Vec>& lambda,
                        const conic::Options& opts, int threads) {
  const auto rows = g_rows(sfp);
  const int K = static_cast<int>(lambda.size());
  BendersCut cut;
  cut.w = Vec::Zero(sfp.n_u);

  std::vector<int> active;
  for (int k = 0; k < K; ++k) {
    if (lambda[static_cast<size_t>(k)].size() &&
        lambda[static_cast<size_t>(k)].cwiseAbs().maxCoeff() > 0) {
      active.push_back(k);
    }
  }
  if (active.empty()) {
    throw std::invalid_argument("generate_cut: lambda must be nonzero");
  }

  for (int k : active) {
    const Vec& lam = lambda[static_cast<size_t>(k)];
    for (size_t r = 0; r < rows.size(); ++r) {
      const QuadConstraint& c = sfp.constraints[static_cast<size_t>(rows[r].h)];
      const Real coef = rows[r].side * lam(static_cast<Eigen::Index>(r));
      for (const auto& t : c.m) cut.w(t.idx) += coef * t.v;
    }
  }

  // c(lambda) = sum_k min over X^k of lambda_k' G^k(xi, 0); independent SDPs.
  std::vector<Real> inner(active.size());
  std::vector<conic::Status> inner_status(active.size());
  parallel_for(static_cast<int>(active.size()), threads, [&](int idx) {
    int k = active[static_cast<size_t>(idx)];
    const Vec& lam = lambda[static_cast<size_t>(k)];
    conic::ConeProblem cp;
    int zb = cp.add_psd(sfp.z_dim());
    int yb = cp.add_free(sfp.y_dim());
    Real constant = 0;
    for (size_t r = 0; r < rows.size(); ++r) {
      Real coef = rows[r].side * lam(static_cast<Eigen::Index>(r));
      if (coef == 0) continue;
      const QuadConstraint& c = sfp.constraints[static_cast<size_t>(rows[r].h)];
      for (const auto& e : c.Q.entries) cp.set_obj_psd(zb, e.i, e.j, coef * e.v);
      for (const auto& t : c.q) cp.set_obj(yb, t.idx, coef * t.v);
      constant += rows[r].side > 0 ? -lam(static_cast<Eigen::Index>(r)) * c.hi
                                   : lam(static_cast<Eigen::Index>(r)) * c.lo;
    }
    add_xk_rows(cp, sfp, k, zb, yb);
    conic::ConeSolution sol = conic::solve(cp, opts);
    inner_status[static_cast<size_t>(idx)] = sol.status;
    inner[static_cast<size_t>(idx)] = sol.obj + constant;
  });
  for (size_t i = 0; i < active.size(); ++i) {
    if (inner_status[i] == conic::Status::Unbounded) {
      throw std::runtime_error(
          "generate_cut: inner problem unbounded below; G rows must be bounded on X^k");
    }
    if (inner_status[i] != conic::Status::Optimal) {
      throw std::runtime_error("generate_cut: inner solve failed (" +
                               conic::to_string(inner_status[i]) + ")");
    }
    cut.c += inner[i];
  }
  return cut;
}

MasterResult solve_master(const StandardFormProblem& sfp, std::uint32_t I0, std::uint32_t I1,
                          const std::vector<const BendersCut*>& cuts,
                          const std::vector<NoGood>& no_goods, const conic::Options& opts) {
  conic::ConeProblem cp;
  int ab = cp.add_nonneg(sfp.n_u);
  for (int i = 0; i < sfp.n_u; ++i) {
    cp.set_obj(ab, i, 1.0);
    if (I0 & (1u << i)) {
      int r = cp.add_row(conic::Sense::Eq, 0.0);
      cp.add_coef(r, ab, i, 1.0);
    } else if (I1 & (1u << i)) {
      int r = cp.add_row(conic::Sense::Eq, 1.0);
      cp.add_coef(r, ab, i, 1.0);
    } else {
      int r = cp.add_row(conic::Sense::Le, 1.0);
      cp.add_coef(r, ab, i, 1.0);
    }
  }
  for (Eigen::Index r = 0; r < sfp.catalog.A.rows(); ++r) {
    int row = cp.add_row(conic::Sense::Le, sfp.catalog.b(r));
    for (int i = 0; i < sfp.n_u; ++i) cp.add_coef(row, ab, i, sfp.catalog.A(r, i));
  }
  for (const BendersCut* cut : cuts) {
    int row = cp.add_row(conic::Sense::Le, -cut->c);
    for (int i = 0; i < sfp.n_u; ++i) cp.add_coef(row, ab, i, cut->w(i));
  }
  for (const NoGood& ng : no_goods) {
    // sum_{i: mask_i=0} a_i + sum_{i: mask_i=1} (1 - a_i) >= 1
    int ones = 0;
    for (int i = 0; i < sfp.n_u; ++i) {
      if (ng.mask & (1u << i)) ++ones;
    }
    int row = cp.add_row(conic::Sense::Ge, 1.0 - static_cast<Real>(ones));
    for (int i = 0; i < sfp.n_u; ++i) {
      cp.add_coef(row, ab, i, (ng.mask & (1u << i)) ? -1.0 : 1.0);
    }
  }

  conic::ConeSolution sol = conic::solve(cp, opts);
  MasterResult out;
  out.status = sol.status;
  if (sol.status != conic::Status::Optimal) return out;
  out.a_hat = sol.scalar(ab);
  out.objective = sol.obj;
  return out;
}

std::vector<const BendersCut*> dedup_cuts(const std::vector<const BendersCut*>& cuts) {
  std::map<std::vector<long long>, const BendersCut*> seen;
  std::vector<const BendersCut*> out;
  for (const BendersCut* cut : cuts) {
    std::vector<long long> key;
    key.reserve(static_cast<size_t>(cut->w.size()) + 1);
    key.push_back(std::llround(cut->c / 1e-9));
    for (Eigen::Index i = 0; i < cut->w.size(); ++i) {
      key.push_back(std::llround(cut->w(i) / 1e-9));
    }
    if (seen.emplace(std::move(key), cut).second) out.push_back(cut);
  }
  return out;
}

IterateResult benders_iterate(const StandardFormProblem& sfp, std::uint32_t I0, std::uint32_t I1,
                              const std::vector<const BendersCut*>& inherited,
                              const std::vector<NoGood>& no_goods, const IterateParams& params) {
  IterateResult res;
  res.new_cuts.reserve(static_cast<size_t>(params.B));  // pointer stability for `pool`
  std::vector<const BendersCut*> pool = dedup_cuts(inherited);

  for (int iter = 0; iter < params.B; ++iter) {
    res.iterations = iter + 1;
    MasterResult master = solve_master(sfp, I0, I1, pool, no_goods, params.conic);
    if (master.status == conic::Status::Infeasible) {
      res.kind = IterateResult::Kind::Infeasible;
      res.bound = kInf;
      return res;
    }
    if (master.status != conic::Status::Optimal) {
      res.kind = IterateResult::Kind::Unresolved;
      res.note = "master: " + conic::to_string(master.status);
      return res;
    }
    res.bound = master.objective;
    res.a_hat = master.a_hat;

    std::vector<SubproblemResult> subs(static_cast<size_t>(sfp.K));
    parallel_for(sfp.K, params.threads, [&](int k) {
      subs[static_cast<size_t>(k)] = solve_subproblem_k(sfp, master.a_hat, k, params.conic);
    });
    Aggregate agg = aggregate_subproblems(sfp, master.a_hat, subs, params.tie_tol, params.conic);
    if (agg.status != conic::Status::Optimal) {
      res.kind = IterateResult::Kind::Unresolved;
      res.note = "subproblem: " + conic::to_string(agg.status);
      return res;
    }
    res.trace.push_back({params.node_id, iter, master.objective, agg.gamma_star,
                         static_cast<int>(agg.kset.size()),
                         static_cast<int>(res.new_cuts.size())});
    if (agg.gamma_star <= params.tol) {
      res.kind = IterateResult::Kind::Converged;
      return res;
    }
    BendersCut cut;
    try {
      cut = generate_cut(sfp, agg.lambda, params.conic, params.threads);
    } catch (const std::runtime_error& e) {
      res.kind = IterateResult::Kind::Unresolved;
      res.note = e.what();
      return res;
    }
    cut.node = params.node_id;
    cut.iter = iter;
    res.new_cuts.push_back(std::move(cut));
    pool.push_back(&res.new_cuts.back());
    pool = dedup_cuts(pool);
  }
  res.kind = IterateResult::Kind::BoundOnly;
  return res;
}

}  // namespace gridplan::benders
