#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gridplan/benders.hpp"
#include "gridplan/oracle.hpp"
#include "gridplan/relaxation.hpp"
#include "testutil.hpp"

using namespace gridplan;
using namespace gridplan::benders;

namespace {

Vec box_point(const StandardFormProblem& sfp, std::mt19937& rng) {
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  Vec a(sfp.n_u);
  for (int i = 0; i < sfp.n_u; ++i) a(i) = unit(rng);
  // repair per-line sums so that A a <= b holds
  for (int e = 0; e < sfp.L; ++e) {
    const auto& opts = sfp.catalog.options_on(e);
    Real s = 0;
    for (int i : opts) s += a(i);
    if (s > 1.0) {
      for (int i : opts) a(i) /= s;
    }
  }
  return a;
}

testutil::Instance violating_instance() {
  auto inst = testutil::three_bus_pv(0.15);
  // power balance demands an export the line-power rows cannot carry
  inst.scenarios[0].p_max(2) = -40.0;
  inst.scenarios[0].p_min(2) = -45.0;
  return inst;
}

}  // namespace

TEST_CASE("subproblem accepts a scenario the oracle certifies feasible") {
  auto inst = testutil::three_bus_pv(0.15);
  FixedDispatchPolicy fixed;
  IVec a0 = zero_selection(inst.catalog);
  REQUIRE(evaluate_policy(fixed, inst.net, inst.catalog, a0, inst.scenarios[0]).feasible);
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  SubproblemResult res = solve_subproblem_k(sfp, Vec::Zero(2), 0);
  REQUIRE(res.status == conic::Status::Optimal);
  CHECK(res.gamma <= 1e-7);
}

TEST_CASE("impossible injection demand yields positive violation") {
  auto inst = violating_instance();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  SubproblemResult res = solve_subproblem_k(sfp, Vec::Zero(2), 0);
  REQUIRE(res.status == conic::Status::Optimal);
  CHECK(res.gamma > 1e-3);
  CHECK(res.lambda.minCoeff() >= -1e-9);
  CHECK(res.lambda.sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("duplicated scenarios give identical gamma") {
  auto inst = violating_instance();
  inst.scenarios.push_back(inst.scenarios[0]);
  inst.scenarios[1].k = 1;
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  SubproblemResult r0 = solve_subproblem_k(sfp, Vec::Zero(2), 0);
  SubproblemResult r1 = solve_subproblem_k(sfp, Vec::Zero(2), 1);
  REQUIRE(r0.status == conic::Status::Optimal);
  REQUIRE(r1.status == conic::Status::Optimal);
  CHECK(r0.gamma == doctest::Approx(r1.gamma).epsilon(1e-7));
}

TEST_CASE("aggregation: single scenario and max rule") {
  auto inst = violating_instance();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  const int R = static_cast<int>(g_rows(sfp).size());

  SubproblemResult a, b;
  a.status = b.status = conic::Status::Optimal;
  a.gamma = 0.3;
  b.gamma = -0.2;
  a.lambda = Vec::Zero(R);
  a.lambda(0) = 1.0;
  b.lambda = Vec::Zero(R);
  b.lambda(1) = 1.0;

  Aggregate one = aggregate_subproblems(sfp, Vec::Zero(2), {a});
  CHECK(one.gamma_star == doctest::Approx(0.3));
  CHECK(one.kset == std::vector<int>{0});
  CHECK(one.lambda[0](0) == 1.0);

  Aggregate two = aggregate_subproblems(sfp, Vec::Zero(2), {a, b});
  CHECK(two.gamma_star == doctest::Approx(0.3));
  CHECK(two.kset == std::vector<int>{0});
  CHECK(two.lambda[1].cwiseAbs().maxCoeff() == 0.0);  // lambda_k = 0 outside the K-set
}

TEST_CASE("tied scenarios trigger the reduced joint solve") {
  auto inst = violating_instance();
  inst.scenarios.push_back(inst.scenarios[0]);  // exact duplicate -> tie
  inst.scenarios[1].k = 1;
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  Vec a_hat = Vec::Zero(2);
  std::vector<SubproblemResult> subs{solve_subproblem_k(sfp, a_hat, 0),
                                     solve_subproblem_k(sfp, a_hat, 1)};
  Aggregate agg = aggregate_subproblems(sfp, a_hat, subs, 1e-5);
  REQUIRE(agg.status == conic::Status::Optimal);
  REQUIRE(agg.kset.size() == 2);
  Real total = agg.lambda[0].sum() + agg.lambda[1].sum();
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(agg.lambda[0].minCoeff() >= -1e-9);
  CHECK(agg.lambda[1].minCoeff() >= -1e-9);
}

TEST_CASE("a multiplier on an m-free row produces a pure feasibility cut") {
  auto inst = testutil::two_bus(Complex(1, -2), 1.0);
  // add an option on a second line so n_u > 0 but line 0 keeps m = 0
  inst.net.buses.push_back(testutil::make_bus("b2", 0.9, 1.1));
  inst.net.lines.push_back(testutil::make_line("l1", 1, 2, Complex(4, -2), 1.0));
  inst.net.N = 3;
  inst.net.L = 2;
  inst.net.rebuild_adjacency();
  UpgradeOption opt;
  opt.id = "u0";
  opt.line = 1;
  opt.dy = Complex(4, -2);
  opt.di = 1.0;
  inst.catalog.options = {opt};
  inst.catalog.finalize(inst.net);
  inst.scenarios[0] = testutil::uniform_scenario(inst.net);
  testutil::fix_injection(inst.scenarios[0], 1, 0.05, 0.0);
  testutil::fix_injection(inst.scenarios[0], 2, 0.05, 0.0);
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);

  auto rows = g_rows(sfp);
  int current_row = -1;
  for (size_t r = 0; r < rows.size(); ++r) {
    const auto& c = sfp.constraints[static_cast<size_t>(rows[r].h)];
    if (c.kind == ConstraintKind::Current && c.line == 0) current_row = static_cast<int>(r);
  }
  REQUIRE(current_row >= 0);
  std::vector<Vec> lambda(1, Vec::Zero(static_cast<Eigen::Index>(rows.size())));
  lambda[0](current_row) = 1.0;
  BendersCut cut = generate_cut(sfp, lambda);
  CHECK(cut.w.cwiseAbs().maxCoeff() == 0.0);
  CHECK(cut.c <= 1e-9);  // min of a nonneg quadratic minus the limit
}

TEST_CASE("master lp: box, forced cut, and contradictions") {
  auto inst = testutil::three_bus_pv();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);

  MasterResult free = solve_master(sfp, 0, 0, {}, {});
  REQUIRE(free.status == conic::Status::Optimal);
  CHECK(free.objective == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(free.a_hat.cwiseAbs().maxCoeff() <= 1e-6);

  BendersCut force;  // 1 - a0 <= 0
  force.c = 1.0;
  force.w = Vec::Zero(2);
  force.w(0) = -1.0;
  MasterResult forced = solve_master(sfp, 0, 0, {&force}, {});
  REQUIRE(forced.status == conic::Status::Optimal);
  CHECK(forced.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(forced.a_hat(0) == doctest::Approx(1.0).epsilon(1e-6));

  MasterResult clash = solve_master(sfp, /*I0=*/0b01, 0, {&force}, {});
  CHECK(clash.status == conic::Status::Infeasible);
}

TEST_CASE("benders converges immediately on a base-feasible instance") {
  auto inst = testutil::three_bus_pv(0.15);
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  IterateParams ip;
  IterateResult res = benders_iterate(sfp, 0, 0, {}, {}, ip);
  REQUIRE(res.kind == IterateResult::Kind::Converged);
  CHECK(res.bound == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(res.iterations == 1);
  CHECK(res.a_hat.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("B = 1 on a violated instance returns a bound and at least one cut") {
  auto inst = violating_instance();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  IterateParams ip;
  ip.B = 1;
  IterateResult res = benders_iterate(sfp, 0, 0, {}, {}, ip);
  REQUIRE(res.kind == IterateResult::Kind::BoundOnly);
  CHECK(res.new_cuts.size() >= 1);
  CHECK(res.bound >= -1e-9);
}

TEST_CASE("cut violation at the generating point is consistent with gamma") {
  auto inst = testutil::three_bus_pv();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  std::mt19937 rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    Vec a_hat = trial == 0 ? Vec(Vec::Zero(2)) : box_point(sfp, rng);
    std::vector<SubproblemResult> subs{solve_subproblem_k(sfp, a_hat, 0)};
    REQUIRE(subs[0].status == conic::Status::Optimal);
    if (subs[0].gamma <= 1e-7) continue;
    Aggregate agg = aggregate_subproblems(sfp, a_hat, subs);
    BendersCut cut = generate_cut(sfp, agg.lambda);
    CHECK(cut.value(a_hat) >= agg.gamma_star - 1e-6);
  }
}

TEST_CASE("every policy-feasible binary point satisfies generated cuts") {
  auto inst = testutil::three_bus_pv();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  FixedDispatchPolicy fixed;

  // harvest cuts from a few benders runs at different fixings
  std::vector<BendersCut> cuts;
  for (std::uint32_t fix = 0; fix < 3; ++fix) {
    IterateParams ip;
    ip.B = 4;
    IterateResult res = benders_iterate(sfp, fix == 1 ? 0b01 : 0, fix == 2 ? 0b10 : 0, {}, {}, ip);
    for (auto& c : res.new_cuts) cuts.push_back(c);
  }

  for (std::uint32_t mask = 0; mask < 4; ++mask) {
    IVec a_int(2);
    a_int << int(mask & 1), int((mask >> 1) & 1);
    bool ok = true;
    for (const Scenario& sc : inst.scenarios) {
      if (!evaluate_policy(fixed, inst.net, inst.catalog, a_int, sc).feasible) ok = false;
    }
    if (!ok) continue;
    Vec a = a_int.cast<Real>();
    for (const BendersCut& cut : cuts) {
      CHECK(cut.value(a) <= 1e-6);
    }
  }
}

TEST_CASE("decomposed gamma equals the stacked subproblem optimum") {
  std::mt19937 rng(17);
  conic::Options tight;
  tight.feas_tol = 1e-10;
  tight.gap_tol = 1e-10;
  for (unsigned seed : {201u, 202u, 203u}) {
    auto inst = testutil::random_instance(seed, {5, 7, 2, 4, 2, 3});
    StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
    for (int trial = 0; trial < 3; ++trial) {
      Vec a_hat = box_point(sfp, rng);
      Real gamma_dec = -kInf;
      bool all_ok = true;
      for (int k = 0; k < sfp.K; ++k) {
        SubproblemResult r = solve_subproblem_k(sfp, a_hat, k, tight);
        if (r.status != conic::Status::Optimal) {
          all_ok = false;
          break;
        }
        gamma_dec = std::max(gamma_dec, r.gamma);
      }
      REQUIRE(all_ok);
      std::vector<int> all_k(static_cast<size_t>(sfp.K));
      for (int k = 0; k < sfp.K; ++k) all_k[static_cast<size_t>(k)] = k;
      StackedResult full = solve_subproblem_stacked(sfp, a_hat, all_k, tight);
      REQUIRE(full.status == conic::Status::Optimal);
      CHECK(gamma_dec == doctest::Approx(full.gamma).epsilon(1e-8));
    }
  }
}

TEST_CASE("converged benders agrees with the monolithic relaxation") {
  for (unsigned seed : {301u, 302u}) {
    auto inst = testutil::random_instance(seed, {5, 6, 2, 3, 1, 2});
    StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
    IterateParams ip;
    ip.B = 30;
    IterateResult ben = benders_iterate(sfp, 0, 0, {}, {}, ip);
    NodeRelaxation nr = build_node_relaxation(sfp, 0, 0);
    MonolithicResult mono = solve_monolithic(nr);
    if (ben.kind == IterateResult::Kind::Converged &&
        mono.status == conic::Status::Optimal) {
      CHECK(ben.bound == doctest::Approx(mono.objective).epsilon(1e-5));
    }
    if (ben.kind == IterateResult::Kind::Infeasible) {
      CHECK(mono.status == conic::Status::Infeasible);
    }
    // master objectives never exceed the monolithic optimum
    if (mono.status == conic::Status::Optimal) {
      for (const auto& row : ben.trace) {
        CHECK(row.master_obj <= mono.objective + 1e-5);
      }
    }
    // bounds are non-decreasing along the iteration
    for (size_t i = 1; i < ben.trace.size(); ++i) {
      CHECK(ben.trace[i].master_obj >= ben.trace[i - 1].master_obj - 1e-9);
    }
  }
}

TEST_CASE("cut deduplication collapses identical cuts") {
  BendersCut a, b, c;
  a.c = 1.0;
  a.w = Vec::Zero(2);
  a.w << 0.5, -0.25;
  b = a;
  c = a;
  c.c = 1.0 + 1e-6;  // distinct at 1e-9 granularity
  auto out = dedup_cuts({&a, &b, &c});
  CHECK(out.size() == 2);
}
