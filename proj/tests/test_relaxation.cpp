#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridplan/relaxation.hpp"
#include "testutil.hpp"

using namespace gridplan;

namespace {

testutil::Instance base_feasible_instance() {
  auto inst = testutil::three_bus_pv(0.15);  // mild export, no violations
  return inst;
}

}  // namespace

TEST_CASE("fixing masks must be disjoint") {
  auto inst = base_feasible_instance();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  CHECK_THROWS_AS(build_node_relaxation(sfp, 0b01, 0b01), std::invalid_argument);
}

TEST_CASE("all-zero fixing reduces to base-network feasibility") {
  auto inst = base_feasible_instance();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  NodeRelaxation nr = build_node_relaxation(sfp, 0b11, 0);
  MonolithicResult res = solve_monolithic(nr);
  REQUIRE(res.status == conic::Status::Optimal);
  CHECK(res.objective == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(res.a.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("impossible power balance makes the node relaxation infeasible") {
  auto inst = base_feasible_instance();
  // demand an export far beyond what any bounded flow profile can carry
  inst.scenarios[0].p_max(2) = -50.0;
  inst.scenarios[0].p_min(2) = -60.0;
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  NodeRelaxation nr = build_node_relaxation(sfp, 0, 0);
  MonolithicResult res = solve_monolithic(nr);
  CHECK(res.status == conic::Status::Infeasible);
}

TEST_CASE("rank-1 witness from the policy point is node-feasible") {
  auto inst = testutil::three_bus_pv();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  for (std::uint32_t mask = 0; mask < 4; ++mask) {
    IVec a_int(2);
    a_int << int(mask & 1), int((mask >> 1) & 1);
    FixedDispatchPolicy fixed;
    PolicyOutcome out = evaluate_policy(fixed, inst.net, inst.catalog, a_int, inst.scenarios[0]);
    if (!out.feasible) continue;
    Vec z = voltage_to_z(out.op.v);
    Mat Z = z * z.transpose();
    Vec y = branch_flows(inst.net, inst.catalog, a_int, out.op.v);
    NodeRelaxation nr = build_node_relaxation(sfp, ~mask & 0b11, mask);
    Real viol = node_relaxation_violation(nr, a_int.cast<Real>(), {Z}, {y});
    CHECK(viol <= 1e-7);
    // and the conic backend accepts the fixing
    MonolithicResult res = solve_monolithic(nr);
    CHECK(res.status == conic::Status::Optimal);
  }
}

TEST_CASE("two-bus lowering matches the hand-assembled relaxation") {
  auto inst = testutil::two_bus(Complex(1, -2), 1.0);
  testutil::fix_injection(inst.scenarios[0], 1, 0.1, 0.02);
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  NodeRelaxation nr = build_node_relaxation(sfp, 0, 0);
  RelaxationLowering low = lower_node_relaxation(nr);
  const conic::ConeProblem& cp = low.problem;
  // hand count: no a rows (n_u = 0), per scenario: 2 two-sided voltage rows
  // (4 one-sided), 1 current row, 4 balance rows
  REQUIRE(cp.num_rows() == 9);
  const auto& rows = cp.rows();
  // voltage bus 0 (slack, v = 1): le 1 then ge 1
  CHECK(rows[0].sense == conic::Sense::Le);
  CHECK(rows[0].rhs == doctest::Approx(1.0));
  CHECK(rows[1].sense == conic::Sense::Ge);
  CHECK(rows[1].rhs == doctest::Approx(1.0));
  // voltage bus 1: [0.81, 1.21]
  CHECK(rows[2].rhs == doctest::Approx(1.21));
  CHECK(rows[3].rhs == doctest::Approx(0.81));
  // current row: Q z <= 1/5
  CHECK(rows[4].rhs == doctest::Approx(0.2));
  CHECK(rows[4].psd.size() == 6);
  // balance rows: p_max, p_min, q_max, q_min at bus 1
  CHECK(rows[5].rhs == doctest::Approx(0.1));
  CHECK(rows[6].rhs == doctest::Approx(-0.1));
  CHECK(rows[7].rhs == doctest::Approx(0.02));
  CHECK(rows[8].rhs == doctest::Approx(-0.02));
  // one psd block of size 4, one free block of size 4 (f layout), no a vars
  CHECK(cp.block_kind(low.z_blocks[0]) == conic::BlockKind::Psd);
  CHECK(cp.block_dim(low.z_blocks[0]) == 4);
  CHECK(cp.block_dim(low.y_blocks[0]) == 4);
}

TEST_CASE("monolithic objective equals n_u when everything is fixed on") {
  auto inst = base_feasible_instance();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  NodeRelaxation nr = build_node_relaxation(sfp, 0, 0b11);
  MonolithicResult res = solve_monolithic(nr);
  REQUIRE(res.status == conic::Status::Optimal);
  CHECK(res.objective == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("child node optimum never drops below the parent's") {
  auto inst = testutil::three_bus_pv();
  StandardFormProblem sfp = assemble(inst.net, inst.catalog, inst.scenarios);
  MonolithicResult root = solve_monolithic(build_node_relaxation(sfp, 0, 0));
  REQUIRE(root.status == conic::Status::Optimal);
  for (std::uint32_t bit = 0; bit < 2; ++bit) {
    for (bool up : {false, true}) {
      NodeRelaxation child = build_node_relaxation(sfp, up ? 0 : (1u << bit), up ? (1u << bit) : 0);
      MonolithicResult res = solve_monolithic(child);
      if (res.status == conic::Status::Optimal) {
        CHECK(res.objective >= root.objective - 1e-6);
      }
    }
  }
}
