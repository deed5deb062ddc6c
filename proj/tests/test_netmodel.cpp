#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gridplan/netmodel.hpp"
#include "gridplan/parse.hpp"
#include "testutil.hpp"

using namespace gridplan;

TEST_CASE("laplacian of the two-bus example") {
  auto inst = testutil::two_bus(Complex(1, -2));
  IVec a = zero_selection(inst.catalog);
  CMat Y = build_laplacian(inst.net, inst.catalog, a);
  CHECK(Y(0, 0) == Complex(-1, 2));
  CHECK(Y(0, 1) == Complex(1, -2));
  CHECK(Y(1, 0) == Complex(1, -2));
  CHECK(Y(1, 1) == Complex(-1, 2));
}

TEST_CASE("laplacian with no lines is zero") {
  Network net;
  net.buses = {testutil::make_slack("s"), testutil::make_bus("b", 0.9, 1.1)};
  net.N = 2;
  net.L = 0;
  net.slack = 0;
  net.rebuild_adjacency();
  UpgradeCatalog cat;
  cat.finalize(net);
  CMat Y = build_laplacian(net, cat, zero_selection(cat));
  CHECK(Y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("laplacian applies the selected upgrade increment") {
  auto inst = testutil::two_bus(Complex(1, -2));
  UpgradeOption opt;
  opt.id = "u0";
  opt.line = 0;
  opt.dy = Complex(1, -1);
  inst.catalog.options = {opt};
  inst.catalog.finalize(inst.net);
  IVec a(1);
  a << 1;
  CMat Y = build_laplacian(inst.net, inst.catalog, a);
  CHECK(Y(0, 1) == Complex(2, -3));
  CHECK(Y(0, 0) == Complex(-2, 3));
}

TEST_CASE("combination-infeasible selections are rejected") {
  auto inst = testutil::three_bus_pv();
  // two options on one line
  inst.catalog.options[1].line = 0;
  inst.catalog.finalize(inst.net);
  IVec a(2);
  a << 1, 1;
  CHECK(!inst.catalog.combination_feasible(a));
  CHECK_THROWS_AS(build_laplacian(inst.net, inst.catalog, a), std::invalid_argument);
}

TEST_CASE("laplacian row sums vanish and upgrades act linearly") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = testutil::random_instance(100 + trial);
    const int n = inst.catalog.n_u;
    IVec a = IVec::Zero(n);
    for (int e = 0; e < inst.net.L; ++e) {
      const auto& opts = inst.catalog.options_on(e);
      if (!opts.empty() && rng() % 2) a(opts[rng() % opts.size()]) = 1;
    }
    REQUIRE(inst.catalog.combination_feasible(a));
    CMat Y = build_laplacian(inst.net, inst.catalog, a);
    CHECK((Y.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-12);

    CMat Y0 = build_laplacian(inst.net, inst.catalog, IVec::Zero(n));
    CMat sum = CMat::Zero(inst.net.N, inst.net.N);
    for (int i = 0; i < n; ++i) {
      if (!a(i)) continue;
      const auto& opt = inst.catalog.options[static_cast<size_t>(i)];
      const Line& ln = inst.net.line(opt.line);
      sum(ln.from, ln.to) += opt.dy;
      sum(ln.to, ln.from) += opt.dy;
      sum(ln.from, ln.from) -= opt.dy;
      sum(ln.to, ln.to) -= opt.dy;
    }
    CHECK((Y - Y0 - sum).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("upgraded current limit") {
  auto inst = testutil::two_bus();
  IVec a0 = zero_selection(inst.catalog);
  CHECK(upgraded_current_limit(inst.net, inst.catalog, 0, a0) == 1.0);

  UpgradeOption opt;
  opt.id = "u0";
  opt.line = 0;
  opt.dy = Complex(1, 0);
  opt.di = 0.5;
  inst.catalog.options = {opt};
  inst.catalog.finalize(inst.net);
  IVec a(1);
  a << 1;
  CHECK(upgraded_current_limit(inst.net, inst.catalog, 0, a) == doctest::Approx(1.5));
}

TEST_CASE("flat zero-injection profile checks clean") {
  auto inst = testutil::two_bus();
  OperatingPoint op;
  op.v = CVec::Constant(2, Complex(1, 0));
  op.s = CVec::Zero(2);
  auto rep = check_operating_point(inst.net, inst.catalog, zero_selection(inst.catalog),
                                   inst.scenarios[0], op, 1e-8);
  CHECK(rep.clean());
}

TEST_CASE("single voltage violation is flagged") {
  auto inst = testutil::three_bus_pv();
  IVec a = zero_selection(inst.catalog);
  Scenario loose = testutil::uniform_scenario(inst.net);
  OperatingPoint fake;
  fake.v = CVec::Constant(3, Complex(1, 0));
  fake.v(2) = Complex(1.15, 0);
  CMat Y = build_laplacian(inst.net, inst.catalog, a);
  fake.s = fake.v.cwiseProduct((Y * fake.v).conjugate());
  auto rep = check_operating_point(inst.net, inst.catalog, a, loose, fake, 1e-8);
  CHECK(rep.voltage.size() == 1);
  CHECK(rep.voltage[0].bus == 2);
  CHECK(rep.power.empty());
  CHECK(rep.kirchhoff_residual < 1e-12);
}

// independent re-evaluation of the limit checks, scalar loops straight from
// the defining relations
namespace {
struct NaiveFlags {
  bool kirchhoff_bad = false;
  std::vector<int> v_bad, p_bad, q_bad, i_bad;
};

NaiveFlags naive_check(const Network& net, const CMat& Y, const std::vector<Real>& imax,
                       const Scenario& sc, const OperatingPoint& op, Real tol) {
  NaiveFlags f;
  for (int j = 0; j < net.N; ++j) {
    Complex acc(0, 0);
    for (int l = 0; l < net.N; ++l) acc += Y(j, l) * op.v(l);
    Complex s = op.v(j) * std::conj(acc);
    if (std::abs(s - op.s(j)) > tol) f.kirchhoff_bad = true;
    Real vm = std::abs(op.v(j));
    if (vm < net.bus(j).v_min - tol || vm > net.bus(j).v_max + tol) f.v_bad.push_back(j);
    if (op.s(j).real() < sc.p_min(j) - tol || op.s(j).real() > sc.p_max(j) + tol) {
      f.p_bad.push_back(j);
    }
    if (op.s(j).imag() < sc.q_min(j) - tol || op.s(j).imag() > sc.q_max(j) + tol) {
      f.q_bad.push_back(j);
    }
  }
  for (int e = 0; e < net.L; ++e) {
    const Line& ln = net.line(e);
    if (std::abs(Y(ln.from, ln.to)) * std::abs(op.v(ln.from) - op.v(ln.to)) >
        imax[static_cast<size_t>(e)] + tol) {
      f.i_bad.push_back(e);
    }
  }
  return f;
}
}  // namespace

TEST_CASE("random operating points match the naive re-evaluation") {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<Real> unit(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    auto inst = testutil::random_instance(500 + trial, {4, 6, 2, 3, 1, 1});
    IVec a = zero_selection(inst.catalog);
    if (inst.catalog.n_u > 0 && trial % 2) a(0) = 1;
    OperatingPoint op;
    op.v = CVec(inst.net.N);
    op.s = CVec(inst.net.N);
    for (int j = 0; j < inst.net.N; ++j) {
      op.v(j) = Complex(1.0 + 0.12 * unit(rng), 0.1 * unit(rng));
      op.s(j) = Complex(0.4 * unit(rng), 0.2 * unit(rng));
    }
    const Real tol = 1e-6;
    auto rep = check_operating_point(inst.net, inst.catalog, a, inst.scenarios[0], op, tol);
    CMat Y = build_laplacian(inst.net, inst.catalog, a);
    std::vector<Real> imax;
    for (int e = 0; e < inst.net.L; ++e) {
      imax.push_back(upgraded_current_limit(inst.net, inst.catalog, e, a));
    }
    auto naive = naive_check(inst.net, Y, imax, inst.scenarios[0], op, tol);
    CHECK((rep.kirchhoff_residual > tol) == naive.kirchhoff_bad);
    REQUIRE(rep.voltage.size() == naive.v_bad.size());
    for (size_t i = 0; i < naive.v_bad.size(); ++i) CHECK(rep.voltage[i].bus == naive.v_bad[i]);
    size_t np = 0, nq = 0;
    for (const auto& p : rep.power) (p.kind == 'p' ? np : nq) += 1;
    CHECK(np == naive.p_bad.size());
    CHECK(nq == naive.q_bad.size());
    REQUIRE(rep.current.size() == naive.i_bad.size());
    for (size_t i = 0; i < naive.i_bad.size(); ++i) CHECK(rep.current[i].line == naive.i_bad[i]);
  }
}

TEST_CASE("check_operating_point is pure") {
  auto inst = testutil::three_bus_pv();
  IVec a = zero_selection(inst.catalog);
  auto op = testutil::pf_point(inst, a, inst.scenarios[0]);
  auto r1 = check_operating_point(inst.net, inst.catalog, a, inst.scenarios[0], op);
  auto r2 = check_operating_point(inst.net, inst.catalog, a, inst.scenarios[0], op);
  CHECK(r1.summary() == r2.summary());
}

TEST_CASE("parser accepts a minimal document") {
  const char* doc = R"({
    "buses": [
      {"id": "s", "v_min": 1.0, "v_max": 1.0, "slack": true},
      {"id": "b1", "v_min": 0.9, "v_max": 1.1, "p_min": -0.5, "p_max": 0.5,
       "q_min": -0.2, "q_max": 0.2}
    ],
    "lines": [{"id": "l0", "from": "s", "to": "b1", "g": 4.0, "b": -2.0, "i_max": 1.0}],
    "scenarios": [{"id": "base"}]
  })";
  ParsedInput in = parse_input_string(doc);
  CHECK(in.net.N == 2);
  CHECK(in.scenarios.size() == 1);
  CHECK(in.net.slack == 0);
  CHECK(in.net.line(0).y == Complex(4, -2));
}

TEST_CASE("parser rejects inverted voltage bounds naming the bus") {
  const char* doc = R"({
    "buses": [
      {"id": "s", "v_min": 1.0, "v_max": 1.0, "slack": true},
      {"id": "bad", "v_min": 1.2, "v_max": 1.1}
    ],
    "lines": [{"id": "l0", "from": "s", "to": "bad", "g": 4.0, "b": -2.0, "i_max": 1.0}],
    "scenarios": [{}]
  })";
  CHECK_THROWS_WITH_AS(parse_input_string(doc),
                       doctest::Contains("v_min > v_max (bus 'bad')"), ParseError);
}

TEST_CASE("parser requires a slack bus") {
  const char* doc = R"({
    "buses": [
      {"id": "a", "v_min": 0.9, "v_max": 1.1},
      {"id": "b", "v_min": 0.9, "v_max": 1.1}
    ],
    "lines": [{"id": "l0", "from": "a", "to": "b", "g": 4.0, "b": -2.0, "i_max": 1.0}],
    "scenarios": [{}]
  })";
  CHECK_THROWS_WITH_AS(parse_input_string(doc), doctest::Contains("no slack bus"), ParseError);
}

TEST_CASE("parser normalizes SI quantities when bases are given") {
  // 400 V, 100 kVA base: y_base = s/v^2 = 0.625 S, i_base = 250 A
  const char* doc = R"({
    "bases": {"s_va": 1e5, "v_v": 400.0},
    "buses": [
      {"id": "s", "v_min": 400.0, "v_max": 400.0, "slack": true},
      {"id": "b1", "v_min": 360.0, "v_max": 440.0, "p_min": -5e4, "p_max": 5e4,
       "q_min": -2e4, "q_max": 2e4}
    ],
    "lines": [{"id": "l0", "from": "s", "to": "b1", "g": 2.5, "b": -1.25, "i_max": 250.0}],
    "scenarios": [{"bus_overrides": {"b1": {"p_ref": -3e4}}}]
  })";
  ParsedInput in = parse_input_string(doc);
  CHECK(in.net.bus(1).v_min == doctest::Approx(0.9));
  CHECK(in.net.bus(1).p_max == doctest::Approx(0.5));
  CHECK(in.net.line(0).y.real() == doctest::Approx(4.0));
  CHECK(in.net.line(0).i_max == doctest::Approx(1.0));
  CHECK(in.scenarios[0].p_ref(1) == doctest::Approx(-0.3));
}

TEST_CASE("parser rejects disconnected networks and unknown keys") {
  const char* doc = R"({
    "buses": [
      {"id": "s", "v_min": 1.0, "v_max": 1.0, "slack": true},
      {"id": "b1", "v_min": 0.9, "v_max": 1.1},
      {"id": "island", "v_min": 0.9, "v_max": 1.1}
    ],
    "lines": [{"id": "l0", "from": "s", "to": "b1", "g": 4.0, "b": -2.0, "i_max": 1.0}],
    "scenarios": [{}]
  })";
  CHECK_THROWS_WITH_AS(parse_input_string(doc), doctest::Contains("not connected"), ParseError);

  const char* doc2 = R"({
    "buses": [{"id": "s", "v_min": 1.0, "v_max": 1.0, "slack": true, "voltage": 1.0}],
    "scenarios": [{}]
  })";
  CHECK_THROWS_WITH_AS(parse_input_string(doc2), doctest::Contains("unknown key"), ParseError);
}
