#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gridplan/bnb.hpp"
#include "gridplan/oracle.hpp"
#include "gridplan/parse.hpp"
#include "gridplan/report_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitBudget = 2;
constexpr int kExitInputError = 3;
constexpr int kExitNumerical = 4;

int run_validate(const std::string& path) {
  gridplan::ParsedInput in = gridplan::parse_input_file(path);
  std::cout << "ok: " << in.net.N << " buses, " << in.net.L << " lines, " << in.catalog.n_u
            << " upgrade options, " << in.scenarios.size() << " scenarios\n";
  return kExitOk;
}

int run_oracle(const std::string& path, const std::string& policy_name, int threads) {
  gridplan::ParsedInput in = gridplan::parse_input_file(path);
  auto policy = gridplan::make_policy(policy_name);
  gridplan::oracle::OracleResult res =
      gridplan::oracle::brute_force(in.net, in.catalog, in.scenarios, *policy, threads);
  if (!res.feasible) {
    std::cout << "infeasible (" << res.candidates << " candidates checked)\n";
    return kExitInfeasible;
  }
  std::cout << "optimal cost " << res.cost << ", upgrades:";
  for (int i = 0; i < in.catalog.n_u; ++i) {
    if (res.a(i)) std::cout << " " << in.catalog.options[static_cast<size_t>(i)].id;
  }
  std::cout << "\n";
  return kExitOk;
}

int run_solve(const std::string& path, const gridplan::bnb::BnbParams& params,
              const std::string& policy_name, const std::string& mode_name,
              const std::string& out_path, const std::string& dot_path) {
  gridplan::ParsedInput in = gridplan::parse_input_file(path);
  gridplan::StandardFormProblem sfp = gridplan::assemble(in.net, in.catalog, in.scenarios);
  auto policy = gridplan::make_policy(policy_name);
  gridplan::bnb::SolveReport report = gridplan::bnb::run(sfp, *policy, params);

  std::string doc = gridplan::report_to_json(report, sfp, policy_name, mode_name);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kExitInputError;
    }
    out << doc << "\n";
  }
  if (!dot_path.empty()) {
    std::ofstream dot(dot_path);
    if (!dot) {
      std::cerr << "error: cannot write " << dot_path << "\n";
      return kExitInputError;
    }
    gridplan::write_dot(in.net, in.catalog, in.scenarios, *policy,
                        report.has_incumbent ? &report.a : nullptr, dot);
  }
  gridplan::render_report(doc, std::cout);

  switch (report.status) {
    case gridplan::bnb::SolveReport::Status::Optimal: return kExitOk;
    case gridplan::bnb::SolveReport::Status::Infeasible: return kExitInfeasible;
    case gridplan::bnb::SolveReport::Status::BudgetExhausted: return kExitBudget;
    case gridplan::bnb::SolveReport::Status::NumericalFailure: return kExitNumerical;
  }
  return kExitNumerical;
}

int run_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    return kExitInputError;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  gridplan::render_report(buf.str(), std::cout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distribution-grid line upgrade planner"};
  app.require_subcommand(1);

  std::string input, out_path, dot_path, report_path;
  std::string policy_name = "fixed";
  std::string mode_name = "benders";
  std::string order_name = "best";
  gridplan::bnb::BnbParams params;

  auto* validate = app.add_subcommand("validate", "parse and validate an input document");
  validate->add_option("input", input)->required();

  auto* solve = app.add_subcommand("solve", "run the branch-and-bound planner");
  solve->add_option("input", input)->required();
  solve->add_option("--benders-iters", params.B, "Benders iterations per node")->capture_default_str();
  solve->add_option("--epsilon", params.epsilon, "optimality gap")->capture_default_str();
  solve->add_option("--policy", policy_name, "fixed|curtailment")->capture_default_str();
  solve->add_option("--node-order", order_name, "best|dfs|fifo")->capture_default_str();
  solve->add_option("--max-nodes", params.max_nodes, "node budget (-1: auto)")->capture_default_str();
  solve->add_option("--mode", mode_name, "benders|monolithic")->capture_default_str();
  solve->add_option("--threads", params.threads, "scenario-level parallelism (0: cores)")
      ->capture_default_str();
  solve->add_option("--out", out_path, "write the report JSON here");
  solve->add_option("--dot", dot_path, "write a violation/upgrade graph (Graphviz)");

  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force reference solver");
  oracle_cmd->add_option("input", input)->required();
  oracle_cmd->add_option("--policy", policy_name)->capture_default_str();
  oracle_cmd->add_option("--threads", params.threads)->capture_default_str();

  auto* report_cmd = app.add_subcommand("report", "summarize a report JSON");
  report_cmd->add_option("report", report_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return run_validate(input);
    if (oracle_cmd->parsed()) {
      return run_oracle(input, policy_name, params.threads);
    }
    if (solve->parsed()) {
      if (order_name == "best") {
        params.order = gridplan::bnb::NodeOrder::Best;
      } else if (order_name == "dfs") {
        params.order = gridplan::bnb::NodeOrder::Dfs;
      } else if (order_name == "fifo") {
        params.order = gridplan::bnb::NodeOrder::Fifo;
      } else {
        std::cerr << "error: unknown node order '" << order_name << "'\n";
        return kExitInputError;
      }
      if (mode_name == "benders") {
        params.mode = gridplan::bnb::SolveMode::Benders;
      } else if (mode_name == "monolithic") {
        params.mode = gridplan::bnb::SolveMode::Monolithic;
      } else {
        std::cerr << "error: unknown mode '" << mode_name << "'\n";
        return kExitInputError;
      }
      params.progress = &std::cerr;
      return run_solve(input, params, policy_name, mode_name, out_path, dot_path);
    }
    if (report_cmd->parsed()) return run_report(report_path);
  } catch (const gridplan::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInputError;
}
