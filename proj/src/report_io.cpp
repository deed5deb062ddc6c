#include "gridplan/report_io.hpp"

#include <ostream>
#include <set>

#include <json.hpp>

#include "gridplan/parse.hpp"

namespace gridplan {

using nlohmann::json;

namespace {

json finite_or_null(Real v) {
  if (!is_finite(v)) return nullptr;
  return v;
}

}  // namespace

std::string report_to_json(const bnb::SolveReport& report, const StandardFormProblem& sfp,
                           const std::string& policy_name, const std::string& mode) {
  json doc;
  doc["status"] = bnb::to_string(report.status);
  doc["objective"] = report.has_incumbent ? json(report.objective) : json(nullptr);
  if (report.has_incumbent) {
    std::vector<int> a(report.a.data(), report.a.data() + report.a.size());
    doc["a"] = a;
    json ups = json::array();
    for (int i = 0; i < sfp.n_u; ++i) {
      if (report.a(i)) ups.push_back(sfp.catalog.options[static_cast<size_t>(i)].id);
    }
    doc["upgrades"] = ups;
  } else {
    doc["a"] = nullptr;
    doc["upgrades"] = json::array();
  }
  doc["U"] = finite_or_null(report.U);
  doc["L"] = finite_or_null(report.L);
  doc["nodes"] = report.nodes;
  doc["policy_cuts"] = report.policy_cuts;
  doc["benders_iterations_total"] = report.benders_iterations_total;
  doc["policy"] = policy_name;
  doc["mode"] = mode;
  json nodes = json::array();
  for (const auto& ev : report.node_trace) {
    nodes.push_back({{"node", ev.node},
                     {"depth", ev.depth},
                     {"bound", finite_or_null(ev.bound)},
                     {"U", finite_or_null(ev.U)},
                     {"L", finite_or_null(ev.L)},
                     {"event", ev.event}});
  }
  doc["per_node_trace"] = std::move(nodes);
  json iters = json::array();
  for (const auto& row : report.iter_trace) {
    iters.push_back({{"node", row.node},
                     {"iter", row.iter},
                     {"master_obj", row.master_obj},
                     {"gamma_star", row.gamma_star},
                     {"kset", row.kset_size},
                     {"cuts", row.cuts_added}});
  }
  doc["benders_trace"] = std::move(iters);
  doc["timings"] = {{"wall_seconds", report.wall_seconds}};
  if (!report.note.empty()) doc["note"] = report.note;
  return doc.dump(2);
}

void render_report(const std::string& json_text, std::ostream& os) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("status")) {
    throw ParseError("report: not a solver report document");
  }
  os << "status:     " << doc["status"].get<std::string>() << "\n";
  if (doc.contains("objective") && !doc["objective"].is_null()) {
    os << "objective:  " << doc["objective"].get<Real>() << "\n";
  }
  if (doc.contains("upgrades") && doc["upgrades"].is_array() && !doc["upgrades"].empty()) {
    os << "upgrades:  ";
    for (const auto& u : doc["upgrades"]) os << " " << u.get<std::string>();
    os << "\n";
  }
  auto bound = [&](const char* key) -> std::string {
    if (!doc.contains(key) || doc[key].is_null()) return "inf";
    return std::to_string(doc[key].get<Real>());
  };
  os << "bounds:     U=" << bound("U") << " L=" << bound("L") << "\n";
  os << "nodes:      " << doc.value("nodes", 0L) << "\n";
  os << "policy cuts " << doc.value("policy_cuts", 0L) << "\n";
  os << "benders its " << doc.value("benders_iterations_total", 0L) << "\n";
  if (doc.contains("per_node_trace") && doc["per_node_trace"].is_array()) {
    os << "trace:\n";
    for (const auto& ev : doc["per_node_trace"]) {
      os << "  node " << ev.value("node", -1) << " depth " << ev.value("depth", 0) << " bound "
         << (ev.contains("bound") && !ev["bound"].is_null()
                 ? std::to_string(ev["bound"].get<Real>())
                 : "inf")
         << " " << ev.value("event", "") << "\n";
    }
  }
}

void write_dot(const Network& net, const UpgradeCatalog& catalog,
               const std::vector<Scenario>& scenarios, const Policy& policy, const IVec* a_best,
               std::ostream& os) {
  IVec a0 = zero_selection(catalog);
  std::set<int> bad_buses, bad_lines;
  for (const Scenario& sc : scenarios) {
    PolicyOutcome out = policy.evaluate(net, catalog, a0, sc);
    if (out.feasible || !out.has_op) continue;
    ViolationReport rep = check_operating_point(net, catalog, a0, sc, out.op, 1e-6);
    for (const auto& v : rep.voltage) bad_buses.insert(v.bus);
    for (const auto& c : rep.current) bad_lines.insert(c.line);
  }
  os << "graph feeder {\n  node [shape=circle, style=filled, fillcolor=white];\n";
  for (int j = 0; j < net.N; ++j) {
    os << "  b" << j << " [label=\"" << net.bus(j).id << (net.bus(j).slack ? " (S)" : "")
       << "\"";
    if (bad_buses.count(j)) os << ", fillcolor=gray25, fontcolor=white";
    if (net.bus(j).slack) os << ", shape=doublecircle";
    os << "];\n";
  }
  for (int e = 0; e < net.L; ++e) {
    const Line& ln = net.line(e);
    bool upgradable = !catalog.options_on(e).empty();
    bool upgraded = false;
    if (a_best) {
      for (int i : catalog.options_on(e)) {
        if ((*a_best)(i)) upgraded = true;
      }
    }
    os << "  b" << ln.from << " -- b" << ln.to << " [label=\"" << ln.id << "\"";
    if (bad_lines.count(e)) os << ", color=gray25";
    if (upgradable) os << ", penwidth=" << (upgraded ? 4 : 2);
    if (upgraded) os << ", color=black, style=bold";
    os << "];\n";
  }
  os << "}\n";
}

}  // namespace gridplan
