#include "gridplan/parse.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gridplan {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ParseError(path + ": " + msg);
}

std::string id_string(const json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  fail(path, "id must be a string or integer");
}

Real number_at(const json& obj, const std::string& key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) fail(path + "." + key, "expected a number");
  Real v = it->get<Real>();
  if (!std::isfinite(v)) fail(path + "." + key, "value must be finite");
  return v;
}

Real number_or(const json& obj, const std::string& key, Real fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return number_at(obj, key, path);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) fail(path, "unknown key '" + key + "'");
  }
}

struct Bases {
  bool present = false;
  Real s = 1.0;  // VA
  Real v = 1.0;  // V
  Real y_base() const { return s / (v * v); }
  Real i_base() const { return s / v; }
};

void apply_limit_pair(Real& lo, Real& hi, const json& obj, const std::string& lo_key,
                      const std::string& hi_key, Real scale, const std::string& path) {
  if (obj.contains(lo_key)) lo = number_at(obj, lo_key, path) / scale;
  if (obj.contains(hi_key)) hi = number_at(obj, hi_key, path) / scale;
}

}  // namespace

ParsedInput parse_input_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("$: document must be a JSON object");
  check_keys(doc,
             {"bases", "buses", "lines", "upgrades", "extra_upgrade_constraints", "scenarios",
              "description"},
             "$");

  Bases bases;
  if (doc.contains("bases")) {
    const json& jb = doc["bases"];
    check_keys(jb, {"s_va", "v_v"}, "$.bases");
    bases.present = true;
    bases.s = number_at(jb, "s_va", "$.bases");
    bases.v = number_at(jb, "v_v", "$.bases");
    if (bases.s <= 0 || bases.v <= 0) fail("$.bases", "base quantities must be positive");
  }

  ParsedInput out;
  Network& net = out.net;

  if (!doc.contains("buses") || !doc["buses"].is_array() || doc["buses"].empty()) {
    fail("$.buses", "at least one bus is required");
  }
  std::map<std::string, int> bus_index;
  int bi = 0;
  for (const json& jb : doc["buses"]) {
    std::string path = "$.buses[" + std::to_string(bi) + "]";
    check_keys(jb, {"id", "v_min", "v_max", "p_min", "p_max", "q_min", "q_max", "slack"}, path);
    Bus bus;
    bus.id = id_string(jb.at("id"), path + ".id");
    if (bus_index.count(bus.id)) fail(path + ".id", "duplicate bus id '" + bus.id + "'");
    bus.v_min = number_at(jb, "v_min", path) / (bases.present ? bases.v : 1.0);
    bus.v_max = number_at(jb, "v_max", path) / (bases.present ? bases.v : 1.0);
    apply_limit_pair(bus.p_min, bus.p_max, jb, "p_min", "p_max", bases.present ? bases.s : 1.0,
                     path);
    apply_limit_pair(bus.q_min, bus.q_max, jb, "q_min", "q_max", bases.present ? bases.s : 1.0,
                     path);
    bus.slack = jb.value("slack", false);
    if (bus.v_min > bus.v_max) fail(path, "v_min > v_max (bus '" + bus.id + "')");
    if (bus.p_min > bus.p_max) fail(path, "p_min > p_max (bus '" + bus.id + "')");
    if (bus.q_min > bus.q_max) fail(path, "q_min > q_max (bus '" + bus.id + "')");
    if (bus.v_min <= 0) fail(path, "v_min must be positive (bus '" + bus.id + "')");
    bool structurally_slack =
        bus.v_min == bus.v_max && !bus.has_p_limits() && !bus.has_q_limits();
    if (bus.slack && !structurally_slack) {
      fail(path, "slack bus '" + bus.id + "' must have v_min == v_max and no power limits");
    }
    bus.slack = structurally_slack;
    bus_index[bus.id] = bi;
    net.buses.push_back(std::move(bus));
    ++bi;
  }
  net.N = static_cast<int>(net.buses.size());

  int n_slack = 0;
  for (int j = 0; j < net.N; ++j) {
    if (net.bus(j).slack) {
      net.slack = j;
      ++n_slack;
    }
  }
  if (n_slack == 0) fail("$.buses", "no slack bus");
  if (n_slack > 1) fail("$.buses", "more than one slack bus");

  std::map<std::string, int> line_index;
  int li = 0;
  for (const json& jl : doc.value("lines", json::array())) {
    std::string path = "$.lines[" + std::to_string(li) + "]";
    check_keys(jl, {"id", "from", "to", "g", "b", "i_max"}, path);
    Line ln;
    ln.id = id_string(jl.at("id"), path + ".id");
    if (line_index.count(ln.id)) fail(path + ".id", "duplicate line id '" + ln.id + "'");
    std::string from = id_string(jl.at("from"), path + ".from");
    std::string to = id_string(jl.at("to"), path + ".to");
    if (!bus_index.count(from)) fail(path + ".from", "unknown bus '" + from + "'");
    if (!bus_index.count(to)) fail(path + ".to", "unknown bus '" + to + "'");
    ln.from = bus_index[from];
    ln.to = bus_index[to];
    if (ln.from == ln.to) fail(path, "self-loop on bus '" + from + "'");
    Real scale_y = bases.present ? bases.y_base() : 1.0;
    ln.y = Complex(number_at(jl, "g", path) / scale_y, number_at(jl, "b", path) / scale_y);
    ln.i_max = number_at(jl, "i_max", path) / (bases.present ? bases.i_base() : 1.0);
    if (std::abs(ln.y) <= 0) fail(path, "line admittance must be nonzero");
    if (ln.i_max <= 0) fail(path, "i_max must be positive");
    line_index[ln.id] = li;
    net.lines.push_back(std::move(ln));
    ++li;
  }
  net.L = static_cast<int>(net.lines.size());
  net.rebuild_adjacency();

  // connectivity
  {
    std::vector<char> seen(static_cast<size_t>(net.N), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int j = stack.back();
      stack.pop_back();
      for (const auto& inc : net.adj[static_cast<size_t>(j)]) {
        if (!seen[static_cast<size_t>(inc.other)]) {
          seen[static_cast<size_t>(inc.other)] = 1;
          stack.push_back(inc.other);
        }
      }
    }
    for (int j = 0; j < net.N; ++j) {
      if (!seen[static_cast<size_t>(j)]) {
        fail("$.lines", "network is not connected (bus '" + net.bus(j).id + "' unreachable)");
      }
    }
  }

  UpgradeCatalog& cat = out.catalog;
  std::map<std::string, int> opt_index;
  int ui = 0;
  for (const json& ju : doc.value("upgrades", json::array())) {
    std::string path = "$.upgrades[" + std::to_string(ui) + "]";
    check_keys(ju, {"id", "line", "dg", "db", "di"}, path);
    UpgradeOption opt;
    opt.id = id_string(ju.at("id"), path + ".id");
    if (opt_index.count(opt.id)) fail(path + ".id", "duplicate upgrade id '" + opt.id + "'");
    std::string line_id = id_string(ju.at("line"), path + ".line");
    if (!line_index.count(line_id)) fail(path + ".line", "unknown line '" + line_id + "'");
    opt.line = line_index[line_id];
    Real scale_y = bases.present ? bases.y_base() : 1.0;
    opt.dy = Complex(number_at(ju, "dg", path) / scale_y, number_at(ju, "db", path) / scale_y);
    opt.di = number_or(ju, "di", 0.0, path) / (bases.present ? bases.i_base() : 1.0);
    if (opt.di < 0) fail(path + ".di", "current limit increment must be >= 0");
    if (std::abs(net.line(opt.line).y + opt.dy) <= 1e-12) {
      fail(path, "upgraded admittance of line '" + line_id + "' would vanish");
    }
    opt_index[opt.id] = ui;
    cat.options.push_back(std::move(opt));
    ++ui;
  }

  std::vector<CombinationRow> extra;
  int ci = 0;
  for (const json& jc : doc.value("extra_upgrade_constraints", json::array())) {
    std::string path = "$.extra_upgrade_constraints[" + std::to_string(ci) + "]";
    check_keys(jc, {"coeffs", "rhs"}, path);
    CombinationRow row;
    if (!jc.contains("coeffs") || !jc["coeffs"].is_object()) {
      fail(path + ".coeffs", "expected an object {upgrade id: coefficient}");
    }
    for (const auto& [key, val] : jc["coeffs"].items()) {
      if (!opt_index.count(key)) fail(path + ".coeffs", "unknown upgrade '" + key + "'");
      if (!val.is_number()) fail(path + ".coeffs." + key, "expected a number");
      row.coeffs.emplace_back(opt_index[key], val.get<Real>());
    }
    row.rhs = number_at(jc, "rhs", path);
    if (row.rhs < 0) fail(path + ".rhs", "rhs must be >= 0 so that a = 0 stays feasible");
    extra.push_back(std::move(row));
    ++ci;
  }
  cat.finalize(net, extra);

  if (!doc.contains("scenarios") || !doc["scenarios"].is_array() || doc["scenarios"].empty()) {
    fail("$.scenarios", "at least one scenario is required");
  }
  int si = 0;
  for (const json& js : doc["scenarios"]) {
    std::string path = "$.scenarios[" + std::to_string(si) + "]";
    check_keys(js, {"id", "bus_overrides"}, path);
    Scenario sc;
    sc.k = si;
    sc.id = js.contains("id") ? id_string(js.at("id"), path + ".id") : std::to_string(si);
    sc.p_min.resize(net.N);
    sc.p_max.resize(net.N);
    sc.q_min.resize(net.N);
    sc.q_max.resize(net.N);
    sc.p_ref = Vec::Zero(net.N);
    sc.q_ref = Vec::Zero(net.N);
    Vec p_ref_raw = Vec::Constant(net.N, std::numeric_limits<Real>::quiet_NaN());
    Vec q_ref_raw = Vec::Constant(net.N, std::numeric_limits<Real>::quiet_NaN());
    for (int j = 0; j < net.N; ++j) {
      sc.p_min(j) = net.bus(j).p_min;
      sc.p_max(j) = net.bus(j).p_max;
      sc.q_min(j) = net.bus(j).q_min;
      sc.q_max(j) = net.bus(j).q_max;
    }
    const json overrides = js.value("bus_overrides", json::object());
    for (const auto& [bus_id, jo] : overrides.items()) {
      std::string bpath = path + ".bus_overrides." + bus_id;
      if (!bus_index.count(bus_id)) fail(bpath, "unknown bus '" + bus_id + "'");
      int j = bus_index[bus_id];
      check_keys(jo, {"p_min", "p_max", "q_min", "q_max", "p_ref", "q_ref"}, bpath);
      if (net.bus(j).slack &&
          (jo.contains("p_min") || jo.contains("p_max") || jo.contains("q_min") ||
           jo.contains("q_max"))) {
        fail(bpath, "cannot set power limits on the slack bus");
      }
      Real ps = bases.present ? bases.s : 1.0;
      apply_limit_pair(sc.p_min(j), sc.p_max(j), jo, "p_min", "p_max", ps, bpath);
      apply_limit_pair(sc.q_min(j), sc.q_max(j), jo, "q_min", "q_max", ps, bpath);
      if (jo.contains("p_ref")) p_ref_raw(j) = number_at(jo, "p_ref", bpath) / ps;
      if (jo.contains("q_ref")) q_ref_raw(j) = number_at(jo, "q_ref", bpath) / ps;
      if (sc.p_min(j) > sc.p_max(j)) fail(bpath, "p_min > p_max");
      if (sc.q_min(j) > sc.q_max(j)) fail(bpath, "q_min > q_max");
    }
    for (int j = 0; j < net.N; ++j) {
      sc.p_ref(j) = std::isnan(p_ref_raw(j)) ? std::clamp(0.0, sc.p_min(j), sc.p_max(j))
                                             : p_ref_raw(j);
      sc.q_ref(j) = std::isnan(q_ref_raw(j)) ? std::clamp(0.0, sc.q_min(j), sc.q_max(j))
                                             : q_ref_raw(j);
      if (net.bus(j).slack) {
        sc.p_ref(j) = 0;
        sc.q_ref(j) = 0;
      }
    }
    out.scenarios.push_back(std::move(sc));
    ++si;
  }

  return out;
}

ParsedInput parse_input_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open input file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_input_string(buf.str());
}

}  // namespace gridplan
