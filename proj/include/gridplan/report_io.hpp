#pragma once

#include <iosfwd>
#include <string>

#include "gridplan/bnb.hpp"
#include "gridplan/policy.hpp"

namespace gridplan {

/// Schema-stable report document (round-trips through the `report` command).
std::string report_to_json(const bnb::SolveReport& report, const StandardFormProblem& sfp,
                           const std::string& policy_name, const std::string& mode);

/// Human summary of a report JSON document: objective, upgraded line list,
/// bounds trace. Throws ParseError on malformed documents.
void render_report(const std::string& json_text, std::ostream& os);

/// Graphviz export: buses/lines that violate limits under the policy at a = 0
/// are drawn dark, lines with catalog options thick, upgraded lines (per the
/// solution, when given) highlighted.
void write_dot(const Network& net, const UpgradeCatalog& catalog,
               const std::vector<Scenario>& scenarios, const Policy& policy, const IVec* a_best,
               std::ostream& os);

}  // namespace gridplan
