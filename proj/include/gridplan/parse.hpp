#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridplan/netmodel.hpp"

namespace gridplan {

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParsedInput {
  Network net;
  UpgradeCatalog catalog;
  std::vector<Scenario> scenarios;
};

/// Parses and validates the solver input document. All type invariants are
/// checked; violations raise ParseError with the offending JSON path. When a
/// top-level "bases" object is present, quantities are read as SI values and
/// normalized to per-unit.
ParsedInput parse_input_string(const std::string& text);
ParsedInput parse_input_file(const std::string& path);

}  // namespace gridplan
