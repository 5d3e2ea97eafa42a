#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sca/model.hpp"

namespace sca {

struct SourceSpan {
  int line = 1;    // 1-based
  int column = 1;  // 1-based
  int length = 1;

  bool operator==(const SourceSpan&) const = default;
};

struct ParseError {
  SourceSpan span;
  std::string expected;
  std::string found;

  std::string to_string() const;
};

struct ParseResult {
  std::optional<Model> model;
  std::vector<ParseError> errors;
  std::vector<Diagnostic> warnings;

  bool ok() const { return model.has_value() && errors.empty(); }
};

struct ExprParseResult {
  ExprPtr expr;
  std::optional<ParseError> error;

  bool ok() const { return expr != nullptr; }
};

// Parses the native .sdm model format. One statement per line, `#` comments.
// Never throws on malformed input: all problems come back as ParseErrors,
// with statement-level recovery so one pass reports everything it can.
// A returned model passed validate() with no errors.
ParseResult parse_model(const std::string& text);

ExprParseResult parse_expression(const std::string& text);

// Canonical text form; parse_model(serialize_model(m)) is structurally
// equal to m for any valid model. Numbers print shortest-round-trip.
std::string serialize_model(const Model& model);

std::string serialize_expression(const ExprPtr& expr);

std::string format_number(double value);

}  // namespace sca
