#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sca/expr.hpp"

namespace sca {

enum class OutOfRange { Clamp, Extrapolate };

struct Table {
  std::string name;
  std::vector<std::pair<double, double>> points;  // x strictly increasing
  OutOfRange policy = OutOfRange::Clamp;

  bool operator==(const Table& other) const;
};

struct Stock {
  std::string name;
  ExprPtr initial;
  ExprPtr inflow;   // may be null
  ExprPtr outflow;  // may be null; net rate = inflow - outflow
  bool hidden = false;

  bool operator==(const Stock& other) const;
};

struct Aux {
  std::string name;
  ExprPtr definition;

  bool operator==(const Aux& other) const;
};

struct Exo {
  std::string name;
  double value = 0.0;

  bool operator==(const Exo& other) const = default;
};

struct Model {
  std::string name;
  std::vector<Stock> stocks;
  std::vector<Aux> auxes;
  std::vector<Exo> exos;
  std::vector<Table> tables;

  // Filled by expand_delays: delay-output alias aux -> final hidden stage.
  std::map<std::string, std::string> delay_aliases;

  const Stock* find_stock(std::string_view name) const;
  const Aux* find_aux(std::string_view name) const;
  const Exo* find_exo(std::string_view name) const;
  const Table* find_table(std::string_view name) const;

  bool operator==(const Model& other) const;
};

enum class Severity { Error, Warning };

enum class DiagCode {
  DuplicateName,
  BadIdentifier,
  BuiltinNameCollision,
  UnresolvedReference,
  AlgebraicLoop,
  ConstantAux,
  MissingFlow,
  NonFiniteValue,
  BadTable,
  DelayPlacement,
  DelayArity,
  DelayTimeNotConstant,
  DelayTimeNotPositive,
  InitialNotConstant,
  DelayInitCircular,
};

std::string_view diag_code_name(DiagCode code);

struct Diagnostic {
  Severity severity;
  DiagCode code;
  std::string variable;
  std::string message;
};

// Checks every Model invariant; empty result means the model is valid.
// Warnings (e.g. constant-like auxiliaries) do not make a model invalid.
std::vector<Diagnostic> validate(const Model& model);

bool has_errors(const std::vector<Diagnostic>& diags);

bool is_identifier(std::string_view name);

// Arithmetic evaluation. Rejects DELAY/SMTH calls (those are eliminated by
// expand_delays before anything evaluates). LOOKUP interpolates piecewise
// linearly with out-of-range handling per table policy.
double eval(const ExprPtr& expr, const std::map<std::string, double>& env,
            const std::map<std::string, Table>& tables);

std::map<std::string, Table> table_env(const Model& model);

// Exogenous baseline values; the environment against which initial values
// and delay times are required to be constant-evaluable.
std::map<std::string, double> exo_env(const Model& model);

// eval against exo_env(model); throws EvalError if not constant-evaluable.
double eval_constant(const ExprPtr& expr, const Model& model);

}  // namespace sca
