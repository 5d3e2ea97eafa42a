#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sca/model.hpp"

namespace sca {

// Exogenous override: a constant, or a step at t0 (before / after values).
struct StepSchedule {
  double t0 = 0.0;
  double before = 0.0;
  double after = 0.0;
};
using Schedule = std::variant<double, StepSchedule>;

double schedule_value(const Schedule& s, double t);

struct SimConfig {
  double dt = 0.0625;
  double horizon = 10.0;
  std::map<std::string, Schedule> overrides;
};

// Stock name -> value, over the stocks of the expanded model.
using StateVector = std::map<std::string, double>;

struct Trajectory {
  std::vector<double> times;
  std::map<std::string, std::vector<double>> values;
};

class NonFiniteAbort : public std::runtime_error {
 public:
  NonFiniteAbort(double t, std::string variable)
      : std::runtime_error("non-finite value in '" + variable + "' at t=" +
                           std::to_string(t)),
        t(t),
        variable(std::move(variable)) {}

  double t;
  std::string variable;
};

struct ExpansionResult {
  Model model;
  std::vector<Diagnostic> warnings;
};

// Replaces every DELAYn/SMTHn auxiliary with a chain of n hidden stocks plus
// an alias aux for the output. Idempotent; a delay-free model comes back
// structurally equal. Hidden stocks start at the steady state implied by the
// input's initial value (SMTH stages at the input, DELAY stages at
// input * stage-time). Circular initialisation (delays feeding each other's
// inputs) falls back to zero-seeded evaluation and a warning.
Model expand_delays(const Model& model);
ExpansionResult expand_delays_ex(const Model& model);

// Initial state of an expanded model: every stock at its initial value.
StateVector initial_state(const Model& expanded);

// Evaluates auxiliaries in deterministic topological order (ties broken by
// name), then returns inflow - outflow per stock. Model must be expanded.
std::map<std::string, double> stock_derivatives(
    const Model& expanded, const StateVector& state,
    const std::map<std::string, double>& exo_values);

// Full variable environment (exos, stocks, auxiliaries) at a given state.
std::map<std::string, double> variable_env(
    const Model& expanded, const StateVector& state,
    const std::map<std::string, double>& exo_values);

// Fixed-step Euler: S(t+dt) = S(t) + dt * (inflow - outflow). Expands
// delays internally. Records stocks, auxiliaries and exogenous values at
// every step. Throws NonFiniteAbort if any recorded value leaves the
// finite range.
Trajectory simulate(const Model& model, const SimConfig& cfg);

// CSV export: header `time,<var>,...` (names sorted), one row per step,
// %.12g formatting.
std::string trajectory_to_csv(const Trajectory& trajectory);

}  // namespace sca
