#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sca/simulator.hpp"

namespace sca {

// Numeric evidence behind a parameter-vs-control-input decision.
// d_xdot_dz[i]   = max over samples of |d xdot_i / dz|
// porc_terms[i][j] = max over samples of the scale-normalised mixed partial
//                  |d^2 xdot_i / (dz dx_j)| / max(1, |d xdot_i / dx_j|)
struct PorcEvidence {
  std::string exo;
  std::map<std::string, double> d_xdot_dz;
  std::map<std::string, std::map<std::string, double>> porc_terms;
  int samples_used = 0;
  bool agreement = true;

  double max_d_xdot_dz() const;
  double max_porc_term() const;

  bool operator==(const PorcEvidence&) const = default;
};

enum class ExoVerdict { ControlInput, Parameter, Inert, Undetermined };

std::string_view verdict_name(ExoVerdict v);

struct ExoClassification {
  std::string exo;
  ExoVerdict verdict = ExoVerdict::Undetermined;
  PorcEvidence evidence;

  bool operator==(const ExoClassification&) const = default;
};

struct ClassifyOptions {
  int samples = 16;        // baseline state plus samples-1 scaled states
  std::uint64_t seed = 42;
  double tau_zero = 1e-7;
  double tau_sig = 1e-4;
};

struct Jacobian {
  std::vector<std::string> stocks;  // row/column order, sorted by name
  std::vector<std::vector<double>> d;  // d[i][j] = d xdot_i / d x_j
};

class SampleRejected : public std::runtime_error {
 public:
  explicit SampleRejected(std::string message)
      : std::runtime_error(std::move(message)) {}
};

// Central-difference Jacobian of the stock derivatives, step
// h_j = eps * max(1, |x_j|) with eps = 1e-6.
Jacobian jacobian(const Model& expanded, const StateVector& state,
                  const std::map<std::string, double>& exo_values);

// The mixed-partial probe for one exogenous variable over explicit samples.
// Throws SampleRejected if a sample straddles a non-differentiable kink.
PorcEvidence porc(const Model& expanded, const std::string& exo,
                  const std::vector<StateVector>& samples,
                  const ClassifyOptions& opts = {});

// Step 1 of the workflow: expands the model internally, draws sample states
// (baseline plus stocks scaled by factors uniform in [0.5, 2.0], seeded),
// and classifies every exogenous variable. Deterministic for a fixed seed.
std::vector<ExoClassification> classify_exogenous(
    const Model& model, const ClassifyOptions& opts = {});

}  // namespace sca
