#include "sca/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sca {

double PorcEvidence::max_d_xdot_dz() const {
  double m = 0.0;
  for (const auto& [name, v] : d_xdot_dz) {
    (void)name;
    m = std::max(m, v);
  }
  return m;
}

double PorcEvidence::max_porc_term() const {
  double m = 0.0;
  for (const auto& [i, row] : porc_terms) {
    (void)i;
    for (const auto& [j, v] : row) {
      (void)j;
      m = std::max(m, v);
    }
  }
  return m;
}

std::string_view verdict_name(ExoVerdict v) {
  switch (v) {
    case ExoVerdict::ControlInput: return "ControlInput";
    case ExoVerdict::Parameter: return "Parameter";
    case ExoVerdict::Inert: return "Inert";
    case ExoVerdict::Undetermined: return "Undetermined";
  }
  return "Unknown";
}

namespace {

constexpr double kJacobianEps = 1e-6;  // contract step for jacobian()
constexpr double kProbeEps = 1e-4;     // step for z and for porc's inner use

std::vector<std::string> sorted_stock_names(const Model& expanded) {
  std::vector<std::string> names;
  names.reserve(expanded.stocks.size());
  for (const auto& s : expanded.stocks) names.push_back(s.name);
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<double> deriv_vector(const Model& expanded,
                                 const std::vector<std::string>& order,
                                 const StateVector& state,
                                 const std::map<std::string, double>& exos) {
  auto d = stock_derivatives(expanded, state, exos);
  std::vector<double> out;
  out.reserve(order.size());
  for (const auto& name : order) out.push_back(d.at(name));
  return out;
}

// Central difference with one-sided fallback when one probe leaves the
// evaluable domain; rethrows when both sides fail.
std::vector<double> diff_quotient(
    const std::function<std::vector<double>(double)>& f, double x0, double h) {
  std::vector<double> fp, fm;
  bool have_p = true, have_m = true;
  try {
    fp = f(x0 + h);
  } catch (const EvalError&) {
    have_p = false;
  }
  try {
    fm = f(x0 - h);
  } catch (const EvalError&) {
    have_m = false;
  }
  if (have_p && have_m) {
    std::vector<double> out(fp.size());
    for (std::size_t i = 0; i < fp.size(); ++i) out[i] = (fp[i] - fm[i]) / (2 * h);
    return out;
  }
  auto f0 = f(x0);
  if (have_p) {
    std::vector<double> out(fp.size());
    for (std::size_t i = 0; i < fp.size(); ++i) out[i] = (fp[i] - f0[i]) / h;
    return out;
  }
  if (have_m) {
    std::vector<double> out(fm.size());
    for (std::size_t i = 0; i < fm.size(); ++i) out[i] = (f0[i] - fm[i]) / h;
    return out;
  }
  throw EvalError(EvalError::Kind::NonFiniteResult,
                  "derivative probe failed on both sides");
}

Jacobian jacobian_with_step(const Model& expanded, const StateVector& state,
                            const std::map<std::string, double>& exos,
                            double eps) {
  Jacobian jac;
  jac.stocks = sorted_stock_names(expanded);
  const std::size_t n = jac.stocks.size();
  jac.d.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    const std::string& xj = jac.stocks[j];
    double x0 = state.at(xj);
    double h = eps * std::max(1.0, std::fabs(x0));
    auto probe = [&](double x) {
      StateVector s = state;
      s[xj] = x;
      return deriv_vector(expanded, jac.stocks, s, exos);
    };
    auto col = diff_quotient(probe, x0, h);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(col[i])) {
        throw EvalError(EvalError::Kind::NonFiniteResult,
                        "non-finite Jacobian entry for '" + xj + "'");
      }
      jac.d[i][j] = col[i];
    }
  }
  return jac;
}

// Second-difference straddle test: a kink between the probes shows up as a
// mismatch between forward and backward one-sided derivatives.
bool straddles_kink(const std::vector<double>& f0,
                    const std::vector<double>& fp,
                    const std::vector<double>& fm, double h, double tau_sig) {
  for (std::size_t i = 0; i < f0.size(); ++i) {
    double fwd = (fp[i] - f0[i]) / h;
    double bwd = (f0[i] - fm[i]) / h;
    double scale = std::max({1.0, std::fabs(fwd), std::fabs(bwd)});
    if (std::fabs(fwd - bwd) > 10.0 * tau_sig * scale) return true;
  }
  return false;
}

struct SampleProbe {
  std::map<std::string, double> d_xdot_dz;
  std::map<std::string, std::map<std::string, double>> porc_terms;
  ExoVerdict verdict = ExoVerdict::Undetermined;
};

ExoVerdict verdict_from(double max_porc, double max_dxdz,
                        const ClassifyOptions& opts) {
  if (max_porc <= opts.tau_zero && max_dxdz >= opts.tau_sig) {
    return ExoVerdict::ControlInput;
  }
  if (max_porc >= opts.tau_sig) return ExoVerdict::Parameter;
  if (max_porc <= opts.tau_zero && max_dxdz <= opts.tau_zero) {
    return ExoVerdict::Inert;
  }
  return ExoVerdict::Undetermined;
}

SampleProbe probe_sample(const Model& expanded, const std::string& exo,
                         const StateVector& state, const ClassifyOptions& opts,
                         bool reject_kinks = true) {
  const auto order = sorted_stock_names(expanded);
  const std::size_t n = order.size();
  auto base_exos = exo_env(expanded);
  const double z0 = base_exos.at(exo);
  const double hz = kProbeEps * std::max(1.0, std::fabs(z0));

  auto f_at_z = [&](double z) {
    auto exos = base_exos;
    exos[exo] = z;
    return deriv_vector(expanded, order, state, exos);
  };
  auto jac_at_z = [&](double z) {
    auto exos = base_exos;
    exos[exo] = z;
    return jacobian_with_step(expanded, state, exos, kProbeEps);
  };

  std::vector<double> f0, fp, fm;
  try {
    f0 = f_at_z(z0);
    fp = f_at_z(z0 + hz);
    fm = f_at_z(z0 - hz);
  } catch (const EvalError& e) {
    throw SampleRejected("probe for '" + exo + "' left the evaluable domain: " +
                         e.what());
  }
  if (reject_kinks && straddles_kink(f0, fp, fm, hz, opts.tau_sig)) {
    throw SampleRejected("sample straddles a kink along '" + exo + "'");
  }

  // Straddle test in each state direction with the same probe step the
  // inner Jacobians use.
  for (std::size_t j = 0; j < n; ++j) {
    const std::string& xj = order[j];
    double x0 = state.at(xj);
    double hx = kProbeEps * std::max(1.0, std::fabs(x0));
    auto probe = [&](double x) {
      StateVector s = state;
      s[xj] = x;
      return deriv_vector(expanded, order, s, base_exos);
    };
    std::vector<double> gp, gm;
    try {
      gp = probe(x0 + hx);
      gm = probe(x0 - hx);
    } catch (const EvalError& e) {
      throw SampleRejected("probe around stock '" + xj +
                           "' left the evaluable domain: " + e.what());
    }
    if (reject_kinks && straddles_kink(f0, gp, gm, hx, opts.tau_sig)) {
      throw SampleRejected("sample straddles a kink along stock '" + xj + "'");
    }
  }

  SampleProbe result;
  for (std::size_t i = 0; i < n; ++i) {
    result.d_xdot_dz[order[i]] = std::fabs((fp[i] - fm[i]) / (2 * hz));
  }

  Jacobian jp, jm, j0;
  try {
    jp = jac_at_z(z0 + hz);
    jm = jac_at_z(z0 - hz);
    j0 = jacobian_with_step(expanded, state, base_exos, kProbeEps);
  } catch (const EvalError& e) {
    throw SampleRejected("Jacobian probe for '" + exo + "' failed: " +
                         e.what());
  }
  double max_porc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = result.porc_terms[order[i]];
    for (std::size_t j = 0; j < n; ++j) {
      double mixed = (jp.d[i][j] - jm.d[i][j]) / (2 * hz);
      double normalised =
          std::fabs(mixed) / std::max(1.0, std::fabs(j0.d[i][j]));
      row[order[j]] = normalised;
      max_porc = std::max(max_porc, normalised);
    }
  }
  double max_dxdz = 0.0;
  for (const auto& [name, v] : result.d_xdot_dz) {
    (void)name;
    max_dxdz = std::max(max_dxdz, v);
  }
  result.verdict = verdict_from(max_porc, max_dxdz, opts);
  return result;
}

void merge_probe(PorcEvidence& ev, const SampleProbe& probe) {
  for (const auto& [name, v] : probe.d_xdot_dz) {
    auto [it, inserted] = ev.d_xdot_dz.emplace(name, v);
    if (!inserted) it->second = std::max(it->second, v);
  }
  for (const auto& [i, row] : probe.porc_terms) {
    for (const auto& [j, v] : row) {
      auto [it, inserted] = ev.porc_terms[i].emplace(j, v);
      if (!inserted) it->second = std::max(it->second, v);
    }
  }
  ++ev.samples_used;
}

// Exos whose only appearances are inside delay-time arguments: granted
// parameters (they reshape dynamics, never steady-state targets).
std::set<std::string> delay_time_only_exos(const Model& model) {
  std::set<std::string> in_delay_time;
  std::set<std::string> elsewhere;
  auto note = [&](const ExprPtr& e, std::set<std::string>& sink) {
    if (!e) return;
    for (const auto& v : free_vars(e)) sink.insert(v);
  };
  for (const auto& s : model.stocks) {
    note(s.initial, elsewhere);
    note(s.inflow, elsewhere);
    note(s.outflow, elsewhere);
  }
  for (const auto& a : model.auxes) {
    if (const auto* c = std::get_if<CallNode>(&a.definition->node);
        c && is_delay_builtin(c->fn)) {
      note(c->args[0], elsewhere);
      note(c->args[1], in_delay_time);
    } else {
      note(a.definition, elsewhere);
    }
  }
  std::set<std::string> only;
  for (const auto& e : model.exos) {
    if (in_delay_time.count(e.name) && !elsewhere.count(e.name)) {
      only.insert(e.name);
    }
  }
  return only;
}

}  // namespace

Jacobian jacobian(const Model& expanded, const StateVector& state,
                  const std::map<std::string, double>& exo_values) {
  return jacobian_with_step(expanded, state, exo_values, kJacobianEps);
}

PorcEvidence porc(const Model& expanded, const std::string& exo,
                  const std::vector<StateVector>& samples,
                  const ClassifyOptions& opts) {
  if (samples.empty()) throw std::invalid_argument("porc needs >= 1 sample");
  if (!expanded.find_exo(exo)) {
    throw std::invalid_argument("unknown exo '" + exo + "'");
  }
  PorcEvidence ev;
  ev.exo = exo;
  std::optional<ExoVerdict> first;
  for (const auto& state : samples) {
    auto probe = probe_sample(expanded, exo, state, opts);
    merge_probe(ev, probe);
    if (!first) {
      first = probe.verdict;
    } else if (*first != probe.verdict) {
      ev.agreement = false;
    }
  }
  return ev;
}

std::vector<ExoClassification> classify_exogenous(const Model& model,
                                                  const ClassifyOptions& opts) {
  Model expanded = expand_delays(model);
  auto granted_parameters = delay_time_only_exos(model);
  StateVector baseline = initial_state(expanded);

  std::vector<std::string> exo_names;
  for (const auto& e : expanded.exos) exo_names.push_back(e.name);
  std::sort(exo_names.begin(), exo_names.end());

  std::vector<ExoClassification> out;
  for (std::size_t idx = 0; idx < exo_names.size(); ++idx) {
    const std::string& exo = exo_names[idx];
    std::seed_seq seq{opts.seed, static_cast<std::uint64_t>(idx)};
    std::mt19937_64 rng(seq);
    auto uniform = [&rng]() {
      return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    auto draw_state = [&]() {
      StateVector s = baseline;
      for (auto& [name, value] : s) {
        (void)name;
        value *= 0.5 + 1.5 * uniform();
      }
      return s;
    };

    PorcEvidence ev;
    ev.exo = exo;
    std::optional<ExoVerdict> first;
    bool saw_disagreement = false;
    int attempts = 0;
    const int max_attempts = 3 * opts.samples;
    bool baseline_pending = true;
    while (ev.samples_used < opts.samples && attempts < max_attempts) {
      ++attempts;
      StateVector state = baseline_pending ? baseline : draw_state();
      baseline_pending = false;
      try {
        auto probe = probe_sample(expanded, exo, state, opts);
        merge_probe(ev, probe);
        if (!first) {
          first = probe.verdict;
        } else if (*first != probe.verdict) {
          saw_disagreement = true;
        }
      } catch (const SampleRejected&) {
        continue;
      }
    }
    ev.agreement = !saw_disagreement && ev.samples_used == opts.samples;

    ExoClassification cls;
    cls.exo = exo;
    if (ev.samples_used == 0) {
      // Every draw straddled a kink. Record the baseline probe without the
      // straddle guard so the evidence is not empty; the verdict stays open.
      try {
        merge_probe(ev, probe_sample(expanded, exo, baseline, opts,
                                     /*reject_kinks=*/false));
      } catch (const SampleRejected&) {
      }
      ev.agreement = false;
      cls.verdict = ExoVerdict::Undetermined;
    } else if (granted_parameters.count(exo)) {
      cls.verdict = ExoVerdict::Parameter;
    } else if (!ev.agreement) {
      cls.verdict = ExoVerdict::Undetermined;
    } else {
      cls.verdict = verdict_from(ev.max_porc_term(), ev.max_d_xdot_dz(), opts);
    }
    cls.evidence = std::move(ev);
    out.push_back(std::move(cls));
  }
  return out;
}

}  // namespace sca
