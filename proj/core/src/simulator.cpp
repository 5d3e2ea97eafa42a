#include "sca/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <queue>
#include <set>

namespace sca {

double schedule_value(const Schedule& s, double t) {
  if (const auto* c = std::get_if<double>(&s)) return *c;
  const auto& step = std::get<StepSchedule>(s);
  return t < step.t0 ? step.before : step.after;
}

namespace {

struct DelaySpec {
  std::size_t aux_index;
  Builtin fn;
  ExprPtr input;
  ExprPtr time_expr;
  double time_value = 0.0;
  int order = 1;
  std::vector<std::string> stage_names;
};

std::string unique_name(const std::set<std::string>& taken,
                        const std::string& base) {
  std::string candidate = base;
  while (taken.count(candidate)) candidate += "_";
  return candidate;
}

// Resolves the steady-state value of a variable at t=0, following
// auxiliaries recursively. Delay-alias auxiliaries report the steady output
// of their delay (== the input's value). Cycles through delays fall back to
// zero with a warning.
struct InitialResolver {
  const Model& model;
  const std::vector<DelaySpec>& delays;
  std::map<std::string, double> memo;
  std::set<std::string> in_progress;
  bool circular = false;

  double var_value(const std::string& name) {
    if (auto it = memo.find(name); it != memo.end()) return it->second;
    if (const auto* e = model.find_exo(name)) return memo[name] = e->value;
    if (in_progress.count(name)) {
      circular = true;
      return 0.0;
    }
    in_progress.insert(name);
    double v = 0.0;
    if (const auto* s = model.find_stock(name)) {
      v = expr_value(s->initial);
    } else if (const auto* a = model.find_aux(name)) {
      if (const auto* c = std::get_if<CallNode>(&a->definition->node);
          c && is_delay_builtin(c->fn)) {
        v = expr_value(c->args[0]);  // steady-state pass-through
      } else {
        v = expr_value(a->definition);
      }
    }
    in_progress.erase(name);
    return memo[name] = v;
  }

  double expr_value(const ExprPtr& expr) {
    std::map<std::string, double> env;
    for (const auto& name : free_vars(expr)) env[name] = var_value(name);
    return eval(expr, env, table_env(model));
  }
};

}  // namespace

ExpansionResult expand_delays_ex(const Model& model) {
  ExpansionResult result{model, {}};
  Model& out = result.model;

  std::vector<DelaySpec> delays;
  for (std::size_t i = 0; i < out.auxes.size(); ++i) {
    const auto* c = std::get_if<CallNode>(&out.auxes[i].definition->node);
    if (!c || !is_delay_builtin(c->fn)) continue;
    DelaySpec d;
    d.aux_index = i;
    d.fn = c->fn;
    d.input = c->args[0];
    d.time_expr = c->args[1];
    d.time_value = eval_constant(d.time_expr, out);
    d.order = delay_order(c->fn);
    delays.push_back(std::move(d));
  }
  if (delays.empty()) return result;

  std::set<std::string> taken;
  for (const auto& s : out.stocks) taken.insert(s.name);
  for (const auto& a : out.auxes) taken.insert(a.name);
  for (const auto& e : out.exos) taken.insert(e.name);
  for (const auto& t : out.tables) taken.insert(t.name);

  for (auto& d : delays) {
    const std::string& base = out.auxes[d.aux_index].name;
    for (int k = 1; k <= d.order; ++k) {
      std::string name = unique_name(taken, base + "__d" + std::to_string(k));
      taken.insert(name);
      d.stage_names.push_back(name);
    }
  }

  // Steady-state initial values come from the input expressions evaluated at
  // t=0 against the *original* model (aliases resolve through the resolver).
  InitialResolver resolver{model, delays, {}, {}, false};
  std::map<std::string, double> input_values;
  for (const auto& d : delays) {
    input_values[out.auxes[d.aux_index].name] = resolver.expr_value(d.input);
  }
  if (resolver.circular) {
    result.warnings.push_back(
        {Severity::Warning, DiagCode::DelayInitCircular, "",
         "delay inputs form a cycle; hidden stocks initialised from a "
         "zero-seeded pass"});
  }

  bool smooth_output;
  for (const auto& d : delays) {
    const std::string alias = out.auxes[d.aux_index].name;
    double v0 = input_values[alias];
    int n = d.order;
    ExprPtr stage_time =
        n == 1 ? d.time_expr
               : make_binary(BinaryOp::Div, d.time_expr, make_number(n));
    double stage_time_value = d.time_value / n;
    smooth_output = d.fn == Builtin::Smth1 || d.fn == Builtin::Smth3;

    for (int k = 0; k < n; ++k) {
      Stock stage;
      stage.name = d.stage_names[k];
      stage.hidden = true;
      if (smooth_output) {
        // value stage: s_k' = (prev - s_k) / (T/n)
        ExprPtr prev = k == 0 ? d.input : make_var(d.stage_names[k - 1]);
        stage.inflow = make_binary(BinaryOp::Div, prev, stage_time);
        stage.outflow =
            make_binary(BinaryOp::Div, make_var(stage.name), stage_time);
        stage.initial = make_number(v0);
      } else {
        // material stage: L_k' = rate_{k-1} - L_k / (T/n)
        ExprPtr rate_in =
            k == 0 ? d.input
                   : make_binary(BinaryOp::Div, make_var(d.stage_names[k - 1]),
                                 stage_time);
        stage.inflow = rate_in;
        stage.outflow =
            make_binary(BinaryOp::Div, make_var(stage.name), stage_time);
        stage.initial = make_number(v0 * stage_time_value);
      }
      out.stocks.push_back(std::move(stage));
    }

    const std::string& last = d.stage_names.back();
    out.auxes[d.aux_index].definition =
        smooth_output ? make_var(last)
                      : make_binary(BinaryOp::Div, make_var(last), stage_time);
    out.delay_aliases[alias] = last;
  }
  return result;
}

Model expand_delays(const Model& model) {
  return expand_delays_ex(model).model;
}

StateVector initial_state(const Model& expanded) {
  StateVector state;
  for (const auto& s : expanded.stocks) {
    state[s.name] = eval_constant(s.initial, expanded);
  }
  return state;
}

namespace {

// Deterministic topological order of auxiliaries (ties broken by name).
std::vector<const Aux*> aux_topo_order(const Model& model) {
  std::map<std::string, const Aux*> by_name;
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& a : model.auxes) {
    by_name[a.name] = &a;
    indegree[a.name] = 0;
  }
  for (const auto& a : model.auxes) {
    for (const auto& v : free_vars(a.definition)) {
      if (by_name.count(v)) {
        ++indegree[a.name];
        dependents[v].push_back(a.name);
      }
    }
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>>
      ready;
  for (const auto& [name, deg] : indegree) {
    if (deg == 0) ready.push(name);
  }
  std::vector<const Aux*> order;
  while (!ready.empty()) {
    auto name = ready.top();
    ready.pop();
    order.push_back(by_name[name]);
    for (const auto& dep : dependents[name]) {
      if (--indegree[dep] == 0) ready.push(dep);
    }
  }
  if (order.size() != model.auxes.size()) {
    throw std::logic_error("auxiliary cycle; model failed validation");
  }
  return order;
}

double eval_for(const std::string& variable, const ExprPtr& expr,
                const std::map<std::string, double>& env,
                const std::map<std::string, Table>& tables) {
  try {
    return eval(expr, env, tables);
  } catch (EvalError& e) {
    if (e.variable.empty()) e.variable = variable;
    throw;
  }
}

}  // namespace

std::map<std::string, double> variable_env(
    const Model& expanded, const StateVector& state,
    const std::map<std::string, double>& exo_values) {
  std::map<std::string, double> env = exo_values;
  for (const auto& [name, value] : state) env[name] = value;
  auto tables = table_env(expanded);
  for (const Aux* a : aux_topo_order(expanded)) {
    env[a->name] = eval_for(a->name, a->definition, env, tables);
  }
  return env;
}

std::map<std::string, double> stock_derivatives(
    const Model& expanded, const StateVector& state,
    const std::map<std::string, double>& exo_values) {
  if (state.size() != expanded.stocks.size()) {
    throw std::invalid_argument(
        "state vector does not match the expanded model's stocks");
  }
  auto env = variable_env(expanded, state, exo_values);
  auto tables = table_env(expanded);
  std::map<std::string, double> derivatives;
  for (const auto& s : expanded.stocks) {
    double in =
        s.inflow ? eval_for(s.name, s.inflow, env, tables) : 0.0;
    double out =
        s.outflow ? eval_for(s.name, s.outflow, env, tables) : 0.0;
    derivatives[s.name] = in - out;
  }
  return derivatives;
}

Trajectory simulate(const Model& model, const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (!(cfg.horizon >= cfg.dt)) {
    throw std::invalid_argument("horizon must be >= dt");
  }
  Model expanded = expand_delays(model);
  for (const auto& [name, sched] : cfg.overrides) {
    (void)sched;
    if (!expanded.find_exo(name)) {
      throw std::invalid_argument("override references unknown exo '" + name +
                                  "'");
    }
  }

  auto exo_at = [&](double t) {
    auto env = exo_env(expanded);
    for (const auto& [name, sched] : cfg.overrides) {
      env[name] = schedule_value(sched, t);
    }
    return env;
  };

  StateVector state;
  {
    // Initials honour overrides active at t=0 for plain exo references.
    Model init_view = expanded;
    auto env0 = exo_at(0.0);
    for (auto& e : init_view.exos) e.value = env0[e.name];
    state = initial_state(init_view);
  }

  auto steps = static_cast<long>(std::llround(cfg.horizon / cfg.dt));
  if (steps < 1) steps = 1;

  Trajectory traj;
  traj.times.reserve(steps + 1);

  auto record = [&](double t, const std::map<std::string, double>& env) {
    traj.times.push_back(t);
    for (const auto& [name, value] : env) {
      if (!std::isfinite(value)) throw NonFiniteAbort(t, name);
      traj.values[name].push_back(value);
    }
  };

  for (long k = 0; k <= steps; ++k) {
    double t = k * cfg.dt;
    auto exos = exo_at(t);
    try {
      auto env = variable_env(expanded, state, exos);
      record(t, env);
      if (k == steps) break;
      auto d = stock_derivatives(expanded, state, exos);
      for (auto& [name, value] : state) {
        value += cfg.dt * d[name];
        if (!std::isfinite(value)) throw NonFiniteAbort(t + cfg.dt, name);
      }
    } catch (const EvalError& e) {
      if (e.kind() == EvalError::Kind::NonFiniteResult) {
        throw NonFiniteAbort(t, e.variable);
      }
      throw;
    }
  }
  return traj;
}

std::string trajectory_to_csv(const Trajectory& trajectory) {
  std::string out = "time";
  for (const auto& [name, series] : trajectory.values) {
    (void)series;
    out += ",";
    out += name;
  }
  out += "\n";
  char buf[64];
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g", trajectory.times[i]);
    out += buf;
    for (const auto& [name, series] : trajectory.values) {
      (void)name;
      std::snprintf(buf, sizeof(buf), "%.12g", series[i]);
      out += ",";
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace sca
