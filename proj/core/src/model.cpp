#include "sca/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

namespace sca {

bool Table::operator==(const Table& other) const {
  return name == other.name && points == other.points &&
         policy == other.policy;
}

bool Stock::operator==(const Stock& other) const {
  return name == other.name && expr_equal(initial, other.initial) &&
         expr_equal(inflow, other.inflow) &&
         expr_equal(outflow, other.outflow) && hidden == other.hidden;
}

bool Aux::operator==(const Aux& other) const {
  return name == other.name && expr_equal(definition, other.definition);
}

const Stock* Model::find_stock(std::string_view name) const {
  for (const auto& s : stocks) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Aux* Model::find_aux(std::string_view name) const {
  for (const auto& a : auxes) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const Exo* Model::find_exo(std::string_view name) const {
  for (const auto& e : exos) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const Table* Model::find_table(std::string_view name) const {
  for (const auto& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

bool Model::operator==(const Model& other) const {
  return name == other.name && stocks == other.stocks &&
         auxes == other.auxes && exos == other.exos &&
         tables == other.tables && delay_aliases == other.delay_aliases;
}

std::string_view diag_code_name(DiagCode code) {
  switch (code) {
    case DiagCode::DuplicateName: return "DuplicateName";
    case DiagCode::BadIdentifier: return "BadIdentifier";
    case DiagCode::BuiltinNameCollision: return "BuiltinNameCollision";
    case DiagCode::UnresolvedReference: return "UnresolvedReference";
    case DiagCode::AlgebraicLoop: return "AlgebraicLoop";
    case DiagCode::ConstantAux: return "ConstantAux";
    case DiagCode::MissingFlow: return "MissingFlow";
    case DiagCode::NonFiniteValue: return "NonFiniteValue";
    case DiagCode::BadTable: return "BadTable";
    case DiagCode::DelayPlacement: return "DelayPlacement";
    case DiagCode::DelayArity: return "DelayArity";
    case DiagCode::DelayTimeNotConstant: return "DelayTimeNotConstant";
    case DiagCode::DelayTimeNotPositive: return "DelayTimeNotPositive";
    case DiagCode::InitialNotConstant: return "InitialNotConstant";
    case DiagCode::DelayInitCircular: return "DelayInitCircular";
  }
  return "Unknown";
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Severity::Error;
  });
}

bool is_identifier(std::string_view name) {
  if (name.empty()) return false;
  auto head = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  };
  auto tail = [&](char c) { return head(c) || (c >= '0' && c <= '9'); };
  if (!head(name[0])) return false;
  return std::all_of(name.begin() + 1, name.end(), tail);
}

namespace {

double lookup_value(const Table& table, double x) {
  const auto& pts = table.points;
  // exact at every knot
  for (const auto& [px, py] : pts) {
    if (x == px) return py;
  }
  if (x < pts.front().first) {
    if (table.policy == OutOfRange::Clamp) return pts.front().second;
    const auto& [x0, y0] = pts[0];
    const auto& [x1, y1] = pts[1];
    return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
  }
  if (x > pts.back().first) {
    if (table.policy == OutOfRange::Clamp) return pts.back().second;
    const auto& [x0, y0] = pts[pts.size() - 2];
    const auto& [x1, y1] = pts[pts.size() - 1];
    return y1 + (x - x1) * (y1 - y0) / (x1 - x0);
  }
  auto it = std::upper_bound(
      pts.begin(), pts.end(), x,
      [](double v, const std::pair<double, double>& p) { return v < p.first; });
  const auto& [x1, y1] = *it;
  const auto& [x0, y0] = *(it - 1);
  return y0 + (x - x0) * (y1 - y0) / (x1 - x0);
}

bool is_integer(double v) { return std::isfinite(v) && v == std::floor(v); }

double eval_node(const ExprPtr& expr, const std::map<std::string, double>& env,
                 const std::map<std::string, Table>& tables) {
  if (const auto* n = std::get_if<NumberNode>(&expr->node)) {
    return n->value;
  }
  if (const auto* v = std::get_if<VarNode>(&expr->node)) {
    auto it = env.find(v->name);
    if (it == env.end()) {
      throw EvalError(EvalError::Kind::UnboundVariable,
                      "unbound variable '" + v->name + "'");
    }
    return it->second;
  }
  if (const auto* g = std::get_if<NegNode>(&expr->node)) {
    return -eval_node(g->operand, env, tables);
  }
  if (const auto* b = std::get_if<BinaryNode>(&expr->node)) {
    double l = eval_node(b->lhs, env, tables);
    double r = eval_node(b->rhs, env, tables);
    switch (b->op) {
      case BinaryOp::Add: return l + r;
      case BinaryOp::Sub: return l - r;
      case BinaryOp::Mul: return l * r;
      case BinaryOp::Div:
        if (r == 0.0) {
          throw EvalError(EvalError::Kind::DivByZero, "division by zero");
        }
        return l / r;
      case BinaryOp::Pow:
        if (l < 0.0 && !is_integer(r)) {
          throw EvalError(EvalError::Kind::PowDomain,
                          "negative base with non-integer exponent");
        }
        return std::pow(l, r);
    }
    throw std::logic_error("unreachable binary op");
  }
  const auto& c = std::get<CallNode>(expr->node);
  if (is_delay_builtin(c.fn)) {
    throw EvalError(EvalError::Kind::DelayPresent,
                    std::string(builtin_name(c.fn)) +
                        " call present; expand delays before evaluating");
  }
  switch (c.fn) {
    case Builtin::Min:
      return std::min(eval_node(c.args[0], env, tables),
                      eval_node(c.args[1], env, tables));
    case Builtin::Max:
      return std::max(eval_node(c.args[0], env, tables),
                      eval_node(c.args[1], env, tables));
    case Builtin::Exp:
      return std::exp(eval_node(c.args[0], env, tables));
    case Builtin::Ln: {
      double x = eval_node(c.args[0], env, tables);
      if (x <= 0.0) {
        throw EvalError(EvalError::Kind::LnDomain,
                        "LN of non-positive value");
      }
      return std::log(x);
    }
    case Builtin::Abs:
      return std::fabs(eval_node(c.args[0], env, tables));
    case Builtin::Lookup: {
      auto it = tables.find(c.table);
      if (it == tables.end()) {
        throw EvalError(EvalError::Kind::UnknownTable,
                        "unknown table '" + c.table + "'");
      }
      return lookup_value(it->second, eval_node(c.args[0], env, tables));
    }
    default:
      throw std::logic_error("unreachable builtin");
  }
}

}  // namespace

double eval(const ExprPtr& expr, const std::map<std::string, double>& env,
            const std::map<std::string, Table>& tables) {
  double v = eval_node(expr, env, tables);
  if (!std::isfinite(v)) {
    throw EvalError(EvalError::Kind::NonFiniteResult,
                    "expression evaluated to a non-finite value");
  }
  return v;
}

std::map<std::string, Table> table_env(const Model& model) {
  std::map<std::string, Table> out;
  for (const auto& t : model.tables) out.emplace(t.name, t);
  return out;
}

std::map<std::string, double> exo_env(const Model& model) {
  std::map<std::string, double> env;
  for (const auto& e : model.exos) env[e.name] = e.value;
  return env;
}

double eval_constant(const ExprPtr& expr, const Model& model) {
  return eval(expr, exo_env(model), table_env(model));
}

namespace {

struct Validator {
  const Model& model;
  std::vector<Diagnostic> diags;

  void error(DiagCode code, const std::string& var, std::string msg) {
    diags.push_back({Severity::Error, code, var, std::move(msg)});
  }
  void warning(DiagCode code, const std::string& var, std::string msg) {
    diags.push_back({Severity::Warning, code, var, std::move(msg)});
  }

  void check_names() {
    std::set<std::string> seen;
    auto check_one = [&](const std::string& name, const char* what) {
      if (!is_identifier(name)) {
        error(DiagCode::BadIdentifier, name,
              std::string(what) + " name is not a valid identifier");
      } else if (builtin_from_name(name)) {
        error(DiagCode::BuiltinNameCollision, name,
              "name collides with builtin " + name);
      }
      if (!seen.insert(name).second) {
        error(DiagCode::DuplicateName, name, "duplicate name '" + name + "'");
      }
    };
    for (const auto& s : model.stocks) check_one(s.name, "stock");
    for (const auto& a : model.auxes) check_one(a.name, "auxiliary");
    for (const auto& e : model.exos) check_one(e.name, "exogenous");
    for (const auto& t : model.tables) check_one(t.name, "table");
  }

  bool resolves(const std::string& name) const {
    return model.find_stock(name) || model.find_aux(name) ||
           model.find_exo(name);
  }

  void check_expr_refs(const ExprPtr& expr, const std::string& owner) {
    if (!expr) return;
    for (const auto& v : free_vars(expr)) {
      if (!resolves(v)) {
        error(DiagCode::UnresolvedReference, owner,
              "reference to undefined variable '" + v + "' in '" + owner +
                  "'");
      }
    }
    check_lookup_tables(expr, owner);
  }

  void check_lookup_tables(const ExprPtr& expr, const std::string& owner) {
    if (!expr) return;
    if (const auto* g = std::get_if<NegNode>(&expr->node)) {
      check_lookup_tables(g->operand, owner);
    } else if (const auto* b = std::get_if<BinaryNode>(&expr->node)) {
      check_lookup_tables(b->lhs, owner);
      check_lookup_tables(b->rhs, owner);
    } else if (const auto* c = std::get_if<CallNode>(&expr->node)) {
      if (c->fn == Builtin::Lookup && !model.find_table(c->table)) {
        error(DiagCode::UnresolvedReference, owner,
              "LOOKUP references undefined table '" + c->table + "' in '" +
                  owner + "'");
      }
      for (const auto& arg : c->args) check_lookup_tables(arg, owner);
    }
  }

  // Delay calls may only form the entire right-hand side of an auxiliary.
  void check_delay_placement(const ExprPtr& expr, const std::string& owner) {
    if (contains_delay_call(expr)) {
      error(DiagCode::DelayPlacement, owner,
            "delay/smooth call must be the entire right-hand side of an "
            "auxiliary definition");
    }
  }

  void check_delay_aux(const Aux& aux) {
    const auto* c = std::get_if<CallNode>(&aux.definition->node);
    if (!c || !is_delay_builtin(c->fn)) {
      check_delay_placement(aux.definition, aux.name);
      return;
    }
    if (c->args.size() != 2) {
      error(DiagCode::DelayArity, aux.name,
            std::string(builtin_name(c->fn)) + " takes (input, delay-time)");
      return;
    }
    if (contains_delay_call(c->args[0]) || contains_delay_call(c->args[1])) {
      error(DiagCode::DelayPlacement, aux.name,
            "nested delay calls must go through intermediate auxiliaries");
      return;
    }
    try {
      double t = eval_constant(c->args[1], model);
      if (!(t > 0.0)) {
        error(DiagCode::DelayTimeNotPositive, aux.name,
              "delay time must be > 0");
      }
    } catch (const EvalError&) {
      error(DiagCode::DelayTimeNotConstant, aux.name,
            "delay time must be constant-evaluable");
    }
  }

  void check_stocks() {
    for (const auto& s : model.stocks) {
      if (!s.inflow && !s.outflow) {
        error(DiagCode::MissingFlow, s.name,
              "stock needs at least one of inflow/outflow");
      }
      if (s.initial) {
        try {
          (void)eval_constant(s.initial, model);
        } catch (const EvalError&) {
          error(DiagCode::InitialNotConstant, s.name,
                "initial value must be constant-evaluable");
        }
        check_expr_refs(s.initial, s.name);
        check_delay_placement(s.initial, s.name);
      } else {
        error(DiagCode::InitialNotConstant, s.name, "missing initial value");
      }
      for (const auto& flow : {s.inflow, s.outflow}) {
        if (!flow) continue;
        check_expr_refs(flow, s.name);
        check_delay_placement(flow, s.name);
      }
    }
  }

  void check_auxes() {
    for (const auto& a : model.auxes) {
      if (!a.definition) {
        error(DiagCode::UnresolvedReference, a.name, "missing definition");
        continue;
      }
      check_expr_refs(a.definition, a.name);
      check_delay_aux(a);
      if (free_vars(a.definition).empty()) {
        warning(DiagCode::ConstantAux, a.name,
                "auxiliary '" + a.name +
                    "' references no variables; candidate exogenous");
      }
    }
  }

  void check_exos() {
    for (const auto& e : model.exos) {
      if (!std::isfinite(e.value)) {
        error(DiagCode::NonFiniteValue, e.name,
              "exogenous value must be finite");
      }
    }
  }

  void check_tables() {
    for (const auto& t : model.tables) {
      if (t.points.size() < 2) {
        error(DiagCode::BadTable, t.name, "table needs at least 2 points");
        continue;
      }
      for (std::size_t i = 0; i < t.points.size(); ++i) {
        if (!std::isfinite(t.points[i].first) ||
            !std::isfinite(t.points[i].second)) {
          error(DiagCode::BadTable, t.name, "table points must be finite");
          break;
        }
        if (i > 0 && !(t.points[i - 1].first < t.points[i].first)) {
          error(DiagCode::BadTable, t.name,
                "table x values must be strictly increasing");
          break;
        }
      }
    }
  }

  // Cycles among auxiliaries with no intervening stock or delay are
  // algebraic loops. Delay-defined auxiliaries contribute no aux->aux edge.
  void check_algebraic_loops() {
    std::map<std::string, std::vector<std::string>> deps;
    for (const auto& a : model.auxes) {
      deps[a.name] = {};
      if (!a.definition) continue;
      if (const auto* c = std::get_if<CallNode>(&a.definition->node);
          c && is_delay_builtin(c->fn)) {
        continue;
      }
      for (const auto& v : free_vars(a.definition)) {
        if (model.find_aux(v)) deps[a.name].push_back(v);
      }
    }
    // Kahn's algorithm; whatever cannot be ordered sits on a cycle.
    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> dependents;
    for (const auto& [name, ds] : deps) {
      indegree[name] = static_cast<int>(ds.size());
      for (const auto& d : ds) dependents[d].push_back(name);
    }
    std::priority_queue<std::string, std::vector<std::string>,
                        std::greater<>> ready;
    for (const auto& [name, deg] : indegree) {
      if (deg == 0) ready.push(name);
    }
    std::size_t ordered = 0;
    while (!ready.empty()) {
      auto n = ready.top();
      ready.pop();
      ++ordered;
      for (const auto& dep : dependents[n]) {
        if (--indegree[dep] == 0) ready.push(dep);
      }
    }
    if (ordered < deps.size()) {
      std::vector<std::string> cycle_members;
      for (const auto& [name, deg] : indegree) {
        if (deg > 0) cycle_members.push_back(name);
      }
      std::string joined;
      for (const auto& n : cycle_members) {
        if (!joined.empty()) joined += ",";
        joined += n;
      }
      error(DiagCode::AlgebraicLoop,
            cycle_members.empty() ? "" : cycle_members.front(),
            "algebraic loop among auxiliaries {" + joined + "}");
    }
  }
};

}  // namespace

std::vector<Diagnostic> validate(const Model& model) {
  Validator v{model, {}};
  v.check_names();
  v.check_stocks();
  v.check_auxes();
  v.check_exos();
  v.check_tables();
  v.check_algebraic_loops();
  return std::move(v.diags);
}

}  // namespace sca
