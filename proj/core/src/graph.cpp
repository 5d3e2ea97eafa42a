#include "sca/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace sca {

void ControlGraph::add_node(std::string name, NodeKind kind, bool hidden) {
  if (has_node(name)) {
    throw std::invalid_argument("duplicate node '" + name + "'");
  }
  nodes_.push_back({std::move(name), kind, hidden});
}

void ControlGraph::add_edge(const std::string& from, const std::string& to,
                            EdgeStyle style) {
  if (!has_node(from) || !has_node(to)) {
    throw std::invalid_argument("edge references unknown node");
  }
  if (node(to).kind == NodeKind::Input) {
    throw std::invalid_argument("Input nodes must keep in-degree 0");
  }
  if (from == to && node(from).kind != NodeKind::Stock) {
    throw std::invalid_argument("self-loops are permitted on Stock nodes only");
  }
  for (auto& e : edges_) {
    if (e.from == from && e.to == to) {
      if (style == EdgeStyle::Spanning) e.style = EdgeStyle::Spanning;
      return;
    }
  }
  edges_.push_back({from, to, style});
}

bool ControlGraph::has_node(const std::string& name) const {
  return std::any_of(nodes_.begin(), nodes_.end(),
                     [&](const GraphNode& n) { return n.name == name; });
}

const GraphNode& ControlGraph::node(const std::string& name) const {
  for (const auto& n : nodes_) {
    if (n.name == name) return n;
  }
  throw std::out_of_range("no node '" + name + "'");
}

const GraphEdge* ControlGraph::find_edge(const std::string& from,
                                         const std::string& to) const {
  for (const auto& e : edges_) {
    if (e.from == from && e.to == to) return &e;
  }
  return nullptr;
}

std::vector<const GraphEdge*> ControlGraph::in_edges(
    const std::string& name) const {
  std::vector<const GraphEdge*> out;
  for (const auto& e : edges_) {
    if (e.to == name) out.push_back(&e);
  }
  return out;
}

std::vector<const GraphEdge*> ControlGraph::out_edges(
    const std::string& name) const {
  std::vector<const GraphEdge*> out;
  for (const auto& e : edges_) {
    if (e.from == name) out.push_back(&e);
  }
  return out;
}

std::vector<std::string> ControlGraph::node_names(NodeKind kind) const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.kind == kind) out.push_back(n.name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> ControlGraph::non_input_names() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.kind != NodeKind::Input) out.push_back(n.name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ControlGraph::normalize() {
  std::sort(nodes_.begin(), nodes_.end(),
            [](const GraphNode& a, const GraphNode& b) {
              return a.name < b.name;
            });
  std::sort(edges_.begin(), edges_.end(),
            [](const GraphEdge& a, const GraphEdge& b) {
              return std::tie(a.from, a.to) < std::tie(b.from, b.to);
            });
}

std::string_view polarity_name(LoopFinding::Polarity p) {
  switch (p) {
    case LoopFinding::Polarity::Reinforcing: return "Reinforcing";
    case LoopFinding::Polarity::Balancing: return "Balancing";
    case LoopFinding::Polarity::Undetermined: return "Undetermined";
  }
  return "Unknown";
}

namespace {

// Graph-level renaming: the final hidden stage of a delay chain carries the
// alias aux's name, so the alias collapses into its chain.
struct NameMap {
  std::map<std::string, std::string> rename;  // final stage -> alias

  std::string graph_name(const std::string& model_name) const {
    auto it = rename.find(model_name);
    return it == rename.end() ? model_name : it->second;
  }
};

NameMap build_name_map(const Model& model) {
  NameMap nm;
  for (const auto& [alias, last_stage] : model.delay_aliases) {
    nm.rename[last_stage] = alias;
  }
  return nm;
}

// Defining expressions per graph node, already renamed.
std::map<std::string, std::vector<ExprPtr>> defining_exprs(
    const Model& model, const NameMap& nm) {
  std::map<std::string, std::vector<ExprPtr>> defs;
  for (const auto& s : model.stocks) {
    auto& v = defs[nm.graph_name(s.name)];
    if (s.inflow) v.push_back(s.inflow);
    if (s.outflow) v.push_back(s.outflow);
  }
  for (const auto& a : model.auxes) {
    if (model.delay_aliases.count(a.name)) continue;  // collapsed
    defs[a.name].push_back(a.definition);
  }
  return defs;
}

}  // namespace

ControlGraph build_graph(const Model& model,
                         const std::vector<ExoClassification>& classes) {
  NameMap nm = build_name_map(model);
  ControlGraph g;

  std::vector<std::tuple<std::string, NodeKind, bool>> pending;
  for (const auto& s : model.stocks) {
    bool is_last_stage = nm.rename.count(s.name) > 0;
    pending.emplace_back(nm.graph_name(s.name), NodeKind::Stock,
                         s.hidden || is_last_stage);
  }
  for (const auto& a : model.auxes) {
    if (model.delay_aliases.count(a.name)) continue;
    pending.emplace_back(a.name, NodeKind::Aux, false);
  }
  for (const auto& c : classes) {
    if (c.verdict == ExoVerdict::ControlInput ||
        c.verdict == ExoVerdict::Undetermined) {
      pending.emplace_back(c.exo, NodeKind::Input, false);
    }
  }
  std::sort(pending.begin(), pending.end());
  for (auto& [name, kind, hidden] : pending) {
    g.add_node(name, kind, hidden);
  }

  for (const auto& [target, exprs] : defining_exprs(model, nm)) {
    for (const auto& e : exprs) {
      for (const auto& v : free_vars(e)) {
        std::string src = nm.graph_name(v);
        if (g.has_node(src)) g.add_edge(src, target);
      }
    }
  }
  g.normalize();
  return g;
}

namespace {

// True when this call node restricts the range of anything flowing through
// its arguments: MIN/MAX, clamped LOOKUP, EXP, ABS.
bool restricting_call(const CallNode& c, const Model& model) {
  switch (c.fn) {
    case Builtin::Min:
    case Builtin::Max:
    case Builtin::Exp:
    case Builtin::Abs:
      return true;
    case Builtin::Lookup: {
      const Table* t = model.find_table(c.table);
      return t && t->policy == OutOfRange::Clamp;
    }
    default:
      return false;  // LN surjective on its domain; delays pass through
  }
}

bool even_constant_exponent(const ExprPtr& exponent, const Model& model) {
  try {
    double v = eval_constant(exponent, model);
    if (!std::isfinite(v) || v != std::floor(v)) return false;
    return std::fmod(std::fabs(v), 2.0) == 0.0;
  } catch (const EvalError&) {
    return false;
  }
}

// Walks every occurrence of the variables in `names`; returns
// (any occurrence, every occurrence restricted).
void scan_occurrences(const ExprPtr& e, const std::set<std::string>& names,
                      bool restricted_above, const Model& model, bool& any,
                      bool& all_restricted) {
  if (!e) return;
  if (const auto* v = std::get_if<VarNode>(&e->node)) {
    if (names.count(v->name)) {
      any = true;
      if (!restricted_above) all_restricted = false;
    }
    return;
  }
  if (const auto* g = std::get_if<NegNode>(&e->node)) {
    scan_occurrences(g->operand, names, restricted_above, model, any,
                     all_restricted);
    return;
  }
  if (const auto* b = std::get_if<BinaryNode>(&e->node)) {
    bool pow_restricts = b->op == BinaryOp::Pow &&
                         even_constant_exponent(b->rhs, model);
    scan_occurrences(b->lhs, names, restricted_above || pow_restricts, model,
                     any, all_restricted);
    scan_occurrences(b->rhs, names, restricted_above || pow_restricts, model,
                     any, all_restricted);
    return;
  }
  if (const auto* c = std::get_if<CallNode>(&e->node)) {
    bool restricts = restricting_call(*c, model);
    for (const auto& arg : c->args) {
      scan_occurrences(arg, names, restricted_above || restricts, model, any,
                       all_restricted);
    }
  }
}

}  // namespace

ControlGraph mark_nonspanning(const Model& model, const ControlGraph& graph) {
  NameMap nm = build_name_map(model);
  auto defs = defining_exprs(model, nm);

  // Every model-level variable name a graph node stands for.
  std::map<std::string, std::set<std::string>> aliases;
  for (const auto& n : graph.nodes()) aliases[n.name].insert(n.name);
  for (const auto& [stage, alias] : nm.rename) aliases[alias].insert(stage);

  ControlGraph out;
  for (const auto& n : graph.nodes()) out.add_node(n.name, n.kind, n.hidden);
  for (const auto& e : graph.edges()) {
    auto it = defs.find(e.to);
    if (it == defs.end()) {
      out.add_edge(e.from, e.to, e.style);
      continue;
    }
    bool any = false;
    bool all_restricted = true;
    for (const auto& expr : it->second) {
      scan_occurrences(expr, aliases[e.from], false, model, any,
                       all_restricted);
    }
    EdgeStyle style = (any && all_restricted) ? EdgeStyle::NonSpanning
                                              : EdgeStyle::Spanning;
    out.add_edge(e.from, e.to, style);
  }
  out.normalize();
  return out;
}

ControlGraph stockify(const ControlGraph& graph) {
  ControlGraph out;
  for (const auto& n : graph.nodes()) {
    out.add_node(n.name, n.kind == NodeKind::Aux ? NodeKind::Stock : n.kind,
                 n.hidden);
  }
  for (const auto& e : graph.edges()) out.add_edge(e.from, e.to, e.style);
  out.normalize();
  return out;
}

ControlGraph stock_projection(const ControlGraph& graph) {
  ControlGraph out;
  for (const auto& n : graph.nodes()) {
    if (n.kind != NodeKind::Aux) out.add_node(n.name, n.kind, n.hidden);
  }

  // From each kept source, a two-state reachability through Aux interiors:
  // has the walk so far used only Spanning edges?
  for (const auto& src : graph.nodes()) {
    if (src.kind == NodeKind::Aux) continue;
    std::map<std::string, std::pair<bool, bool>> target_state;  // any, clean
    std::set<std::pair<std::string, bool>> visited;
    std::vector<std::pair<std::string, bool>> frontier;

    auto relax = [&](const GraphEdge& e, bool clean_so_far) {
      bool clean = clean_so_far && e.style == EdgeStyle::Spanning;
      const GraphNode& to = graph.node(e.to);
      if (to.kind == NodeKind::Aux) {
        if (visited.insert({e.to, clean}).second) {
          frontier.emplace_back(e.to, clean);
        }
      } else {
        auto& st = target_state[e.to];
        st.first = true;
        st.second = st.second || clean;
      }
    };

    for (const auto* e : graph.out_edges(src.name)) relax(*e, true);
    while (!frontier.empty()) {
      auto [name, clean] = frontier.back();
      frontier.pop_back();
      for (const auto* e : graph.out_edges(name)) relax(*e, clean);
    }
    for (const auto& [target, st] : target_state) {
      out.add_edge(src.name, target,
                   st.second ? EdgeStyle::Spanning : EdgeStyle::NonSpanning);
    }
  }
  out.normalize();
  return out;
}

namespace {

// Numeric edge gain d(target)/d(source) at the baseline point. Delay calls
// evaluate as their steady-state pass-through.
double steady_eval(const ExprPtr& e, const std::map<std::string, double>& env,
                   const std::map<std::string, Table>& tables) {
  if (const auto* c = std::get_if<CallNode>(&e->node);
      c && is_delay_builtin(c->fn)) {
    return steady_eval(c->args[0], env, tables);
  }
  if (const auto* g = std::get_if<NegNode>(&e->node)) {
    return -steady_eval(g->operand, env, tables);
  }
  if (const auto* b = std::get_if<BinaryNode>(&e->node)) {
    // Defer to eval for the leaf arithmetic by rebuilding is overkill;
    // replicate the two-operand cases directly.
    ExprPtr l = b->lhs, r = b->rhs;
    double lv = steady_eval(l, env, tables);
    double rv = steady_eval(r, env, tables);
    ExprPtr tmp = make_binary(b->op, make_number(lv), make_number(rv));
    return eval(tmp, env, tables);
  }
  if (const auto* c2 = std::get_if<CallNode>(&e->node)) {
    std::vector<ExprPtr> args;
    for (const auto& a : c2->args) {
      args.push_back(make_number(steady_eval(a, env, tables)));
    }
    ExprPtr tmp = c2->fn == Builtin::Lookup
                      ? make_lookup(c2->table, args[0])
                      : make_call(c2->fn, std::move(args));
    return eval(tmp, env, tables);
  }
  return eval(e, env, tables);
}

struct GainContext {
  const Model& model;
  std::map<std::string, std::vector<ExprPtr>> defs;
  std::map<std::string, std::set<std::string>> aliases;
  std::map<std::string, double> env;
  std::map<std::string, Table> tables;

  // net value of the target node's defining expressions (stocks: net rate,
  // aux: definition value), with the source variable overridden.
  double target_value(const std::string& target, const std::string& source,
                      double source_value) {
    auto env2 = env;
    for (const auto& name : aliases[source]) env2[name] = source_value;
    const auto& exprs = defs.at(target);
    // Stocks carry [inflow, outflow]; treat multiple exprs as net in - out
    // only when the node is a stock with both flows.
    const Stock* stock = nullptr;
    for (const auto& name : aliases[target]) {
      if (const auto* s = model.find_stock(name)) stock = s;
    }
    if (stock) {
      double in = stock->inflow ? steady_eval(stock->inflow, env2, tables) : 0.0;
      double out =
          stock->outflow ? steady_eval(stock->outflow, env2, tables) : 0.0;
      return in - out;
    }
    return steady_eval(exprs.front(), env2, tables);
  }

  // Central-difference gain with a kink check; nullopt when kinked.
  std::optional<double> edge_gain(const std::string& source,
                                  const std::string& target) {
    double x0 = env.count(source) ? env[source] : 0.0;
    double h = 1e-4 * std::max(1.0, std::fabs(x0));
    try {
      double fp = target_value(target, source, x0 + h);
      double fm = target_value(target, source, x0 - h);
      double f0 = target_value(target, source, x0);
      double fwd = (fp - f0) / h;
      double bwd = (f0 - fm) / h;
      double scale = std::max({1.0, std::fabs(fwd), std::fabs(bwd)});
      if (std::fabs(fwd - bwd) > 1e-3 * scale) return std::nullopt;
      return (fp - fm) / (2 * h);
    } catch (const EvalError&) {
      return std::nullopt;
    }
  }
};

// Johnson-style enumeration of elementary cycles, self-loops first.
struct CycleEnumerator {
  const ControlGraph& graph;
  std::vector<std::string> order;                    // sorted node names
  std::map<std::string, std::vector<std::string>> adj;  // no self-loops
  std::vector<std::vector<std::string>> cycles;
  std::size_t budget = 10000;

  std::set<std::string> blocked;
  std::map<std::string, std::set<std::string>> block_map;
  std::vector<std::string> stack;

  explicit CycleEnumerator(const ControlGraph& g) : graph(g) {
    for (const auto& n : g.nodes()) order.push_back(n.name);
    std::sort(order.begin(), order.end());
    for (const auto& e : g.edges()) {
      if (e.from == e.to) {
        record({e.from});
      } else {
        adj[e.from].push_back(e.to);
      }
    }
    for (auto& [k, v] : adj) {
      (void)k;
      std::sort(v.begin(), v.end());
    }
  }

  void record(std::vector<std::string> cycle) {
    if (cycles.size() >= budget) throw CycleBudgetExceeded();
    cycles.push_back(std::move(cycle));
  }

  void unblock(const std::string& v) {
    blocked.erase(v);
    auto it = block_map.find(v);
    if (it == block_map.end()) return;
    auto pending = std::move(it->second);
    block_map.erase(it);
    for (const auto& w : pending) {
      if (blocked.count(w)) unblock(w);
    }
  }

  bool circuit(const std::string& v, const std::string& start,
               const std::set<std::string>& scope) {
    bool found = false;
    stack.push_back(v);
    blocked.insert(v);
    for (const auto& w : adj[v]) {
      if (!scope.count(w)) continue;
      if (w == start) {
        record(stack);
        found = true;
      } else if (!blocked.count(w)) {
        if (circuit(w, start, scope)) found = true;
      }
    }
    if (found) {
      unblock(v);
    } else {
      for (const auto& w : adj[v]) {
        if (scope.count(w)) block_map[w].insert(v);
      }
    }
    stack.pop_back();
    return found;
  }

  void run() {
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::string& start = order[i];
      std::set<std::string> scope(order.begin() + i, order.end());
      blocked.clear();
      block_map.clear();
      stack.clear();
      circuit(start, start, scope);
    }
  }
};

}  // namespace

std::vector<LoopFinding> find_loops(const ControlGraph& graph,
                                    const Model& model) {
  CycleEnumerator en(graph);
  en.run();

  Model expanded = expand_delays(model);
  GainContext ctx{model,
                  defining_exprs(model, build_name_map(model)),
                  {},
                  variable_env(expanded, initial_state(expanded),
                               exo_env(expanded)),
                  table_env(expanded)};
  for (const auto& n : graph.nodes()) ctx.aliases[n.name].insert(n.name);
  for (const auto& [stage, alias] : build_name_map(model).rename) {
    ctx.aliases[alias].insert(stage);
  }

  std::vector<LoopFinding> out;
  for (const auto& cycle : en.cycles) {
    LoopFinding f;
    f.cycle = cycle;
    double product = 1.0;
    bool kinked = false;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      const std::string& from = cycle[i];
      const std::string& to = cycle[(i + 1) % cycle.size()];
      const GraphEdge* e = graph.find_edge(from, to);
      if (e && e->style == EdgeStyle::NonSpanning) {
        f.contains_nonspanning = true;
      }
      if (graph.node(from).hidden) f.contains_delay = true;
      if (!ctx.defs.count(to)) {
        kinked = true;  // hand-built graph without model backing
        continue;
      }
      auto gain = ctx.edge_gain(from, to);
      if (!gain || std::fabs(*gain) < 1e-9) {
        kinked = true;
      } else {
        product *= *gain;
      }
    }
    if (kinked) {
      f.polarity = LoopFinding::Polarity::Undetermined;
    } else {
      f.polarity = product > 0 ? LoopFinding::Polarity::Reinforcing
                               : LoopFinding::Polarity::Balancing;
    }
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(), [](const LoopFinding& a,
                                       const LoopFinding& b) {
    return a.cycle < b.cycle;
  });
  return out;
}

std::string to_dot(const ControlGraph& graph) {
  if (graph.nodes().empty()) return "digraph G { }\n";
  ControlGraph g = graph;
  g.normalize();
  std::string out = "digraph G {\n";
  for (const auto& n : g.nodes()) {
    out += "  \"" + n.name + "\" [";
    switch (n.kind) {
      case NodeKind::Stock:
        out += "shape=box,style=filled";
        break;
      case NodeKind::Aux:
        out += "shape=ellipse";
        break;
      case NodeKind::Input:
        out += "shape=square,color=red";
        break;
    }
    if (n.hidden) out += ",peripheries=2";
    out += "];\n";
  }
  for (const auto& e : g.edges()) {
    out += "  \"" + e.from + "\" -> \"" + e.to + "\"";
    if (e.style == EdgeStyle::NonSpanning) out += " [style=dashed]";
    out += ";\n";
  }
  out += "}\n";
  return out;
}

}  // namespace sca
