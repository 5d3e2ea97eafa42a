#pragma once

// Shared helpers for the test suites: fixture loading, the hand-built
// figure-shaped graphs, and seeded random generators for property tests.

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sca/controllability.hpp"
#include "sca/parser.hpp"
#include "sca/simulator.hpp"

namespace testsupport {

inline std::string fixture_path(const std::string& name) {
  return std::string(SCA_FIXTURE_DIR) + "/" + name;
}

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name), std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline sca::Model load_model(const std::string& name) {
  auto result = sca::parse_model(read_fixture(name));
  if (!result.ok()) {
    std::string msg = "fixture '" + name + "' failed to parse:";
    for (const auto& e : result.errors) msg += "\n  " + e.to_string();
    throw std::runtime_error(msg);
  }
  return *result.model;
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// ---- figure-shaped graphs ------------------------------------------------

// input -> x1 -> x2 -> ... -> xn
inline sca::ControlGraph stem_graph(int n) {
  sca::ControlGraph g;
  g.add_node("u", sca::NodeKind::Input);
  for (int i = 1; i <= n; ++i) {
    g.add_node("x" + std::to_string(i), sca::NodeKind::Stock);
  }
  if (n >= 1) g.add_edge("u", "x1");
  for (int i = 1; i < n; ++i) {
    g.add_edge("x" + std::to_string(i), "x" + std::to_string(i + 1));
  }
  g.normalize();
  return g;
}

// input -> x1, cycle x1 -> x2 -> ... -> xn -> x1
inline sca::ControlGraph bud_graph(int n) {
  sca::ControlGraph g;
  g.add_node("u", sca::NodeKind::Input);
  for (int i = 1; i <= n; ++i) {
    g.add_node("x" + std::to_string(i), sca::NodeKind::Stock);
  }
  g.add_edge("u", "x1");
  for (int i = 1; i <= n; ++i) {
    g.add_edge("x" + std::to_string(i),
               "x" + std::to_string(i % n + 1));
  }
  g.normalize();
  return g;
}

// one source feeding two sinks, no input: the classic dilation
inline sca::ControlGraph dilation_fork() {
  sca::ControlGraph g;
  g.add_node("v1", sca::NodeKind::Stock);
  g.add_node("v2", sca::NodeKind::Stock);
  g.add_node("v3", sca::NodeKind::Stock);
  g.add_edge("v3", "v1");
  g.add_edge("v3", "v2");
  g.normalize();
  return g;
}

// a controlled 3-chain plus a detached 2-cycle (x4, x5)
inline sca::ControlGraph detached_pair() {
  sca::ControlGraph g;
  g.add_node("u", sca::NodeKind::Input);
  for (int i = 1; i <= 5; ++i) {
    g.add_node("x" + std::to_string(i), sca::NodeKind::Stock);
  }
  g.add_edge("u", "x1");
  g.add_edge("x1", "x2");
  g.add_edge("x2", "x3");
  g.add_edge("x4", "x5");
  g.add_edge("x5", "x4");
  g.normalize();
  return g;
}

// a stem carrying two buds
inline sca::ControlGraph cactus_graph() {
  sca::ControlGraph g;
  g.add_node("u", sca::NodeKind::Input);
  for (const char* n : {"x1", "x2", "y1", "y2", "z1", "z2", "z3"}) {
    g.add_node(n, sca::NodeKind::Stock);
  }
  g.add_edge("u", "x1");
  g.add_edge("x1", "x2");
  g.add_edge("x2", "y1");
  g.add_edge("y1", "y2");
  g.add_edge("y2", "y1");
  g.add_edge("x1", "z1");
  g.add_edge("z1", "z2");
  g.add_edge("z2", "z3");
  g.add_edge("z3", "z1");
  g.normalize();
  return g;
}

// ---- random generators ---------------------------------------------------

// Random digraph over Stock nodes with optional Input nodes; edge
// probability p over all (u, v) pairs with v a stock (self-loops included).
inline sca::ControlGraph random_digraph(std::mt19937_64& rng, int max_nodes,
                                        double p, int max_inputs) {
  int n = 1 + static_cast<int>(uniform01(rng) * max_nodes);
  if (n > max_nodes) n = max_nodes;
  int m = static_cast<int>(uniform01(rng) * (max_inputs + 1));
  if (m > max_inputs) m = max_inputs;

  sca::ControlGraph g;
  std::vector<std::string> stocks, inputs;
  for (int i = 0; i < n; ++i) {
    stocks.push_back("x" + std::to_string(i));
    g.add_node(stocks.back(), sca::NodeKind::Stock);
  }
  for (int i = 0; i < m; ++i) {
    inputs.push_back("u" + std::to_string(i));
    g.add_node(inputs.back(), sca::NodeKind::Input);
  }
  for (const auto& from : stocks) {
    for (const auto& to : stocks) {
      if (uniform01(rng) < p) g.add_edge(from, to);
    }
  }
  for (const auto& from : inputs) {
    for (const auto& to : stocks) {
      if (uniform01(rng) < p) g.add_edge(from, to);
    }
  }
  g.normalize();
  return g;
}

// Random cactus: a stem from the input, with buds sprouting off random
// stem/bud nodes. Always structurally controllable by construction.
inline sca::ControlGraph random_cactus(std::mt19937_64& rng) {
  sca::ControlGraph g;
  g.add_node("u", sca::NodeKind::Input);
  int counter = 0;
  auto fresh = [&]() {
    std::string name = "c" + std::to_string(counter++);
    g.add_node(name, sca::NodeKind::Stock);
    return name;
  };
  std::vector<std::string> attach_points;
  int stem_len = 1 + static_cast<int>(uniform01(rng) * 4);
  std::string prev = "u";
  for (int i = 0; i < stem_len; ++i) {
    std::string node = fresh();
    g.add_edge(prev, node);
    attach_points.push_back(node);
    prev = node;
  }
  int buds = static_cast<int>(uniform01(rng) * 3);
  for (int b = 0; b < buds; ++b) {
    const std::string& anchor =
        attach_points[static_cast<std::size_t>(uniform01(rng) *
                                               attach_points.size()) %
                      attach_points.size()];
    int len = 1 + static_cast<int>(uniform01(rng) * 3);
    std::vector<std::string> cycle;
    for (int i = 0; i < len; ++i) cycle.push_back(fresh());
    g.add_edge(anchor, cycle.front());
    for (int i = 0; i < len; ++i) {
      g.add_edge(cycle[i], cycle[(i + 1) % len]);
    }
  }
  g.normalize();
  return g;
}

// ---- random models for round-trip / classifier properties ----------------

inline sca::ExprPtr random_expr(std::mt19937_64& rng,
                                const std::vector<std::string>& vars,
                                const std::vector<std::string>& tables,
                                int depth) {
  double roll = uniform01(rng);
  if (depth <= 0 || roll < 0.25 || vars.empty()) {
    if (!vars.empty() && roll < 0.5) {
      return sca::make_var(vars[rng() % vars.size()]);
    }
    double v = uniform01(rng) * 100.0;
    if (rng() % 3 == 0) v = static_cast<double>(rng() % 50);
    return sca::make_number(v);
  }
  if (roll < 0.35) {
    return sca::make_neg(random_expr(rng, vars, tables, depth - 1));
  }
  if (roll < 0.75) {
    auto op = static_cast<sca::BinaryOp>(rng() % 5);
    return sca::make_binary(op, random_expr(rng, vars, tables, depth - 1),
                            random_expr(rng, vars, tables, depth - 1));
  }
  if (roll < 0.85 && !tables.empty()) {
    return sca::make_lookup(tables[rng() % tables.size()],
                            random_expr(rng, vars, tables, depth - 1));
  }
  switch (rng() % 5) {
    case 0:
      return sca::make_call(sca::Builtin::Min,
                            {random_expr(rng, vars, tables, depth - 1),
                             random_expr(rng, vars, tables, depth - 1)});
    case 1:
      return sca::make_call(sca::Builtin::Max,
                            {random_expr(rng, vars, tables, depth - 1),
                             random_expr(rng, vars, tables, depth - 1)});
    case 2:
      return sca::make_call(sca::Builtin::Exp,
                            {random_expr(rng, vars, tables, depth - 1)});
    case 3:
      return sca::make_call(sca::Builtin::Ln,
                            {random_expr(rng, vars, tables, depth - 1)});
    default:
      return sca::make_call(sca::Builtin::Abs,
                            {random_expr(rng, vars, tables, depth - 1)});
  }
}

// A structurally valid random model: auxiliary definitions only reference
// earlier auxiliaries (no algebraic loops), delay calls sit alone on their
// right-hand side, initial values and delay times are constants.
inline sca::Model random_model(std::mt19937_64& rng) {
  sca::Model m;
  m.name = "Gen" + std::to_string(rng() % 1000);

  int n_tables = static_cast<int>(rng() % 3);
  for (int i = 0; i < n_tables; ++i) {
    sca::Table t;
    t.name = "t" + std::to_string(i);
    int pts = 2 + static_cast<int>(rng() % 4);
    double x = -uniform01(rng) * 5;
    for (int k = 0; k < pts; ++k) {
      t.points.emplace_back(x, uniform01(rng) * 10 - 5);
      x += 0.25 + uniform01(rng) * 3;
    }
    t.policy = rng() % 2 ? sca::OutOfRange::Clamp : sca::OutOfRange::Extrapolate;
    m.tables.push_back(std::move(t));
  }
  std::vector<std::string> tables;
  for (const auto& t : m.tables) tables.push_back(t.name);

  int n_exos = static_cast<int>(rng() % 4);
  for (int i = 0; i < n_exos; ++i) {
    m.exos.push_back({"e" + std::to_string(i), uniform01(rng) * 20 - 10});
  }

  int n_stocks = static_cast<int>(rng() % 4);
  int n_auxes = static_cast<int>(rng() % 5);
  std::vector<std::string> scope;
  for (const auto& e : m.exos) scope.push_back(e.name);
  for (int i = 0; i < n_stocks; ++i) scope.push_back("s" + std::to_string(i));

  std::vector<std::string> aux_scope = scope;
  for (int i = 0; i < n_auxes; ++i) {
    sca::Aux a;
    a.name = "a" + std::to_string(i);
    if (rng() % 6 == 0 && !aux_scope.empty()) {
      auto fn = std::vector<sca::Builtin>{
          sca::Builtin::Smth1, sca::Builtin::Smth3, sca::Builtin::Delay1,
          sca::Builtin::Delay3}[rng() % 4];
      a.definition = sca::make_call(
          fn, {random_expr(rng, aux_scope, tables, 2),
               sca::make_number(0.5 + uniform01(rng) * 5)});
    } else {
      a.definition = random_expr(rng, aux_scope, tables, 3);
    }
    aux_scope.push_back(a.name);
    m.auxes.push_back(std::move(a));
  }

  for (int i = 0; i < n_stocks; ++i) {
    sca::Stock s;
    s.name = "s" + std::to_string(i);
    s.initial = sca::make_number(uniform01(rng) * 100);
    bool has_in = rng() % 2 == 0;
    if (has_in) s.inflow = random_expr(rng, aux_scope, tables, 3);
    if (!has_in || rng() % 2 == 0) {
      s.outflow = random_expr(rng, aux_scope, tables, 3);
    }
    m.stocks.push_back(std::move(s));
  }
  return m;
}

}  // namespace testsupport
