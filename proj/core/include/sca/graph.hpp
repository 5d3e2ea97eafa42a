#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sca/classifier.hpp"
#include "sca/model.hpp"

namespace sca {

enum class NodeKind { Stock, Aux, Input };
enum class EdgeStyle { Spanning, NonSpanning };

struct GraphNode {
  std::string name;
  NodeKind kind = NodeKind::Aux;
  bool hidden = false;

  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  std::string from;
  std::string to;
  EdgeStyle style = EdgeStyle::Spanning;

  bool operator==(const GraphEdge&) const = default;
};

// Directed dependency graph over {Stock, Aux, Input} nodes. Parallel edges
// merge (a merged edge is NonSpanning only if every constituent was);
// self-loops are permitted on Stock nodes only; Input nodes keep in-degree 0.
class ControlGraph {
 public:
  void add_node(std::string name, NodeKind kind, bool hidden = false);
  // Merges with an existing (from, to) edge; any Spanning constituent wins.
  void add_edge(const std::string& from, const std::string& to,
                EdgeStyle style = EdgeStyle::Spanning);

  bool has_node(const std::string& name) const;
  const GraphNode& node(const std::string& name) const;
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }

  const GraphEdge* find_edge(const std::string& from,
                             const std::string& to) const;
  std::vector<const GraphEdge*> in_edges(const std::string& name) const;
  std::vector<const GraphEdge*> out_edges(const std::string& name) const;

  std::vector<std::string> node_names(NodeKind kind) const;
  std::vector<std::string> non_input_names() const;

  // Canonical ordering: nodes and edges sorted by name / (from, to).
  void normalize();

  bool operator==(const ControlGraph&) const = default;

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
};

struct LoopFinding {
  std::vector<std::string> cycle;  // simple directed cycle, rotated canonical
  enum class Polarity { Reinforcing, Balancing, Undetermined } polarity =
      Polarity::Undetermined;
  bool contains_delay = false;
  bool contains_nonspanning = false;

  bool operator==(const LoopFinding&) const = default;
};

std::string_view polarity_name(LoopFinding::Polarity p);

class CycleBudgetExceeded : public std::runtime_error {
 public:
  CycleBudgetExceeded()
      : std::runtime_error("cycle enumeration exceeded 10000 cycles") {}
};

// Steps 2-3: abstract graph construction. Stock nodes for stocks (hidden
// delay stages flagged), Aux nodes for auxiliaries, Input nodes for
// ControlInput exos (Undetermined exos included conservatively; Parameter
// and Inert exos omitted). Delay-output alias auxes collapse into the final
// hidden stage, which takes the alias's name. Dependence of a stock on
// itself through its own flows becomes a self-loop.
ControlGraph build_graph(const Model& model,
                         const std::vector<ExoClassification>& classes);

// Marks an edge u->v NonSpanning iff every syntactic path from a Var(u)
// leaf to the root of v's defining expression(s) passes through a
// range-restricting node: MIN, MAX, clamped LOOKUP, EXP, ABS, or POW with a
// constant even exponent.
ControlGraph mark_nonspanning(const Model& model, const ControlGraph& graph);

// Re-kinds every Aux node as Stock; edges and styles untouched.
ControlGraph stockify(const ControlGraph& graph);

// Keeps Stock and Input nodes; edge s->t iff a directed path s..t exists
// whose interior nodes are all Aux. A projected edge is NonSpanning only if
// every such path contains a NonSpanning edge.
ControlGraph stock_projection(const ControlGraph& graph);

// Simple-cycle enumeration (bounded at 10000) with numeric polarity: the
// sign of the product of edge gains d(target)/d(source) at the model's
// baseline state. Kinked or vanishing gains give Undetermined.
std::vector<LoopFinding> find_loops(const ControlGraph& graph,
                                    const Model& model);

// Deterministic DOT rendering of the drawing conventions: stocks filled
// boxes, auxiliaries ellipses, inputs red squares, non-spanning edges
// dashed, hidden stocks double-bordered.
std::string to_dot(const ControlGraph& graph);

}  // namespace sca
