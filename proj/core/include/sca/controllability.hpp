#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sca/graph.hpp"

namespace sca {

// How to treat NonSpanning (dashed) edges during a verdict: as ordinary
// free edges (Solid) or as absent (Absent). The two readings bracket the
// model's actual, range-constrained behaviour.
enum class DashedMode { Solid, Absent };

std::string_view dashed_mode_name(DashedMode m);

struct ControlVerdict {
  std::set<std::string> accessible;
  std::set<std::string> non_accessible;
  std::set<std::string> spanning;
  std::set<std::string> non_spanning;
  std::optional<std::set<std::string>> dilation_witness;
  bool structurally_controllable = false;
  bool theorem_applicable = false;  // sufficiency route reached a conclusion
  std::vector<std::string> notes;

  bool operator==(const ControlVerdict&) const = default;
};

struct InputAnalysis {
  std::string input;
  std::set<std::string> reachable;
  bool single_input_controllable = false;
  int controllable_stock_count = 0;

  bool operator==(const InputAnalysis&) const = default;
};

class AuxNodesPresent : public std::logic_error {
 public:
  AuxNodesPresent()
      : std::logic_error(
            "structural verdict requires a graph of Stock/Input nodes only; "
            "stockify or project first") {}
};

class TooLarge : public std::logic_error {
 public:
  explicit TooLarge(std::size_t n)
      : std::logic_error("brute-force dilation limited to 16 non-input "
                         "nodes, got " +
                         std::to_string(n)) {}
};

// Nodes reachable by directed paths from any Input node (inputs excluded
// from the result).
std::set<std::string> accessible_set(const ControlGraph& graph);

// Structural spanningness: a node is spanning iff some input-path made
// entirely of Spanning edges reaches it. Accessible nodes without such a
// path are non-spanning; non-accessible nodes are in neither set.
std::pair<std::set<std::string>, std::set<std::string>> structurally_spanning(
    const ControlGraph& graph);

// Maximum-cardinality bipartite matching: left = all nodes as sources,
// right = non-Input nodes as targets, (u, v) iff edge u->v. Hopcroft-Karp
// with name-sorted adjacency for deterministic output.
std::vector<GraphEdge> max_matching(const ControlGraph& graph);

// None iff the matching saturates every non-Input node. Otherwise a Hall
// violator S (|T(S)| < |S|) built from the alternating-reachable set of an
// unsaturated target.
std::optional<std::set<std::string>> has_dilation(const ControlGraph& graph);

// Classic structural-controllability test on a Stock/Input graph:
// controllable iff no non-accessible node and no dilation, with dashed
// edges kept or dropped per mode. Spanning sets always reflect the original
// edge styles. Throws AuxNodesPresent on graphs with Aux nodes.
ControlVerdict structural_verdict(const ControlGraph& graph, DashedMode mode);

// Sufficient condition for a mixed Stock/Aux graph: re-kind every aux as a
// stock and run the structural test. Success proves the original model
// structurally controllable; failure concludes nothing.
ControlVerdict sufficiency_verdict(const ControlGraph& graph, DashedMode mode);

// State-space-level verdict: structural test on the stock projection (the
// sparsity pattern actually governing the stocks' dynamics). This is the
// verdict the Kalman probe cross-validates, and the only route that can
// conclude "uncontrollable" for a model with auxiliaries.
ControlVerdict stock_level_verdict(const ControlGraph& graph, DashedMode mode);

// Step 4: one analysis per Input node, on the subgraph reachable from that
// input alone, judged at stock level. controllable_stock_count counts
// non-hidden stocks (0 when not concluded).
std::vector<InputAnalysis> per_input_analysis(const ControlGraph& graph,
                                              DashedMode mode);

// Exhaustive dilation oracle: first lexicographic nonempty S of non-Input
// nodes with |T(S)| < |S|. Throws TooLarge above 16 non-input nodes.
std::optional<std::set<std::string>> brute_force_dilation(
    const ControlGraph& graph);

// Numeric cross-check of a structural verdict: draws i.i.d. edge weights
// uniform on [0.5, 1.5], builds the controllability matrix
// [B, AB, ..., A^(N-1)B] and row-reduces it (pivot tolerance 1e-9).
// Returns the fraction of trials with full rank. Graph must be Stock/Input
// only.
double kalman_rank_probe(const ControlGraph& graph, int trials,
                         std::uint64_t seed);

}  // namespace sca
