#pragma once

// Partial orders over narratives, the merged branching graph, and templated
// text.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "polnarr/planner.hpp"
#include "polnarr/query.hpp"

namespace polnarr {

enum class EdgeKind {
  Causal,        // producer initiated a fluent the consumer's precondition needed
  Conflict,      // write/read or write/write on the same fluent
  Adjudication,  // a verdict or obligation depends on the earlier event
  Temporal,      // order a history or timing test depends on
  Branch,        // branch point to an alternative continuation
  Blocked,       // prefix to a blocked target
};

enum class NodeKind { Root, Event, Blocked };

const char* to_string(EdgeKind k);
const char* to_string(NodeKind k);

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::Event;
  std::string parent;  // prefix parent; empty for the first event when no root is shown
  int depth = 0;       // events on the path from the root, this one included
  EventInstance event;
  Verdict verdict;
  bool branch = false;                  // two or more continuations
  std::vector<std::size_t> narratives;  // narratives through this node
  std::vector<std::size_t> ends;        // narratives ending here
};

struct GraphEdge {
  std::string from;
  std::string to;
  EdgeKind kind = EdgeKind::Causal;
  std::vector<std::string> fluents;     // atoms behind causal/conflict edges
  std::vector<std::size_t> narratives;
};

struct GraphBlock {
  std::string at;    // node the prefix ends in
  std::string node;  // the blocked target's node
  BlockReport report;
  std::string summary;  // e.g. "cannot disclose"
};

struct NarrativeGraph {
  std::vector<GraphNode> nodes;  // parents before children
  std::vector<GraphEdge> edges;
  std::vector<GraphBlock> blocks;

  const GraphNode* find(const std::string& id) const;
  /// Event sequence of every narrative, by narrative index.
  std::map<std::size_t, std::vector<EventInstance>> paths() const;
};

/// Ordering constraints between the events of one narrative.
NarrativeGraph to_partial_order(const PolicyModel& model, const Narrative& n);

/// Prefix-merged graph of alternatives with blocked branches attached.
NarrativeGraph merge(const PolicyModel& model, const std::vector<Narrative>& ns,
                     const std::vector<BlockReport>& blocks = {});

/// Display names of constants: domain entity labels over model labels.
using Labels = std::map<Symbol, std::string>;
Labels make_labels(const PolicyModel& model, const Domain& domain = {});

/// One event rendered through its action's template. Transmissions get a
/// "permitted by ..." or "forbidden by ..." suffix unless the template
/// already places {clause_ids}. Without a template the event is
/// printed as `action(args)`, or ModelError("MissingTemplate") when
/// `fallback` is off.
std::string render_event(const PolicyModel& model, const Labels& labels, const EventInstance& ev,
                         const Verdict& verdict, bool fallback = true);

/// One line per event in narrative order.
std::string render_text(const PolicyModel& model, const Labels& labels, const Narrative& n,
                        bool fallback = true);
/// One line per node in graph order; blocked targets are prefixed "blocked: ".
std::string render_text(const PolicyModel& model, const Labels& labels, const NarrativeGraph& g,
                        bool fallback = true);

/// Graphviz: solid causal edges, dashed branch edges, red blocked edges.
std::string to_dot(const PolicyModel& model, const Labels& labels, const NarrativeGraph& g);

/// Topological orders of a partial-order graph, up to `limit`.
std::vector<std::vector<std::string>> linearizations(const NarrativeGraph& g,
                                                     std::size_t limit = 10000);

}  // namespace polnarr
