#include "polnarr/narrative_graph.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

namespace polnarr {

namespace {

// ---------------------------------------------------------------------------
// Partial order
// ---------------------------------------------------------------------------

struct Write {
  std::size_t at = 0;
  Atom atom;
  bool init = false;
};

struct IndexEdge {
  std::size_t from = 0, to = 0;
  EdgeKind kind = EdgeKind::Temporal;
  std::set<std::string> fluents;
};

int priority(EdgeKind k) {
  switch (k) {
    case EdgeKind::Causal: return 0;
    case EdgeKind::Adjudication: return 1;
    case EdgeKind::Conflict: return 2;
    default: return 3;
  }
}

/// Match ignoring the origin-time argument of timed patterns.
bool loose_match(const Pattern& p, const Atom& a) {
  if (p.name != a.pred) return false;
  if (p.args.size() == a.args.size() + 1) {
    Pattern q = p;
    q.args.pop_back();
    return matches(q, a);
  }
  return matches(p, a);
}

class OrderBuilder {
 public:
  OrderBuilder(const PolicyModel& model, const Narrative& n) : m_(model), n_(n) {
    for (std::size_t i = 0; i < n.events.size(); ++i) {
      for (const Atom& a : n.events[i].terminated) writes_.push_back({i, a, false});
      for (const Atom& a : n.events[i].initiated) writes_.push_back({i, a, true});
    }
  }

  std::vector<IndexEdge> build() {
    for (std::size_t j = 0; j < n_.events.size(); ++j) {
      for (const Read& r : n_.events[j].pre_reads) read(j, r, true);
      for (const Read& r : n_.events[j].adj_reads) read(j, r, false);
    }
    write_chains();
    obligations();
    std::vector<IndexEdge> out;
    for (auto& [k, e] : edges_) out.push_back(e);
    return out;
  }

 private:
  const PolicyModel& m_;
  const Narrative& n_;
  std::vector<Write> writes_;
  std::map<std::pair<std::size_t, std::size_t>, IndexEdge> edges_;

  void add(std::size_t i, std::size_t j, EdgeKind kind, const std::string& fluent = {}) {
    if (i == j) return;
    auto [it, fresh] = edges_.try_emplace({i, j}, IndexEdge{i, j, kind, {}});
    if (!fresh && priority(kind) < priority(it->second.kind)) it->second.kind = kind;
    if (!fluent.empty()) it->second.fluents.insert(fluent);
  }

  void chain(std::vector<std::size_t> idx) {
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    for (std::size_t k = 1; k < idx.size(); ++k) add(idx[k - 1], idx[k], EdgeKind::Temporal);
  }

  void atom_read(std::size_t j, const Atom& atom, bool positive, bool pre) {
    const Write* last = nullptr;
    const Write* next = nullptr;
    for (const Write& w : writes_) {
      if (w.atom != atom) continue;
      if (w.at < j) last = &w;
      if (w.at > j && !next) next = &w;
    }
    const std::string label = atom.str();
    if (last) {
      EdgeKind k = !pre ? EdgeKind::Adjudication
                        : (last->init && positive ? EdgeKind::Causal : EdgeKind::Conflict);
      add(last->at, j, k, label);
    }
    if (next) add(j, next->at, EdgeKind::Conflict, label);
  }

  void read(std::size_t j, const Read& r, bool pre) {
    std::set<Atom> atoms;
    switch (r.kind) {
      case Read::Kind::Fluent:
        for (const Write& w : writes_)
          if (loose_match(r.pattern, w.atom)) atoms.insert(w.atom);
        break;
      case Read::Kind::Role:
        for (const Write& w : writes_) {
          auto role = as_role(w.atom);
          if (role && role->first == r.holder && role_read_depends_on(r, role->second, m_))
            atoms.insert(w.atom);
        }
        break;
      case Read::Kind::Order: {
        std::vector<std::size_t> idx;
        for (const Write& w : writes_)
          if (w.init && w.at < j &&
              std::any_of(r.patterns.begin(), r.patterns.end(),
                          [&](const Pattern& p) { return loose_match(p, w.atom); }))
            idx.push_back(w.at);
        chain(idx);
        return;
      }
      case Read::Kind::History: {
        std::vector<std::size_t> idx{j};
        for (std::size_t i = 0; i < n_.events.size(); ++i)
          if (std::any_of(r.patterns.begin(), r.patterns.end(),
                          [&](const Pattern& p) { return matches(p, n_.events[i].event); }))
            idx.push_back(i);
        chain(idx);
        return;
      }
    }
    for (const Atom& a : atoms) atom_read(j, a, r.positive, pre);
  }

  void write_chains() {
    std::map<Atom, std::vector<std::size_t>> by_atom;
    for (const Write& w : writes_) by_atom[w.atom].push_back(w.at);
    for (auto& [atom, idx] : by_atom) {
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      for (std::size_t k = 1; k < idx.size(); ++k)
        add(idx[k - 1], idx[k], EdgeKind::Conflict, atom.str());
    }
  }

  std::optional<std::size_t> index_at(int time) const {
    for (std::size_t i = 0; i < n_.events.size(); ++i)
      if (n_.events[i].event.time == time) return i;
    return std::nullopt;
  }

  /// Discharges stay after their triggers. Entries with a deadline also
  /// keep their window's contents, since renumbering would move it.
  void obligations() {
    auto pin = [&](const ObligationEntry& e) {
      auto trig = index_at(e.trigger.time);
      if (!trig) return;
      std::optional<std::size_t> done;
      if (e.discharged_at) done = index_at(*e.discharged_at);
      if (done) add(*trig, *done, EdgeKind::Adjudication);
      if (!e.deadline) return;
      std::size_t end = done.value_or(*trig);
      for (std::size_t i = 0; i < n_.events.size(); ++i) {
        if (i < *trig) add(i, *trig, EdgeKind::Temporal);
        else if (i > end) add(end, i, EdgeKind::Temporal);
        else if (i > *trig && i < end) {
          add(*trig, i, EdgeKind::Temporal);
          add(i, end, EdgeKind::Temporal);
        }
      }
    };
    for (const auto& e : n_.ledger.discharged) pin(e);
    for (const auto& e : n_.ledger.pending) pin(e);
  }
};

// ---------------------------------------------------------------------------
// Node identity
// ---------------------------------------------------------------------------

constexpr std::uint64_t kFnvBasis = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string node_id(std::uint64_t h) {
  static const char* hex = "0123456789abcdef";
  std::string out = "n";
  for (int shift = 60; shift >= 0; shift -= 4) out += hex[(h >> shift) & 0xf];
  return out;
}

std::string event_key(const EventInstance& e) { return std::to_string(e.time) + ":" + e.str() + ";"; }

/// Node ids along an event sequence.
std::vector<std::uint64_t> prefix_hashes(const std::vector<EventInstance>& events) {
  std::vector<std::uint64_t> out;
  std::uint64_t h = kFnvBasis;
  for (const auto& e : events) {
    h = fnv(h, event_key(e));
    out.push_back(h);
  }
  return out;
}

void add_unique(std::vector<std::size_t>& v, std::size_t x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

class GraphBuilder {
 public:
  NarrativeGraph g;

  GraphNode& node(const std::string& id) { return g.nodes[index_.at(id)]; }

  GraphNode& ensure(const std::string& id, const std::string& parent, NodeKind kind, int depth,
                    const EventInstance& ev, const Verdict& verdict) {
    auto [it, fresh] = index_.try_emplace(id, g.nodes.size());
    if (fresh) {
      GraphNode n;
      n.id = id;
      n.kind = kind;
      n.parent = parent;
      n.depth = depth;
      n.event = ev;
      n.verdict = verdict;
      g.nodes.push_back(std::move(n));
      if (!parent.empty()) children_[parent].push_back(id);
    }
    return g.nodes[it->second];
  }

  bool has(const std::string& id) const { return index_.count(id) != 0; }

  void edge(const std::string& from, const std::string& to, EdgeKind kind,
            const std::set<std::string>& fluents, const std::vector<std::size_t>& narratives) {
    auto key = std::make_tuple(from, to, kind);
    auto [it, fresh] = edge_index_.try_emplace(key, g.edges.size());
    if (fresh) g.edges.push_back(GraphEdge{from, to, kind, {}, {}});
    GraphEdge& e = g.edges[it->second];
    for (const auto& f : fluents)
      if (std::find(e.fluents.begin(), e.fluents.end(), f) == e.fluents.end()) e.fluents.push_back(f);
    for (auto n : narratives) add_unique(e.narratives, n);
  }

  const std::vector<std::string>& children(const std::string& id) {
    return children_[id];
  }

 private:
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::string>> children_;
  std::map<std::tuple<std::string, std::string, EdgeKind>, std::size_t> edge_index_;
};

const std::string kRootId = node_id(kFnvBasis);

// ---------------------------------------------------------------------------
// Text
// ---------------------------------------------------------------------------

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string label(const Labels& labels, const Symbol& s) {
  auto it = labels.find(s);
  return it == labels.end() ? s : it->second;
}

}  // namespace

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Causal: return "causal";
    case EdgeKind::Conflict: return "conflict";
    case EdgeKind::Adjudication: return "adjudication";
    case EdgeKind::Temporal: return "temporal";
    case EdgeKind::Branch: return "branch";
    case EdgeKind::Blocked: return "blocked";
  }
  return "?";
}

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Root: return "root";
    case NodeKind::Event: return "event";
    case NodeKind::Blocked: return "blocked";
  }
  return "?";
}

const GraphNode* NarrativeGraph::find(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

std::map<std::size_t, std::vector<EventInstance>> NarrativeGraph::paths() const {
  std::map<std::string, const GraphNode*> by_id;
  for (const auto& n : nodes) by_id[n.id] = &n;
  std::map<std::size_t, std::vector<EventInstance>> out;
  for (const auto& n : nodes) {
    for (std::size_t idx : n.ends) {
      std::vector<EventInstance> seq;
      for (const GraphNode* p = &n; p && p->kind == NodeKind::Event;) {
        seq.push_back(p->event);
        auto it = by_id.find(p->parent);
        p = it == by_id.end() ? nullptr : it->second;
      }
      std::reverse(seq.begin(), seq.end());
      out[idx] = std::move(seq);
    }
  }
  return out;
}

NarrativeGraph to_partial_order(const PolicyModel& model, const Narrative& n) {
  return merge(model, {n}, {});
}

NarrativeGraph merge(const PolicyModel& model, const std::vector<Narrative>& ns,
                     const std::vector<BlockReport>& blocks) {
  GraphBuilder b;
  b.ensure(kRootId, "", NodeKind::Root, 0, {}, {});

  std::vector<std::vector<std::string>> ids(ns.size());
  for (std::size_t k = 0; k < ns.size(); ++k) {
    auto hs = prefix_hashes(ns[k].event_instances());
    std::string parent = kRootId;
    if (hs.empty()) {
      GraphNode& root = b.node(kRootId);
      add_unique(root.narratives, k);
      add_unique(root.ends, k);
    }
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const auto& rec = ns[k].events[i];
      std::string id = node_id(hs[i]);
      GraphNode& node = b.ensure(id, parent, NodeKind::Event, static_cast<int>(i) + 1, rec.event,
                                 rec.verdict);
      add_unique(node.narratives, k);
      if (i + 1 == hs.size()) add_unique(node.ends, k);
      ids[k].push_back(id);
      parent = id;
    }
  }

  for (const auto& report : blocks) {
    auto hs = prefix_hashes(report.prefix);
    std::string parent = kRootId;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      std::string id = node_id(hs[i]);
      b.ensure(id, parent, NodeKind::Event, static_cast<int>(i) + 1, report.prefix[i], Verdict{});
      parent = id;
    }
    std::uint64_t h = fnv(hs.empty() ? kFnvBasis : hs.back(), "!" + event_key(report.target));
    std::string id = node_id(h);
    bool fresh = !b.has(id);
    b.ensure(id, parent, NodeKind::Blocked, static_cast<int>(hs.size()) + 1, report.target,
             report.verdict);
    if (fresh)
      b.g.blocks.push_back(GraphBlock{parent, id, report, "cannot " + report.target.action});
  }

  // Branch points.
  for (auto& node : b.g.nodes) node.branch = b.children(node.id).size() > 1;
  for (const auto& node : std::vector<GraphNode>(b.g.nodes)) {
    for (const auto& child : b.children(node.id)) {
      const GraphNode& c = b.node(child);
      if (c.kind == NodeKind::Blocked)
        b.edge(node.id, child, EdgeKind::Blocked, {}, {});
      else if (node.branch)
        b.edge(node.id, child, EdgeKind::Branch, {}, c.narratives);
    }
  }

  for (std::size_t k = 0; k < ns.size(); ++k)
    for (const auto& e : OrderBuilder(model, ns[k]).build())
      b.edge(ids[k][e.from], ids[k][e.to], e.kind, e.fluents, {k});

  // Depth-first node order, siblings in discovery order.
  NarrativeGraph& g = b.g;
  {
    std::vector<GraphNode> ordered;
    std::function<void(const std::string&)> walk = [&](const std::string& id) {
      ordered.push_back(b.node(id));
      for (const auto& c : b.children(id)) walk(c);
    };
    walk(kRootId);
    g.nodes = std::move(ordered);
  }

  // The root only matters as a branch point or a block prefix.
  bool keep_root = g.nodes.front().branch || !g.nodes.front().ends.empty() ||
                   std::any_of(g.blocks.begin(), g.blocks.end(),
                               [](const GraphBlock& bl) { return bl.at == kRootId; });
  if (!keep_root) {
    g.nodes.erase(g.nodes.begin());
    for (auto& n : g.nodes)
      if (n.parent == kRootId) n.parent.clear();
  } else {
    for (const auto& n : g.nodes) {
      if (n.parent != kRootId) continue;
      for (auto k : n.narratives) add_unique(g.nodes.front().narratives, k);
    }
  }
  return std::move(g);
}

Labels make_labels(const PolicyModel& model, const Domain& domain) {
  Labels out;
  for (const auto& i : model.infos)
    if (!i.label.empty()) out[i.name] = i.label;
  for (const auto& p : model.purposes)
    if (!p.label.empty()) out[p.name] = p.label;
  for (const auto& e : model.entities)
    if (!e.label.empty()) out[e.name] = e.label;
  for (const auto& e : domain.entities)
    if (!e.label.empty()) out[e.name] = e.label;
  return out;
}

std::string render_event(const PolicyModel& model, const Labels& labels, const EventInstance& ev,
                         const Verdict& verdict, bool fallback) {
  const Template* t = model.find_template(ev.action);
  const ActionSchema* schema = model.find_action(ev.action);
  const auto permits = verdict.permits();
  const auto forbids = verdict.forbids();
  const std::string ids = join(forbids.empty() ? permits : forbids, ", ");
  std::string text;
  bool placed_ids = false;
  if (t && schema) {
    static const std::regex placeholder(R"(\{([^{}]*)\})");
    std::string rest = t->text;
    std::smatch m;
    while (std::regex_search(rest, m, placeholder)) {
      text += m.prefix();
      const std::string name = m[1];
      if (name == "clause_ids") {
        text += ids;
        placed_ids = true;
      } else if (name == "time") {
        text += std::to_string(ev.time);
      } else {
        auto idx = schema->param_index(name);
        text += idx && *idx < ev.args.size() ? label(labels, ev.args[*idx]) : m.str();
      }
      rest = m.suffix();
    }
    text += rest;
  } else if (fallback) {
    std::vector<std::string> args;
    for (const auto& a : ev.args) args.push_back(label(labels, a));
    text = ev.action + "(" + join(args, ", ") + ")";
  } else {
    throw ModelError("MissingTemplate", "no template for action '" + ev.action + "'");
  }
  if (verdict.transmission && !placed_ids && !ids.empty())
    text += (forbids.empty() ? " — permitted by " : " — forbidden by ") + ids;
  return text;
}

std::string render_text(const PolicyModel& model, const Labels& labels, const Narrative& n,
                        bool fallback) {
  std::string out;
  for (const auto& e : n.events) out += render_event(model, labels, e.event, e.verdict, fallback) + "\n";
  return out;
}

std::string render_text(const PolicyModel& model, const Labels& labels, const NarrativeGraph& g,
                        bool fallback) {
  std::string out;
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Root) continue;
    std::string line = render_event(model, labels, n.event, n.verdict, fallback);
    if (n.kind == NodeKind::Blocked) {
      line = "blocked: " + line;
      for (const auto& b : g.blocks) {
        if (b.node != n.id) continue;
        if (b.report.cause.no_applicable_clause) line += " (no clause applies)";
        for (const auto& t : b.report.cause.terminated)
          line += "; " + t.fluent.str() + " ended by " +
                  render_event(model, labels, t.terminated_by, Verdict{}, fallback);
      }
    }
    out += std::string(static_cast<std::size_t>(std::max(0, n.depth - 1)) * 2, ' ') + line + "\n";
  }
  return out;
}

std::string to_dot(const PolicyModel& model, const Labels& labels, const NarrativeGraph& g) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::ostringstream os;
  os << "digraph narratives {\n  rankdir=TB;\n  node [shape=box];\n";
  for (const auto& n : g.nodes) {
    os << "  " << quote(n.id) << " [label=";
    if (n.kind == NodeKind::Root) {
      os << quote("start") << ", shape=circle";
    } else {
      std::string text = "t=" + std::to_string(n.event.time) + ": " +
                         render_event(model, labels, n.event, n.verdict);
      os << quote(text);
      if (n.kind == NodeKind::Blocked) os << ", color=red, fontcolor=red";
      else if (n.verdict.transmission && !n.verdict.compliant) os << ", color=orange";
    }
    os << "];\n";
  }
  for (const auto& e : g.edges) {
    os << "  " << quote(e.from) << " -> " << quote(e.to) << " [";
    switch (e.kind) {
      case EdgeKind::Causal: os << "style=solid"; break;
      case EdgeKind::Branch: os << "style=dashed"; break;
      case EdgeKind::Blocked: os << "style=solid, color=red"; break;
      default: os << "style=dotted"; break;
    }
    std::string lbl = join(e.fluents, "\\n");
    if (lbl.empty() && e.kind != EdgeKind::Branch && e.kind != EdgeKind::Blocked)
      lbl = to_string(e.kind);
    if (!lbl.empty()) os << ", label=" << quote(lbl);
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

std::vector<std::vector<std::string>> linearizations(const NarrativeGraph& g, std::size_t limit) {
  std::vector<std::string> ids;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Event) ids.push_back(n.id);
  std::map<std::string, int> indeg;
  std::map<std::string, std::vector<std::string>> succ;
  for (const auto& id : ids) indeg[id] = 0;
  for (const auto& e : g.edges) {
    if (e.kind == EdgeKind::Branch || e.kind == EdgeKind::Blocked) continue;
    if (!indeg.count(e.from) || !indeg.count(e.to)) continue;
    succ[e.from].push_back(e.to);
    ++indeg[e.to];
  }
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> cur;
  std::function<void()> rec = [&]() {
    if (out.size() >= limit) return;
    if (cur.size() == ids.size()) {
      out.push_back(cur);
      return;
    }
    for (const auto& id : ids) {
      if (indeg[id] != 0) continue;
      indeg[id] = -1;
      for (const auto& s : succ[id]) --indeg[s];
      cur.push_back(id);
      rec();
      cur.pop_back();
      for (const auto& s : succ[id]) ++indeg[s];
      indeg[id] = 0;
    }
  };
  rec();
  return out;
}

}  // namespace polnarr
