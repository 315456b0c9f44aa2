#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pdl/diag.hpp"
#include "pdl/mia.hpp"

namespace pdl::mia {

using ir::Graph;
using ir::GraphBuilder;
using ir::Node;
using ir::NodeId;
using ir::Op;

namespace {

bool commutative(ir::BOp op) {
  using ir::BOp;
  return op == BOp::Add || op == BOp::And || op == BOp::Or || op == BOp::Xor ||
         op == BOp::Eq;
}

// Nodes eligible for operand-mux coalescing: operations that map onto a
// shared functional unit or access port. Casts, slices and concatenations are
// wiring, not units, so they (like constants, fields and access functions)
// are shared only through structural interning, never muxed.
bool clusterable(const Node& n) {
  switch (n.op) {
    case Op::Builtin:
    case Op::ReadReg:
    case Op::ReadMem:
    case Op::WriteReg:
    case Op::WriteMem:
    case Op::WritePc:
      return true;
    default:
      return false;
  }
}

// Operation identity: everything two nodes must agree on to share one unit.
// Operands are deliberately excluded; differing operands become mux inputs.
std::string identityOf(const Node& n) {
  std::string key =
      fmt::format("{}|{}|{}.{}|{}|{}|{}..{}|{}|{}|{}", static_cast<int>(n.op),
                  static_cast<int>(n.bop), static_cast<int>(n.type.kind),
                  n.type.width, n.name, n.scope, n.hi, n.lo, n.units,
                  n.hasGuard ? 1 : 0, n.inputs.size());
  for (auto [h, l] : n.ranges) key += fmt::format("|{}:{}", h, l);
  return key;
}

// One operand alternative of a cluster position: the instructions in `mask`
// feed the value rooted at `rep` (an id in the union graph).
struct Alt {
  uint64_t mask = 0;
  NodeId rep = 0;
};

struct Cluster {
  std::vector<NodeId> members;
  uint64_t origin = 0;
  std::vector<std::vector<Alt>> ops;  // per operand position
};

// Union of all instruction graphs plus the greedy coalescer.
struct Coalescer {
  const Graph& g;
  std::vector<NodeId> parent;  // union-find over union-graph ids

  explicit Coalescer(const Graph& graph) : g(graph), parent(graph.size()) {
    for (NodeId i = 0; i < parent.size(); i++) parent[i] = i;
  }

  NodeId find(NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }

  std::map<NodeId, Cluster> clusters;  // root -> cluster

  // Downward reachability over the current cluster DAG: true when any of
  // `from` reaches a root in `targets` by following operand edges.
  bool reaches(std::vector<NodeId> from, const std::set<NodeId>& targets) {
    std::set<NodeId> seen;
    while (!from.empty()) {
      NodeId x = find(from.back());
      from.pop_back();
      if (targets.count(x)) return true;
      if (!seen.insert(x).second) continue;
      auto it = clusters.find(x);
      if (it != clusters.end()) {
        for (const auto& pos : it->second.ops)
          for (const Alt& a : pos) from.push_back(a.rep);
      } else {
        for (NodeId in : g[x].inputs) from.push_back(in);
      }
    }
    return false;
  }

  // Operand list of node `id` oriented for the best positional match against
  // cluster `c` (commutative binary operators may swap).
  std::vector<NodeId> orient(NodeId id, const Cluster& c) {
    std::vector<NodeId> in = g[id].inputs;
    const Node& n = g[id];
    if (n.op == Op::Builtin && commutative(n.bop) && in.size() == 2) {
      auto score = [&](NodeId a, NodeId b) {
        int s = 0;
        for (const Alt& alt : c.ops[0]) s += find(alt.rep) == find(a);
        for (const Alt& alt : c.ops[1]) s += find(alt.rep) == find(b);
        return s;
      };
      if (score(in[1], in[0]) > score(in[0], in[1])) std::swap(in[0], in[1]);
    }
    return in;
  }

  bool tryMerge(NodeId root, NodeId id) {
    Cluster& c = clusters.at(root);
    const Node& n = g[id];
    if (c.origin & n.origin) return false;
    std::vector<NodeId> in = orient(id, c);
    // Mux alternatives must share a type per position.
    for (size_t p = 0; p < in.size(); p++)
      if (g[c.ops[p].front().rep].type != g[in[p]].type) return false;
    // Reject merges that would make the merged node its own ancestor.
    std::vector<NodeId> from = in;
    for (const auto& pos : c.ops)
      for (const Alt& a : pos) from.push_back(a.rep);
    if (reaches(std::move(from), {root, find(id)})) return false;

    parent[find(id)] = root;
    c.members.push_back(id);
    c.origin |= n.origin;
    for (size_t p = 0; p < in.size(); p++) {
      bool found = false;
      for (Alt& a : c.ops[p])
        if (find(a.rep) == find(in[p])) {
          a.mask |= n.origin;
          found = true;
          break;
        }
      if (!found) c.ops[p].push_back({n.origin, in[p]});
    }
    return true;
  }

  void run() {
    // Identity groups in first-appearance order keep the result independent
    // of map iteration details.
    std::map<std::string, std::vector<NodeId>> groups;
    std::vector<std::string> order;
    for (NodeId id = 0; id < g.size(); id++) {
      if (!clusterable(g[id])) continue;
      std::string key = identityOf(g[id]);
      auto it = groups.find(key);
      if (it == groups.end()) order.push_back(key);
      groups[key].push_back(id);
    }
    for (const std::string& key : order) {
      std::vector<NodeId> roots;  // clusters of this group, creation order
      for (NodeId id : groups[key]) {
        bool merged = false;
        for (NodeId r : roots)
          if (tryMerge(r, id)) {
            merged = true;
            break;
          }
        if (!merged) {
          Cluster c;
          c.members = {id};
          c.origin = g[id].origin;
          c.ops.resize(g[id].inputs.size());
          for (size_t p = 0; p < g[id].inputs.size(); p++)
            c.ops[p].push_back({g[id].origin, g[id].inputs[p]});
          clusters.emplace(id, std::move(c));
          roots.push_back(id);
        }
      }
    }
  }

  // ---- emission into a fresh graph, muxes materialized ----

  Graph out;
  std::map<NodeId, NodeId> emitted;  // root -> id in `out`

  NodeId emit(NodeId oldId) {
    NodeId root = find(oldId);
    auto done = emitted.find(root);
    if (done != emitted.end()) return done->second;

    Node fresh = g[clusters.count(root) ? clusters.at(root).members[0] : root];
    uint64_t origin = fresh.origin;
    std::vector<NodeId> inputs;
    if (auto it = clusters.find(root); it != clusters.end()) {
      const Cluster& c = it->second;
      origin = c.origin;
      for (const auto& pos : c.ops) {
        // Alternatives may have collapsed into one cluster since the merge;
        // fold masks by the current roots, preserving first-seen order.
        std::vector<Alt> alts;
        for (const Alt& a : pos) {
          NodeId ar = find(a.rep);
          bool folded = false;
          for (Alt& b : alts)
            if (find(b.rep) == ar) {
              b.mask |= a.mask;
              folded = true;
              break;
            }
          if (!folded) alts.push_back(a);
        }
        if (alts.size() == 1) {
          inputs.push_back(emit(alts[0].rep));
        } else {
          Node mux;
          mux.op = Op::Mux;
          mux.type = g[alts[0].rep].type;
          mux.origin = c.origin;
          for (const Alt& a : alts) {
            mux.inputs.push_back(emit(a.rep));
            mux.muxOrigins.push_back(a.mask);
          }
          NodeId mid = static_cast<NodeId>(out.nodes.size());
          out.nodes.push_back(std::move(mux));
          inputs.push_back(mid);
        }
      }
    } else {
      for (NodeId in : fresh.inputs) inputs.push_back(emit(in));
    }
    fresh.inputs = std::move(inputs);
    fresh.origin = origin;
    NodeId nid = static_cast<NodeId>(out.nodes.size());
    out.nodes.push_back(std::move(fresh));
    emitted.emplace(root, nid);
    return nid;
  }
};

}  // namespace

Ipg buildIpg(const frontend::Isa& isa) {
  if (isa.instructions.size() > 64)
    fail(Code::UnsupportedFeature,
         fmt::format("instruction progress graphs support at most 64 "
                     "instructions, got {}",
                     isa.instructions.size()));

  // Phase one: union all instruction graphs; structural interning shares
  // identical subtrees and accumulates origin masks.
  Graph ug;
  GraphBuilder builder(ug);
  std::vector<NodeId> writes;  // union ids, instruction-major program order
  for (size_t i = 0; i < isa.instructions.size(); i++) {
    Graph src = ir::buildGraph(isa, isa.instructions[i]);
    std::vector<NodeId> remap(src.size(), 0);
    for (NodeId id = 1; id < src.size(); id++) {
      if (id == src.end) continue;
      Node n = src[id];
      n.origin = uint64_t{1} << i;
      for (NodeId& in : n.inputs) in = remap[in];
      if (n.isWrite()) {
        remap[id] = builder.effect(std::move(n));
        if (remap[id] != GraphBuilder::kNone) writes.push_back(remap[id]);
      } else {
        remap[id] = builder.intern(std::move(n));
      }
    }
  }

  // Phase two: coalesce same-identity disjoint-origin nodes behind muxes.
  Coalescer co(ug);
  co.run();
  co.out.nodes.push_back(Node{});  // Start
  std::vector<NodeId> endIns;
  for (NodeId w : writes) {
    NodeId nid = co.emit(w);
    if (std::find(endIns.begin(), endIns.end(), nid) == endIns.end())
      endIns.push_back(nid);
  }
  Node end;
  end.op = Op::End;
  end.inputs = std::move(endIns);
  co.out.end = static_cast<NodeId>(co.out.nodes.size());
  co.out.nodes.push_back(std::move(end));

  Ipg out;
  out.g = std::move(co.out);
  out.instrCount = isa.instructions.size();
  return out;
}

}  // namespace pdl::mia
