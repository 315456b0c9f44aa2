#include <functional>

#include "pdl/ir.hpp"

namespace pdl::ir {

// Rebuilds the graph through a fresh GraphBuilder: constants re-fold, equal
// subtrees re-share, nodes unreachable from End disappear, and ids come out
// topologically ordered (inputs strictly before users).
void canonicalize(Graph& g) {
  Graph out;
  GraphBuilder b(out);
  std::vector<NodeId> map(g.size(), GraphBuilder::kNone);

  std::function<NodeId(NodeId)> emit = [&](NodeId id) -> NodeId {
    if (map[id] != GraphBuilder::kNone) return map[id];
    Node n = g[id];
    std::vector<NodeId> in;
    in.reserve(n.inputs.size());
    for (NodeId i : n.inputs) in.push_back(emit(i));
    n.inputs = std::move(in);
    return map[id] = b.intern(std::move(n));
  };

  std::vector<NodeId> writes;
  for (NodeId w : g.effects()) {
    Node n = g[w];
    std::vector<NodeId> in;
    in.reserve(n.inputs.size());
    for (NodeId i : n.inputs) in.push_back(emit(i));
    n.inputs = std::move(in);
    NodeId id = b.effect(std::move(n));
    if (id != GraphBuilder::kNone) writes.push_back(id);
  }
  b.finish(writes);
  g = std::move(out);
}

}  // namespace pdl::ir
