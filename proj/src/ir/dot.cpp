#include <fmt/format.h>

#include "pdl/ir.hpp"

namespace pdl::ir {

namespace {

std::string nodeLabel(const Node& n) {
  switch (n.op) {
    case Op::Start: return "start";
    case Op::End: return "end";
    case Op::Const:
      return fmt::format("const 0x{:x}:{}", n.cval.bits, n.cval.width);
    case Op::Field: return fmt::format("field {}", n.name);
    case Op::AccessFn: return fmt::format("access {}.{}", n.scope, n.name);
    case Op::ReadReg: return fmt::format("read {}", n.name);
    case Op::ReadMem: return fmt::format("read {}<{}>", n.name, n.units);
    case Op::Builtin: return bopName(n.bop);
    case Op::Cast: return fmt::format("cast {}", n.type.str());
    case Op::Slice: return fmt::format("slice {}..{}", n.hi, n.lo);
    case Op::Concat: return "concat";
    case Op::Select: return "select";
    case Op::Mux: return "mux";
    case Op::InstrKind: return "kind";
    case Op::WriteReg: return fmt::format("write {}", n.name);
    case Op::WriteMem: return fmt::format("write {}<{}>", n.name, n.units);
    case Op::WritePc: return fmt::format("write {}", n.name);
  }
  return "?";
}

std::vector<std::string> portNames(const Node& n) {
  switch (n.op) {
    case Op::ReadReg: return {"index"};
    case Op::ReadMem: return {"addr"};
    case Op::Select: return {"cond", "then", "else"};
    case Op::WriteReg: return {"index", "value", "guard"};
    case Op::WriteMem: return {"addr", "value", "guard"};
    case Op::WritePc: return {"value", "guard"};
    default: return {};
  }
}

}  // namespace

std::string toDot(const Graph& g, const std::string& title) {
  std::string out = fmt::format("digraph \"{}\" {{\n  rankdir=BT;\n", title);
  for (NodeId id = 0; id < g.size(); id++) {
    const Node& n = g[id];
    const char* shape = n.isWrite()                           ? "box"
                        : n.op == Op::Start || n.op == Op::End ? "diamond"
                                                               : "ellipse";
    out += fmt::format("  n{} [label=\"{}\", shape={}];\n", id, nodeLabel(n), shape);
  }
  for (NodeId id = 0; id < g.size(); id++) {
    const Node& n = g[id];
    std::vector<std::string> ports = portNames(n);
    for (size_t i = 0; i < n.inputs.size(); i++) {
      bool isGuard = n.hasGuard && i + 1 == n.inputs.size();
      std::string attrs;
      if (isGuard)
        attrs = " [label=\"guard\", style=dashed]";
      else if (i < ports.size())
        attrs = fmt::format(" [label=\"{}\"]", ports[i]);
      out += fmt::format("  n{} -> n{}{};\n", id, n.inputs[i], attrs);
    }
  }
  out += "}\n";
  return out;
}

}  // namespace pdl::ir
