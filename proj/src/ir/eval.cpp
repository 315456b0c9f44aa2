#include <fmt/format.h>

#include "pdl/diag.hpp"
#include "pdl/ir.hpp"

namespace pdl::ir {

namespace {

const frontend::Format& formatOf(const frontend::Isa& isa, const std::string& name) {
  for (const auto& f : isa.formats)
    if (f.name == name) return f;
  fail(Code::NameError, Span{}, fmt::format("unknown format '{}'", name));
}

Value extractRanges(const std::vector<std::pair<unsigned, unsigned>>& ranges,
                    uint64_t word) {
  Value acc{0, 0};
  for (auto [hi, lo] : ranges) {
    Value part = makeValue(word >> lo, hi - lo + 1);
    acc = acc.width == 0 ? part : concatValue(acc, part);
  }
  return acc;
}

}  // namespace

Value evalNode(const Graph& g, NodeId id, const EvalCtx& ctx,
               const std::vector<Value>& vals) {
  const Node& n = g[id];
  auto in = [&](size_t i) { return vals[n.inputs[i]]; };
  switch (n.op) {
    case Op::Start:
    case Op::End:
      return {};
    case Op::Const:
      return n.cval;
    case Op::Field:
      return extractRanges(n.ranges, ctx.word);
    case Op::AccessFn: {
      const frontend::Format& fmt = formatOf(*ctx.isa, n.scope);
      std::map<std::string, Value> fields;
      for (const auto& f : fmt.fields) fields[f.name] = f.extract(ctx.word);
      return frontend::evalAccessFn(*ctx.isa, fmt, *fmt.accessFn(n.name), fields);
    }
    case Op::ReadReg:
      if (n.inputs.empty()) return makeValue(ctx.pc, n.type.width);
      return ctx.readReg(n.name, in(0).bits);
    case Op::ReadMem:
      return makeValue(ctx.readMem(n.units, in(0).bits), n.type.width);
    case Op::Builtin: {
      std::vector<Value> ops;
      ops.reserve(n.inputs.size());
      for (NodeId i : n.inputs) ops.push_back(vals[i]);
      return evalBuiltin(n.bop, ops);
    }
    case Op::Cast:
      return evalCast(in(0), n.type);
    case Op::Slice:
      return sliceValue(in(0), n.hi, n.lo);
    case Op::Concat: {
      Value acc = in(0);
      for (size_t i = 1; i < n.inputs.size(); i++) acc = concatValue(acc, in(i));
      return acc;
    }
    case Op::Select:
      return in(0).bits ? in(1) : in(2);
    case Op::Mux:
      for (size_t i = 0; i < n.inputs.size(); i++)
        if (ctx.instrIndex >= 0 && (n.muxOrigins[i] >> ctx.instrIndex) & 1)
          return in(i);
      return makeValue(0, n.type.width);
    case Op::InstrKind:
      return makeValue(static_cast<uint64_t>(ctx.instrIndex), n.type.width);
    case Op::WriteReg:
      return in(1);
    case Op::WriteMem:
      return in(1);
    case Op::WritePc:
      return in(0);
  }
  return {};
}

std::vector<Value> evalAllNodes(const Graph& g, const EvalCtx& ctx) {
  std::vector<Value> vals(g.size());
  for (NodeId id = 0; id < g.size(); id++) vals[id] = evalNode(g, id, ctx, vals);
  return vals;
}

std::vector<Effect> evalGraph(const Graph& g, const EvalCtx& ctx) {
  std::vector<Value> vals = evalAllNodes(g, ctx);
  std::vector<Effect> out;
  for (NodeId w : g.effects()) {
    const Node& n = g[w];
    // Union graphs: a write fires only for the instructions that own it.
    if (n.origin != 0 && ctx.instrIndex >= 0 &&
        !((n.origin >> ctx.instrIndex) & 1))
      continue;
    if (n.hasGuard && vals[n.guardInput()].bits == 0) continue;
    Effect e{};
    e.value = vals[w];
    e.file = n.name;
    switch (n.op) {
      case Op::WriteReg:
        e.kind = Effect::Kind::Reg;
        e.index = vals[n.inputs[0]].bits;
        break;
      case Op::WriteMem:
        e.kind = Effect::Kind::Mem;
        e.index = vals[n.inputs[0]].bits;
        e.units = n.units;
        break;
      default:
        e.kind = Effect::Kind::Pc;
        break;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace pdl::ir
