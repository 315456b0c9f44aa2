#include <fmt/format.h>

#include "pdl/diag.hpp"
#include "pdl/ir.hpp"

namespace pdl::ir {

using frontend::Format;
using frontend::Isa;

const char* opName(Op op) {
  switch (op) {
    case Op::Start: return "start";
    case Op::End: return "end";
    case Op::Const: return "const";
    case Op::Field: return "field";
    case Op::AccessFn: return "access";
    case Op::ReadReg: return "read";
    case Op::ReadMem: return "read";
    case Op::Builtin: return "builtin";
    case Op::Cast: return "cast";
    case Op::Slice: return "slice";
    case Op::Concat: return "concat";
    case Op::Select: return "select";
    case Op::Mux: return "mux";
    case Op::InstrKind: return "kind";
    case Op::WriteReg: return "write";
    case Op::WriteMem: return "write";
    case Op::WritePc: return "write";
  }
  return "?";
}

const char* bopName(BOp op) {
  switch (op) {
    case BOp::None: return "none";
    case BOp::Add: return "add";
    case BOp::Sub: return "sub";
    case BOp::Mul: return "mul";
    case BOp::RemU: return "remu";
    case BOp::RemS: return "rems";
    case BOp::And: return "and";
    case BOp::Or: return "or";
    case BOp::Xor: return "xor";
    case BOp::Shl: return "shl";
    case BOp::ShrU: return "shru";
    case BOp::ShrA: return "shra";
    case BOp::Eq: return "eq";
    case BOp::Ne: return "ne";
    case BOp::LtU: return "ltu";
    case BOp::LtS: return "lts";
    case BOp::LeU: return "leu";
    case BOp::LeS: return "les";
    case BOp::Not: return "not";
    case BOp::Neg: return "neg";
  }
  return "?";
}

static bool commutative(BOp op) {
  return op == BOp::Add || op == BOp::And || op == BOp::Or || op == BOp::Xor ||
         op == BOp::Eq;
}

// ------------------------------------------------------------ GraphBuilder --

GraphBuilder::GraphBuilder(Graph& graph) : g(&graph) {
  if (g->nodes.empty()) {
    Node start;
    start.op = Op::Start;
    g->nodes.push_back(std::move(start));
  }
}

std::string GraphBuilder::keyOf(const Node& n) const {
  std::vector<NodeId> in = n.inputs;
  if (n.op == Op::Builtin && commutative(n.bop) && in.size() == 2 && in[0] > in[1])
    std::swap(in[0], in[1]);
  std::string key = fmt::format("{}|{}|{}.{}", static_cast<int>(n.op),
                                static_cast<int>(n.bop),
                                static_cast<int>(n.type.kind), n.type.width);
  for (NodeId i : in) key += fmt::format("|{}", i);
  key += fmt::format("#{}.{}|{}|{}|{}..{}|{}", n.cval.bits, n.cval.width, n.name,
                     n.scope, n.hi, n.lo, n.units);
  for (auto [h, l] : n.ranges) key += fmt::format("|{}:{}", h, l);
  for (uint64_t m : n.muxOrigins) key += fmt::format("|m{}", m);
  return key;
}

std::optional<Value> GraphBuilder::fold(const Node& n) const {
  auto allConst = [&] {
    for (NodeId i : n.inputs)
      if ((*g)[i].op != Op::Const) return false;
    return true;
  };
  switch (n.op) {
    case Op::Builtin: {
      if (!allConst()) return std::nullopt;
      std::vector<Value> in;
      for (NodeId i : n.inputs) in.push_back((*g)[i].cval);
      return evalBuiltin(n.bop, in);
    }
    case Op::Cast:
      if ((*g)[n.inputs[0]].op != Op::Const) return std::nullopt;
      return evalCast((*g)[n.inputs[0]].cval, n.type);
    case Op::Slice:
      if ((*g)[n.inputs[0]].op != Op::Const) return std::nullopt;
      return sliceValue((*g)[n.inputs[0]].cval, n.hi, n.lo);
    case Op::Concat: {
      if (!allConst()) return std::nullopt;
      Value acc = (*g)[n.inputs[0]].cval;
      for (size_t i = 1; i < n.inputs.size(); i++)
        acc = concatValue(acc, (*g)[n.inputs[i]].cval);
      return acc;
    }
    default:
      return std::nullopt;
  }
}

NodeId GraphBuilder::intern(Node n) {
  // A Select whose condition is known collapses to the surviving branch.
  if (n.op == Op::Select && (*g)[n.inputs[0]].op == Op::Const)
    return (*g)[n.inputs[0]].cval.bits ? n.inputs[1] : n.inputs[2];
  if (std::optional<Value> v = fold(n)) {
    Node c;
    c.op = Op::Const;
    c.cval = *v;
    c.type = n.type;
    c.origin = n.origin;
    return intern(std::move(c));
  }
  std::string key = keyOf(n);
  auto it = memo.find(key);
  if (it != memo.end()) {
    (*g)[it->second].origin |= n.origin;
    return it->second;
  }
  NodeId id = static_cast<NodeId>(g->nodes.size());
  g->nodes.push_back(std::move(n));
  memo.emplace(std::move(key), id);
  return id;
}

NodeId GraphBuilder::effect(Node n) {
  if (n.hasGuard) {
    const Node& guard = (*g)[n.inputs.back()];
    if (guard.op == Op::Const) {
      if (guard.cval.bits == 0) return kNone;  // never taken
      n.inputs.pop_back();
      n.hasGuard = false;
    }
  }
  NodeId id = static_cast<NodeId>(g->nodes.size());
  g->nodes.push_back(std::move(n));
  return id;
}

void GraphBuilder::finish(const std::vector<NodeId>& writes) {
  Node end;
  end.op = Op::End;
  end.inputs = writes;
  g->end = static_cast<NodeId>(g->nodes.size());
  g->nodes.push_back(std::move(end));
}

NodeId GraphBuilder::konst(Value v) {
  Node n;
  n.op = Op::Const;
  n.cval = v;
  n.type = Type::bits(v.width);
  return intern(std::move(n));
}

NodeId GraphBuilder::boolConst(bool v) {
  Node n;
  n.op = Op::Const;
  n.cval = makeValue(v ? 1 : 0, 1);
  n.type = Type::boolean();
  return intern(std::move(n));
}

NodeId GraphBuilder::builtin(BOp op, Type t, std::vector<NodeId> in) {
  Node n;
  n.op = Op::Builtin;
  n.bop = op;
  n.type = t;
  n.inputs = std::move(in);
  return intern(std::move(n));
}

NodeId GraphBuilder::notOf(NodeId a) {
  return builtin(BOp::Not, Type::boolean(), {a});
}

NodeId GraphBuilder::andOf(NodeId a, NodeId b) {
  // Identities keep guard chains short: true is absorbed, false dominates.
  const Node& na = (*g)[a];
  const Node& nb = (*g)[b];
  if (na.op == Op::Const) return na.cval.bits ? b : a;
  if (nb.op == Op::Const) return nb.cval.bits ? a : b;
  return builtin(BOp::And, Type::boolean(), {a, b});
}

NodeId GraphBuilder::select(NodeId cond, NodeId t, NodeId f) {
  if (t == f) return t;
  Node n;
  n.op = Op::Select;
  n.type = (*g)[t].type;
  n.inputs = {cond, t, f};
  return intern(std::move(n));
}

// ------------------------------------------------------------- evaluation --

Value evalBuiltin(BOp op, const std::vector<Value>& in) {
  Value a = in[0];
  Value b = in.size() > 1 ? in[1] : Value{};
  unsigned w = a.width;
  auto boolv = [](bool x) { return makeValue(x ? 1 : 0, 1); };
  switch (op) {
    case BOp::Add: return makeValue(a.bits + b.bits, w);
    case BOp::Sub: return makeValue(a.bits - b.bits, w);
    case BOp::Mul: return makeValue(a.bits * b.bits, w);
    case BOp::RemU:
      return b.bits == 0 ? a : makeValue(a.bits % b.bits, w);
    case BOp::RemS:
      return b.bits == 0
                 ? a
                 : makeValue(static_cast<uint64_t>(asSigned(a) % asSigned(b)), w);
    case BOp::And: return makeValue(a.bits & b.bits, w);
    case BOp::Or: return makeValue(a.bits | b.bits, w);
    case BOp::Xor: return makeValue(a.bits ^ b.bits, w);
    case BOp::Shl:
      return b.bits >= w ? makeValue(0, w) : makeValue(a.bits << b.bits, w);
    case BOp::ShrU:
      return b.bits >= w ? makeValue(0, w) : makeValue(a.bits >> b.bits, w);
    case BOp::ShrA: {
      uint64_t amt = b.bits >= w ? w - 1 : b.bits;
      return makeValue(static_cast<uint64_t>(asSigned(a) >> amt), w);
    }
    case BOp::Eq: return boolv(a.bits == b.bits);
    case BOp::Ne: return boolv(a.bits != b.bits);
    case BOp::LtU: return boolv(a.bits < b.bits);
    case BOp::LtS: return boolv(asSigned(a) < asSigned(b));
    case BOp::LeU: return boolv(a.bits <= b.bits);
    case BOp::LeS: return boolv(asSigned(a) <= asSigned(b));
    case BOp::Not: return makeValue(a.bits ^ 1, 1);
    case BOp::Neg: return makeValue(~a.bits + 1, w);
    case BOp::None: break;
  }
  return {};
}

Value evalCast(Value v, Type target) {
  if (target.width == v.width) return Value{v.bits, v.width};
  if (target.width < v.width) return makeValue(v.bits, target.width);
  return target.kind == Kind::SInt ? signExtend(v, target.width)
                                   : zeroExtend(v, target.width);
}

// ------------------------------------------------------------ instruction --

namespace {

struct PendingWrite {
  Op op;
  std::string resource;
  unsigned units = 0;
  NodeId addr = GraphBuilder::kNone;  // register index or memory address
  NodeId value = GraphBuilder::kNone;
  std::optional<NodeId> guard;
  Type type;
};

class InstrBuilder {
 public:
  InstrBuilder(const Isa& isa, const Format& fmt, Graph& g)
      : isa(isa), fmt(fmt), b(g) {}

  void run(const frontend::Instruction& ins) {
    std::vector<PendingWrite> writes;
    stmt(*ins.behavior, std::nullopt, writes);
    std::vector<NodeId> ids;
    for (PendingWrite& w : writes) {
      Node n;
      n.op = w.op;
      n.name = w.resource;
      n.units = w.units;
      n.type = w.type;
      if (w.addr != GraphBuilder::kNone) n.inputs.push_back(w.addr);
      n.inputs.push_back(w.value);
      if (w.guard) {
        n.inputs.push_back(*w.guard);
        n.hasGuard = true;
      }
      NodeId id = b.effect(std::move(n));
      if (id != GraphBuilder::kNone) ids.push_back(id);
    }
    b.finish(ids);
  }

 private:
  const Isa& isa;
  const Format& fmt;
  GraphBuilder b;
  std::map<std::string, NodeId> lets;

  [[noreturn]] void ice(Span s, const std::string& m) {
    fail(Code::TypeError, s, "internal graph construction error: " + m);
  }

  NodeId pcRead() {
    Node n;
    n.op = Op::ReadReg;
    n.name = isa.pc.name;
    n.type = Type::bits(isa.pc.width);
    NodeId id = b.intern(std::move(n));
    unsigned step = isa.instrWidth / 8;
    unsigned ahead = isa.pc.semantics == ast::PcSemantics::Next        ? 1
                     : isa.pc.semantics == ast::PcSemantics::NextNext ? 2
                                                                      : 0;
    if (ahead == 0) return id;
    return b.builtin(BOp::Add, Type::bits(isa.pc.width),
                     {id, b.konst(makeValue(uint64_t{ahead} * step, isa.pc.width))});
  }

  NodeId constLeaf(Value v, Type t) {
    Node n;
    n.op = Op::Const;
    n.cval = makeValue(v.bits, t.width);
    n.type = t;
    return b.intern(std::move(n));
  }

  NodeId expr(const ast::Expr& e) {
    using ast::ExKind;
    switch (e.kind) {
      case ExKind::IntLit:
        return constLeaf(makeValue(e.litValue, e.type.width), e.type);
      case ExKind::Ident: {
        if (auto it = lets.find(e.name); it != lets.end()) return it->second;
        if (const frontend::Field* f = fmt.field(e.name)) {
          Node n;
          n.op = Op::Field;
          n.name = f->name;
          n.ranges = f->ranges;
          n.type = f->type;
          return b.intern(std::move(n));
        }
        if (const frontend::AccessFn* fn = fmt.accessFn(e.name)) {
          Node n;
          n.op = Op::AccessFn;
          n.name = fn->name;
          n.scope = fmt.name;
          n.type = fn->type;
          return b.intern(std::move(n));
        }
        if (e.name == isa.pc.name) return pcRead();
        if (auto c = isa.constants.find(e.name); c != isa.constants.end())
          return constLeaf(makeValue(c->second.bits, e.type.width), e.type);
        ice(e.span, fmt::format("unresolved name '{}'", e.name));
      }
      case ExKind::EnumRef: {
        const frontend::Enum& en = isa.enums.at(e.name);
        return constLeaf(*en.member(e.name2), e.type);
      }
      case ExKind::Call: {
        if (const frontend::RegFile* rf = isa.regFile(e.name)) {
          Node n;
          n.op = Op::ReadReg;
          n.name = rf->name;
          n.inputs = {expr(*e.args[0])};
          n.type = rf->elemType;
          return b.intern(std::move(n));
        }
        auto fn = isa.functions.find(e.name);
        if (fn == isa.functions.end())
          ice(e.span, fmt::format("unresolved call '{}'", e.name));
        // Inline the callee: its body sees only its parameters.
        std::map<std::string, NodeId> env;
        for (size_t i = 0; i < e.args.size(); i++)
          env[fn->second.params[i].first] = expr(*e.args[i]);
        std::swap(lets, env);
        NodeId body = expr(*fn->second.body);
        std::swap(lets, env);
        return body;
      }
      case ExKind::MemRef: {
        Node n;
        n.op = Op::ReadMem;
        n.name = e.name;
        n.units = static_cast<unsigned>(e.litValue);
        n.inputs = {expr(*e.args[0])};
        n.type = e.type;
        return b.intern(std::move(n));
      }
      case ExKind::Unary: {
        NodeId a = expr(*e.args[0]);
        if (e.op == "!") return b.builtin(BOp::Not, Type::boolean(), {a});
        return b.builtin(BOp::Neg, e.type, {a});
      }
      case ExKind::Binary:
        return binary(e);
      case ExKind::Cast: {
        NodeId a = expr(*e.args[0]);
        if (b.graphOf()[a].type == e.type) return a;  // no-op conversion
        Node n;
        n.op = Op::Cast;
        n.type = e.type;
        n.inputs = {a};
        return b.intern(std::move(n));
      }
      case ExKind::Concat: {
        Node n;
        n.op = Op::Concat;
        n.type = e.type;
        for (const auto& part : e.args) n.inputs.push_back(expr(*part));
        return b.intern(std::move(n));
      }
      case ExKind::Slice: {
        NodeId base = expr(*e.args[0]);
        NodeId hiN = expr(*e.args[1]);
        NodeId loN = expr(*e.args[2]);
        const Graph& g = b.graphOf();
        if (g[hiN].op != Op::Const || g[loN].op != Op::Const)
          ice(e.span, "slice bounds did not fold");
        Node n;
        n.op = Op::Slice;
        n.hi = static_cast<unsigned>(g[hiN].cval.bits);
        n.lo = static_cast<unsigned>(g[loN].cval.bits);
        n.type = e.type;
        n.inputs = {base};
        return b.intern(std::move(n));
      }
      case ExKind::IfExpr:
        return b.select(expr(*e.args[0]), expr(*e.args[1]), expr(*e.args[2]));
      case ExKind::Match: {
        NodeId s = expr(*e.args[0]);
        NodeId acc = expr(*e.cases.back().result);
        for (size_t i = e.cases.size() - 1; i-- > 0;) {
          NodeId pat = expr(*e.cases[i].pattern);
          NodeId hit = b.builtin(BOp::Eq, Type::boolean(), {s, pat});
          acc = b.select(hit, expr(*e.cases[i].result), acc);
        }
        return acc;
      }
      default:
        ice(e.span, "unsupported expression in behavior");
    }
  }

  NodeId binary(const ast::Expr& e) {
    bool signedEither =
        e.args[0]->type.isSigned() || e.args[1]->type.isSigned();
    NodeId a = expr(*e.args[0]);
    NodeId c = expr(*e.args[1]);
    const std::string& op = e.op;
    auto mk = [&](BOp bop) { return b.builtin(bop, e.type, {a, c}); };
    auto mkSwap = [&](BOp bop) { return b.builtin(bop, e.type, {c, a}); };
    if (op == "+") return mk(BOp::Add);
    if (op == "-") return mk(BOp::Sub);
    if (op == "*") return mk(BOp::Mul);
    if (op == "%") return mk(signedEither ? BOp::RemS : BOp::RemU);
    if (op == "&") return mk(BOp::And);
    if (op == "|") return mk(BOp::Or);
    if (op == "^") return mk(BOp::Xor);
    if (op == "<<") return mk(BOp::Shl);
    if (op == ">>") return mk(e.args[0]->type.isSigned() ? BOp::ShrA : BOp::ShrU);
    if (op == "=") return mk(BOp::Eq);
    if (op == "!=") return mk(BOp::Ne);
    // Order comparisons normalize to < / <= with operands swapped for > / >=.
    if (op == "<") return mk(signedEither ? BOp::LtS : BOp::LtU);
    if (op == "<=") return mk(signedEither ? BOp::LeS : BOp::LeU);
    if (op == ">") return mkSwap(signedEither ? BOp::LtS : BOp::LtU);
    if (op == ">=") return mkSwap(signedEither ? BOp::LeS : BOp::LeU);
    ice(e.span, fmt::format("unknown operator '{}'", op));
  }

  void assign(const ast::Stmt& s, std::optional<NodeId> guard,
              std::vector<PendingWrite>& out) {
    const ast::Expr& lhs = *s.lhs;
    PendingWrite w;
    w.guard = guard;
    if (lhs.kind == ast::ExKind::Call) {
      const frontend::RegFile* rf = isa.regFile(lhs.name);
      if (!rf) ice(lhs.span, "assignment to non-resource call");
      w.op = Op::WriteReg;
      w.resource = rf->name;
      w.addr = expr(*lhs.args[0]);
      w.value = expr(*s.value);
      w.type = rf->elemType;
    } else if (lhs.kind == ast::ExKind::MemRef) {
      w.op = Op::WriteMem;
      w.resource = lhs.name;
      w.units = static_cast<unsigned>(lhs.litValue);
      w.addr = expr(*lhs.args[0]);
      w.value = expr(*s.value);
      w.type = Type::bits(w.units * isa.mem.unitWidth);
    } else {
      w.op = Op::WritePc;
      w.resource = isa.pc.name;
      w.value = expr(*s.value);
      w.type = Type::bits(isa.pc.width);
    }
    out.push_back(std::move(w));
  }

  // Writes from both branches of an if/else to the same destination merge
  // into one write fed by a Select when their remaining preconditions agree;
  // everything else conjoins the branch direction onto its guard. Each
  // pending write's guard already carries the conditions accumulated above
  // this if, so the merge only adds (or cancels) the branch decision itself.
  void mergeBranches(NodeId cond, std::vector<PendingWrite>& thenW,
                     std::vector<PendingWrite>& elseW,
                     std::vector<PendingWrite>& out) {
    std::vector<bool> consumed(elseW.size(), false);
    for (PendingWrite& tw : thenW) {
      bool merged = false;
      for (size_t j = 0; j < elseW.size(); j++) {
        PendingWrite& ew = elseW[j];
        if (consumed[j] || ew.op != tw.op || ew.resource != tw.resource ||
            ew.units != tw.units || ew.addr != tw.addr || ew.guard != tw.guard)
          continue;
        PendingWrite w = tw;
        w.value = b.select(cond, tw.value, ew.value);
        out.push_back(std::move(w));
        consumed[j] = true;
        merged = true;
        break;
      }
      if (!merged) {
        tw.guard = tw.guard ? b.andOf(*tw.guard, cond) : cond;
        out.push_back(std::move(tw));
      }
    }
    NodeId notC = b.notOf(cond);
    for (size_t j = 0; j < elseW.size(); j++) {
      if (consumed[j]) continue;
      PendingWrite& ew = elseW[j];
      ew.guard = ew.guard ? b.andOf(*ew.guard, notC) : notC;
      out.push_back(std::move(ew));
    }
  }

  void stmt(const ast::Stmt& s, std::optional<NodeId> guard,
            std::vector<PendingWrite>& out) {
    using ast::StKind;
    switch (s.kind) {
      case StKind::Block:
        for (const auto& child : s.body) stmt(*child, guard, out);
        return;
      case StKind::Let: {
        NodeId v = expr(*s.value);
        auto saved = lets.find(s.name) != lets.end()
                         ? std::optional(lets[s.name])
                         : std::nullopt;
        lets[s.name] = v;
        for (const auto& child : s.body) stmt(*child, guard, out);
        if (saved)
          lets[s.name] = *saved;
        else
          lets.erase(s.name);
        return;
      }
      case StKind::If: {
        NodeId cond = expr(*s.cond);
        // A statically known condition keeps only the taken branch.
        if (b.graphOf()[cond].op == Op::Const) {
          const auto& branch =
              b.graphOf()[cond].cval.bits ? s.body : s.elseBody;
          for (const auto& child : branch) stmt(*child, guard, out);
          return;
        }
        std::vector<PendingWrite> thenW, elseW;
        for (const auto& child : s.body) stmt(*child, guard, thenW);
        for (const auto& child : s.elseBody) stmt(*child, guard, elseW);
        mergeBranches(cond, thenW, elseW, out);
        return;
      }
      case StKind::Assign:
        assign(s, guard, out);
        return;
      case StKind::MatchStmt: {
        NodeId scrut = expr(*s.value);
        // First-match semantics: each arm additionally requires every earlier
        // arm to have missed.
        std::vector<NodeId> misses;
        for (const auto& arm : s.cases) {
          NodeId armGuard = b.boolConst(true);
          for (NodeId m : misses) armGuard = b.andOf(armGuard, m);
          if (arm.pattern) {
            NodeId hit =
                b.builtin(BOp::Eq, Type::boolean(), {scrut, expr(*arm.pattern)});
            armGuard = b.andOf(armGuard, hit);
            misses.push_back(b.notOf(hit));
          }
          std::optional<NodeId> g =
              guard ? std::optional(b.andOf(*guard, armGuard))
                    : std::optional(armGuard);
          stmt(*arm.body, g, out);
        }
        return;
      }
      default:
        ice(s.span, "unsupported statement in behavior");
    }
  }
};

}  // namespace

Graph buildGraph(const Isa& isa, const frontend::Instruction& ins) {
  Graph g;
  InstrBuilder ib(isa, isa.formats[ins.format], g);
  ib.run(ins);
  canonicalize(g);
  return g;
}

}  // namespace pdl::ir
