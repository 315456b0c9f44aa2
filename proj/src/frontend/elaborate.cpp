#include <algorithm>
#include <cassert>
#include <map>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "parser.hpp"
#include "pdl/diag.hpp"
#include "pdl/frontend.hpp"

namespace pdl::frontend {

using namespace ast;

namespace {

// ------------------------------------------------- constant expressions ----

// Structural constant evaluator over unbounded-ish integers (two's complement
// in 64 bits). Used for widths, ranges, annotation values and literal folding.
struct ConstEval {
  const Isa* isa;

  uint64_t eval(const Expr& e) const {
    switch (e.kind) {
      case ExKind::IntLit:
        return e.litValue;
      case ExKind::Ident: {
        auto it = isa->constants.find(e.name);
        if (it == isa->constants.end())
          fail(Code::NameError, e.span,
               fmt::format("'{}' is not a defined constant", e.name));
        return it->second.bits;
      }
      case ExKind::EnumRef: {
        auto it = isa->enums.find(e.name);
        if (it == isa->enums.end())
          fail(Code::NameError, e.span, fmt::format("unknown enumeration '{}'", e.name));
        const Value* v = it->second.member(e.name2);
        if (!v)
          fail(Code::NameError, e.span,
               fmt::format("enumeration '{}' has no member '{}'", e.name, e.name2));
        return v->bits;
      }
      case ExKind::Unary: {
        uint64_t a = eval(*e.args[0]);
        if (e.op == "-") return ~a + 1;
        if (e.op == "!") return a ? 0 : 1;
        break;
      }
      case ExKind::Binary: {
        uint64_t a = eval(*e.args[0]);
        uint64_t b = eval(*e.args[1]);
        const std::string& op = e.op;
        if (op == "+") return a + b;
        if (op == "-") return a - b;
        if (op == "*") return a * b;
        if (op == "%") return b ? a % b : a;
        if (op == "&") return a & b;
        if (op == "|") return a | b;
        if (op == "^") return a ^ b;
        if (op == "<<") return b >= 64 ? 0 : a << b;
        if (op == ">>") return b >= 64 ? 0 : a >> b;
        if (op == "=") return a == b;
        if (op == "!=") return a != b;
        if (op == "<") return a < b;
        if (op == "<=") return a <= b;
        if (op == ">") return a > b;
        if (op == ">=") return a >= b;
        break;
      }
      default:
        break;
    }
    fail(Code::TypeError, e.span, "constant expression expected");
  }

  bool isConst(const Expr& e) const {
    try {
      eval(e);
      return true;
    } catch (const SpecError&) {
      return false;
    }
  }
};

// Recursively assigns `t` to every node of a folded constant expression so
// the production evaluator sees consistent widths.
void annotateConstTypes(const Expr& e, Type t) {
  e.type = t;
  for (const auto& a : e.args) annotateConstTypes(*a, t);
}

bool fitsWidth(uint64_t v, Type t) {
  if (t.width >= 64) return true;
  if (t.isSigned()) {
    int64_t sv = static_cast<int64_t>(v);
    int64_t lo = -(int64_t{1} << (t.width - 1));
    int64_t hi = (int64_t{1} << (t.width - 1)) - 1;
    return sv >= lo && sv <= hi;
  }
  return v <= maskOf(t.width);
}

// ------------------------------------------------------- expression typing --

struct ExprCtx {
  const Isa* isa = nullptr;
  const Format* fmt = nullptr;   // fields and access functions in scope
  std::map<std::string, Type> lets;
  bool allowResources = false;   // register / memory / PC reads
  bool allowAsmBuiltins = false; // mnemonic, register(), decimal(), hex()
  bool allowStrings = false;
  bool fieldsOnly = false;       // access-function bodies: no access fns
};

struct ElabErr {};

class TypeChecker {
 public:
  const Isa* isa;
  ConstEval ce;

  explicit TypeChecker(const Isa* i) : isa(i), ce{i} {}

  Type elab(const ExprP& ep, ExprCtx& cx, std::optional<Type> hint = {}) {
    Expr& e = *ep;
    switch (e.kind) {
      case ExKind::IntLit: {
        if (e.litWidth > 0) {
          e.type = Type::bits(e.litWidth);
          return e.type;
        }
        return foldConst(e, hint);
      }
      case ExKind::StrLit:
        if (!cx.allowStrings)
          fail(Code::TypeError, e.span, "string values are not allowed here");
        e.type = Type::string();
        return e.type;
      case ExKind::Ident:
        return elabIdent(e, cx, hint);
      case ExKind::EnumRef: {
        auto it = isa->enums.find(e.name);
        if (it == isa->enums.end())
          fail(Code::NameError, e.span, fmt::format("unknown enumeration '{}'", e.name));
        if (!it->second.member(e.name2))
          fail(Code::NameError, e.span,
               fmt::format("enumeration '{}' has no member '{}'", e.name, e.name2));
        e.type = it->second.type;
        return e.type;
      }
      case ExKind::Call:
        return elabCall(e, cx, hint);
      case ExKind::MemRef:
        return elabMem(e, cx);
      case ExKind::Member:
      case ExKind::AtRef:
        fail(Code::TypeError, e.span,
             "instruction mappings are only allowed in stage definitions");
      case ExKind::Unary: {
        if (e.op == "!") {
          Type t = elab(e.args[0], cx);
          if (t.kind != Kind::Bool)
            fail(Code::TypeError, e.span, "'!' expects a Bool operand");
          e.type = Type::boolean();
          return e.type;
        }
        if (ce.isConst(e)) return foldConst(e, hint);
        Type t = elab(e.args[0], cx, hint);
        requireNumeric(t, e.span);
        e.type = t;
        return t;
      }
      case ExKind::Binary:
        return elabBinary(e, cx, hint);
      case ExKind::Cast:
        return elabCast(e, cx);
      case ExKind::Concat:
        return elabConcat(e, cx);
      case ExKind::Slice:
        return elabSlice(e, cx);
      case ExKind::IfExpr: {
        Type ct = elab(e.args[0], cx);
        if (ct.kind != Kind::Bool)
          fail(Code::TypeError, e.args[0]->span, "condition must be Bool");
        Type tt = elab(e.args[1], cx, hint);
        Type et = elab(e.args[2], cx, tt);
        e.type = mergeBranches(tt, et, e.span);
        return e.type;
      }
      case ExKind::Match:
        return elabMatch(e, cx, hint);
    }
    fail(Code::TypeError, e.span, "unsupported expression");
  }

  Type foldConst(const Expr& e, std::optional<Type> hint) {
    if (!hint || !hint->isNumeric())
      fail(Code::TypeError, e.span,
           "cannot infer the width of this literal from context");
    uint64_t v = ce.eval(e);
    if (!fitsWidth(v, *hint))
      fail(Code::TypeError, e.span,
           fmt::format("value {} does not fit in {}",
                       static_cast<int64_t>(v), hint->str()));
    annotateConstTypes(e, *hint);
    return *hint;
  }

  Type elabIdent(Expr& e, ExprCtx& cx, std::optional<Type> hint) {
    auto it = cx.lets.find(e.name);
    if (it != cx.lets.end()) {
      e.type = it->second;
      return e.type;
    }
    if (cx.fmt) {
      if (const Field* f = cx.fmt->field(e.name)) {
        e.type = f->type;
        return e.type;
      }
      if (!cx.fieldsOnly) {
        if (const AccessFn* fn = cx.fmt->accessFn(e.name)) {
          e.type = fn->type;
          return e.type;
        }
      }
    }
    if (cx.allowAsmBuiltins && e.name == "mnemonic") {
      e.type = Type::string();
      return e.type;
    }
    if (cx.allowResources && e.name == isa->pc.name) {
      e.type = Type::bits(isa->pc.width);
      return e.type;
    }
    if (isa->constants.count(e.name)) return foldConst(e, hint);
    fail(Code::NameError, e.span, fmt::format("unknown name '{}'", e.name));
  }

  Type elabCall(Expr& e, ExprCtx& cx, std::optional<Type>) {
    if (cx.allowResources) {
      if (const RegFile* rf = isa->regFile(e.name)) {
        if (e.args.size() != 1)
          fail(Code::TypeError, e.span, "register file access takes one index");
        Type it = elab(e.args[0], cx, Type::bits(rf->indexWidth));
        if (it.width != rf->indexWidth || !it.isNumeric())
          fail(Code::TypeError, e.span,
               fmt::format("index of '{}' must be {} bits wide", e.name, rf->indexWidth));
        e.type = rf->elemType;
        return e.type;
      }
    }
    if (cx.allowAsmBuiltins && e.name == "register") {
      if (e.args.size() != 1 || e.args[0]->kind != ExKind::Ident)
        fail(Code::TypeError, e.span, "register() expects a format field");
      Type at = elab(e.args[0], cx);
      const RegFile* match = nullptr;
      for (const auto& rf : isa->regFiles) {
        if (rf.indexWidth == at.width) {
          if (match)
            fail(Code::UnsupportedFeature, e.span,
                 "register() is ambiguous: several register files share this index width");
          match = &rf;
        }
      }
      if (!match)
        fail(Code::TypeError, e.span, "no register file matches this operand width");
      e.name2 = match->name;
      e.type = Type::string();
      return e.type;
    }
    if (cx.allowAsmBuiltins && (e.name == "decimal" || e.name == "hex")) {
      if (e.args.size() != 1)
        fail(Code::TypeError, e.span, fmt::format("{}() expects one argument", e.name));
      Type at = elab(e.args[0], cx);
      requireNumeric(at, e.span);
      e.type = Type::string();
      return e.type;
    }
    auto fit = isa->functions.find(e.name);
    if (fit != isa->functions.end()) {
      const Function& fn = fit->second;
      if (e.args.size() != fn.params.size())
        fail(Code::TypeError, e.span,
             fmt::format("function '{}' expects {} arguments", e.name, fn.params.size()));
      for (size_t i = 0; i < e.args.size(); i++) {
        Type at = elab(e.args[i], cx, fn.params[i].second);
        if (at != fn.params[i].second)
          fail(Code::TypeError, e.args[i]->span,
               fmt::format("argument {} of '{}' must be {}", i + 1, e.name,
                           fn.params[i].second.str()));
      }
      if (fn.result.kind == Kind::String && !cx.allowStrings)
        fail(Code::TypeError, e.span, "string values are not allowed here");
      e.type = fn.result;
      return e.type;
    }
    fail(Code::NameError, e.span, fmt::format("unknown function or resource '{}'", e.name));
  }

  Type elabMem(Expr& e, ExprCtx& cx) {
    if (!cx.allowResources || e.name != isa->mem.name)
      fail(Code::NameError, e.span, fmt::format("unknown memory '{}'", e.name));
    uint64_t units = e.litValue;
    if (!e.name2.empty()) {
      auto it = isa->constants.find(e.name2);
      if (it == isa->constants.end())
        fail(Code::NameError, e.span, fmt::format("unknown constant '{}'", e.name2));
      units = it->second.bits;
      e.litValue = units;
      e.name2.clear();
    }
    if (units < 1 || units * isa->mem.unitWidth > 64)
      fail(Code::TypeError, e.span, "memory access width out of range");
    Type at = elab(e.args[0], cx, Type::bits(isa->mem.addrWidth));
    if (at.width != isa->mem.addrWidth || !at.isNumeric())
      fail(Code::TypeError, e.span,
           fmt::format("memory address must be {} bits wide", isa->mem.addrWidth));
    e.type = Type::bits(static_cast<unsigned>(units) * isa->mem.unitWidth);
    return e.type;
  }

  Type elabBinary(Expr& e, ExprCtx& cx, std::optional<Type> hint) {
    const std::string& op = e.op;
    bool cmp = op == "<" || op == "<=" || op == ">" || op == ">=";
    bool eqop = op == "=" || op == "!=";
    bool shift = op == "<<" || op == ">>";

    if (shift) {
      if (ce.isConst(*e.args[0]) && !hint && !ce.isConst(*e.args[1]))
        fail(Code::TypeError, e.span, "cannot infer the width of the shifted value");
      Type lt = ce.isConst(*e.args[0]) && hint ? foldConst(*e.args[0], hint)
                                               : elab(e.args[0], cx, hint);
      requireNumeric(lt, e.span);
      Type rt = elab(e.args[1], cx, Type::bits(lt.width));
      requireNumeric(rt, e.args[1]->span);
      if (rt.isSigned())
        fail(Code::TypeError, e.args[1]->span, "shift amount must be unsigned");
      e.type = lt;
      return lt;
    }

    Type lt, rt;
    if (ce.isConst(*e.args[0]) && !ce.isConst(*e.args[1])) {
      rt = elab(e.args[1], cx, cmp || eqop ? std::nullopt : hint);
      lt = foldConst(*e.args[0], rt);
    } else {
      lt = elab(e.args[0], cx, cmp || eqop ? std::nullopt : hint);
      rt = ce.isConst(*e.args[1]) ? foldConst(*e.args[1], lt) : elab(e.args[1], cx, lt);
    }

    if (eqop) {
      if (lt.kind == Kind::Bool && rt.kind == Kind::Bool) {
        e.type = Type::boolean();
        return e.type;
      }
    }
    if ((lt.kind == Kind::Bool) != (rt.kind == Kind::Bool)) {
      fail(Code::TypeError, e.span, "cannot mix Bool and bit-vector operands");
    }
    if (lt.kind == Kind::Bool) {
      // Bool & Bool, | , ^ act as logical connectives.
      if (op == "&" || op == "|" || op == "^" || eqop) {
        e.type = Type::boolean();
        return e.type;
      }
      fail(Code::TypeError, e.span, fmt::format("operator '{}' is not defined on Bool", op));
    }
    requireNumeric(lt, e.args[0]->span);
    requireNumeric(rt, e.args[1]->span);
    if (lt.width != rt.width)
      fail(Code::TypeError, e.span,
           fmt::format("operand widths differ: {} vs {}", lt.str(), rt.str()));
    if (cmp) {
      if ((lt.kind == Kind::SInt && rt.kind == Kind::UInt) ||
          (lt.kind == Kind::UInt && rt.kind == Kind::SInt))
        fail(Code::TypeError, e.span,
             "comparison between SInt and UInt operands is ambiguous");
      e.type = Type::boolean();
      return e.type;
    }
    if (eqop) {
      e.type = Type::boolean();
      return e.type;
    }
    e.type = lt.kind == rt.kind ? lt : Type::bits(lt.width);
    return e.type;
  }

  Type elabCast(Expr& e, ExprCtx& cx) {
    Type target = resolveTypeFn(*e.castType);
    if (target.kind == Kind::String) {
      Type st = elab(e.args[0], cx);
      if (st.kind != Kind::String)
        fail(Code::TypeError, e.span, "only strings can be cast to String");
      e.type = target;
      return target;
    }
    Type st = ce.isConst(*e.args[0]) ? foldConst(*e.args[0], target)
                                     : elab(e.args[0], cx);
    if (st.kind == Kind::String)
      fail(Code::TypeError, e.span, "strings cannot be cast to bit vectors");
    if (target.kind == Kind::Bool && st.width != 1)
      fail(Code::TypeError, e.span, "only 1-bit values can be cast to Bool");
    e.type = target;
    return target;
  }

  Type elabConcat(Expr& e, ExprCtx& cx) {
    std::vector<Type> ts;
    for (auto& a : e.args) ts.push_back(elab(a, cx));
    bool anyStr = std::any_of(ts.begin(), ts.end(),
                              [](Type t) { return t.kind == Kind::String; });
    if (anyStr) {
      for (size_t i = 0; i < ts.size(); i++)
        if (ts[i].kind != Kind::String)
          fail(Code::TypeError, e.args[i]->span,
               "all parts of a string concatenation must be strings");
      e.type = Type::string();
      return e.type;
    }
    unsigned sum = 0;
    for (size_t i = 0; i < ts.size(); i++) {
      if (!ts[i].isNumeric() && ts[i].kind != Kind::Bool)
        fail(Code::TypeError, e.args[i]->span, "cannot concatenate this value");
      sum += ts[i].width;
    }
    if (sum > 64)
      fail(Code::TypeError, e.span, "concatenation wider than 64 bits is not supported");
    e.type = Type::bits(sum);
    return e.type;
  }

  Type elabSlice(Expr& e, ExprCtx& cx) {
    Type vt = elab(e.args[0], cx);
    requireNumeric(vt, e.args[0]->span);
    if (!ce.isConst(*e.args[1]) || !ce.isConst(*e.args[2]))
      fail(Code::TypeError, e.span, "slice bounds must be constant");
    uint64_t hi = ce.eval(*e.args[1]);
    uint64_t lo = ce.eval(*e.args[2]);
    annotateConstTypes(*e.args[1], Type::bits(64));
    annotateConstTypes(*e.args[2], Type::bits(64));
    if (lo > hi || hi >= vt.width)
      fail(Code::TypeError, e.span,
           fmt::format("slice ({}..{}) out of range for {}", hi, lo, vt.str()));
    e.type = Type::bits(static_cast<unsigned>(hi - lo + 1));
    return e.type;
  }

  Type elabMatch(Expr& e, ExprCtx& cx, std::optional<Type> hint) {
    Type st = elab(e.args[0], cx);
    requireNumeric(st, e.args[0]->span);
    if (e.cases.empty() || e.cases.back().pattern)
      fail(Code::TypeError, e.span, "match requires a final catch-all '_' case");
    std::optional<Type> resT;
    for (auto& mc : e.cases) {
      if (mc.pattern) {
        if (&mc == &e.cases.back())
          fail(Code::TypeError, mc.pattern->span, "catch-all must be the last case");
        if (!ce.isConst(*mc.pattern))
          fail(Code::TypeError, mc.pattern->span, "match patterns must be constant");
        elab(mc.pattern, cx, st);
      }
      Type rt = elab(mc.result, cx, resT ? resT : hint);
      if (resT && !(rt == *resT))
        fail(Code::TypeError, mc.result->span, "match cases yield different types");
      if (!resT) resT = rt;
    }
    e.type = *resT;
    return e.type;
  }

  Type mergeBranches(Type a, Type b, Span s) {
    if (a.kind == Kind::String && b.kind == Kind::String) return a;
    if (a.kind == Kind::Bool && b.kind == Kind::Bool) return a;
    if (!a.isNumeric() || !b.isNumeric() || a.width != b.width)
      fail(Code::TypeError, s, fmt::format("branch types differ: {} vs {}", a.str(), b.str()));
    return a.kind == b.kind ? a : Type::bits(a.width);
  }

  void requireNumeric(Type t, Span s) {
    if (!t.isNumeric())
      fail(Code::TypeError, s, fmt::format("expected a bit-vector value, got {}", t.str()));
  }

  std::function<Type(const TypeAst&)> resolveTypeFn;
};

}  // namespace

// ------------------------------------------------------------ IsaBuilder ----

namespace {

class IsaBuilder {
 public:
  Isa isa;
  std::map<std::string, Type> usings;
  std::vector<Diag> discipline;

  Type resolveType(const TypeAst& t) {
    ConstEval ce{&isa};
    auto widthOf = [&]() -> unsigned {
      if (!t.width) fail(Code::TypeError, t.span, fmt::format("{} needs a width", t.name));
      uint64_t w = ce.eval(*t.width);
      if (w < 1 || w > 64)
        fail(Code::TypeError, t.span,
             fmt::format("width {} out of supported range 1..64", static_cast<int64_t>(w)));
      return static_cast<unsigned>(w);
    };
    if (t.name == "Bits") return Type::bits(widthOf());
    if (t.name == "UInt") return Type::uint_(widthOf());
    if (t.name == "SInt") return Type::sint(widthOf());
    if (t.name == "Bool") return Type::boolean();
    if (t.name == "String") return Type::string();
    auto it = usings.find(t.name);
    if (it != usings.end()) {
      if (t.width) fail(Code::TypeError, t.span, "type alias does not take a width");
      return it->second;
    }
    fail(Code::NameError, t.span, fmt::format("unknown type '{}'", t.name));
  }

  TypeChecker checker() {
    TypeChecker tc(&isa);
    tc.resolveTypeFn = [this](const TypeAst& t) { return resolveType(t); };
    return tc;
  }

  void add(const ConstantDef& d) {
    checkFresh(d.name, d.span);
    ConstEval ce{&isa};
    isa.constants[d.name] = Value{ce.eval(*d.value), 64};
  }

  void add(const UsingDef& d) {
    checkFresh(d.name, d.span);
    usings[d.name] = resolveType(d.type);
  }

  void add(const RegFileDef& d) {
    checkFresh(d.name, d.span);
    RegFile rf;
    rf.name = d.name;
    Type it = resolveType(d.indexType);
    Type et = resolveType(d.elemType);
    if (!it.isNumeric() || !et.isNumeric())
      fail(Code::TypeError, d.span, "register file types must be bit vectors");
    rf.indexWidth = it.width;
    rf.elemType = et;
    ConstEval ce{&isa};
    for (const auto& z : d.zeroIndexes) {
      uint64_t idx = ce.eval(*z);
      if (idx > maskOf(rf.indexWidth))
        fail(Code::TypeError, d.span, "hardwired-zero index out of range");
      rf.zeroIndexes.insert(idx);
    }
    isa.regFiles.push_back(std::move(rf));
  }

  void add(const PcDef& d) {
    checkFresh(d.name, d.span);
    if (!isa.pc.name.empty())
      fail(Code::NameError, d.span, "a second program counter is not supported");
    Type t = resolveType(d.type);
    if (!t.isNumeric()) fail(Code::TypeError, d.span, "program counter must be a bit vector");
    isa.pc = Pc{d.name, t.width, d.semantics};
  }

  void add(const MemDef& d) {
    checkFresh(d.name, d.span);
    if (!isa.mem.name.empty())
      fail(Code::NameError, d.span, "a second memory is not supported");
    Type at = resolveType(d.addrType);
    Type ut = resolveType(d.unitType);
    if (ut.width != 8)
      fail(Code::UnsupportedFeature, d.span, "only byte-addressed memories are supported");
    isa.mem = Memory{d.name, at.width, ut.width, d.littleEndian};
  }

  void add(const FormatDef& d) {
    checkFresh(d.name, d.span);
    Format f;
    f.name = d.name;
    Type wt = resolveType(d.wordType);
    f.width = wt.width;
    if (f.width % 8 != 0)
      fail(Code::UnsupportedFeature, d.span, "format width must be a whole number of bytes");
    if (isa.instrWidth == 0) isa.instrWidth = f.width;
    if (isa.instrWidth != f.width)
      fail(Code::UnsupportedFeature, d.span, "all formats must share one width");

    bool anyRange = false, anyTyped = false;
    for (const auto& fd : d.fields) {
      (fd.type ? anyTyped : anyRange) = true;
    }
    if (anyRange && anyTyped)
      fail(Code::SyntaxError, d.span, "cannot mix range fields and typed fields in one format");

    ConstEval ce{&isa};
    uint64_t used = 0;
    if (anyTyped) {
      unsigned cursor = f.width;
      for (const auto& fd : d.fields) {
        Type ft = resolveType(*fd.type);
        if (!ft.isNumeric())
          fail(Code::TypeError, fd.span, "format fields must be bit vectors");
        if (ft.width > cursor)
          fail(Code::FormatOverlapError, fd.span,
               fmt::format("typed fields exceed the {}-bit format", f.width));
        Field fld;
        fld.name = fd.name;
        fld.type = ft;
        fld.width = ft.width;
        fld.ranges = {{cursor - 1, cursor - ft.width}};
        cursor -= ft.width;
        addField(f, std::move(fld), fd.span, used);
      }
      if (cursor != 0)
        fail(Code::FormatOverlapError, d.span,
             fmt::format("typed fields cover only {} of {} bits", f.width - cursor, f.width));
    } else {
      for (const auto& fd : d.fields) {
        Field fld;
        fld.name = fd.name;
        unsigned width = 0;
        for (const auto& r : fd.ranges) {
          uint64_t hi = ce.eval(*r.hi);
          uint64_t lo = r.lo ? ce.eval(*r.lo) : hi;
          if (lo > hi || hi >= f.width)
            fail(Code::TypeError, fd.span,
                 fmt::format("bit range ({}..{}) out of bounds for field '{}'", hi, lo, fd.name));
          fld.ranges.push_back({static_cast<unsigned>(hi), static_cast<unsigned>(lo)});
          width += static_cast<unsigned>(hi - lo + 1);
        }
        fld.width = width;
        fld.type = Type::bits(width);
        addField(f, std::move(fld), fd.span, used);
      }
    }

    TypeChecker tc = checker();
    for (const auto& fa : d.accessFns) {
      if (f.field(fa.name) || f.accessFn(fa.name))
        fail(Code::NameError, fa.span, fmt::format("'{}' is already defined in this format", fa.name));
      AccessFn fn;
      fn.name = fa.name;
      fn.value = fa.value;
      ExprCtx cx;
      cx.isa = &isa;
      cx.fmt = &f;
      cx.fieldsOnly = true;
      fn.type = tc.elab(fn.value, cx);
      tc.requireNumeric(fn.type, fa.span);

      // Trivially invertible: nested casts around a single field.
      const Expr* core = fn.value.get();
      while (core->kind == ExKind::Cast) core = core->args[0].get();
      if (core->kind == ExKind::Ident && f.field(core->name)) {
        fn.trivial = true;
        fn.trivialField = core->name;
      }

      if (fa.predicate) {
        fn.predicate = fa.predicate;
        ExprCtx pc;
        pc.isa = &isa;
        pc.lets[fn.name] = fn.type;
        Type pt = tc.elab(fn.predicate, pc);
        if (pt.kind != Kind::Bool)
          fail(Code::TypeError, fa.predicate->span, "predicate must yield Bool");
      }
      for (const auto& [fieldName, expr] : fa.encoding) {
        const Field* target = f.field(fieldName);
        if (!target)
          fail(Code::NameError, fa.span,
               fmt::format("encoding of '{}' names unknown field '{}'", fn.name, fieldName));
        ExprCtx ec;
        ec.isa = &isa;
        ec.lets[fn.name] = fn.type;
        Type et = tc.elab(expr, ec);
        if (!et.isNumeric() || et.width != target->width)
          fail(Code::TypeError, expr->span,
               fmt::format("encoding entry for field '{}' must be {} bits wide",
                           fieldName, target->width));
        fn.encoding.push_back({fieldName, expr});
      }
      if (!fn.trivial && (!fn.predicate || fn.encoding.empty()))
        fail(Code::TypeError, fa.span,
             fmt::format("access function '{}' is not trivially invertible and "
                         "needs both a predicate and an encoding",
                         fn.name));
      f.accessFns.push_back(std::move(fn));
    }
    isa.formats.push_back(std::move(f));
  }

  void addField(Format& f, Field fld, Span span, uint64_t& used) {
    if (f.field(fld.name))
      fail(Code::NameError, span, fmt::format("field '{}' defined twice", fld.name));
    for (auto [hi, lo] : fld.ranges) {
      uint64_t mask = maskOf(hi - lo + 1) << lo;
      if (used & mask)
        fail(Code::FormatOverlapError, span,
             fmt::format("field '{}' overlaps earlier fields", fld.name));
      used |= mask;
    }
    f.fields.push_back(std::move(fld));
  }

  void add(const InstructionDef& d) {
    if (isa.instrIndex(d.name) >= 0)
      fail(Code::NameError, d.span, fmt::format("instruction '{}' defined twice", d.name));
    int fi = -1;
    for (size_t i = 0; i < isa.formats.size(); i++)
      if (isa.formats[i].name == d.formatName) fi = static_cast<int>(i);
    if (fi < 0)
      fail(Code::NameError, d.span, fmt::format("unknown format '{}'", d.formatName));
    Instruction ins;
    ins.name = d.name;
    ins.format = fi;
    ins.behavior = d.behavior;
    ins.span = d.span;
    elabBehavior(ins);
    isa.instructions.push_back(std::move(ins));
  }

  void add(const EncodingDef& d) {
    int idx = isa.instrIndex(d.instrName);
    if (idx < 0)
      fail(Code::NameError, d.span, fmt::format("encoding for unknown instruction '{}'", d.instrName));
    Instruction& ins = isa.instructions[static_cast<size_t>(idx)];
    const Format& f = isa.formats[static_cast<size_t>(ins.format)];
    ConstEval ce{&isa};
    for (const auto& [fieldName, expr] : d.fields) {
      const Field* target = f.field(fieldName);
      if (!target)
        fail(Code::NameError, d.span,
             fmt::format("encoding of '{}' names unknown field '{}'", d.instrName, fieldName));
      for (const auto& ec : ins.encoding)
        if (ec.field == fieldName)
          fail(Code::NameError, d.span,
               fmt::format("field '{}' encoded twice for '{}'", fieldName, d.instrName));
      uint64_t v = ce.eval(*expr);
      unsigned lw = expr->kind == ExKind::IntLit ? expr->litWidth : 0;
      if (lw > target->width || v > maskOf(target->width))
        fail(Code::EncodingWidthError, expr->span,
             fmt::format("encoding constant for field '{}' exceeds its {} bits",
                         fieldName, target->width));
      ins.encoding.push_back({fieldName, makeValue(v, target->width)});
    }
  }

  void add(const AssemblyDef& d) {
    int first = -1;
    for (const auto& n : d.instrNames) {
      int idx = isa.instrIndex(n);
      if (idx < 0)
        fail(Code::NameError, d.span, fmt::format("assembly for unknown instruction '{}'", n));
      if (first < 0) first = idx;
      if (isa.instructions[static_cast<size_t>(idx)].format !=
          isa.instructions[static_cast<size_t>(first)].format)
        fail(Code::UnsupportedFeature, d.span,
             "instructions sharing one assembly definition must share a format");
      if (isa.instructions[static_cast<size_t>(idx)].assembly)
        fail(Code::NameError, d.span, fmt::format("assembly for '{}' defined twice", n));
    }
    const Format& f = isa.formats[static_cast<size_t>(
        isa.instructions[static_cast<size_t>(first)].format)];
    TypeChecker tc = checker();
    ExprCtx cx;
    cx.isa = &isa;
    cx.fmt = &f;
    cx.allowAsmBuiltins = true;
    cx.allowStrings = true;
    Type t = tc.elab(d.format, cx);
    if (t.kind != Kind::String)
      fail(Code::TypeError, d.span, "assembly definitions must produce a string");
    for (const auto& n : d.instrNames)
      isa.instructions[static_cast<size_t>(isa.instrIndex(n))].assembly = d.format;
  }

  void add(const EnumDef& d) {
    checkFresh(d.name, d.span);
    Enum en;
    en.name = d.name;
    en.type = resolveType(d.type);
    if (!en.type.isNumeric())
      fail(Code::TypeError, d.span, "enumerations must have a bit-vector type");
    ConstEval ce{&isa};
    uint64_t next = 0;
    for (const auto& [m, expr] : d.members) {
      if (en.member(m))
        fail(Code::NameError, d.span, fmt::format("member '{}' defined twice", m));
      uint64_t v = expr ? ce.eval(*expr) : next;
      if (v > maskOf(en.type.width))
        fail(Code::TypeError, d.span,
             fmt::format("member '{}' does not fit {}", m, en.type.str()));
      en.members.push_back({m, makeValue(v, en.type.width)});
      next = v + 1;
    }
    isa.enums[d.name] = std::move(en);
  }

  void add(const FunctionDef& d) {
    checkFresh(d.name, d.span);
    Function fn;
    fn.name = d.name;
    for (const auto& [p, t] : d.params) fn.params.push_back({p, resolveType(t)});
    fn.result = resolveType(d.result);
    fn.body = d.body;
    TypeChecker tc = checker();
    ExprCtx cx;
    cx.isa = &isa;
    cx.allowStrings = true;
    for (const auto& [p, t] : fn.params) cx.lets[p] = t;
    Type bt = tc.elab(fn.body, cx, fn.result);
    if (!(bt == fn.result))
      fail(Code::TypeError, d.span,
           fmt::format("function '{}' returns {}, declared {}", d.name, bt.str(),
                       fn.result.str()));
    isa.functions[d.name] = std::move(fn);
  }

  void checkFresh(const std::string& name, Span span) {
    bool taken = isa.constants.count(name) || usings.count(name) ||
                 isa.functions.count(name) || isa.enums.count(name) ||
                 isa.regFile(name) || name == isa.pc.name || name == isa.mem.name;
    for (const auto& f : isa.formats) taken = taken || f.name == name;
    if (taken) fail(Code::NameError, span, fmt::format("'{}' is already defined", name));
  }

  // ------------------------------------------------- behavior elaboration --

  void elabBehavior(Instruction& ins) {
    const Format& f = isa.formats[static_cast<size_t>(ins.format)];
    TypeChecker tc = checker();
    ExprCtx cx;
    cx.isa = &isa;
    cx.fmt = &f;
    cx.allowResources = true;
    elabStmt(*ins.behavior, tc, cx);
    checkDiscipline(ins);
  }

  void elabStmt(Stmt& s, TypeChecker& tc, ExprCtx cx) {
    switch (s.kind) {
      case StKind::Block:
        for (auto& b : s.body) elabStmt(*b, tc, cx);
        return;
      case StKind::Let: {
        Type t = tc.elab(s.value, cx);
        cx.lets[s.name] = t;
        elabStmt(*s.body[0], tc, cx);
        return;
      }
      case StKind::If: {
        Type ct = tc.elab(s.cond, cx);
        if (ct.kind != Kind::Bool)
          fail(Code::TypeError, s.cond->span, "condition must be Bool");
        for (auto& b : s.body) elabStmt(*b, tc, cx);
        for (auto& b : s.elseBody) elabStmt(*b, tc, cx);
        return;
      }
      case StKind::Assign: {
        Expr& lhs = *s.lhs;
        if (lhs.kind == ExKind::Call) {
          const RegFile* rf = isa.regFile(lhs.name);
          if (!rf)
            fail(Code::NameError, lhs.span, fmt::format("unknown register file '{}'", lhs.name));
          tc.elab(s.lhs, cx);  // types the index expression as a read shape
          Type vt = tc.elab(s.value, cx, rf->elemType);
          if (!vt.isNumeric() || vt.width != rf->elemType.width)
            fail(Code::TypeError, s.value->span,
                 fmt::format("value must be {} bits wide for '{}'", rf->elemType.width,
                             lhs.name));
          return;
        }
        if (lhs.kind == ExKind::MemRef) {
          Type mt = tc.elab(s.lhs, cx);
          Type vt = tc.elab(s.value, cx, Type::bits(mt.width));
          if (!vt.isNumeric() || vt.width != mt.width)
            fail(Code::TypeError, s.value->span,
                 fmt::format("value must be {} bits wide for this memory write", mt.width));
          return;
        }
        if (lhs.kind == ExKind::Ident && lhs.name == isa.pc.name) {
          lhs.type = Type::bits(isa.pc.width);
          Type vt = tc.elab(s.value, cx, Type::bits(isa.pc.width));
          if (!vt.isNumeric() || vt.width != isa.pc.width)
            fail(Code::TypeError, s.value->span,
                 fmt::format("value must be {} bits wide for '{}'", isa.pc.width, lhs.name));
          return;
        }
        fail(Code::TypeError, lhs.span,
             "assignment target must be a register, the program counter, or memory");
      }
      case StKind::Raise:
        fail(Code::UnsupportedFeature, s.span,
             "exceptions are not supported in instruction behavior");
      case StKind::MatchStmt: {
        Type st = tc.elab(s.value, cx);
        tc.requireNumeric(st, s.value->span);
        if (s.cases.empty() || s.cases.back().pattern)
          fail(Code::TypeError, s.span, "match requires a final catch-all '_' case");
        ConstEval ce{&isa};
        for (auto& mc : s.cases) {
          if (mc.pattern) {
            if (!ce.isConst(*mc.pattern))
              fail(Code::TypeError, mc.pattern->span, "match patterns must be constant");
            tc.elab(mc.pattern, cx, st);
          }
          elabStmt(*mc.body, tc, cx);
        }
        return;
      }
      case StKind::MethodCall:
        fail(Code::TypeError, s.span,
             "instruction mappings are only allowed in stage definitions");
    }
  }

  // -------------------------------------------------- read/write discipline --

  // One control decision along a path: `key` identifies the decision (the
  // serialized condition or scrutinee) and `val` which way it went. Two paths
  // are exclusive when some shared decision went different ways.
  struct PathCond {
    std::string key;
    std::string val;
  };
  struct Access {
    bool isWrite;
    std::string res;
    std::string key;
    std::string shown;  // rendered index for messages
    std::vector<PathCond> path;
    Span span;
  };

  std::string indexKey(const Expr& e, const std::map<std::string, ExprP>& lets) {
    ConstEval ce{&isa};
    if (ce.isConst(e)) return fmt::format("#{}", ce.eval(e));
    switch (e.kind) {
      case ExKind::Ident: {
        auto it = lets.find(e.name);
        if (it != lets.end()) return indexKey(*it->second, lets);
        return "n:" + e.name;
      }
      case ExKind::Unary:
        return fmt::format("({} {})", e.op, indexKey(*e.args[0], lets));
      case ExKind::Binary: {
        std::string a = indexKey(*e.args[0], lets);
        std::string b = indexKey(*e.args[1], lets);
        // Commutative operators compare order-insensitively.
        if ((e.op == "+" || e.op == "&" || e.op == "|" || e.op == "^" ||
             e.op == "*" || e.op == "=") &&
            b < a)
          std::swap(a, b);
        return fmt::format("({} {} {})", e.op, a, b);
      }
      case ExKind::Call: {
        std::string s = "(call " + e.name;
        for (const auto& a : e.args) s += " " + indexKey(*a, lets);
        return s + ")";
      }
      case ExKind::MemRef:
        return fmt::format("(mem {})", indexKey(*e.args[0], lets));
      case ExKind::Cast:
        return fmt::format("(cast {} {} {})", static_cast<int>(e.type.kind), e.type.width,
                           indexKey(*e.args[0], lets));
      case ExKind::Slice:
        return fmt::format("(slice {} {} {})", indexKey(*e.args[1], lets),
                           indexKey(*e.args[2], lets), indexKey(*e.args[0], lets));
      case ExKind::Concat: {
        std::string s = "(cat";
        for (const auto& a : e.args) s += " " + indexKey(*a, lets);
        return s + ")";
      }
      case ExKind::IfExpr:
        return fmt::format("(ite {} {} {})", indexKey(*e.args[0], lets),
                           indexKey(*e.args[1], lets), indexKey(*e.args[2], lets));
      default:
        return fmt::format("(opaque {})", reinterpret_cast<uintptr_t>(&e));
    }
  }

  static bool pathsOverlap(const std::vector<PathCond>& a, const std::vector<PathCond>& b) {
    for (const auto& ca : a)
      for (const auto& cb : b)
        if (ca.key == cb.key && ca.val != cb.val) return false;
    return true;
  }

  void checkDiscipline(Instruction& ins) {
    std::vector<Access> accs;
    std::vector<PathCond> path;
    std::map<std::string, ExprP> lets;
    walkStmt(*ins.behavior, ins, accs, path, lets);
  }

  void record(Instruction& ins, std::vector<Access>& accs, Access acc) {
    for (const Access& prior : accs) {
      if (!prior.isWrite) continue;
      if (prior.res != acc.res || prior.key != acc.key) continue;
      if (!pathsOverlap(prior.path, acc.path)) continue;
      if (!acc.isWrite) {
        discipline.push_back(
            Diag{Code::WriteBeforeReadError, acc.span,
                 fmt::format("instruction {}: {} is read after being written on the same path",
                             ins.name, acc.shown)});
      } else {
        discipline.push_back(
            Diag{Code::DoubleWriteError, acc.span,
                 fmt::format("instruction {}: {} is written twice on the same path",
                             ins.name, acc.shown)});
      }
    }
    accs.push_back(std::move(acc));
  }

  void walkExpr(const Expr& e, Instruction& ins, std::vector<Access>& accs,
                std::vector<PathCond>& path, std::map<std::string, ExprP>& lets) {
    switch (e.kind) {
      case ExKind::Call:
        if (isa.regFile(e.name)) {
          walkExpr(*e.args[0], ins, accs, path, lets);
          record(ins, accs,
                 Access{false, e.name, indexKey(*e.args[0], lets),
                        fmt::format("{}[...]", e.name), path, e.span});
          return;
        }
        for (const auto& a : e.args) walkExpr(*a, ins, accs, path, lets);
        return;
      case ExKind::MemRef:
        walkExpr(*e.args[0], ins, accs, path, lets);
        record(ins, accs,
               Access{false, e.name, indexKey(*e.args[0], lets),
                      fmt::format("{}[...]", e.name), path, e.span});
        return;
      case ExKind::Ident:
        if (e.name == isa.pc.name)
          record(ins, accs, Access{false, isa.pc.name, "", isa.pc.name, path, e.span});
        return;
      case ExKind::IfExpr:
      case ExKind::Match:
      case ExKind::Binary:
      case ExKind::Unary:
      case ExKind::Cast:
      case ExKind::Concat:
      case ExKind::Slice:
        for (const auto& a : e.args) walkExpr(*a, ins, accs, path, lets);
        for (const auto& c : e.cases) {
          if (c.pattern) walkExpr(*c.pattern, ins, accs, path, lets);
          walkExpr(*c.result, ins, accs, path, lets);
        }
        return;
      default:
        return;
    }
  }

  void walkStmt(const Stmt& s, Instruction& ins, std::vector<Access>& accs,
                std::vector<PathCond>& path, std::map<std::string, ExprP> lets) {
    switch (s.kind) {
      case StKind::Block:
        for (const auto& b : s.body) walkStmt(*b, ins, accs, path, lets);
        return;
      case StKind::Let:
        walkExpr(*s.value, ins, accs, path, lets);
        lets[s.name] = s.value;
        walkStmt(*s.body[0], ins, accs, path, lets);
        return;
      case StKind::If: {
        walkExpr(*s.cond, ins, accs, path, lets);
        std::string ck = indexKey(*s.cond, lets);
        path.push_back({ck, "T"});
        for (const auto& b : s.body) walkStmt(*b, ins, accs, path, lets);
        path.back().val = "F";
        for (const auto& b : s.elseBody) walkStmt(*b, ins, accs, path, lets);
        path.pop_back();
        return;
      }
      case StKind::MatchStmt: {
        walkExpr(*s.value, ins, accs, path, lets);
        std::string sk = indexKey(*s.value, lets);
        for (size_t i = 0; i < s.cases.size(); i++) {
          // Distinct cases are mutually exclusive; model each arm with its own
          // condition key so writes across arms do not collide.
          path.push_back({fmt::format("match {}", sk), fmt::format("case{}", i)});
          walkStmt(*s.cases[i].body, ins, accs, path, lets);
          path.pop_back();
        }
        return;
      }
      case StKind::Assign: {
        walkExpr(*s.value, ins, accs, path, lets);
        const Expr& lhs = *s.lhs;
        if (lhs.kind == ExKind::Call || lhs.kind == ExKind::MemRef) {
          walkExpr(*lhs.args[0], ins, accs, path, lets);
          record(ins, accs,
                 Access{true, lhs.name, indexKey(*lhs.args[0], lets),
                        fmt::format("{}[...]", lhs.name), path, s.span});
        } else {
          record(ins, accs, Access{true, isa.pc.name, "", isa.pc.name, path, s.span});
        }
        return;
      }
      default:
        return;
    }
  }
};

// ----------------------------------------------------- microarchitectures --

struct MiaBuilder {
  const Isa& isa;
  const MiaDef& def;
  Mia mia;
  std::map<std::string, std::string> stageOutputs;  // stage -> output name

  struct StageScope {
    std::set<std::string> instrVars;
    std::set<std::string> fetchVars;
  };

  Mia build() {
    mia.name = def.name;
    mia.dataBusWidth = def.dataBusWidth;
    for (const auto& l : def.logics) {
      if (mia.logics.count(l.name))
        fail(Code::NameError, l.span, fmt::format("logic '{}' defined twice", l.name));
      mia.logics[l.name] = l.forwarding;
    }
    for (const auto& st : def.stages) {
      for (const auto& prev : mia.stages)
        if (prev.name == st.name)
          fail(Code::NameError, st.span, fmt::format("stage '{}' defined twice", st.name));
      Stage stage;
      stage.name = st.name;
      StageScope scope;
      walk(*st.body, st, stage, scope);
      if (!st.outName.empty()) stageOutputs[st.name] = st.outName;
      mia.stages.push_back(std::move(stage));
    }
    int fetches = 0, decodes = 0;
    for (const auto& st : mia.stages)
      for (const auto& op : st.ops) {
        fetches += op.kind == MapKind::FetchNext;
        decodes += op.kind == MapKind::Decode;
      }
    if (fetches != 1)
      fail(Code::UnsupportedMapping, def.span,
           fmt::format("microarchitecture '{}' must fetch exactly once", def.name));
    if (decodes != 1)
      fail(Code::UnsupportedMapping, def.span,
           fmt::format("microarchitecture '{}' must decode exactly once", def.name));
    return std::move(mia);
  }

  void checkStageRef(const Expr& e, const StageAst& st) {
    // e is Member(stageName, out): must name an earlier stage's output.
    const Expr& base = *e.args[0];
    if (base.kind != ExKind::Ident)
      fail(Code::UnsupportedMapping, e.span, "expected a stage output reference");
    auto it = stageOutputs.find(base.name);
    if (it == stageOutputs.end())
      fail(Code::NameError, e.span,
           fmt::format("stage '{}' is not defined before stage '{}'", base.name, st.name));
    if (it->second != e.name)
      fail(Code::NameError, e.span,
           fmt::format("stage '{}' has no output '{}'", base.name, e.name));
  }

  void walk(const Stmt& s, const StageAst& st, Stage& stage, StageScope& scope) {
    switch (s.kind) {
      case StKind::Block:
        for (const auto& b : s.body) walk(*b, st, stage, scope);
        return;
      case StKind::Assign: {
        if (s.lhs->kind != ExKind::Ident || s.lhs->name != st.outName)
          fail(Code::UnsupportedMapping, s.span,
               "stages may only assign their declared output");
        const Expr& v = *s.value;
        if (v.kind == ExKind::Ident && v.name == "fetchNext") {
          stage.ops.push_back({MapKind::FetchNext, "", "", s.span});
          scope.fetchVars.insert(st.outName);
          return;
        }
        if (v.kind == ExKind::Ident &&
            (scope.instrVars.count(v.name) || scope.fetchVars.count(v.name)))
          return;  // output wiring
        fail(Code::UnsupportedMapping, s.span, "unsupported stage output value");
      }
      case StKind::Let: {
        const Expr& v = *s.value;
        if (v.kind == ExKind::Ident && v.name == "fetchNext") {
          stage.ops.push_back({MapKind::FetchNext, "", "", s.span});
          scope.fetchVars.insert(s.name);
        } else if (v.kind == ExKind::Call && v.name == "decode") {
          if (v.args.size() != 1)
            fail(Code::UnsupportedMapping, v.span, "decode takes one argument");
          const Expr& a = *v.args[0];
          if (a.kind == ExKind::Member) {
            checkStageRef(a, st);
          } else if (a.kind == ExKind::Ident && scope.fetchVars.count(a.name)) {
            // same-stage fetch result
          } else {
            fail(Code::UnsupportedMapping, v.span, "decode expects a fetch result");
          }
          stage.ops.push_back({MapKind::Decode, "", "", s.span});
          scope.instrVars.insert(s.name);
        } else if (v.kind == ExKind::Member) {
          checkStageRef(v, st);
          scope.instrVars.insert(s.name);
        } else {
          fail(Code::UnsupportedMapping, s.span, "unsupported binding in stage definition");
        }
        walk(*s.body[0], st, stage, scope);
        return;
      }
      case StKind::MethodCall: {
        if (s.recv->kind != ExKind::Ident || !scope.instrVars.count(s.recv->name))
          fail(Code::UnsupportedMapping, s.span,
               "instruction mappings must be invoked on the decoded instruction");
        auto atArg = [&](size_t i) -> std::string {
          if (i >= s.args.size() || s.args[i]->kind != ExKind::AtRef)
            fail(Code::UnsupportedMapping, s.span,
                 fmt::format("'{}' expects resource arguments like @X", s.name));
          return s.args[i]->name;
        };
        if (s.name == "compute") {
          stage.ops.push_back({MapKind::Compute, "", "", s.span});
        } else if (s.name == "verify") {
          stage.ops.push_back({MapKind::Verify, "", "", s.span});
        } else if (s.name == "read") {
          std::string r = atArg(0);
          if (!isa.regFile(r) && r != isa.mem.name)
            fail(Code::NameError, s.span, fmt::format("unknown resource '@{}'", r));
          stage.ops.push_back({MapKind::Read, r, "", s.span});
        } else if (s.name == "readOrForward") {
          std::string r = atArg(0);
          std::string l = atArg(1);
          if (!isa.regFile(r))
            fail(Code::NameError, s.span, fmt::format("unknown register file '@{}'", r));
          auto it = mia.logics.find(l);
          if (it == mia.logics.end())
            fail(Code::NameError, s.span, fmt::format("unknown logic '@{}'", l));
          if (!it->second)
            fail(Code::UnsupportedMapping, s.span,
                 fmt::format("logic '{}' is not a forwarding logic", l));
          stage.ops.push_back({MapKind::ReadOrForward, r, l, s.span});
        } else if (s.name == "write") {
          std::string r = atArg(0);
          if (!isa.regFile(r) && r != isa.mem.name && r != isa.pc.name)
            fail(Code::NameError, s.span, fmt::format("unknown resource '@{}'", r));
          stage.ops.push_back({MapKind::Write, r, "", s.span});
        } else {
          fail(Code::UnsupportedMapping, s.span,
               fmt::format("unknown instruction mapping '{}'", s.name));
        }
        return;
      }
      case StKind::If: {
        const Expr& c = *s.cond;
        bool unknownGuard = c.kind == ExKind::Member && c.name == "unknown" &&
                            c.args[0]->kind == ExKind::Ident &&
                            scope.instrVars.count(c.args[0]->name);
        const Stmt* thenS = s.body.empty() ? nullptr : s.body[0].get();
        while (thenS && thenS->kind == StKind::Block && thenS->body.size() == 1)
          thenS = thenS->body[0].get();
        bool raises = thenS && thenS->kind == StKind::Raise && thenS->name == "invalid";
        if (!unknownGuard || !raises)
          fail(Code::UnsupportedMapping, s.span,
               "only 'if (instr.unknown) then raise invalid else ...' is supported in stages");
        stage.ops.push_back({MapKind::UnknownCheck, "", "", s.span});
        for (const auto& b : s.elseBody) walk(*b, st, stage, scope);
        return;
      }
      default:
        fail(Code::UnsupportedMapping, s.span, "unsupported statement in stage definition");
    }
  }
};

}  // namespace

// ------------------------------------------------------------- elaborate ----

SpecModel elaborate(const SpecAst& specIn) {
  SpecAst spec = specIn;  // expansion mutates
  bool hasModels = false;
  for (const auto& isa : spec.isas)
    for (const auto& item : isa.items)
      if (std::holds_alternative<ModelDef>(item) ||
          std::holds_alternative<MacroCallDef>(item))
        hasModels = true;
  if (hasModels) expandMacros(spec);

  if (spec.isas.size() != 1)
    fail(Code::NameError, Span{},
         fmt::format("expected exactly one instruction set architecture, found {}",
                     spec.isas.size()));

  IsaBuilder b;
  b.isa.name = spec.isas[0].name;
  for (const IsaItem& item : spec.isas[0].items)
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ModelDef> || std::is_same_v<T, MacroCallDef>) {
            fail(Code::SyntaxError, d.span, "unexpanded model remains after expansion");
          } else {
            b.add(d);
          }
        },
        item);

  if (b.isa.pc.name.empty())
    fail(Code::NameError, spec.isas[0].span, "architecture declares no program counter");
  if (b.isa.mem.name.empty())
    fail(Code::NameError, spec.isas[0].span, "architecture declares no memory");
  for (const auto& ins : b.isa.instructions) {
    if (ins.encoding.empty())
      fail(Code::NameError, ins.span,
           fmt::format("instruction '{}' has no encoding", ins.name));
    if (!ins.assembly)
      fail(Code::NameError, ins.span,
           fmt::format("instruction '{}' has no assembly definition", ins.name));
  }
  if (!b.discipline.empty()) throw SpecError(std::move(b.discipline));

  SpecModel model;
  model.isa = std::move(b.isa);
  model.sourcePath = spec.sourcePath;

  for (const MiaDef& md : spec.mias) {
    if (!md.isaName.empty() && md.isaName != model.isa.name)
      fail(Code::NameError, md.span,
           fmt::format("microarchitecture '{}' implements unknown architecture '{}'",
                       md.name, md.isaName));
    if (model.mias.count(md.name))
      fail(Code::NameError, md.span,
           fmt::format("microarchitecture '{}' defined twice", md.name));
    MiaBuilder mb{model.isa, md, {}, {}};
    model.mias[md.name] = mb.build();
  }

  if (spec.procs.size() > 1)
    fail(Code::NameError, spec.procs[1].span, "at most one micro processor is supported");
  for (const ProcDef& pd : spec.procs) {
    if (pd.isaName != model.isa.name)
      fail(Code::NameError, pd.span,
           fmt::format("processor implements unknown architecture '{}'", pd.isaName));
    if (!pd.miaName.empty() && !model.mias.count(pd.miaName))
      fail(Code::NameError, pd.span,
           fmt::format("processor names unknown microarchitecture '{}'", pd.miaName));
    Processor proc;
    proc.name = pd.name;
    proc.miaName = pd.miaName;
    ConstEval ce{&model.isa};
    if (pd.start) proc.start = ce.eval(*pd.start) & maskOf(model.isa.pc.width);
    if (pd.stopValue) {
      if (pd.stopReg != model.isa.pc.name)
        fail(Code::NameError, pd.span,
             fmt::format("stop condition must test the program counter '{}'",
                         model.isa.pc.name));
      proc.stopPc = ce.eval(*pd.stopValue) & maskOf(model.isa.pc.width);
    }
    for (const auto& fw : pd.firmware) {
      if (fw.mem != model.isa.mem.name)
        fail(Code::NameError, fw.span, fmt::format("unknown memory '{}'", fw.mem));
      if (fw.units < 1 || fw.units * model.isa.mem.unitWidth > 64)
        fail(Code::TypeError, fw.span, "firmware word width out of range");
      uint64_t addr = ce.eval(*fw.addr) & maskOf(model.isa.mem.addrWidth);
      uint64_t word = ce.eval(*fw.word);
      unsigned width = fw.units * model.isa.mem.unitWidth;
      if (word > maskOf(width))
        fail(Code::EncodingWidthError, fw.span,
             fmt::format("firmware word exceeds {} bits", width));
      proc.firmware.push_back({addr, makeValue(word, width)});
    }
    model.proc = std::move(proc);
  }

  return model;
}

SpecModel loadSpec(const std::string& path) {
  ast::SpecAst spec = parseSpecFile(path);
  return elaborate(spec);
}

}  // namespace pdl::frontend
