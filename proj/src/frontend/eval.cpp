#include <cctype>

#include <fmt/format.h>

#include "pdl/diag.hpp"
#include "pdl/frontend.hpp"

namespace pdl::frontend {

using namespace ast;

namespace {

Value evalCast(Value v, Type target) {
  if (target.width == v.width) return Value{v.bits, v.width};
  if (target.width < v.width) return makeValue(v.bits, target.width);
  return target.kind == Kind::SInt ? signExtend(v, target.width)
                                   : zeroExtend(v, target.width);
}

bool signedCompare(const Expr& e) {
  return e.args[0]->type.isSigned() || e.args[1]->type.isSigned();
}

}  // namespace

FValue evalExpr(const Expr& e, const Env& env) {
  switch (e.kind) {
    case ExKind::IntLit:
      return FValue::num(makeValue(e.litValue, e.type.width));
    case ExKind::StrLit:
      return FValue::str(e.name);
    case ExKind::Ident: {
      auto it = env.vars.find(e.name);
      if (it != env.vars.end()) return it->second;
      if (env.isa) {
        auto c = env.isa->constants.find(e.name);
        if (c != env.isa->constants.end())
          return FValue::num(makeValue(c->second.bits, e.type.width));
      }
      fail(Code::NameError, e.span, fmt::format("unbound name '{}'", e.name));
    }
    case ExKind::EnumRef: {
      const Enum& en = env.isa->enums.at(e.name);
      const Value* v = en.member(e.name2);
      if (!v) fail(Code::NameError, e.span, fmt::format("no member '{}'", e.name2));
      return FValue::num(*v);
    }
    case ExKind::Call: {
      if (e.name == "register") {
        Value idx = evalExpr(*e.args[0], env).v;
        std::string prefix = e.name2;
        for (auto& c : prefix) c = static_cast<char>(std::tolower(c));
        return FValue::str(fmt::format("{}{}", prefix, idx.bits));
      }
      if (e.name == "decimal") {
        FValue a = evalExpr(*e.args[0], env);
        if (e.args[0]->type.isSigned()) return FValue::str(fmt::format("{}", asSigned(a.v)));
        return FValue::str(fmt::format("{}", a.v.bits));
      }
      if (e.name == "hex") {
        FValue a = evalExpr(*e.args[0], env);
        return FValue::str(fmt::format("0x{:x}", a.v.bits));
      }
      if (env.isa) {
        auto it = env.isa->functions.find(e.name);
        if (it != env.isa->functions.end()) {
          const Function& fn = it->second;
          Env inner;
          inner.isa = env.isa;
          for (size_t i = 0; i < fn.params.size(); i++)
            inner.vars[fn.params[i].first] = evalExpr(*e.args[i], env);
          return evalExpr(*fn.body, inner);
        }
      }
      fail(Code::NameError, e.span,
           fmt::format("'{}' is not a pure function", e.name));
    }
    case ExKind::Unary: {
      if (e.op == "!") {
        FValue a = evalExpr(*e.args[0], env);
        return FValue::num(makeValue(a.v.bits ^ 1, 1));
      }
      FValue a = evalExpr(*e.args[0], env);
      return FValue::num(makeValue(~a.v.bits + 1, a.v.width));
    }
    case ExKind::Binary: {
      const std::string& op = e.op;
      Value a = evalExpr(*e.args[0], env).v;
      Value b = evalExpr(*e.args[1], env).v;
      unsigned w = a.width;
      auto boolv = [](bool x) { return FValue::num(makeValue(x ? 1 : 0, 1)); };
      if (op == "+") return FValue::num(makeValue(a.bits + b.bits, w));
      if (op == "-") return FValue::num(makeValue(a.bits - b.bits, w));
      if (op == "*") return FValue::num(makeValue(a.bits * b.bits, w));
      if (op == "&") return FValue::num(makeValue(a.bits & b.bits, w));
      if (op == "|") return FValue::num(makeValue(a.bits | b.bits, w));
      if (op == "^") return FValue::num(makeValue(a.bits ^ b.bits, w));
      if (op == "%") {
        if (b.bits == 0) return FValue::num(a);  // remainder convention: x % 0 = x
        if (signedCompare(e)) {
          int64_t r = asSigned(a) % asSigned(b);
          return FValue::num(makeValue(static_cast<uint64_t>(r), w));
        }
        return FValue::num(makeValue(a.bits % b.bits, w));
      }
      if (op == "<<") {
        uint64_t amt = b.bits;
        return FValue::num(amt >= w ? makeValue(0, w) : makeValue(a.bits << amt, w));
      }
      if (op == ">>") {
        uint64_t amt = b.bits;
        if (e.args[0]->type.isSigned()) {
          int64_t sv = asSigned(a);
          if (amt >= w) amt = w - 1;
          return FValue::num(makeValue(static_cast<uint64_t>(sv >> amt), w));
        }
        return FValue::num(amt >= w ? makeValue(0, w) : makeValue(a.bits >> amt, w));
      }
      if (op == "=") return boolv(a.bits == b.bits);
      if (op == "!=") return boolv(a.bits != b.bits);
      bool lt, le;
      if (signedCompare(e)) {
        lt = asSigned(a) < asSigned(b);
        le = asSigned(a) <= asSigned(b);
      } else {
        lt = a.bits < b.bits;
        le = a.bits <= b.bits;
      }
      if (op == "<") return boolv(lt);
      if (op == "<=") return boolv(le);
      if (op == ">") return boolv(!le);
      if (op == ">=") return boolv(!lt);
      fail(Code::TypeError, e.span, fmt::format("unknown operator '{}'", op));
    }
    case ExKind::Cast: {
      FValue a = evalExpr(*e.args[0], env);
      if (e.type.kind == Kind::String) return a;
      return FValue::num(evalCast(a.v, e.type));
    }
    case ExKind::Concat: {
      bool anyStr = e.type.kind == Kind::String;
      if (anyStr) {
        std::string s;
        for (const auto& part : e.args) s += evalExpr(*part, env).s;
        return FValue::str(std::move(s));
      }
      FValue acc = evalExpr(*e.args[0], env);
      for (size_t i = 1; i < e.args.size(); i++)
        acc = FValue::num(concatValue(acc.v, evalExpr(*e.args[i], env).v));
      return acc;
    }
    case ExKind::Slice: {
      Value v = evalExpr(*e.args[0], env).v;
      Value hi = evalExpr(*e.args[1], env).v;
      Value lo = evalExpr(*e.args[2], env).v;
      return FValue::num(sliceValue(v, static_cast<unsigned>(hi.bits),
                                    static_cast<unsigned>(lo.bits)));
    }
    case ExKind::IfExpr: {
      Value c = evalExpr(*e.args[0], env).v;
      return evalExpr(c.bits ? *e.args[1] : *e.args[2], env);
    }
    case ExKind::Match: {
      Value scrut = evalExpr(*e.args[0], env).v;
      for (const auto& mc : e.cases) {
        if (!mc.pattern) return evalExpr(*mc.result, env);
        if (evalExpr(*mc.pattern, env).v.bits == scrut.bits)
          return evalExpr(*mc.result, env);
      }
      fail(Code::TypeError, e.span, "match without applicable case");
    }
    default:
      fail(Code::TypeError, e.span, "expression is not pure");
  }
}

Value evalAccessFn(const Isa& isa, const Format& fmt, const AccessFn& fn,
                   const std::map<std::string, Value>& fields) {
  (void)fmt;
  Env env;
  env.isa = &isa;
  for (const auto& [name, v] : fields) env.vars[name] = FValue::num(v);
  return evalExpr(*fn.value, env).v;
}

}  // namespace pdl::frontend
