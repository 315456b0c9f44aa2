#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pdl/asm.hpp"
#include "pdl/diag.hpp"

namespace pdl::assembler {

using frontend::AccessFn;
using frontend::Field;
using frontend::Format;
using frontend::Isa;

namespace {

std::string lowered(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(c));
  return s;
}

// Operand names (fields or access functions) an expression depends on.
void freeVars(const ast::Expr& e, const Format& fm, std::set<std::string>& out) {
  if (e.kind == ast::ExKind::Ident &&
      (fm.field(e.name) || fm.accessFn(e.name)))
    out.insert(e.name);
  for (const auto& a : e.args) freeVars(*a, fm, out);
  for (const auto& c : e.cases) {
    if (c.pattern) freeVars(*c.pattern, fm, out);
    freeVars(*c.result, fm, out);
  }
}

Type operandType(const Format& fm, const std::string& name) {
  if (const Field* f = fm.field(name)) return f->type;
  return fm.accessFn(name)->type;
}

class SyntaxBuilder {
 public:
  SyntaxBuilder(const Isa& isa, const frontend::Instruction& ins, int idx)
      : isa(isa), ins(ins), fm(isa.formats[ins.format]) {
    out.instr = idx;
    out.mnemonic = lowered(ins.name);
  }

  InstrSyntax run() {
    walk(*ins.assembly);
    validate();
    return std::move(out);
  }

 private:
  const Isa& isa;
  const frontend::Instruction& ins;
  const Format& fm;
  InstrSyntax out;

  void literal(const std::string& text) {
    if (text.empty()) return;
    if (!out.items.empty() && out.items.back().k == Item::K::Literal) {
      out.items.back().text += text;
      return;
    }
    Item it;
    it.k = Item::K::Literal;
    it.text = text;
    out.items.push_back(std::move(it));
  }

  void operand(Operand op) {
    for (const Operand& prev : out.operands)
      if (prev.target == op.target)
        fail(Code::NonInjective, ins.span,
             fmt::format("assembly for '{}' writes operand '{}' twice", ins.name,
                         op.target));
    Item it;
    it.k = Item::K::Operand;
    it.operand = out.operands.size();
    out.operands.push_back(std::move(op));
    out.items.push_back(std::move(it));
  }

  void walk(const ast::Expr& e) {
    using ast::ExKind;
    switch (e.kind) {
      case ExKind::Concat:
        if (e.type.kind == Kind::String) {
          for (const auto& part : e.args) walk(*part);
          return;
        }
        break;
      case ExKind::StrLit:
        literal(e.name);
        return;
      case ExKind::Ident:
        if (e.name == "mnemonic") {
          Item it;
          it.k = Item::K::Mnemonic;
          out.items.push_back(std::move(it));
          return;
        }
        break;
      case ExKind::Call:
        if ((e.name == "register" || e.name == "decimal" || e.name == "hex") &&
            e.args[0]->kind == ExKind::Ident) {
          const std::string& target = e.args[0]->name;
          if (fm.field(target) || fm.accessFn(target)) {
            Operand op;
            op.kind = e.name == "register"  ? Operand::Kind::Register
                      : e.name == "decimal" ? Operand::Kind::Decimal
                                            : Operand::Kind::Hex;
            op.target = target;
            op.isAccessFn = fm.accessFn(target) != nullptr;
            op.type = operandType(fm, target);
            if (op.kind == Operand::Kind::Register) op.regFile = e.name2;
            operand(std::move(op));
            return;
          }
        }
        break;
      default:
        break;
    }
    invertByEnumeration(e);
  }

  // Any other string-valued expression inverts by tabulating its rendering
  // over the full domain of the one operand it reads.
  void invertByEnumeration(const ast::Expr& e) {
    std::set<std::string> vars;
    freeVars(e, fm, vars);
    if (vars.empty()) {
      frontend::Env env;
      env.isa = &isa;
      env.vars["mnemonic"] = frontend::FValue::str(out.mnemonic);
      literal(frontend::evalExpr(e, env).s);
      return;
    }
    if (vars.size() > 1)
      fail(Code::DomainTooLarge, e.span,
           fmt::format("assembly for '{}' mixes operands {} in one expression; "
                       "it cannot be inverted",
                       ins.name, fmt::join(vars, ", ")));
    const std::string& var = *vars.begin();
    Type t = operandType(fm, var);
    if (t.width > 16)
      fail(Code::DomainTooLarge, e.span,
           fmt::format("assembly for '{}' requires enumerating 2^{} values of "
                       "'{}' to invert",
                       ins.name, t.width, var));
    Operand op;
    op.kind = Operand::Kind::Table;
    op.target = var;
    op.isAccessFn = fm.accessFn(var) != nullptr;
    op.type = t;
    std::set<std::string> seen;
    for (uint64_t v = 0; v <= maskOf(t.width); v++) {
      frontend::Env env;
      env.isa = &isa;
      env.vars["mnemonic"] = frontend::FValue::str(out.mnemonic);
      env.vars[var] = frontend::FValue::num(makeValue(v, t.width));
      std::string text = frontend::evalExpr(e, env).s;
      if (text.empty())
        fail(Code::NonInjective, e.span,
             fmt::format("assembly for '{}' renders operand value {} of '{}' "
                         "as an empty string",
                         ins.name, v, var));
      if (!seen.insert(text).second)
        fail(Code::NonInjective, e.span,
             fmt::format("assembly for '{}' renders two values of '{}' as "
                         "'{}'",
                         ins.name, var, text));
      op.table.push_back({std::move(text), v});
    }
    // Longest-first so the matcher is greedy and deterministic.
    std::stable_sort(op.table.begin(), op.table.end(),
                     [](const auto& a, const auto& b) {
                       return a.first.size() > b.first.size();
                     });
    operand(std::move(op));
  }

  void validate() {
    // Two value tokens in a row (with nothing or only whitespace that the
    // writer could omit... whitespace is fine) cannot be split apart again.
    for (size_t i = 0; i + 1 < out.items.size(); i++) {
      bool v0 = out.items[i].k != Item::K::Literal;
      bool v1 = out.items[i + 1].k != Item::K::Literal;
      if (v0 && v1)
        fail(Code::NonInjective, ins.span,
             fmt::format("assembly for '{}' places two operand tokens with no "
                         "separator between them",
                         ins.name));
    }

    // Every encoding field must be recoverable from the line.
    std::set<std::string> determined;
    for (const auto& ec : ins.encoding) determined.insert(ec.field);
    for (const Operand& op : out.operands) {
      if (!op.isAccessFn) {
        determined.insert(op.target);
        continue;
      }
      const AccessFn* fn = fm.accessFn(op.target);
      if (fn->trivial)
        determined.insert(fn->trivialField);
      else
        for (const auto& [fieldName, expr] : fn->encoding) determined.insert(fieldName);
    }
    for (const Field& f : fm.fields)
      if (!determined.count(f.name))
        fail(Code::MissingOperand, ins.span,
             fmt::format("assembly for '{}' never determines field '{}'",
                         ins.name, f.name));
  }
};

}  // namespace

Assembler Assembler::build(const Isa& isa) {
  Assembler a;
  a.isa = &isa;
  a.dec = decode::Decoder::build(isa);
  for (size_t i = 0; i < isa.instructions.size(); i++)
    a.syn.push_back(
        SyntaxBuilder(isa, isa.instructions[i], static_cast<int>(i)).run());
  return a;
}

}  // namespace pdl::assembler
