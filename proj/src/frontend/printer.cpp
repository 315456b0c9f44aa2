#include <string>

#include <fmt/format.h>

#include "pdl/ast.hpp"
#include "pdl/frontend.hpp"

namespace pdl::frontend {

using namespace ast;

namespace {

struct Printer {
  std::string out;
  int indent = 0;

  void line(const std::string& s) {
    out.append(static_cast<size_t>(indent) * 2, ' ');
    out += s;
    out += '\n';
  }

  static std::string lit(uint64_t value, unsigned litWidth) {
    if (litWidth == 0) return fmt::format("{}", value);
    if (litWidth % 4 == 0) return fmt::format("0x{:0{}x}", value, litWidth / 4);
    std::string bits;
    for (unsigned i = litWidth; i-- > 0;) bits += ((value >> i) & 1) ? '1' : '0';
    return "0b" + bits;
  }

  static int precOf(const std::string& op) {
    if (op == "*" || op == "%") return 10;
    if (op == "+" || op == "-") return 9;
    if (op == "<<" || op == ">>") return 8;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 7;
    if (op == "=" || op == "!=") return 6;
    if (op == "&") return 5;
    if (op == "^") return 4;
    if (op == "|") return 3;
    return -1;
  }

  std::string type(const TypeAst& t) {
    if (!t.width) return t.name;
    return fmt::format("{}<{}>", t.name, expr(*t.width, 0));
  }

  // `prec` is the loosest precedence the context accepts without parens.
  std::string expr(const Expr& e, int prec) {
    switch (e.kind) {
      case ExKind::IntLit:
        return lit(e.litValue, e.litWidth);
      case ExKind::StrLit:
        return fmt::format("\"{}\"", e.name);
      case ExKind::Ident:
        return e.name;
      case ExKind::EnumRef:
        return fmt::format("{}::{}", e.name, e.name2);
      case ExKind::Call: {
        std::string args;
        for (size_t i = 0; i < e.args.size(); i++) {
          if (i) args += ", ";
          args += expr(*e.args[i], 0);
        }
        return fmt::format("{}({})", e.name, args);
      }
      case ExKind::MemRef: {
        std::string units = e.name2.empty() ? fmt::format("{}", e.litValue) : e.name2;
        return fmt::format("{}<{}>({})", e.name, units, expr(*e.args[0], 0));
      }
      case ExKind::Member:
        return fmt::format("{}.{}", expr(*e.args[0], 100), e.name);
      case ExKind::Unary: {
        std::string s = fmt::format("{}{}", e.op, expr(*e.args[0], 100));
        return prec > 11 ? "(" + s + ")" : s;
      }
      case ExKind::Binary: {
        int p = precOf(e.op);
        std::string s = fmt::format("{} {} {}", expr(*e.args[0], p), e.op,
                                    expr(*e.args[1], p + 1));
        return p < prec ? "(" + s + ")" : s;
      }
      case ExKind::Cast: {
        std::string s = fmt::format("{} as {}", expr(*e.args[0], 100), type(*e.castType));
        return prec > 11 ? "(" + s + ")" : s;
      }
      case ExKind::Concat: {
        std::string s;
        for (size_t i = 0; i < e.args.size(); i++) {
          if (i) s += ", ";
          s += expr(*e.args[i], 0);
        }
        return "(" + s + ")";
      }
      case ExKind::Slice:
        return fmt::format("{}({}..{})", expr(*e.args[0], 100), expr(*e.args[1], 0),
                           expr(*e.args[2], 0));
      case ExKind::IfExpr: {
        std::string s = fmt::format("if {} then {} else {}", expr(*e.args[0], 0),
                                    expr(*e.args[1], 0), expr(*e.args[2], 0));
        return prec > 0 ? "(" + s + ")" : s;
      }
      case ExKind::Match: {
        std::string s = fmt::format("match {} with {{ ", expr(*e.args[0], 0));
        for (size_t i = 0; i < e.cases.size(); i++) {
          if (i) s += ", ";
          s += e.cases[i].pattern ? expr(*e.cases[i].pattern, 0) : std::string("_");
          s += " => ";
          s += expr(*e.cases[i].result, 0);
        }
        return s + " }";
      }
      case ExKind::AtRef:
        return "@" + e.name;
    }
    return "?";
  }

  void stmt(const Stmt& s) {
    switch (s.kind) {
      case StKind::Assign:
        line(fmt::format("{} := {}", expr(*s.lhs, 0), expr(*s.value, 0)));
        break;
      case StKind::Let:
        line(fmt::format("let {} = {} in", s.name, expr(*s.value, 0)));
        indent++;
        stmt(*s.body[0]);
        indent--;
        break;
      case StKind::If:
        line(fmt::format("if {} then", expr(*s.cond, 0)));
        indent++;
        stmt(*s.body[0]);
        indent--;
        if (!s.elseBody.empty()) {
          line("else");
          indent++;
          stmt(*s.elseBody[0]);
          indent--;
        }
        break;
      case StKind::Block:
        line("{");
        indent++;
        for (const auto& b : s.body) stmt(*b);
        indent--;
        line("}");
        break;
      case StKind::Raise:
        line(fmt::format("raise {}", s.name));
        break;
      case StKind::MethodCall: {
        std::string args;
        for (size_t i = 0; i < s.args.size(); i++) {
          if (i) args += ", ";
          args += expr(*s.args[i], 0);
        }
        if (s.args.empty())
          line(fmt::format("{}.{}", expr(*s.recv, 100), s.name));
        else
          line(fmt::format("{}.{}( {} )", expr(*s.recv, 100), s.name, args));
        break;
      }
      case StKind::MatchStmt:
        line(fmt::format("match {} with {{", expr(*s.value, 0)));
        indent++;
        for (size_t i = 0; i < s.cases.size(); i++) {
          const auto& c = s.cases[i];
          line(fmt::format("{} =>", c.pattern ? expr(*c.pattern, 0) : std::string("_")));
          indent++;
          stmt(*c.body);
          indent--;
          if (i + 1 < s.cases.size()) line(",");
        }
        indent--;
        line("}");
        break;
    }
  }

  void tokens(const std::vector<Token>& toks) {
    std::string s;
    for (const Token& t : toks) {
      if (!s.empty()) s += ' ';
      switch (t.kind) {
        case Tok::Ident:
          s += t.text;
          break;
        case Tok::Int:
          s += lit(t.value, t.litWidth);
          break;
        case Tok::Str:
          s += fmt::format("\"{}\"", t.text);
          break;
        case Tok::MacroId:
          s += "$" + t.text;
          break;
        case Tok::Punct:
          s += t.text;
          break;
        case Tok::End:
          break;
      }
    }
    line(s);
  }

  void item(const IsaItem& it) {
    if (const auto* d = std::get_if<ConstantDef>(&it)) {
      line(fmt::format("constant {} = {}", d->name, expr(*d->value, 0)));
    } else if (const auto* d = std::get_if<UsingDef>(&it)) {
      line(fmt::format("using {} = {}", d->name, type(d->type)));
    } else if (const auto* d = std::get_if<RegFileDef>(&it)) {
      for (const auto& z : d->zeroIndexes)
        line(fmt::format("[{}({}) = 0]", d->name, expr(*z, 0)));
      line(fmt::format("register file {} : {} -> {}", d->name, type(d->indexType),
                       type(d->elemType)));
    } else if (const auto* d = std::get_if<PcDef>(&it)) {
      if (d->semantics == PcSemantics::Next) line("[next]");
      if (d->semantics == PcSemantics::NextNext) line("[next next]");
      line(fmt::format("program counter {} : {}", d->name, type(d->type)));
    } else if (const auto* d = std::get_if<MemDef>(&it)) {
      line(d->littleEndian ? "[littleEndian]" : "[bigEndian]");
      line(fmt::format("memory {} : {} -> {}", d->name, type(d->addrType),
                       type(d->unitType)));
    } else if (const auto* d = std::get_if<FormatDef>(&it)) {
      line(fmt::format("format {} : {} = {{", d->name, type(d->wordType)));
      indent++;
      size_t total = d->fields.size() + d->accessFns.size();
      size_t n = 0;
      auto sep = [&]() { return ++n < total ? "," : ""; };
      for (const auto& f : d->fields) {
        if (f.type) {
          line(fmt::format("{} : {}{}", f.name, type(*f.type), sep()));
        } else {
          std::string rs;
          for (size_t i = 0; i < f.ranges.size(); i++) {
            if (i) rs += ", ";
            rs += expr(*f.ranges[i].hi, 0);
            if (f.ranges[i].lo) rs += ".." + expr(*f.ranges[i].lo, 0);
          }
          line(fmt::format("{} [{}]{}", f.name, rs, sep()));
        }
      }
      for (const auto& fn : d->accessFns) {
        line(fmt::format("{} = {}{}", fn.name, expr(*fn.value, 0),
                         (fn.predicate || !fn.encoding.empty() || n + 1 < total) ? "," : ""));
        n++;
        if (fn.predicate)
          line(fmt::format("predicate {} = {}{}", fn.name, expr(*fn.predicate, 0),
                           !fn.encoding.empty() ? "," : ""));
        if (!fn.encoding.empty()) {
          std::string es;
          for (size_t i = 0; i < fn.encoding.size(); i++) {
            if (i) es += ", ";
            es += fmt::format("{} = {}", fn.encoding[i].first,
                              expr(*fn.encoding[i].second, 0));
          }
          line(fmt::format("encoding {} = {{ {} }}", fn.name, es));
        }
      }
      indent--;
      line("}");
    } else if (const auto* d = std::get_if<InstructionDef>(&it)) {
      line(fmt::format("instruction {} : {} =", d->name, d->formatName));
      indent++;
      stmt(*d->behavior);
      indent--;
    } else if (const auto* d = std::get_if<EncodingDef>(&it)) {
      std::string es;
      for (size_t i = 0; i < d->fields.size(); i++) {
        if (i) es += ", ";
        es += fmt::format("{} = {}", d->fields[i].first, expr(*d->fields[i].second, 0));
      }
      line(fmt::format("encoding {} = {{ {} }}", d->instrName, es));
    } else if (const auto* d = std::get_if<AssemblyDef>(&it)) {
      std::string names;
      for (size_t i = 0; i < d->instrNames.size(); i++) {
        if (i) names += ", ";
        names += d->instrNames[i];
      }
      line(fmt::format("assembly {} = {}", names, expr(*d->format, 0)));
    } else if (const auto* d = std::get_if<EnumDef>(&it)) {
      std::string ms;
      for (size_t i = 0; i < d->members.size(); i++) {
        if (i) ms += ", ";
        ms += d->members[i].first;
        if (d->members[i].second) ms += " = " + expr(*d->members[i].second, 0);
      }
      line(fmt::format("enumeration {} : {} = {{ {} }}", d->name, type(d->type), ms));
    } else if (const auto* d = std::get_if<FunctionDef>(&it)) {
      std::string ps;
      for (size_t i = 0; i < d->params.size(); i++) {
        if (i) ps += ", ";
        ps += fmt::format("{} : {}", d->params[i].first, type(d->params[i].second));
      }
      line(fmt::format("function {} ({}) -> {} = {}", d->name, ps, type(d->result),
                       expr(*d->body, 0)));
    } else if (const auto* d = std::get_if<ModelDef>(&it)) {
      std::string ps;
      for (size_t i = 0; i < d->params.size(); i++) {
        if (i) ps += ", ";
        ps += fmt::format("{} : {}", d->params[i].first, synTypeName(d->params[i].second));
      }
      line(fmt::format("model {} ({}) : {} = {{", d->name, ps, synTypeName(d->result)));
      indent++;
      tokens(d->body);
      indent--;
      line("}");
    } else if (const auto* d = std::get_if<MacroCallDef>(&it)) {
      std::string as;
      Printer sub;
      for (size_t i = 0; i < d->args.size(); i++) {
        if (i) as += " ; ";
        sub.out.clear();
        sub.tokens(d->args[i]);
        std::string s = sub.out;
        if (!s.empty() && s.back() == '\n') s.pop_back();
        as += s;
      }
      line(fmt::format("${}({})", d->name, as));
    }
  }
};

}  // namespace

std::string printSpec(const SpecAst& spec) {
  Printer p;
  for (const IsaDef& isa : spec.isas) {
    p.line(fmt::format("instruction set architecture {} = {{", isa.name));
    p.indent++;
    for (const auto& it : isa.items) {
      p.item(it);
      p.line("");
    }
    p.indent--;
    p.line("}");
    p.line("");
  }
  for (const MiaDef& m : spec.mias) {
    if (m.dataBusWidth) p.line(fmt::format("[dataBusWidth = {}]", m.dataBusWidth));
    if (m.isaName.empty())
      p.line(fmt::format("micro architecture {} = {{", m.name));
    else
      p.line(fmt::format("micro architecture {} implements {} = {{", m.name, m.isaName));
    p.indent++;
    for (const auto& l : m.logics) {
      if (l.forwarding) p.line("[forwarding]");
      p.line(fmt::format("logic {}", l.name));
    }
    for (const auto& st : m.stages) {
      if (st.outName.empty())
        p.line(fmt::format("stage {} =", st.name));
      else
        p.line(fmt::format("stage {} -> ({} : {}) =", st.name, st.outName,
                           p.type(st.outType)));
      p.indent++;
      p.stmt(*st.body);
      p.indent--;
    }
    p.indent--;
    p.line("}");
    p.line("");
  }
  for (const ProcDef& d : spec.procs) {
    std::string with = d.miaName.empty() ? "" : fmt::format(" with {}", d.miaName);
    p.line(fmt::format("micro processor {} implements {}{} = {{", d.name, d.isaName, with));
    p.indent++;
    if (d.start) p.line(fmt::format("start = {}", p.expr(*d.start, 0)));
    if (d.stopValue)
      p.line(fmt::format("stop = {} = {}", d.stopReg, p.expr(*d.stopValue, 0)));
    if (!d.firmware.empty()) {
      p.line("firmware = {");
      p.indent++;
      for (const auto& f : d.firmware)
        p.line(fmt::format("{}<{}>( {} ) := {}", f.mem, f.units, p.expr(*f.addr, 0),
                           p.expr(*f.word, 0)));
      p.indent--;
      p.line("}");
    }
    p.indent--;
    p.line("}");
  }
  return p.out;
}

}  // namespace pdl::frontend
