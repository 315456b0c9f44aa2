#include "parser.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pdl/diag.hpp"

namespace pdl::frontend {

using namespace ast;

namespace {

ExprP mk(ExKind k, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->span = s;
  return e;
}

StmtP mkS(StKind k, Span s) {
  auto st = std::make_shared<Stmt>();
  st->kind = k;
  st->span = s;
  return st;
}

int precOf(const std::string& op) {
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

bool isBinOpToken(const Token& t) {
  return t.kind == Tok::Punct && precOf(t.text) > 0;
}

const char* synNames[] = {"Id", "Ex", "Stat", "BinOp", "Bin", "IsaDefs", "Encs", "CallEx"};

}  // namespace

void Parser::err(const std::string& msg) const {
  fail(Code::SyntaxError, cur().span, msg);
}

void Parser::expectPunct(const char* p) {
  if (!cur().isPunct(p)) err(fmt::format("expected '{}'", p));
  take();
}

bool Parser::acceptPunct(const char* p) {
  if (cur().isPunct(p)) {
    take();
    return true;
  }
  return false;
}

bool Parser::acceptIdent(const char* kw) {
  if (cur().isIdent(kw)) {
    take();
    return true;
  }
  return false;
}

std::string Parser::expectIdent(const char* what) {
  if (cur().kind != Tok::Ident) err(fmt::format("expected {}", what));
  return take().text;
}

void Parser::expectKeyword(const char* kw) {
  if (!cur().isIdent(kw)) err(fmt::format("expected '{}'", kw));
  take();
}

// ------------------------------------------------------------------ types --

TypeAst Parser::parseType() {
  TypeAst t;
  t.span = cur().span;
  t.name = expectIdent("type name");
  if (acceptPunct("<")) {
    // Width expressions stop below comparison precedence so the closing '>'
    // is not mistaken for an operator.
    t.width = parseBinary(8);
    expectPunct(">");
  }
  return t;
}

// ------------------------------------------------------------ expressions --

ExprP Parser::parseExprAll() {
  ExprP e = parseExpr();
  if (!atEnd()) err("trailing tokens after expression");
  return e;
}

ExprP Parser::parseExpr() { return parseBinary(0); }

ExprP Parser::parseBinary(int minPrec) {
  ExprP lhs = parseUnary();
  while (isBinOpToken(cur()) && precOf(cur().text) >= minPrec) {
    Token op = take();
    ExprP rhs = parseBinary(precOf(op.text) + 1);
    ExprP e = mk(ExKind::Binary, op.span);
    e->op = op.text;
    e->args = {lhs, rhs};
    lhs = e;
  }
  return lhs;
}

ExprP Parser::parseUnary() {
  if (cur().isPunct("-") || cur().isPunct("!")) {
    Token op = take();
    ExprP e = mk(ExKind::Unary, op.span);
    e->op = op.text;
    e->args = {parseUnary()};
    return e;
  }
  return parsePostfix();
}

ExprP Parser::parsePostfix() {
  ExprP e = parsePrimary();
  for (;;) {
    if (cur().isPunct(".") && peek().kind == Tok::Ident) {
      Span s = take().span;
      ExprP m = mk(ExKind::Member, s);
      m->name = expectIdent("member name");
      m->args = {e};
      e = m;
      continue;
    }
    if (cur().isIdent("as")) {
      Span s = take().span;
      ExprP c = mk(ExKind::Cast, s);
      c->castType = parseType();
      c->args = {e};
      e = c;
      continue;
    }
    // A parenthesized postfix is a bit slice; method-call argument lists on
    // members are handled by the statement parser.
    if (cur().isPunct("(") && e->kind != ExKind::Member) {
      Span s = take().span;
      ExprP hi = parseExpr();
      expectPunct("..");
      ExprP lo = parseExpr();
      expectPunct(")");
      ExprP sl = mk(ExKind::Slice, s);
      sl->args = {e, hi, lo};
      e = sl;
      continue;
    }
    return e;
  }
}

ExprP Parser::parsePrimary() {
  Span s = cur().span;
  if (cur().kind == Tok::Int) {
    Token t = take();
    ExprP e = mk(ExKind::IntLit, s);
    e->litValue = t.value;
    e->litWidth = t.litWidth;
    return e;
  }
  if (cur().kind == Tok::Str) {
    ExprP e = mk(ExKind::StrLit, s);
    e->name = take().text;
    return e;
  }
  if (cur().kind == Tok::MacroId) return expandExprCall();
  if (cur().isPunct("@")) {
    take();
    ExprP e = mk(ExKind::AtRef, s);
    e->name = expectIdent("resource name after '@'");
    return e;
  }
  if (cur().isPunct("(")) {
    take();
    ExprP first = parseExpr();
    if (acceptPunct(")")) return first;
    std::vector<ExprP> parts{first};
    while (acceptPunct(",")) parts.push_back(parseExpr());
    expectPunct(")");
    ExprP e = mk(ExKind::Concat, s);
    e->args = std::move(parts);
    return e;
  }
  if (cur().kind != Tok::Ident) err("expected expression");

  if (cur().isIdent("if")) {
    take();
    ExprP cond = parseExpr();
    expectKeyword("then");
    ExprP thenE = parseExpr();
    expectKeyword("else");
    ExprP elseE = parseExpr();
    ExprP e = mk(ExKind::IfExpr, s);
    e->args = {cond, thenE, elseE};
    return e;
  }
  if (cur().isIdent("match")) {
    take();
    ExprP scrut = parseExpr();
    expectKeyword("with");
    expectPunct("{");
    ExprP e = mk(ExKind::Match, s);
    e->args = {scrut};
    do {
      MatchCase mc;
      if (cur().isIdent("_")) {
        take();
      } else {
        mc.pattern = parseExpr();
      }
      expectPunct("=>");
      mc.result = parseExpr();
      e->cases.push_back(std::move(mc));
    } while (acceptPunct(","));
    expectPunct("}");
    return e;
  }

  std::string name = take().text;
  if (acceptPunct("::")) {
    ExprP e = mk(ExKind::EnumRef, s);
    e->name = name;
    e->name2 = expectIdent("enumeration member");
    return e;
  }
  // Memory access: NAME<units>(addr). Distinguished from comparison by
  // lookahead for `< tok > (`.
  if (cur().isPunct("<") &&
      (peek(1).kind == Tok::Int || peek(1).kind == Tok::Ident) &&
      peek(2).isPunct(">") && peek(3).isPunct("(")) {
    take();
    Token units = take();
    ExprP e = mk(ExKind::MemRef, s);
    e->name = name;
    if (units.kind == Tok::Int) {
      e->litValue = units.value;
    } else {
      e->name2 = units.text;  // constant name, resolved at elaboration
    }
    take();  // >
    expectPunct("(");
    e->args = {parseExpr()};
    expectPunct(")");
    return e;
  }
  if (cur().isPunct("(")) {
    take();
    ExprP first = parseExpr();
    if (cur().isPunct("..")) {
      take();
      ExprP lo = parseExpr();
      expectPunct(")");
      ExprP base = mk(ExKind::Ident, s);
      base->name = name;
      ExprP sl = mk(ExKind::Slice, s);
      sl->args = {base, first, lo};
      return sl;
    }
    ExprP e = mk(ExKind::Call, s);
    e->name = name;
    e->args = {first};
    while (acceptPunct(",")) e->args.push_back(parseExpr());
    expectPunct(")");
    return e;
  }
  ExprP e = mk(ExKind::Ident, s);
  e->name = name;
  return e;
}

// ------------------------------------------------------------- statements --

ast::StmtP Parser::parseStmtAll() {
  StmtP s = parseStmt();
  if (!atEnd()) err("trailing tokens after statement");
  return s;
}

StmtP Parser::parseBlock() {
  Span s = cur().span;
  expectPunct("{");
  StmtP b = mkS(StKind::Block, s);
  while (!cur().isPunct("}")) {
    if (atEnd()) err("unterminated block");
    b->body.push_back(parseStmt());
  }
  take();
  return b;
}

StmtP Parser::parseStmt() {
  Span s = cur().span;
  if (cur().isPunct("{")) return parseBlock();
  if (cur().kind == Tok::MacroId) return expandStmtCall();
  if (cur().isIdent("let")) {
    take();
    StmtP st = mkS(StKind::Let, s);
    st->name = expectIdent("binding name");
    expectPunct("=");
    st->value = parseExpr();
    expectKeyword("in");
    st->body.push_back(parseStmt());
    return st;
  }
  if (cur().isIdent("if")) {
    take();
    StmtP st = mkS(StKind::If, s);
    st->cond = parseExpr();
    expectKeyword("then");
    st->body.push_back(parseStmt());
    if (acceptIdent("else")) st->elseBody.push_back(parseStmt());
    return st;
  }
  if (cur().isIdent("raise")) {
    take();
    StmtP st = mkS(StKind::Raise, s);
    st->name = expectIdent("exception name");
    return st;
  }
  if (cur().isIdent("match")) {
    take();
    StmtP st = mkS(StKind::MatchStmt, s);
    st->value = parseExpr();
    expectKeyword("with");
    expectPunct("{");
    do {
      StmtMatchCase mc;
      if (cur().isIdent("_")) {
        take();
      } else {
        mc.pattern = parseExpr();
      }
      expectPunct("=>");
      mc.body = parseStmt();
      st->cases.push_back(std::move(mc));
    } while (acceptPunct(","));
    expectPunct("}");
    return st;
  }

  ExprP e = parseExpr();
  if (cur().isPunct(":=")) {
    take();
    StmtP st = mkS(StKind::Assign, s);
    st->lhs = e;
    st->value = parseExpr();
    return st;
  }
  if (e->kind == ExKind::Member) {
    StmtP st = mkS(StKind::MethodCall, s);
    st->recv = e->args[0];
    st->name = e->name;
    if (acceptPunct("(")) {
      if (!cur().isPunct(")")) {
        st->args.push_back(parseExpr());
        while (acceptPunct(",")) st->args.push_back(parseExpr());
      }
      expectPunct(")");
    }
    return st;
  }
  err("expected ':=' after expression statement");
}

// ------------------------------------------------------------ annotations --

std::vector<Token> Parser::captureBalancedBraces() {
  expectPunct("{");
  std::vector<Token> out;
  int depth = 1;
  for (;;) {
    if (atEnd()) err("unterminated '{'");
    if (cur().isPunct("{")) depth++;
    if (cur().isPunct("}")) {
      depth--;
      if (depth == 0) {
        take();
        return out;
      }
    }
    out.push_back(take());
  }
}

std::vector<std::vector<Token>> Parser::captureMacroArgs() {
  expectPunct("(");
  std::vector<std::vector<Token>> args;
  std::vector<Token> curArg;
  int depth = 1;
  for (;;) {
    if (atEnd()) err("unterminated instantiation argument list");
    if (cur().isPunct("(") || cur().isPunct("{") || cur().isPunct("[")) depth++;
    if (cur().isPunct(")") || cur().isPunct("}") || cur().isPunct("]")) {
      depth--;
      if (depth == 0) {
        take();
        if (!curArg.empty() || !args.empty()) args.push_back(std::move(curArg));
        return args;
      }
    }
    if (depth == 1 && cur().isPunct(";")) {
      take();
      args.push_back(std::move(curArg));
      curArg.clear();
      continue;
    }
    curArg.push_back(take());
  }
}

// ------------------------------------------------------------ definitions --

std::vector<IsaItem> Parser::parseItemsAll() {
  std::vector<IsaItem> out = parseItems(false);
  if (!atEnd()) err("trailing tokens after definitions");
  return out;
}

std::vector<std::pair<std::string, ExprP>> Parser::parseEncsAll() {
  std::vector<std::pair<std::string, ExprP>> out;
  do {
    std::string field = expectIdent("field name");
    expectPunct("=");
    out.push_back({field, parseExpr()});
  } while (acceptPunct(","));
  if (!atEnd()) err("trailing tokens after field encodings");
  return out;
}

std::vector<IsaItem> Parser::parseItems(bool topIsaBody) {
  std::vector<IsaItem> out;
  std::vector<std::vector<Token>> annos;
  for (;;) {
    if (topIsaBody ? cur().isPunct("}") : atEnd()) {
      if (!annos.empty()) err("annotation is not attached to a definition");
      return out;
    }
    parseIsaItem(out, annos);
  }
}

void Parser::parseIsaItem(std::vector<IsaItem>& out,
                          std::vector<std::vector<Token>>& annos) {
  Span s = cur().span;
  if (cur().isPunct("[")) {
    take();
    std::vector<Token> group;
    int depth = 1;
    for (;;) {
      if (atEnd()) err("unterminated annotation");
      if (cur().isPunct("[")) depth++;
      if (cur().isPunct("]")) {
        depth--;
        if (depth == 0) {
          take();
          break;
        }
      }
      group.push_back(take());
    }
    annos.push_back(std::move(group));
    return;
  }

  auto takeAnnos = [&]() {
    auto a = std::move(annos);
    annos.clear();
    return a;
  };
  auto noAnnos = [&](const char* what) {
    if (!annos.empty())
      fail(Code::SyntaxError, s, fmt::format("{} does not take annotations", what));
  };

  if (cur().kind == Tok::MacroId) {
    expandItemsCall(out);
    noAnnos("a model instantiation");
    return;
  }
  if (cur().kind != Tok::Ident) err("expected a definition");
  const std::string& kw = cur().text;

  if (kw == "constant") {
    noAnnos("constant");
    take();
    ConstantDef d;
    d.span = s;
    d.name = expectIdent("constant name");
    expectPunct("=");
    d.value = parseExpr();
    out.push_back(std::move(d));
  } else if (kw == "using") {
    noAnnos("using");
    take();
    UsingDef d;
    d.span = s;
    d.name = expectIdent("alias name");
    expectPunct("=");
    d.type = parseType();
    out.push_back(std::move(d));
  } else if (kw == "register") {
    take();
    expectKeyword("file");
    RegFileDef d;
    d.span = s;
    d.name = expectIdent("register file name");
    expectPunct(":");
    d.indexType = parseType();
    expectPunct("->");
    d.elemType = parseType();
    // [X(0) = 0] annotations pin hardwired-zero entries.
    for (auto& a : takeAnnos()) {
      Parser sub(withEnd(a), path);
      ExprP e = sub.parseExprAll();
      if (e->kind != ExKind::Binary || e->op != "=" ||
          e->args[0]->kind != ExKind::Call || e->args[0]->name != d.name ||
          e->args[1]->kind != ExKind::IntLit || e->args[1]->litValue != 0)
        fail(Code::SyntaxError, s, "register file annotation must have the form [NAME(i) = 0]");
      d.zeroIndexes.push_back(e->args[0]->args[0]);
    }
    out.push_back(std::move(d));
  } else if (kw == "program") {
    take();
    expectKeyword("counter");
    PcDef d;
    d.span = s;
    d.name = expectIdent("program counter name");
    expectPunct(":");
    d.type = parseType();
    for (auto& a : takeAnnos()) {
      if (a.size() == 1 && a[0].isIdent("next")) {
        d.semantics = PcSemantics::Next;
      } else if (a.size() == 2 && a[0].isIdent("next") && a[1].isIdent("next")) {
        d.semantics = PcSemantics::NextNext;
      } else {
        fail(Code::SyntaxError, s, "program counter annotation must be [next] or [next next]");
      }
    }
    out.push_back(std::move(d));
  } else if (kw == "memory") {
    take();
    MemDef d;
    d.span = s;
    d.name = expectIdent("memory name");
    expectPunct(":");
    d.addrType = parseType();
    expectPunct("->");
    d.unitType = parseType();
    for (auto& a : takeAnnos()) {
      if (a.size() == 1 && a[0].isIdent("littleEndian")) {
        d.littleEndian = true;
      } else if (a.size() == 1 && a[0].isIdent("bigEndian")) {
        d.littleEndian = false;
      } else {
        fail(Code::SyntaxError, s, "memory annotation must be [littleEndian] or [bigEndian]");
      }
    }
    out.push_back(std::move(d));
  } else if (kw == "format") {
    noAnnos("format");
    out.push_back(parseFormat());
  } else if (kw == "instruction") {
    noAnnos("instruction");
    take();
    InstructionDef d;
    d.span = s;
    d.name = expectIdent("instruction name");
    expectPunct(":");
    d.formatName = expectIdent("format name");
    expectPunct("=");
    d.behavior = parseStmt();
    out.push_back(std::move(d));
  } else if (kw == "encoding") {
    noAnnos("encoding");
    take();
    EncodingDef d;
    d.span = s;
    d.instrName = expectIdent("instruction name");
    expectPunct("=");
    expectPunct("{");
    do {
      std::string f = expectIdent("field name");
      expectPunct("=");
      d.fields.push_back({f, parseExpr()});
    } while (acceptPunct(","));
    expectPunct("}");
    out.push_back(std::move(d));
  } else if (kw == "assembly") {
    noAnnos("assembly");
    take();
    AssemblyDef d;
    d.span = s;
    d.instrNames.push_back(expectIdent("instruction name"));
    while (acceptPunct(",")) d.instrNames.push_back(expectIdent("instruction name"));
    expectPunct("=");
    d.format = parseExpr();
    out.push_back(std::move(d));
  } else if (kw == "enumeration") {
    noAnnos("enumeration");
    take();
    EnumDef d;
    d.span = s;
    d.name = expectIdent("enumeration name");
    expectPunct(":");
    d.type = parseType();
    expectPunct("=");
    expectPunct("{");
    do {
      std::string m = expectIdent("enumeration member");
      ExprP v;
      if (acceptPunct("=")) v = parseExpr();
      d.members.push_back({m, v});
    } while (acceptPunct(","));
    expectPunct("}");
    out.push_back(std::move(d));
  } else if (kw == "function") {
    noAnnos("function");
    take();
    FunctionDef d;
    d.span = s;
    d.name = expectIdent("function name");
    expectPunct("(");
    if (!cur().isPunct(")")) {
      do {
        std::string p = expectIdent("parameter name");
        expectPunct(":");
        d.params.push_back({p, parseType()});
      } while (acceptPunct(","));
    }
    expectPunct(")");
    expectPunct("->");
    d.result = parseType();
    expectPunct("=");
    d.body = parseExpr();
    out.push_back(std::move(d));
  } else if (kw == "model") {
    noAnnos("model");
    out.push_back(parseModel());
  } else {
    err(fmt::format("unexpected '{}' in architecture body", kw));
  }
}

std::vector<Token> Parser::withEnd(std::vector<Token> v) {
  Token end;
  end.kind = Tok::End;
  end.span = v.empty() ? Span{} : v.back().span;
  v.push_back(end);
  return v;
}

ast::FormatDef Parser::parseFormat() {
  FormatDef d;
  d.span = cur().span;
  expectKeyword("format");
  d.name = expectIdent("format name");
  expectPunct(":");
  d.wordType = parseType();
  expectPunct("=");
  expectPunct("{");
  do {
    Span is = cur().span;
    if (cur().isIdent("predicate") && peek().kind == Tok::Ident && peek(2).isPunct("=")) {
      take();
      std::string name = expectIdent("access function name");
      expectPunct("=");
      ExprP pred = parseExpr();
      bool found = false;
      for (auto& fn : d.accessFns)
        if (fn.name == name) {
          fn.predicate = pred;
          found = true;
        }
      if (!found)
        fail(Code::NameError, is, fmt::format("predicate for unknown access function '{}'", name));
      continue;
    }
    if (cur().isIdent("encoding") && peek().kind == Tok::Ident && peek(2).isPunct("=")) {
      take();
      std::string name = expectIdent("access function name");
      expectPunct("=");
      expectPunct("{");
      std::vector<std::pair<std::string, ExprP>> encs;
      do {
        std::string f = expectIdent("field name");
        expectPunct("=");
        encs.push_back({f, parseExpr()});
      } while (acceptPunct(","));
      expectPunct("}");
      bool found = false;
      for (auto& fn : d.accessFns)
        if (fn.name == name) {
          fn.encoding = std::move(encs);
          found = true;
        }
      if (!found)
        fail(Code::NameError, is, fmt::format("encoding for unknown access function '{}'", name));
      continue;
    }
    std::string name = expectIdent("field or access function name");
    if (cur().isPunct("[")) {
      take();
      FormatFieldAst f;
      f.span = is;
      f.name = name;
      do {
        RangeAst r;
        r.hi = parseExpr();
        if (acceptPunct("..")) r.lo = parseExpr();
        f.ranges.push_back(std::move(r));
      } while (acceptPunct(","));
      expectPunct("]");
      d.fields.push_back(std::move(f));
    } else if (cur().isPunct(":")) {
      take();
      FormatFieldAst f;
      f.span = is;
      f.name = name;
      f.type = parseType();
      d.fields.push_back(std::move(f));
    } else if (cur().isPunct("=")) {
      take();
      AccessFnAst fn;
      fn.span = is;
      fn.name = name;
      fn.value = parseExpr();
      d.accessFns.push_back(std::move(fn));
    } else {
      err("expected '[', ':' or '=' in format member");
    }
  } while (acceptPunct(","));
  expectPunct("}");
  return d;
}

ast::ModelDef Parser::parseModel() {
  ModelDef d;
  d.span = cur().span;
  expectKeyword("model");
  d.name = expectIdent("model name");
  expectPunct("(");
  if (!cur().isPunct(")")) {
    do {
      std::string p = expectIdent("parameter name");
      expectPunct(":");
      d.params.push_back({p, parseSynType()});
    } while (acceptPunct(","));
  }
  expectPunct(")");
  expectPunct(":");
  d.result = parseSynType();
  expectPunct("=");
  d.body = captureBalancedBraces();
  return d;
}

ast::SynType Parser::parseSynType() {
  Span s = cur().span;
  std::string n = expectIdent("syntax type");
  for (int i = 0; i < 8; i++)
    if (n == synNames[i]) return static_cast<SynType>(i);
  fail(Code::SyntaxError, s, fmt::format("unknown syntax type '{}'", n));
}

// -------------------------------------------------------- microarchitecture --

ast::MiaDef Parser::parseMia(std::vector<std::vector<Token>>& annos) {
  MiaDef d;
  d.span = cur().span;
  expectKeyword("architecture");
  d.name = expectIdent("microarchitecture name");
  if (acceptIdent("implements")) d.isaName = expectIdent("architecture name");
  for (auto& a : annos) {
    if (a.size() == 3 && a[0].isIdent("dataBusWidth") && a[1].isPunct("=") &&
        a[2].kind == Tok::Int) {
      d.dataBusWidth = static_cast<unsigned>(a[2].value);
    } else {
      fail(Code::SyntaxError, d.span, "unknown microarchitecture annotation");
    }
  }
  annos.clear();
  expectPunct("=");
  expectPunct("{");
  std::vector<std::vector<Token>> pending;
  while (!cur().isPunct("}")) {
    if (atEnd()) err("unterminated microarchitecture body");
    if (cur().isPunct("[")) {
      take();
      std::vector<Token> group;
      int depth = 1;
      while (depth > 0) {
        if (atEnd()) err("unterminated annotation");
        if (cur().isPunct("[")) depth++;
        if (cur().isPunct("]") && --depth == 0) {
          take();
          break;
        }
        group.push_back(take());
      }
      pending.push_back(std::move(group));
      continue;
    }
    if (cur().isIdent("logic")) {
      Span s = take().span;
      LogicDef l;
      l.span = s;
      l.name = expectIdent("logic name");
      for (auto& a : pending) {
        if (a.size() == 1 && a[0].isIdent("forwarding")) {
          l.forwarding = true;
        } else {
          fail(Code::SyntaxError, s, "unknown logic annotation");
        }
      }
      pending.clear();
      d.logics.push_back(std::move(l));
      continue;
    }
    if (cur().isIdent("stage")) {
      if (!pending.empty()) err("stages do not take annotations");
      Span s = take().span;
      StageAst st;
      st.span = s;
      st.name = expectIdent("stage name");
      if (acceptPunct("->")) {
        expectPunct("(");
        st.outName = expectIdent("stage output name");
        expectPunct(":");
        st.outType = parseType();
        expectPunct(")");
      }
      expectPunct("=");
      st.body = parseBlock();
      d.stages.push_back(std::move(st));
      continue;
    }
    err("expected 'stage' or 'logic' in microarchitecture body");
  }
  take();
  return d;
}

ast::ProcDef Parser::parseProc() {
  ProcDef d;
  d.span = cur().span;
  expectKeyword("processor");
  d.name = expectIdent("processor name");
  expectKeyword("implements");
  d.isaName = expectIdent("architecture name");
  if (acceptIdent("with")) d.miaName = expectIdent("microarchitecture name");
  expectPunct("=");
  expectPunct("{");
  while (!cur().isPunct("}")) {
    if (atEnd()) err("unterminated processor body");
    Span s = cur().span;
    if (acceptIdent("start")) {
      expectPunct("=");
      d.start = parseExpr();
    } else if (acceptIdent("stop")) {
      expectPunct("=");
      ExprP e = parseExpr();
      if (e->kind != ExKind::Binary || e->op != "=" || e->args[0]->kind != ExKind::Ident)
        fail(Code::SyntaxError, s, "stop condition must have the form 'stop = PC = value'");
      d.stopReg = e->args[0]->name;
      d.stopValue = e->args[1];
    } else if (acceptIdent("firmware")) {
      expectPunct("=");
      expectPunct("{");
      while (!cur().isPunct("}")) {
        if (atEnd()) err("unterminated firmware block");
        Span fs = cur().span;
        ExprP lhs = parseExpr();
        expectPunct(":=");
        ExprP word = parseExpr();
        if (lhs->kind != ExKind::MemRef)
          fail(Code::SyntaxError, fs, "firmware entries must assign to memory");
        FirmwareAssign fa;
        fa.span = fs;
        fa.mem = lhs->name;
        fa.addr = lhs->args[0];
        fa.units = static_cast<unsigned>(lhs->litValue);
        if (!lhs->name2.empty())
          fail(Code::SyntaxError, fs, "firmware memory width must be a literal");
        fa.word = word;
        d.firmware.push_back(std::move(fa));
      }
      take();
    } else {
      err("expected 'start', 'stop' or 'firmware'");
    }
  }
  take();
  return d;
}

// --------------------------------------------------------------- top level --

ast::SpecAst Parser::parseSpec() {
  SpecAst spec;
  spec.sourcePath = path;
  std::vector<std::vector<Token>> annos;
  while (!atEnd()) {
    if (cur().isPunct("[")) {
      take();
      std::vector<Token> group;
      int depth = 1;
      while (depth > 0) {
        if (atEnd()) err("unterminated annotation");
        if (cur().isPunct("[")) depth++;
        if (cur().isPunct("]") && --depth == 0) {
          take();
          break;
        }
        group.push_back(take());
      }
      annos.push_back(std::move(group));
      continue;
    }
    if (cur().isIdent("import")) {
      Span s = take().span;
      if (cur().kind != Tok::Str) err("expected file name string after 'import'");
      std::string rel = take().text;
      if (importDepth >= 16)
        fail(Code::SyntaxError, s, "imports nested deeper than 16 levels");
      namespace fs = std::filesystem;
      fs::path base = path.empty() ? fs::path(".") : fs::path(path).parent_path();
      fs::path target = base / rel;
      std::ifstream in(target);
      if (!in)
        fail(Code::IoError, s, fmt::format("cannot open import '{}'", target.string()));
      std::stringstream ss;
      ss << in.rdbuf();
      SpecAst sub = parseSpecInner(ss.str(), target.string(), importDepth + 1);
      for (auto& i : sub.isas) spec.isas.push_back(std::move(i));
      for (auto& m : sub.mias) spec.mias.push_back(std::move(m));
      for (auto& p : sub.procs) spec.procs.push_back(std::move(p));
      continue;
    }
    if (cur().isIdent("instruction")) {
      if (!annos.empty()) err("architectures do not take annotations");
      Span s = take().span;
      expectKeyword("set");
      expectKeyword("architecture");
      IsaDef isa;
      isa.span = s;
      isa.name = expectIdent("architecture name");
      expectPunct("=");
      expectPunct("{");
      isa.items = parseItems(true);
      expectPunct("}");
      spec.isas.push_back(std::move(isa));
      continue;
    }
    if (cur().isIdent("micro")) {
      take();
      if (cur().isIdent("architecture")) {
        spec.mias.push_back(parseMia(annos));
      } else if (cur().isIdent("processor")) {
        if (!annos.empty()) err("processors do not take annotations");
        spec.procs.push_back(parseProc());
      } else {
        err("expected 'architecture' or 'processor' after 'micro'");
      }
      continue;
    }
    err("expected a top-level definition");
  }
  if (!annos.empty())
    fail(Code::SyntaxError, Span{}, "annotation is not attached to a definition");
  return spec;
}

ast::SpecAst parseSpecInner(const std::string& text, const std::string& path,
                            int importDepth) {
  Parser p(lex(text), path, importDepth);
  return p.parseSpec();
}

ast::SpecAst parseSpec(const std::string& text, const std::string& path) {
  return parseSpecInner(text, path, 0);
}

ast::SpecAst parseSpecFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Code::IoError, fmt::format("cannot open '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parseSpecInner(ss.str(), path, 0);
}

}  // namespace pdl::frontend

namespace pdl::ast {

const char* synTypeName(SynType t) {
  static const char* names[] = {"Id",  "Ex",      "Stat", "BinOp",
                                "Bin", "IsaDefs", "Encs", "CallEx"};
  return names[static_cast<int>(t)];
}

}  // namespace pdl::ast
