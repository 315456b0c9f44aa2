#include <algorithm>

#include <fmt/format.h>

#include "parser.hpp"
#include "pdl/diag.hpp"

namespace pdl::frontend {

using namespace ast;

namespace {

bool isOperatorPunct(const std::string& p) {
  static const char* ops[] = {"+", "-", "*", "%",  "&",  "|", "^",
                              "<", ">", "=", "!=", "<=", ">=", "<<", ">>"};
  return std::any_of(std::begin(ops), std::end(ops),
                     [&](const char* o) { return p == o; });
}

}  // namespace

const ModelDef& Parser::lookupModel(const std::string& name, Span site) {
  if (!models)
    fail(Code::SyntaxError, site, "model instantiation is not allowed here");
  auto it = models->find(name);
  if (it == models->end())
    fail(Code::UnknownModel, site,
         fmt::format("unknown model or parameter '{}'", name));
  if (activeModels && std::find(activeModels->begin(), activeModels->end(),
                                name) != activeModels->end())
    fail(Code::MacroRecursionError, site,
         fmt::format("model '{}' expands itself recursively", name));
  return it->second;
}

std::vector<Token> Parser::substituteBody(
    const ModelDef& m, const std::vector<std::vector<Token>>& args, Span site) {
  if (args.size() != m.params.size())
    fail(Code::MacroTypeError, site,
         fmt::format("model '{}' expects {} arguments, got {}", m.name,
                     m.params.size(), args.size()));

  // Validate each argument against its declared syntax type.
  for (size_t i = 0; i < args.size(); i++) {
    const auto& [pname, ptype] = m.params[i];
    const auto& a = args[i];
    auto mismatch = [&](const std::string& why) {
      fail(Code::MacroTypeError, site,
           fmt::format("argument {} of model '{}' (parameter '{}') is not a valid {}: {}",
                       i + 1, m.name, pname, synTypeName(ptype), why));
    };
    auto childParse = [&](auto&& f) {
      Parser sub(withEnd(a), path);
      sub.models = models;
      sub.activeModels = activeModels;
      try {
        f(sub);
      } catch (const SpecError& e) {
        if (e.code() == Code::MacroRecursionError || e.code() == Code::UnknownModel)
          throw;
        mismatch(e.message());
      }
    };
    switch (ptype) {
      case SynType::Id:
        if (a.size() != 1 || a[0].kind != Tok::Ident) mismatch("expected a single name");
        break;
      case SynType::Bin:
        if (a.size() != 1 || a[0].kind != Tok::Int || a[0].litWidth == 0)
          mismatch("expected a sized binary or hexadecimal literal");
        break;
      case SynType::BinOp:
        if (a.size() != 1 || a[0].kind != Tok::Punct || !isOperatorPunct(a[0].text))
          mismatch("expected a binary operator");
        break;
      case SynType::Ex:
        childParse([](Parser& p) { p.parseExprAll(); });
        break;
      case SynType::CallEx:
        childParse([&](Parser& p) {
          ExprP e = p.parseExprAll();
          if (e->kind != ExKind::Call && e->kind != ExKind::MemRef &&
              e->kind != ExKind::Ident)
            throw SpecError(Code::MacroTypeError, e->span, "not a call expression");
        });
        break;
      case SynType::Stat:
        childParse([](Parser& p) { p.parseStmtAll(); });
        break;
      case SynType::IsaDefs:
        childParse([](Parser& p) { p.parseItemsAll(); });
        break;
      case SynType::Encs:
        childParse([](Parser& p) { p.parseEncsAll(); });
        break;
    }
  }

  // Splice argument tokens over parameter uses. Expression-like arguments are
  // parenthesized (statements braced) so the expansion keeps its tree shape.
  std::vector<Token> out;
  for (const Token& t : m.body) {
    if (t.kind == Tok::MacroId) {
      auto it = std::find_if(m.params.begin(), m.params.end(),
                             [&](const auto& p) { return p.first == t.text; });
      if (it != m.params.end()) {
        size_t idx = static_cast<size_t>(it - m.params.begin());
        SynType pt = it->second;
        auto punct = [&](const char* p) {
          out.push_back(Token{Tok::Punct, p, 0, 0, t.span});
        };
        if (pt == SynType::Ex || pt == SynType::CallEx) punct("(");
        if (pt == SynType::Stat) punct("{");
        for (const Token& at : args[idx]) out.push_back(at);
        if (pt == SynType::Ex || pt == SynType::CallEx) punct(")");
        if (pt == SynType::Stat) punct("}");
        continue;
      }
    }
    out.push_back(t);
  }
  return out;
}

ExprP Parser::expandExprCall() {
  Token head = take();
  auto args = captureMacroArgs();
  const ModelDef& m = lookupModel(head.text, head.span);
  if (m.result != SynType::Ex && m.result != SynType::CallEx)
    fail(Code::MacroTypeError, head.span,
         fmt::format("model '{}' produces {}, expected an expression here",
                     m.name, synTypeName(m.result)));
  auto body = substituteBody(m, args, head.span);
  activeModels->push_back(m.name);
  Parser sub(withEnd(std::move(body)), path);
  sub.models = models;
  sub.activeModels = activeModels;
  ExprP e = sub.parseExprAll();
  activeModels->pop_back();
  return e;
}

StmtP Parser::expandStmtCall() {
  Token head = take();
  auto args = captureMacroArgs();
  const ModelDef& m = lookupModel(head.text, head.span);
  if (m.result != SynType::Stat)
    fail(Code::MacroTypeError, head.span,
         fmt::format("model '{}' produces {}, expected a statement here",
                     m.name, synTypeName(m.result)));
  auto body = substituteBody(m, args, head.span);
  activeModels->push_back(m.name);
  Parser sub(withEnd(std::move(body)), path);
  sub.models = models;
  sub.activeModels = activeModels;
  StmtP s = sub.parseStmtAll();
  activeModels->pop_back();
  return s;
}

void Parser::expandItemsCall(std::vector<IsaItem>& out) {
  Token head = take();
  auto args = captureMacroArgs();
  if (!models) {
    // Plain parse: record the instantiation unexpanded.
    MacroCallDef d;
    d.name = head.text;
    d.args = std::move(args);
    d.span = head.span;
    out.push_back(std::move(d));
    return;
  }
  const ModelDef& m = lookupModel(head.text, head.span);
  if (m.result != SynType::IsaDefs)
    fail(Code::MacroTypeError, head.span,
         fmt::format("model '{}' produces {}, expected definitions here",
                     m.name, synTypeName(m.result)));
  auto body = substituteBody(m, args, head.span);
  activeModels->push_back(m.name);
  Parser sub(withEnd(std::move(body)), path);
  sub.models = models;
  sub.activeModels = activeModels;
  auto items = sub.parseItemsAll();
  activeModels->pop_back();
  for (auto& it : items) out.push_back(std::move(it));
}

void expandMacros(SpecAst& spec) {
  for (IsaDef& isa : spec.isas) {
    std::map<std::string, ModelDef> table;
    for (const IsaItem& item : isa.items) {
      if (const auto* m = std::get_if<ModelDef>(&item)) {
        if (table.count(m->name))
          fail(Code::NameError, m->span,
               fmt::format("model '{}' defined twice", m->name));
        table[m->name] = *m;
      }
    }
    std::vector<std::string> stack;
    std::vector<IsaItem> out;
    for (IsaItem& item : isa.items) {
      if (std::holds_alternative<ModelDef>(item)) continue;
      if (auto* call = std::get_if<MacroCallDef>(&item)) {
        const ModelDef* m = nullptr;
        auto it = table.find(call->name);
        if (it == table.end())
          fail(Code::UnknownModel, call->span,
               fmt::format("unknown model '{}'", call->name));
        m = &it->second;
        if (m->result != SynType::IsaDefs)
          fail(Code::MacroTypeError, call->span,
               fmt::format("model '{}' produces {}, expected definitions here",
                           call->name, synTypeName(m->result)));
        Parser scratch({Token{}}, spec.sourcePath);
        scratch.models = &table;
        scratch.activeModels = &stack;
        auto body = scratch.substituteBody(*m, call->args, call->span);
        stack.push_back(m->name);
        Parser sub(Parser::withEnd(std::move(body)), spec.sourcePath);
        sub.models = &table;
        sub.activeModels = &stack;
        auto items = sub.parseItemsAll();
        stack.pop_back();
        for (auto& di : items) out.push_back(std::move(di));
        continue;
      }
      out.push_back(std::move(item));
    }
    isa.items = std::move(out);
  }
}

}  // namespace pdl::frontend
