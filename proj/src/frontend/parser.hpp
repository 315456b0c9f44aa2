#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdl/ast.hpp"
#include "pdl/frontend.hpp"

namespace pdl::frontend {

ast::SpecAst parseSpecInner(const std::string& text, const std::string& path,
                            int importDepth);

// Recursive-descent parser over the token stream. When `models` is set the
// parser expands model instantiations inline (used during macro expansion);
// otherwise instantiations at definition level are recorded unexpanded.
class Parser {
 public:
  Parser(std::vector<ast::Token> tokens, std::string path, int importDepth = 0)
      : toks(std::move(tokens)), path(std::move(path)), importDepth(importDepth) {}

  ast::SpecAst parseSpec();

  // Entry points that must consume the whole stream (macro expansion).
  ast::ExprP parseExprAll();
  ast::StmtP parseStmtAll();
  std::vector<ast::IsaItem> parseItemsAll();
  std::vector<std::pair<std::string, ast::ExprP>> parseEncsAll();

  const std::map<std::string, ast::ModelDef>* models = nullptr;
  std::vector<std::string>* activeModels = nullptr;

 private:
  std::vector<ast::Token> toks;
  size_t pos = 0;
  std::string path;
  int importDepth = 0;

  using Token = ast::Token;
  using Tok = ast::Tok;

  const Token& cur() const { return toks[pos]; }
  const Token& peek(size_t off = 1) const {
    size_t i = pos + off;
    return i < toks.size() ? toks[i] : toks.back();
  }
  Token take() { return toks[pos + 1 < toks.size() ? pos++ : pos]; }
  bool atEnd() const { return cur().kind == Tok::End; }

  [[noreturn]] void err(const std::string& msg) const;
  void expectPunct(const char* p);
  std::string expectIdent(const char* what);
  void expectKeyword(const char* kw);
  bool acceptPunct(const char* p);
  bool acceptIdent(const char* kw);

  // expressions
  ast::ExprP parseExpr();
  ast::ExprP parseBinary(int minPrec);
  ast::ExprP parseUnary();
  ast::ExprP parsePostfix();
  ast::ExprP parsePrimary();
  ast::TypeAst parseType();

  // statements
  ast::StmtP parseStmt();
  ast::StmtP parseBlock();

  // definitions
  std::vector<ast::IsaItem> parseItems(bool topIsaBody);
  void parseIsaItem(std::vector<ast::IsaItem>& out,
                    std::vector<std::vector<Token>>& annos);
  ast::FormatDef parseFormat();
  ast::ModelDef parseModel();
  ast::MiaDef parseMia(std::vector<std::vector<Token>>& annos);
  ast::ProcDef parseProc();
  ast::SynType parseSynType();
  std::vector<std::vector<Token>> captureMacroArgs();
  std::vector<Token> captureBalancedBraces();
  static std::vector<Token> withEnd(std::vector<Token> v);

  // macro instantiation (inline mode)
  ast::ExprP expandExprCall();
  ast::StmtP expandStmtCall();
  void expandItemsCall(std::vector<ast::IsaItem>& out);
  std::vector<Token> substituteBody(const ast::ModelDef& model,
                                    const std::vector<std::vector<Token>>& args,
                                    Span callSite);
  const ast::ModelDef& lookupModel(const std::string& name, Span site);

  friend void expandMacros(ast::SpecAst& spec);
};

}  // namespace pdl::frontend
