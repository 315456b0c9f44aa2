#include <cctype>
#include <string>
#include <vector>

#include "pdl/ast.hpp"
#include "pdl/diag.hpp"
#include "pdl/frontend.hpp"

namespace pdl::frontend {

using ast::Tok;
using ast::Token;

namespace {

bool identStart(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool identChar(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

struct Lexer {
  const std::string& src;
  size_t pos = 0;
  int line = 1, col = 1;

  explicit Lexer(const std::string& s) : src(s) {}

  char peek(size_t off = 0) const {
    return pos + off < src.size() ? src[pos + off] : '\0';
  }

  char advance() {
    char c = src[pos++];
    if (c == '\n') {
      line++;
      col = 1;
    } else {
      col++;
    }
    return c;
  }

  Span here() const { return {line, col}; }

  void skipTrivia() {
    for (;;) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (peek() && peek() != '\n') advance();
      } else {
        return;
      }
    }
  }

  Token lexNumber() {
    Span span = here();
    std::string digits;
    unsigned bitsPerDigit = 0;  // 0: decimal
    if (peek() == '0' && (peek(1) == 'b' || peek(1) == 'x')) {
      bitsPerDigit = peek(1) == 'b' ? 1 : 4;
      advance();
      advance();
      while (identChar(peek()) || peek() == '\'') {
        char c = advance();
        if (c == '\'') continue;
        bool ok = bitsPerDigit == 1 ? (c == '0' || c == '1')
                                    : std::isxdigit(static_cast<unsigned char>(c));
        if (!ok) fail(Code::SyntaxError, span, std::string("bad digit '") + c + "' in literal");
        digits.push_back(c);
      }
      if (digits.empty()) fail(Code::SyntaxError, span, "literal has no digits");
    } else {
      while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '\'') {
        char c = advance();
        if (c != '\'') digits.push_back(c);
      }
    }

    Token t;
    t.kind = Tok::Int;
    t.span = span;
    t.litWidth = bitsPerDigit * static_cast<unsigned>(digits.size());
    if (t.litWidth > 64)
      fail(Code::TypeError, span, "literal wider than 64 bits is not supported");
    uint64_t v = 0;
    for (char c : digits) {
      unsigned d = std::isdigit(static_cast<unsigned char>(c))
                       ? static_cast<unsigned>(c - '0')
                       : static_cast<unsigned>(std::tolower(c) - 'a' + 10);
      if (bitsPerDigit == 0) {
        if (v > (~uint64_t{0} - d) / 10)
          fail(Code::TypeError, span, "decimal literal exceeds 64 bits");
        v = v * 10 + d;
      } else {
        v = (v << bitsPerDigit) | d;
      }
    }
    t.value = v;
    t.text = digits;
    return t;
  }

  Token next() {
    skipTrivia();
    Span span = here();
    if (pos >= src.size()) return Token{Tok::End, "", 0, 0, span};
    char c = peek();

    if (identStart(c)) {
      std::string s;
      while (identChar(peek())) s.push_back(advance());
      return Token{Tok::Ident, s, 0, 0, span};
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return lexNumber();
    if (c == '"') {
      advance();
      std::string s;
      while (peek() && peek() != '"' && peek() != '\n') s.push_back(advance());
      if (peek() != '"') fail(Code::SyntaxError, span, "unterminated string literal");
      advance();
      return Token{Tok::Str, s, 0, 0, span};
    }
    if (c == '$') {
      advance();
      if (!identStart(peek())) fail(Code::SyntaxError, span, "expected name after '$'");
      std::string s;
      while (identChar(peek())) s.push_back(advance());
      return Token{Tok::MacroId, s, 0, 0, span};
    }

    // Multi-character punctuation first.
    static const char* two[] = {"..", "::", "=>", ":=", "->", "<=", ">=",
                                "!=", "<<", ">>"};
    for (const char* p : two) {
      if (c == p[0] && peek(1) == p[1]) {
        advance();
        advance();
        return Token{Tok::Punct, p, 0, 0, span};
      }
    }
    static const std::string single = "=<>+-*%&|^(){}[],;:.@!";
    if (single.find(c) != std::string::npos) {
      advance();
      return Token{Tok::Punct, std::string(1, c), 0, 0, span};
    }
    fail(Code::SyntaxError, span, std::string("unexpected character '") + c + "'");
  }
};

}  // namespace

std::vector<Token> lex(const std::string& text) {
  Lexer lx(text);
  std::vector<Token> out;
  for (;;) {
    Token t = lx.next();
    bool end = t.kind == Tok::End;
    out.push_back(std::move(t));
    if (end) return out;
  }
}

}  // namespace pdl::frontend
