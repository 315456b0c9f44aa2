#include <cctype>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "pdl/asm.hpp"
#include "pdl/diag.hpp"

namespace pdl::assembler {

using frontend::AccessFn;
using frontend::Env;
using frontend::Field;
using frontend::Format;
using frontend::FValue;

namespace {

bool isTokenChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_';
}

bool isWs(char c) { return std::isspace(static_cast<unsigned char>(c)); }

// Operand value rendered the way its formatting function would show it.
std::string showValue(const Operand& op, Value v) {
  if (op.type.isSigned()) return fmt::format("{}", asSigned(v));
  return fmt::format("{}", v.bits);
}

// Recognizes the predicate shape `target % K = 0` so a violation can name the
// required alignment instead of echoing the whole expression.
std::optional<uint64_t> multipleOfConstraint(const ast::Expr& p,
                                             const std::string& target) {
  using ast::ExKind;
  if (p.kind != ExKind::Binary || p.op != "=") return std::nullopt;
  const ast::Expr& l = *p.args[0];
  const ast::Expr& r = *p.args[1];
  if (r.kind != ExKind::IntLit || r.litValue != 0) return std::nullopt;
  if (l.kind != ExKind::Binary || l.op != "%") return std::nullopt;
  if (l.args[0]->kind != ExKind::Ident || l.args[0]->name != target)
    return std::nullopt;
  if (l.args[1]->kind != ExKind::IntLit) return std::nullopt;
  return l.args[1]->litValue;
}

// Cast semantics of the expression language: reinterpret at equal width,
// truncate when narrowing, extend by target kind when widening.
Value castTo(Value v, Type t) {
  if (t.width == v.width) return Value{v.bits, v.width};
  if (t.width < v.width) return makeValue(v.bits, t.width);
  return t.kind == Kind::SInt ? signExtend(v, t.width) : zeroExtend(v, t.width);
}

// Cursor over one source line, matching a syntax template left to right.
// Until the mnemonic has matched, mismatches report "not this instruction"
// (return false); afterwards the line is committed and malformed input is a
// hard diagnostic.
struct LineMatcher {
  const std::string& line;
  size_t pos = 0;
  bool committed = false;

  explicit LineMatcher(const std::string& l) : line(l) {}

  void skipWs() {
    while (pos < line.size() && isWs(line[pos])) pos++;
  }

  std::string rest() const {
    std::string r = line.substr(pos);
    if (r.size() > 24) r = r.substr(0, 24) + "...";
    return r;
  }

  // Template whitespace matches any amount of input whitespace, but a
  // separator made only of whitespace must consume at least one character;
  // every other character must appear verbatim.
  bool literal(const std::string& text) {
    bool sawNonWs = false;
    size_t consumed = 0;
    for (char c : text) {
      if (isWs(c)) {
        size_t before = pos;
        skipWs();
        consumed += pos - before;
        continue;
      }
      sawNonWs = true;
      if (pos < line.size() && line[pos] == c) {
        pos++;
        continue;
      }
      if (committed)
        fail(Code::ParseError,
             fmt::format("expected '{}' before '{}'", c, rest()));
      return false;
    }
    if (!sawNonWs && consumed == 0) {
      if (committed)
        fail(Code::ParseError,
             fmt::format("expected whitespace before '{}'", rest()));
      return false;
    }
    return true;
  }

  bool mnemonic(const std::string& want) {
    size_t start = pos;
    while (pos < line.size() && isTokenChar(line[pos])) pos++;
    if (line.compare(start, pos - start, want) != 0) {
      pos = start;
      return false;
    }
    committed = true;
    return true;
  }

  // Unsigned digit run in the given base, with overflow detection.
  bool digits(unsigned base, uint64_t& out) {
    auto digit = [&](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (base == 16 && c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (base == 16 && c >= 'A' && c <= 'F') return c - 'A' + 10;
      return -1;
    };
    size_t start = pos;
    out = 0;
    bool overflow = false;
    while (pos < line.size()) {
      int d = digit(line[pos]);
      if (d < 0) break;
      if (out > (~uint64_t{0} - static_cast<uint64_t>(d)) / base) overflow = true;
      out = out * base + static_cast<uint64_t>(d);
      pos++;
    }
    if (pos == start) return false;
    if (overflow) {
      if (committed)
        fail(Code::OperandRangeError,
             fmt::format("integer constant '{}' is too large",
                         line.substr(start, pos - start)));
      return false;
    }
    return true;
  }

  // Rejects token characters immediately following an operand, so an operand
  // never matches a proper prefix of a longer token.
  bool tokenEnds() const {
    return pos >= line.size() || !isTokenChar(line[pos]);
  }

  bool reg(const Operand& op, const frontend::Isa& isa, Value& out) {
    const frontend::RegFile* rf = isa.regFile(op.regFile);
    std::string prefix = op.regFile;
    for (char& c : prefix) c = static_cast<char>(std::tolower(c));
    if (line.compare(pos, prefix.size(), prefix) != 0) {
      if (committed)
        fail(Code::ParseError,
             fmt::format("expected {} register at '{}'", op.regFile, rest()));
      return false;
    }
    size_t save = pos;
    pos += prefix.size();
    uint64_t idx = 0;
    if (!digits(10, idx) || !tokenEnds()) {
      if (committed)
        fail(Code::ParseError,
             fmt::format("expected {} register at '{}'", op.regFile,
                         line.substr(save, 24)));
      pos = save;
      return false;
    }
    uint64_t limit = maskOf(rf->indexWidth);
    if (idx > limit) {
      if (committed)
        fail(Code::OperandRangeError,
             fmt::format("register index {} out of range (file '{}' has {} "
                         "entries)",
                         idx, op.regFile, limit + 1));
      pos = save;
      return false;
    }
    out = makeValue(idx, op.type.width);
    return true;
  }

  // Decimal or 0x-prefixed integer; a leading '-' is allowed only for signed
  // operands. Hex input supplies the raw bit pattern.
  bool integer(const Operand& op, Value& out) {
    size_t save = pos;
    auto syntax = [&]() -> bool {
      if (committed)
        fail(Code::ParseError,
             fmt::format("expected integer operand at '{}'", rest()));
      pos = save;
      return false;
    };
    bool neg = false;
    if (pos < line.size() && line[pos] == '-') {
      if (!op.type.isSigned()) return syntax();
      neg = true;
      pos++;
    }
    bool hex = false;
    if (line.compare(pos, 2, "0x") == 0 || line.compare(pos, 2, "0X") == 0) {
      hex = true;
      pos += 2;
    }
    uint64_t mag = 0;
    if (!digits(hex ? 16 : 10, mag) || !tokenEnds()) return syntax();

    unsigned w = op.type.width;
    auto range = [&](std::string why) -> bool {
      if (committed)
        fail(Code::OperandRangeError,
             fmt::format("operand value {}{} does not fit {} ({})", neg ? "-" : "",
                         mag, op.type.str(), why));
      pos = save;
      return false;
    };
    if (neg) {
      if (mag > (uint64_t{1} << (w - 1)))
        return range(fmt::format("minimum -{}", uint64_t{1} << (w - 1)));
      out = makeValue(~mag + 1, w);
      return true;
    }
    if (hex) {
      if (mag > maskOf(w)) return range(fmt::format("maximum 0x{:x}", maskOf(w)));
      out = makeValue(mag, w);
      return true;
    }
    uint64_t limit = op.type.isSigned() ? maskOf(w) >> 1 : maskOf(w);
    if (mag > limit) return range(fmt::format("maximum {}", limit));
    out = makeValue(mag, w);
    return true;
  }

  // Table operands match their rendered alternatives longest-first.
  bool table(const Operand& op, Value& out) {
    for (const auto& [text, v] : op.table) {
      if (line.compare(pos, text.size(), text) != 0) continue;
      if (isTokenChar(text.back()) && pos + text.size() < line.size() &&
          isTokenChar(line[pos + text.size()]))
        continue;
      pos += text.size();
      out = makeValue(v, op.type.width);
      return true;
    }
    if (committed)
      fail(Code::ParseError,
           fmt::format("no operand alternative for '{}' matches '{}'",
                       op.target, rest()));
    return false;
  }
};

}  // namespace

bool Assembler::tryLine(const InstrSyntax& s, const std::string& line,
                        uint64_t& word) const {
  LineMatcher m(line);
  m.skipWs();
  std::vector<Value> vals(s.operands.size());
  for (const Item& it : s.items) {
    switch (it.k) {
      case Item::K::Literal:
        if (!m.literal(it.text)) return false;
        break;
      case Item::K::Mnemonic:
        if (!m.mnemonic(s.mnemonic)) return false;
        break;
      case Item::K::Operand: {
        const Operand& op = s.operands[it.operand];
        bool ok = op.kind == Operand::Kind::Register ? m.reg(op, *isa, vals[it.operand])
                  : op.kind == Operand::Kind::Table  ? m.table(op, vals[it.operand])
                                                     : m.integer(op, vals[it.operand]);
        if (!ok) return false;
        break;
      }
    }
  }
  m.skipWs();
  if (m.pos < line.size() && line[m.pos] != '#') {
    if (m.committed)
      fail(Code::ParseError,
           fmt::format("unexpected trailing text '{}'", m.rest()));
    return false;
  }

  // The line matched this instruction; bind operand values into fields.
  const frontend::Instruction& ins = isa->instructions[static_cast<size_t>(s.instr)];
  const Format& fm = isa->formats[static_cast<size_t>(ins.format)];
  word = 0;
  for (const auto& ec : ins.encoding) word = fm.field(ec.field)->insert(word, ec.value);
  for (size_t i = 0; i < s.operands.size(); i++) {
    const Operand& op = s.operands[i];
    Value v = vals[i];
    if (!op.isAccessFn) {
      word = fm.field(op.target)->insert(word, v);
      continue;
    }
    const AccessFn* fn = fm.accessFn(op.target);
    if (fn->predicate) {
      Env env;
      env.isa = isa;
      env.vars[op.target] = FValue::num(v);
      if (frontend::evalExpr(*fn->predicate, env).v.bits == 0) {
        if (auto k = multipleOfConstraint(*fn->predicate, op.target))
          fail(Code::PredicateViolation,
               fmt::format("operand value {} for '{}' must be a multiple of {}",
                           showValue(op, v), op.target, *k));
        fail(Code::PredicateViolation,
             fmt::format("operand value {} for '{}' is rejected by its predicate",
                         showValue(op, v), op.target));
      }
    }
    std::map<std::string, Value> fields;
    if (fn->trivial) {
      const Field* tf = fm.field(fn->trivialField);
      fields[tf->name] = castTo(v, tf->type);
    } else {
      Env env;
      env.isa = isa;
      env.vars[op.target] = FValue::num(v);
      for (const auto& [fieldName, expr] : fn->encoding)
        fields[fieldName] = frontend::evalExpr(*expr, env).v;
    }
    // Encoding must reproduce the requested value exactly.
    if (frontend::evalAccessFn(*isa, fm, *fn, fields) != v)
      fail(Code::OperandRangeError,
           fmt::format("operand value {} for '{}' cannot be encoded",
                       showValue(op, v), op.target));
    for (const auto& [fieldName, fv] : fields)
      word = fm.field(fieldName)->insert(word, fv);
  }
  return true;
}

uint64_t Assembler::assembleLine(const std::string& line) const {
  for (const InstrSyntax& s : syn) {
    uint64_t word = 0;
    if (tryLine(s, line, word)) return word;
  }
  size_t a = line.find_first_not_of(" \t\r\n");
  size_t b = line.find_last_not_of(" \t\r\n");
  std::string shown = a == std::string::npos ? "" : line.substr(a, b - a + 1);
  fail(Code::NoMatchingInstruction,
       fmt::format("no instruction matches '{}'", shown));
}

std::vector<uint64_t> Assembler::assembleProgram(const std::string& text) const {
  std::vector<uint64_t> words;
  int lineNo = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t nl = text.find('\n', start);
    std::string line = text.substr(
        start, nl == std::string::npos ? std::string::npos : nl - start);
    lineNo++;
    if (size_t hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      try {
        words.push_back(assembleLine(line));
      } catch (SpecError& e) {
        for (Diag& d : e.diags)
          if (d.span.line == 0) d.span = Span{lineNo, 1};
        throw;
      }
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return words;
}

std::string Assembler::disassemble(uint64_t word) const {
  int idx = dec.decode(word);
  if (idx < 0)
    fail(Code::UnknownInstructionWord,
         fmt::format("word 0x{:0{}x} matches no instruction encoding", word,
                     isa->instrWidth / 4));
  const frontend::Instruction& ins = isa->instructions[static_cast<size_t>(idx)];
  const Format& fm = isa->formats[static_cast<size_t>(ins.format)];
  Env env;
  env.isa = isa;
  env.vars["mnemonic"] = FValue::str(syn[static_cast<size_t>(idx)].mnemonic);
  std::map<std::string, Value> fields;
  for (const Field& f : fm.fields) {
    Value v = f.extract(word);
    fields[f.name] = v;
    env.vars[f.name] = FValue::num(v);
  }
  for (const AccessFn& fn : fm.accessFns)
    env.vars[fn.name] = FValue::num(frontend::evalAccessFn(*isa, fm, fn, fields));
  return frontend::evalExpr(*ins.assembly, env).s;
}

}  // namespace pdl::assembler
