#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pdl/ast.hpp"
#include "pdl/diag.hpp"
#include "pdl/type.hpp"
#include "pdl/value.hpp"

namespace pdl::frontend {

// --------------------------------------------------------------- elaborated --

struct Field {
  std::string name;
  // MSB-first list of (hi, lo) word-bit ranges whose concatenation forms the
  // field value.
  std::vector<std::pair<unsigned, unsigned>> ranges;
  unsigned width = 0;
  Type type;

  Value extract(uint64_t word) const;
  uint64_t insert(uint64_t word, Value v) const;
};

struct AccessFn {
  std::string name;
  ast::ExprP value;
  Type type;
  ast::ExprP predicate;  // null when none given
  std::vector<std::pair<std::string, ast::ExprP>> encoding;
  // Trivially invertible: the body is a pure extension/reinterpretation of a
  // single field (possibly through nested casts).
  bool trivial = false;
  std::string trivialField;
};

struct Format {
  std::string name;
  unsigned width = 0;
  std::vector<Field> fields;
  std::vector<AccessFn> accessFns;

  const Field* field(const std::string& n) const;
  const AccessFn* accessFn(const std::string& n) const;
};

struct EncodingConst {
  std::string field;
  Value value;
};

struct Instruction {
  std::string name;
  int format = -1;
  ast::StmtP behavior;
  std::vector<EncodingConst> encoding;
  ast::ExprP assembly;  // elaborated assembly format expression
  Span span;
};

struct RegFile {
  std::string name;
  unsigned indexWidth = 0;
  Type elemType;
  std::set<uint64_t> zeroIndexes;  // hardwired-zero entries
};

struct Pc {
  std::string name;
  unsigned width = 0;
  ast::PcSemantics semantics = ast::PcSemantics::Current;
};

struct Memory {
  std::string name;
  unsigned addrWidth = 0;
  unsigned unitWidth = 8;
  bool littleEndian = true;
};

struct Function {
  std::string name;
  std::vector<std::pair<std::string, Type>> params;
  Type result;
  ast::ExprP body;
};

struct Enum {
  std::string name;
  Type type;
  std::vector<std::pair<std::string, Value>> members;

  const Value* member(const std::string& n) const;
};

struct Isa {
  std::string name;
  std::map<std::string, Value> constants;
  std::vector<RegFile> regFiles;
  Pc pc;
  Memory mem;
  std::vector<Format> formats;
  std::vector<Instruction> instructions;
  std::map<std::string, Function> functions;
  std::map<std::string, Enum> enums;
  unsigned instrWidth = 0;  // uniform format width in bits

  const RegFile* regFile(const std::string& n) const;
  int instrIndex(const std::string& n) const;
};

// Normalized microarchitecture description.
enum class MapKind {
  FetchNext,
  Decode,
  Read,
  ReadOrForward,
  Compute,
  Verify,
  Write,
  UnknownCheck,  // the `if (instr.unknown) then raise invalid` guard
};

struct MapOp {
  MapKind kind;
  std::string resource;  // Read/Write: register file, memory, or PC name
  std::string logic;     // ReadOrForward: forwarding logic name
  Span span;
};

struct Stage {
  std::string name;
  std::vector<MapOp> ops;
};

struct Mia {
  std::string name;
  unsigned dataBusWidth = 0;
  std::vector<Stage> stages;
  std::map<std::string, bool> logics;  // name -> forwarding?
};

struct Processor {
  std::string name;
  std::string miaName;
  uint64_t start = 0;
  uint64_t stopPc = 0;
  std::vector<std::pair<uint64_t, Value>> firmware;  // (byte addr, word)
};

struct SpecModel {
  Isa isa;
  std::map<std::string, Mia> mias;
  std::optional<Processor> proc;
  std::string sourcePath;
};

// ----------------------------------------------------------------- lexing --

std::vector<ast::Token> lex(const std::string& text);

// ---------------------------------------------------------------- parsing --

// Parses a specification. `path` anchors `import` resolution; imports nest at
// most 16 deep.
ast::SpecAst parseSpec(const std::string& text, const std::string& path = "");
ast::SpecAst parseSpecFile(const std::string& path);

// Replaces every model instantiation with its expansion and drops the model
// definitions. Idempotent.
void expandMacros(ast::SpecAst& spec);

// Pretty-prints the (expanded or unexpanded) specification.
std::string printSpec(const ast::SpecAst& spec);

// ------------------------------------------------------------- elaboration --

// Expands macros if needed, then resolves names, checks types, folds
// constants, and verifies the read/write discipline of every instruction.
SpecModel elaborate(const ast::SpecAst& spec);

SpecModel loadSpec(const std::string& path);  // parse + expand + elaborate

// ------------------------------------------------------------- evaluation --

// A runtime value during frontend evaluation: a bit vector or a string.
struct FValue {
  Value v;
  std::string s;
  bool isStr = false;

  static FValue num(Value x) { return FValue{x, {}, false}; }
  static FValue str(std::string x) { return FValue{{}, std::move(x), true}; }
};

struct Env {
  std::map<std::string, FValue> vars;
  const Isa* isa = nullptr;  // for constants, enums, functions
};

// Evaluates a pure (resource-free) expression: access functions, predicates,
// encodings, assembly renderings, constant expressions.
FValue evalExpr(const ast::Expr& e, const Env& env);

// Convenience: evaluate an access function over raw field values.
Value evalAccessFn(const Isa& isa, const Format& fmt, const AccessFn& fn,
                   const std::map<std::string, Value>& fields);

}  // namespace pdl::frontend
