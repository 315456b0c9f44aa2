#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pdl/diag.hpp"
#include "pdl/type.hpp"
#include "pdl/value.hpp"

namespace pdl::ast {

// ----------------------------------------------------------------- tokens --

enum class Tok {
  Ident,    // identifiers and keywords (keywords are contextual)
  Int,      // integer literal
  Str,      // "..." string literal
  MacroId,  // $name (macro parameter use or model instantiation head)
  Punct,    // operators and punctuation, stored as text
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;       // identifier name, punct spelling, or string body
  uint64_t value = 0;     // Int: numeric value
  unsigned litWidth = 0;  // Int: written digit width for 0b/0x, 0 for decimal
  Span span;

  bool isPunct(const char* p) const { return kind == Tok::Punct && text == p; }
  bool isIdent(const char* name) const { return kind == Tok::Ident && text == name; }
};

// ------------------------------------------------------------- expressions --

enum class ExKind {
  IntLit,   // litValue/litWidth (litWidth 0: decimal, width from context)
  StrLit,   // name = body
  Ident,    // name (field, access function, constant, let binding, builtin)
  EnumRef,  // name::name2
  Call,     // name(args): register file read, function call, mnemonic, ...
  MemRef,   // name<litValue>(args[0]): memory read of `litValue` units
  Member,   // args[0].name (stage output or instr.unknown; microarchitecture)
  Unary,    // op: "-" "!"
  Binary,   // op; args = {lhs, rhs}
  Cast,     // args[0] as castType
  Concat,   // (a, b, ...) — args in MSB-to-LSB order
  Slice,    // args[0](hi..lo); args = {value, hi, lo}
  IfExpr,   // args = {cond, then, else}
  Match,    // args[0] scrutinee; cases
  AtRef,    // @name (resource reference in microarchitecture mappings)
};

struct Expr;
using ExprP = std::shared_ptr<Expr>;

// Written type, resolved during elaboration ("Bits<Size>", alias names, ...).
struct TypeAst {
  std::string name;           // Bits / UInt / SInt / Bool / String or alias
  ExprP width;                // null when the type takes no width argument
  Span span;
};

struct MatchCase {
  ExprP pattern;  // null for the catch-all `_`
  ExprP result;
};

struct Expr {
  ExKind kind;
  Span span;

  uint64_t litValue = 0;
  unsigned litWidth = 0;
  std::string name;
  std::string name2;
  std::string op;
  std::vector<ExprP> args;
  std::optional<TypeAst> castType;
  std::vector<MatchCase> cases;

  // Filled in by elaboration.
  mutable Type type;
};

// -------------------------------------------------------------- statements --

enum class StKind {
  Assign,   // lhs := value (lhs: Call on register file, MemRef, or Ident PC)
  Let,      // let name = value in body
  If,       // if cond then body [else elseBody]
  Block,    // { stmts }
  Raise,    // raise name
  MethodCall,  // recv.method(args) — microarchitecture instruction mappings
  MatchStmt,   // match scrutinee with { pattern => stmt, ... }
};

struct Stmt;
using StmtP = std::shared_ptr<Stmt>;

struct StmtMatchCase {
  ExprP pattern;
  StmtP body;
};

struct Stmt {
  StKind kind;
  Span span;

  ExprP lhs, value, cond;
  std::string name;          // Let binding / Raise name / method name
  ExprP recv;                // MethodCall receiver
  std::vector<ExprP> args;   // MethodCall arguments (AtRefs)
  std::vector<StmtP> body;
  std::vector<StmtP> elseBody;
  std::vector<StmtMatchCase> cases;
};

// ------------------------------------------------------------- definitions --

struct ConstantDef {
  std::string name;
  ExprP value;
  Span span;
};

struct UsingDef {
  std::string name;
  TypeAst type;
  Span span;
};

struct RegFileDef {
  std::string name;
  TypeAst indexType;
  TypeAst elemType;
  std::vector<ExprP> zeroIndexes;  // from [X(i) = 0] annotations
  Span span;
};

enum class PcSemantics { Current, Next, NextNext };

struct PcDef {
  std::string name;
  TypeAst type;
  PcSemantics semantics = PcSemantics::Current;
  Span span;
};

struct MemDef {
  std::string name;
  TypeAst addrType;
  TypeAst unitType;
  bool littleEndian = true;
  Span span;
};

struct RangeAst {
  ExprP hi;
  ExprP lo;  // null for a single-bit range
};

struct FormatFieldAst {
  std::string name;
  std::vector<RangeAst> ranges;      // range style (MSB-first)
  std::optional<TypeAst> type;       // typed style
  Span span;
};

struct AccessFnAst {
  std::string name;
  ExprP value;
  ExprP predicate;                                    // may be null
  std::vector<std::pair<std::string, ExprP>> encoding;  // field <- expr(fn)
  Span span;
};

struct FormatDef {
  std::string name;
  TypeAst wordType;
  std::vector<FormatFieldAst> fields;
  std::vector<AccessFnAst> accessFns;
  Span span;
};

struct InstructionDef {
  std::string name;
  std::string formatName;
  StmtP behavior;
  Span span;
};

struct EncodingDef {
  std::string instrName;
  std::vector<std::pair<std::string, ExprP>> fields;
  Span span;
};

struct AssemblyDef {
  std::vector<std::string> instrNames;  // several instructions may share one
  ExprP format;
  Span span;
};

struct EnumDef {
  std::string name;
  TypeAst type;
  std::vector<std::pair<std::string, ExprP>> members;  // null expr: implicit
  Span span;
};

struct FunctionDef {
  std::string name;
  std::vector<std::pair<std::string, TypeAst>> params;
  TypeAst result;
  ExprP body;
  Span span;
};

// Syntax categories a model parameter (or result) may take.
enum class SynType { Id, Ex, Stat, BinOp, Bin, IsaDefs, Encs, CallEx };

const char* synTypeName(SynType t);

struct ModelDef {
  std::string name;
  std::vector<std::pair<std::string, SynType>> params;
  SynType result = SynType::IsaDefs;
  std::vector<Token> body;  // stored unexpanded
  Span span;
};

// A `$Model(arg ; arg ; ...)` instantiation at definition level, recorded
// unexpanded by the parser and replaced by expand_macros.
struct MacroCallDef {
  std::string name;
  std::vector<std::vector<Token>> args;
  Span span;
};

using IsaItem = std::variant<ConstantDef, UsingDef, RegFileDef, PcDef, MemDef,
                             FormatDef, InstructionDef, EncodingDef, AssemblyDef,
                             EnumDef, FunctionDef, ModelDef, MacroCallDef>;

struct IsaDef {
  std::string name;
  std::vector<IsaItem> items;
  Span span;
};

// ---------------------------------------------------- microarchitecture ----

struct StageAst {
  std::string name;
  std::string outName;   // empty when the stage has no output
  TypeAst outType;
  StmtP body;
  Span span;
};

struct LogicDef {
  std::string name;
  bool forwarding = false;
  Span span;
};

struct MiaDef {
  std::string name;
  std::string isaName;  // `implements` clause (may be empty)
  unsigned dataBusWidth = 0;  // 0: unspecified
  std::vector<LogicDef> logics;
  std::vector<StageAst> stages;
  Span span;
};

struct FirmwareAssign {
  std::string mem;  // MEM<n>( addr ) := word
  ExprP addr;
  unsigned units = 0;
  ExprP word;
  Span span;
};

struct ProcDef {
  std::string name;
  std::string isaName;
  std::string miaName;  // `with` clause
  ExprP start;
  std::string stopReg;  // `stop = PC = expr`
  ExprP stopValue;
  std::vector<FirmwareAssign> firmware;
  Span span;
};

struct SpecAst {
  std::vector<IsaDef> isas;
  std::vector<MiaDef> mias;
  std::vector<ProcDef> procs;
  std::string sourcePath;
};

}  // namespace pdl::ast
