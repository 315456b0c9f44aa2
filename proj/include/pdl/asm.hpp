#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdl/decode.hpp"
#include "pdl/frontend.hpp"

namespace pdl::assembler {

// One operand slot recovered from an instruction's assembly definition.
struct Operand {
  enum class Kind {
    Register,  // register(x): lowercased file prefix + decimal index
    Decimal,   // decimal(x): signed iff the operand type is signed
    Hex,       // hex(x): 0x-prefixed; plain decimal also accepted on input
    Table,     // any other invertible expression, inverted by enumeration
  };
  Kind kind = Kind::Decimal;
  std::string target;      // bound field or access-function name
  bool isAccessFn = false;
  Type type;               // the operand value's type
  std::string regFile;     // Register: file whose index is encoded
  // Table: rendered text per operand value, matched longest-first.
  std::vector<std::pair<std::string, uint64_t>> table;
};

// A linear syntax template: literals, the mnemonic, and operand slots in
// left-to-right order.
struct Item {
  enum class K { Literal, Mnemonic, Operand };
  K k = K::Literal;
  std::string text;    // Literal content
  size_t operand = 0;  // Operand: index into InstrSyntax::operands
};

struct InstrSyntax {
  int instr = -1;
  std::string mnemonic;  // lowercased instruction name
  std::vector<Item> items;
  std::vector<Operand> operands;
};

// Two-way assembler derived by inverting each instruction's assembly
// formatting expression.
//
// Construction validates invertibility per instruction:
//  - operand slots without a separating literal        -> NonInjective
//  - the same operand bound twice                      -> NonInjective
//  - enumeration alternatives that render identically  -> NonInjective
//  - enumeration over more than 16 bits of operand (or
//    over several operands at once)                    -> DomainTooLarge
//  - encoding fields no operand or constant determines -> MissingOperand
class Assembler {
 public:
  static Assembler build(const frontend::Isa& isa);

  // Assembles one statement. Errors: NoMatchingInstruction (mnemonic unknown),
  // ParseError (operand syntax), OperandRangeError (value does not fit or
  // round-trip), PredicateViolation (operand rejected by its predicate).
  uint64_t assembleLine(const std::string& line) const;

  // Assembles a whole listing; '#' starts a comment, blank lines are skipped.
  // Error locations carry the 1-based source line.
  std::vector<uint64_t> assembleProgram(const std::string& text) const;

  // Renders the instruction a word decodes to; UnknownInstructionWord if none.
  std::string disassemble(uint64_t word) const;

  const decode::Decoder& decoder() const { return dec; }
  const std::vector<InstrSyntax>& syntaxes() const { return syn; }

 private:
  const frontend::Isa* isa = nullptr;
  decode::Decoder dec;
  std::vector<InstrSyntax> syn;  // indexed by instruction

  // Matches one candidate syntax. Returns false when the mnemonic (or a
  // leading literal) does not match, so the next candidate can be tried;
  // throws once the line is committed to this instruction but malformed.
  bool tryLine(const InstrSyntax& s, const std::string& line, uint64_t& word) const;
};

}  // namespace pdl::assembler
