#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "pdl/frontend.hpp"

// Reference implementations used to cross-check the production pipeline.
// Everything here is written directly against the elaborated architecture
// description, independently of the behavior-graph machinery.
namespace pdl::oracle {

// ------------------------------------------------- reference interpreter ---

struct RefState {
  // file -> index -> raw register bits
  std::map<std::string, std::map<uint64_t, uint64_t>> regs;
  std::map<uint64_t, uint8_t> mem;
  uint64_t pc = 0;

  uint64_t readReg(const frontend::Isa& isa, const std::string& file, uint64_t idx) const;
};

struct RefEffect {
  enum Kind { Reg, Mem, Pc } kind;
  std::string file;  // register file name (Reg)
  uint64_t index = 0;
  uint64_t value = 0;
  unsigned width = 0;  // value width in bits (Mem: the store width)
};

struct RefResult {
  std::vector<RefEffect> effects;
  bool doubleWrite = false;  // two effects hit the same (resource, index)
};

// Executes one instruction's behavior on `word` against a state snapshot.
// Reads see the pre-state only; effects are collected, not applied.
RefResult refExecute(const frontend::Isa& isa, const frontend::Instruction& ins,
                     uint64_t word, const RefState& st);

// Applies effects (register zero-index squashing and little/big endian memory
// layout included).
void refApply(const frontend::Isa& isa, RefState& st, const std::vector<RefEffect>& effects);

// Extracts a format field from an instruction word (independent bit walker).
uint64_t refField(const frontend::Field& f, uint64_t word);

// ------------------------------------------------------ linear-scan decode --

struct RefPattern {
  uint64_t mask = 0;
  uint64_t value = 0;
};

// Fixed-bit pattern implied by an instruction's encoding constants.
RefPattern refPattern(const frontend::Isa& isa, const frontend::Instruction& ins);

// Index of the unique most-specific matching instruction, or -1. Assumes the
// instruction set already passed the production ambiguity checks.
int refDecode(const frontend::Isa& isa, uint64_t word);

// --------------------------------------------------------- pipeline timing --

// Stage placement summary for one pipeline organization, derived by hand from
// the stage definitions (not by the production resolver).
struct PipeShape {
  unsigned stages = 1;
  unsigned readStage = 0;    // register operand read
  unsigned verifyStage = 0;  // next-PC check, redirect source
  unsigned aluValueStage = 0;
  unsigned memValueStage = 0;  // load results
  bool forwarding = false;
};

struct TimedOp {
  bool isLoad = false;
  bool redirects = false;  // taken branch or jump (next fetch restarts)
  std::vector<std::pair<std::string, uint64_t>> reads;
  std::optional<std::pair<std::string, uint64_t>> write;  // register write
};

struct PipeCost {
  uint64_t cycles = 0;
  uint64_t stalls = 0;
  uint64_t flushes = 0;
};

// Event-driven completion-time recurrence over the executed instruction
// stream.
PipeCost refTiming(const PipeShape& shape, const std::vector<TimedOp>& ops);

// ------------------------------------------------------ wide-integer check --

// Evaluates a constant expression tree over unbounded integers with the
// dialect's operator conventions. Names resolve through `env`.
boost::multiprecision::cpp_int
bigEval(const ast::Expr& e, const std::map<std::string, boost::multiprecision::cpp_int>& env);

// Low 64 bits, two's complement.
uint64_t bigLow64(const boost::multiprecision::cpp_int& v);

}  // namespace pdl::oracle
