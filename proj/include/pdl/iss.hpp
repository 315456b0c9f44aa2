#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdl/asm.hpp"
#include "pdl/frontend.hpp"
#include "pdl/ir.hpp"

namespace pdl::iss {

// One retired instruction: where it ran, what it was, what it changed.
struct TraceRecord {
  uint64_t pc = 0;
  uint64_t word = 0;
  std::string disasm;
  std::vector<ir::Effect> writes;  // sorted by (resource, index)
  std::string line;                // rendered trace line
};

// Stable one-line rendering shared by every simulator:
//   "<pc>: <word> <disasm> | <writes as name[index]=hex, comma separated>"
std::string traceLine(const frontend::Isa& isa, uint64_t pc, uint64_t word,
                      const std::string& disasm,
                      const std::vector<ir::Effect>& writes);

// Orders write records by (resource name, index) so trace lines are stable.
void sortWrites(std::vector<ir::Effect>& writes);

enum class HaltReason { StopHit, MaxSteps, Invalid };
const char* haltReasonName(HaltReason r);

struct RunResult {
  uint64_t steps = 0;
  HaltReason reason = HaltReason::MaxSteps;
  std::vector<TraceRecord> trace;
};

// Interpretive simulator over the canonical behavior graphs: sparse byte
// memory, dense register files with hardwired-zero entries, and a decoded
// instruction cache whose hits are revalidated against the word currently in
// memory (so self-modifying programs re-decode transparently).
class Machine {
 public:
  explicit Machine(const frontend::Isa& isa, bool useCache = true);

  // Copies raw bytes into memory. AddressOverflow when the image does not fit
  // the address space.
  void loadProgram(const std::vector<uint8_t>& image, uint64_t base);
  // Places the bundled firmware words and moves PC to the entry point.
  void loadFirmware(const frontend::Processor& proc);

  uint64_t pc() const { return pcVal; }
  void setPc(uint64_t v);
  uint64_t readReg(const std::string& file, uint64_t index) const;
  void writeReg(const std::string& file, uint64_t index, uint64_t value);
  uint64_t readMem(unsigned units, uint64_t addr) const;
  void writeMem(unsigned units, uint64_t addr, uint64_t value);
  const std::unordered_map<uint64_t, uint8_t>& memory() const { return mem; }

  // Executes the instruction at PC. Fetch, validated cache lookup, graph
  // evaluation against the pre-instruction snapshot, then effect application;
  // PC advances by one word unless the instruction wrote it.
  // Errors: MisalignedFetch, InvalidInstruction, DoubleWriteFault.
  TraceRecord step();

  // Steps until PC equals stopPc (checked before executing), the step budget
  // runs out, or a fetch/decode error halts the run as HaltReason::Invalid.
  RunResult run(uint64_t stopPc, uint64_t maxSteps);

  const assembler::Assembler& disassembler() const { return asmr; }
  const ir::Graph& graph(size_t instr) const { return graphs[instr]; }

 private:
  const frontend::Isa* isa;
  assembler::Assembler asmr;
  std::vector<ir::Graph> graphs;  // per instruction, built once
  std::unordered_map<std::string, std::vector<uint64_t>> regs;
  std::unordered_map<uint64_t, uint8_t> mem;
  uint64_t pcVal = 0;

  struct CacheEntry {
    uint64_t word = 0;
    int instr = -1;
  };
  std::unordered_map<uint64_t, CacheEntry> cache;
  bool useCache;

  unsigned fetchUnits() const;
  void faultOnCollisions(const std::vector<ir::Effect>& effects, uint64_t pc,
                         uint64_t word) const;
};

}  // namespace pdl::iss
