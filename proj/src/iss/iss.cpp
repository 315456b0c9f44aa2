#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "pdl/diag.hpp"
#include "pdl/iss.hpp"

namespace pdl::iss {

namespace {

std::string renderWrite(const frontend::Isa& isa, const ir::Effect& e) {
  switch (e.kind) {
    case ir::Effect::Kind::Reg:
      return fmt::format("{}[{}]=0x{:0{}x}", e.file, e.index, e.value.bits,
                         e.value.width / 4);
    case ir::Effect::Kind::Mem:
      return fmt::format("{}[0x{:0{}x}]=0x{:0{}x}", e.file, e.index,
                         isa.mem.addrWidth / 4, e.value.bits, e.value.width / 4);
    case ir::Effect::Kind::Pc:
      return fmt::format("{}=0x{:0{}x}", e.file, e.value.bits, e.value.width / 4);
  }
  return {};
}

}  // namespace

void sortWrites(std::vector<ir::Effect>& writes) {
  std::stable_sort(writes.begin(), writes.end(),
                   [](const ir::Effect& a, const ir::Effect& b) {
                     if (a.file != b.file) return a.file < b.file;
                     return a.index < b.index;
                   });
}

std::string traceLine(const frontend::Isa& isa, uint64_t pc, uint64_t word,
                      const std::string& disasm,
                      const std::vector<ir::Effect>& writes) {
  std::string line = fmt::format("{:0{}x}: {:0{}x} {} |", pc, isa.pc.width / 4,
                                 word, isa.instrWidth / 4, disasm);
  bool first = true;
  for (const ir::Effect& e : writes) {
    line += first ? " " : ", ";
    first = false;
    line += renderWrite(isa, e);
  }
  return line;
}

const char* haltReasonName(HaltReason r) {
  switch (r) {
    case HaltReason::StopHit: return "stop-hit";
    case HaltReason::MaxSteps: return "max-steps";
    case HaltReason::Invalid: return "invalid";
  }
  return "?";
}

Machine::Machine(const frontend::Isa& isa, bool useCache)
    : isa(&isa), asmr(assembler::Assembler::build(isa)), useCache(useCache) {
  graphs.reserve(isa.instructions.size());
  for (const frontend::Instruction& ins : isa.instructions)
    graphs.push_back(ir::buildGraph(isa, ins));
  for (const frontend::RegFile& rf : isa.regFiles)
    regs[rf.name] = std::vector<uint64_t>(size_t{1} << rf.indexWidth, 0);
}

unsigned Machine::fetchUnits() const {
  return isa->instrWidth / isa->mem.unitWidth;
}

void Machine::loadProgram(const std::vector<uint8_t>& image, uint64_t base) {
  unsigned aw = isa->mem.addrWidth;
  if (aw < 64 && base + image.size() > (uint64_t{1} << aw))
    fail(Code::AddressOverflow,
         fmt::format("image of {} bytes at 0x{:x} exceeds the {}-bit address "
                     "space",
                     image.size(), base, aw));
  for (size_t i = 0; i < image.size(); i++) mem[base + i] = image[i];
}

void Machine::loadFirmware(const frontend::Processor& proc) {
  for (const auto& [addr, word] : proc.firmware)
    writeMem(word.width / isa->mem.unitWidth, addr, word.bits);
  setPc(proc.start);
}

void Machine::setPc(uint64_t v) { pcVal = v & maskOf(isa->pc.width); }

uint64_t Machine::readReg(const std::string& file, uint64_t index) const {
  const frontend::RegFile* rf = isa->regFile(file);
  if (rf->zeroIndexes.count(index)) return 0;
  return regs.at(file)[index];
}

void Machine::writeReg(const std::string& file, uint64_t index, uint64_t value) {
  const frontend::RegFile* rf = isa->regFile(file);
  if (rf->zeroIndexes.count(index)) return;  // hardwired zero
  regs.at(file)[index] = value & maskOf(rf->elemType.width);
}

uint64_t Machine::readMem(unsigned units, uint64_t addr) const {
  uint64_t amask = maskOf(isa->mem.addrWidth);
  uint64_t bits = 0;
  for (unsigned i = 0; i < units; i++) {
    auto it = mem.find((addr + i) & amask);
    uint64_t byte = it == mem.end() ? 0 : it->second;
    unsigned pos = isa->mem.littleEndian ? i : units - 1 - i;
    bits |= byte << (8 * pos);
  }
  return bits;
}

void Machine::writeMem(unsigned units, uint64_t addr, uint64_t value) {
  uint64_t amask = maskOf(isa->mem.addrWidth);
  for (unsigned i = 0; i < units; i++) {
    unsigned pos = isa->mem.littleEndian ? i : units - 1 - i;
    mem[(addr + i) & amask] = static_cast<uint8_t>(value >> (8 * pos));
  }
}

// One instruction may touch each architectural destination at most once; a
// dynamic overlap (aliased register indexes or memory ranges) is a fault
// rather than silent last-write-wins.
void Machine::faultOnCollisions(const std::vector<ir::Effect>& effects,
                                uint64_t pc, uint64_t word) const {
  std::set<std::pair<std::string, uint64_t>> regSeen;
  std::set<uint64_t> memBytes;
  uint64_t amask = maskOf(isa->mem.addrWidth);
  int pcWrites = 0;
  for (const ir::Effect& e : effects) {
    bool clash = false;
    std::string shown;
    switch (e.kind) {
      case ir::Effect::Kind::Reg:
        clash = !regSeen.insert({e.file, e.index}).second;
        shown = fmt::format("{}({})", e.file, e.index);
        break;
      case ir::Effect::Kind::Mem:
        for (unsigned i = 0; i < e.units; i++)
          clash |= !memBytes.insert((e.index + i) & amask).second;
        shown = fmt::format("{}(0x{:x})", e.file, e.index);
        break;
      case ir::Effect::Kind::Pc:
        clash = ++pcWrites > 1;
        shown = e.file;
        break;
    }
    if (clash)
      fail(Code::DoubleWriteFault,
           fmt::format("pc 0x{:0{}x}: word 0x{:0{}x} writes {} twice in one "
                       "instruction",
                       pc, isa->pc.width / 4, word, isa->instrWidth / 4, shown));
  }
}

TraceRecord Machine::step() {
  unsigned units = fetchUnits();
  if (pcVal % units != 0)
    fail(Code::MisalignedFetch,
         fmt::format("pc 0x{:0{}x} is not aligned to the {}-byte instruction "
                     "width",
                     pcVal, isa->pc.width / 4, units));
  uint64_t word = readMem(units, pcVal);

  int idx = -1;
  if (useCache) {
    auto it = cache.find(pcVal);
    if (it != cache.end() && it->second.word == word) idx = it->second.instr;
  }
  if (idx < 0) {
    idx = asmr.decoder().decode(word);
    if (idx < 0)
      fail(Code::InvalidInstruction,
           fmt::format("pc 0x{:0{}x}: unknown instruction word 0x{:0{}x}",
                       pcVal, isa->pc.width / 4, word, isa->instrWidth / 4));
    if (useCache) cache[pcVal] = CacheEntry{word, idx};
  }

  ir::EvalCtx ctx;
  ctx.isa = isa;
  ctx.word = word;
  ctx.pc = pcVal;
  ctx.instrIndex = idx;
  ctx.readReg = [this](const std::string& file, uint64_t index) {
    return makeValue(readReg(file, index), isa->regFile(file)->elemType.width);
  };
  ctx.readMem = [this](unsigned u, uint64_t addr) { return readMem(u, addr); };
  std::vector<ir::Effect> effects = ir::evalGraph(graphs[static_cast<size_t>(idx)], ctx);
  faultOnCollisions(effects, pcVal, word);

  TraceRecord rec;
  rec.pc = pcVal;
  rec.word = word;
  rec.disasm = asmr.disassemble(word);

  bool wrotePc = false;
  for (const ir::Effect& e : effects) {
    switch (e.kind) {
      case ir::Effect::Kind::Reg:
        writeReg(e.file, e.index, e.value.bits);
        break;
      case ir::Effect::Kind::Mem:
        writeMem(e.units, e.index, e.value.bits);
        break;
      case ir::Effect::Kind::Pc:
        setPc(e.value.bits);
        wrotePc = true;
        break;
    }
  }
  if (!wrotePc) setPc(rec.pc + units);

  rec.writes = std::move(effects);
  sortWrites(rec.writes);
  rec.line = traceLine(*isa, rec.pc, rec.word, rec.disasm, rec.writes);
  return rec;
}

RunResult Machine::run(uint64_t stopPc, uint64_t maxSteps) {
  RunResult res;
  for (;;) {
    if (res.steps >= maxSteps) {
      res.reason = HaltReason::MaxSteps;
      return res;
    }
    if (pcVal == (stopPc & maskOf(isa->pc.width))) {
      res.reason = HaltReason::StopHit;
      return res;
    }
    try {
      res.trace.push_back(step());
    } catch (const SpecError& e) {
      if (e.code() == Code::InvalidInstruction || e.code() == Code::MisalignedFetch) {
        res.reason = HaltReason::Invalid;
        return res;
      }
      throw;
    }
    res.steps++;
  }
}

}  // namespace pdl::iss
