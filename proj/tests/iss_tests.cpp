#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "pdl/iss.hpp"
#include "support/oracle.hpp"
#include "support/testutil.hpp"

using namespace pdl;
using pdl::testutil::corpus;
using pdl::testutil::elabText;
using pdl::testutil::expectError;
using pdl::testutil::wrapIsa;

namespace {

constexpr uint64_t kBase = 0x80000000;
constexpr uint64_t kStop = 0xe0000000;

std::string readProgram(const std::string& name) {
  std::ifstream in(std::string(PDL_PROGRAM_DIR "/") + name);
  REQUIRE_MESSAGE(in.good(), "missing program " << name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Little-endian byte image of a word list, as a loader would produce.
std::vector<uint8_t> toImage(const std::vector<uint64_t>& words) {
  std::vector<uint8_t> img;
  img.reserve(words.size() * 4);
  for (uint64_t w : words)
    for (int i = 0; i < 4; i++) img.push_back(static_cast<uint8_t>(w >> (8 * i)));
  return img;
}

iss::Machine loadMachine(const frontend::Isa& isa, const std::string& file,
                         bool cache = true) {
  iss::Machine m(isa, cache);
  m.loadProgram(toImage(m.disassembler().assembleProgram(readProgram(file))), kBase);
  m.setPc(kBase);
  return m;
}

uint64_t fetchLE(const oracle::RefState& st, uint64_t pc) {
  uint64_t w = 0;
  for (int i = 0; i < 4; i++) {
    auto it = st.mem.find((pc + i) & 0xffffffffu);
    w |= uint64_t(it == st.mem.end() ? 0 : it->second) << (8 * i);
  }
  return w;
}

// Kind-independent comparable form of a write effect. The rank mirrors the
// trace ordering (MEM < PC < X by resource name).
using Eff = std::tuple<int, std::string, uint64_t, uint64_t, unsigned>;

std::vector<Eff> fromMachine(const std::vector<ir::Effect>& ws) {
  std::vector<Eff> out;
  for (const ir::Effect& e : ws) {
    int rank = e.kind == ir::Effect::Kind::Mem ? 0
             : e.kind == ir::Effect::Kind::Pc ? 1 : 2;
    out.push_back({rank, e.kind == ir::Effect::Kind::Reg ? e.file : "",
                   e.kind == ir::Effect::Kind::Pc ? 0 : e.index, e.value.bits,
                   e.value.width});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Eff> fromOracle(const std::vector<oracle::RefEffect>& es) {
  std::vector<Eff> out;
  for (const oracle::RefEffect& e : es) {
    int rank = e.kind == oracle::RefEffect::Mem ? 0
             : e.kind == oracle::RefEffect::Pc ? 1 : 2;
    out.push_back({rank, e.kind == oracle::RefEffect::Reg ? e.file : "",
                   e.kind == oracle::RefEffect::Pc ? 0 : e.index, e.value,
                   e.width});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string showEffs(const std::vector<Eff>& es) {
  std::string s;
  for (const auto& [rank, file, index, value, width] : es)
    s += fmt::format("({} {} [{}] = 0x{:x} w{}) ", rank, file, index, value, width);
  return s;
}

// Advances the reference state by one instruction: fetch from its own memory,
// linear-scan decode, reference execution, then effect application.
oracle::RefResult refStep(const frontend::Isa& isa, oracle::RefState& st) {
  uint64_t word = fetchLE(st, st.pc);
  int idx = oracle::refDecode(isa, word);
  REQUIRE(idx >= 0);
  oracle::RefResult r =
      oracle::refExecute(isa, isa.instructions[static_cast<size_t>(idx)], word, st);
  oracle::refApply(isa, st, r.effects);
  bool wrotePc = false;
  for (const auto& e : r.effects) wrotePc |= e.kind == oracle::RefEffect::Pc;
  if (!wrotePc) st.pc = (st.pc + 4) & 0xffffffffu;
  return r;
}

struct ProgramExpect {
  const char* file;
  uint64_t steps;
  std::vector<std::pair<uint64_t, uint64_t>> regs;      // X index -> value
  std::vector<std::pair<uint64_t, uint64_t>> memWords;  // addr -> 32-bit word
};

const std::vector<ProgramExpect>& programTable() {
  static const std::vector<ProgramExpect> t = {
      {"sum.s", 35, {{1, 10}, {2, 10}, {10, 55}}, {}},
      {"hazard.s",
       10,
       {{1, 5}, {2, 8}, {3, 13}, {4, 0x80001000}, {5, 13}, {6, 26}},
       {{0x80001000, 13}}},
      {"selfmod.s",
       12,
       {{5, 42}, {6, 1}, {1, 0x02a00293}, {2, 0x80000000}},
       {{0x80000000, 0x02a00293}}},
      {"memcpy.s",
       37,
       {{3, 0}, {4, 68}, {5, 68}, {1, 0x80001010}, {2, 0x80002010}},
       {{0x80002000, 17}, {0x80002004, 34}, {0x80002008, 51}, {0x8000200c, 68}}},
      {"stores.s",
       13,
       {{2, 0xfffffffe},
        {3, 0xfffffffe},
        {4, 0xfe},
        {5, 0xfffffffe},
        {6, 0xfffe},
        {8, 0xfffffffe},
        {9, 0xffff}},
       {{0x80001000, 0xfffffffe}}},
  };
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Trace rendering
// ---------------------------------------------------------------------------

TEST_CASE("trace lines render pc, word, disassembly and sorted writes") {
  const frontend::Isa& isa = corpus().isa;
  iss::Machine m(isa);
  const assembler::Assembler& as = m.disassembler();

  SUBCASE("register write") {
    uint64_t w = as.assembleLine("addi x1, x0, 10");
    REQUIRE(w == 0x00a00093);
    m.writeMem(4, kBase, w);
    m.setPc(kBase);
    iss::TraceRecord rec = m.step();
    CHECK(rec.pc == kBase);
    CHECK(rec.word == w);
    CHECK(rec.disasm == "addi x1, x0, 10");
    REQUIRE(rec.writes.size() == 1);
    CHECK(rec.line == "80000000: 00a00093 addi x1, x0, 10 | X[1]=0x0000000a");
    CHECK(m.pc() == kBase + 4);
  }

  SUBCASE("memory write uses the byte address") {
    uint64_t w = as.assembleLine("sw x1, 4(x2)");
    REQUIRE(w == 0x00112223);
    m.writeReg("X", 1, 0xdeadbeef);
    m.writeReg("X", 2, 0x80001000);
    m.writeMem(4, kBase + 4, w);
    m.setPc(kBase + 4);
    iss::TraceRecord rec = m.step();
    CHECK(rec.line ==
          "80000004: 00112223 sw x1, 4(x2) | MEM[0x80001004]=0xdeadbeef");
    CHECK(m.readMem(4, 0x80001004) == 0xdeadbeef);
  }

  SUBCASE("multiple writes come out sorted by resource name") {
    uint64_t w = as.assembleLine("jal x1, 8");
    REQUIRE(w == 0x008000ef);
    m.writeMem(4, kBase, w);
    m.setPc(kBase);
    iss::TraceRecord rec = m.step();
    REQUIRE(rec.writes.size() == 2);
    CHECK(rec.line ==
          "80000000: 008000ef jal x1, 8 | PC=0x80000008, X[1]=0x80000004");
    CHECK(m.pc() == kBase + 8);
  }

  SUBCASE("a not-taken branch writes nothing") {
    uint64_t w = as.assembleLine("bne x1, x1, 8");
    m.writeMem(4, kBase, w);
    m.setPc(kBase);
    iss::TraceRecord rec = m.step();
    CHECK(rec.writes.empty());
    CHECK(rec.line == fmt::format("{:08x}: {:08x} bne x1, x1, 8 |", kBase, w));
    CHECK(m.pc() == kBase + 4);  // fell through
  }

  SUBCASE("hardwired-zero writes are traced but do not change state") {
    uint64_t w = as.assembleLine("addi x0, x0, 5");
    m.writeMem(4, kBase, w);
    m.setPc(kBase);
    iss::TraceRecord rec = m.step();
    REQUIRE(rec.writes.size() == 1);
    CHECK(rec.line.find("X[0]=0x00000005") != std::string::npos);
    CHECK(m.readReg("X", 0) == 0);
  }
}

// ---------------------------------------------------------------------------
// Random single-instruction differential against the reference interpreter
// ---------------------------------------------------------------------------

TEST_CASE("every instruction matches the reference interpreter on random state") {
  const frontend::Isa& isa = corpus().isa;
  auto& rng = testutil::rng();

  iss::Machine m(isa);  // cache on: the word under pc changes every trial
  oracle::RefState st;

  // Seed a shared scratch region so loads often hit initialized bytes.
  for (uint64_t a = 0; a < 256; a++) {
    uint8_t b = static_cast<uint8_t>(rng());
    m.writeMem(1, 0x80001000 + a, b);
    st.mem[0x80001000 + a] = b;
  }

  const int kTrials = 800;
  int failures = 0;
  std::string first;
  for (size_t i = 0; i < isa.instructions.size() && failures == 0; i++) {
    const frontend::Instruction& ins = isa.instructions[i];
    oracle::RefPattern pat = oracle::refPattern(isa, ins);
    for (int t = 0; t < kTrials; t++) {
      uint64_t word = (rng() & 0xffffffffu & ~pat.mask) | pat.value;
      for (int k = 0; k < 8; k++) {
        uint64_t idx = 1 + rng() % 31;
        uint64_t v = (k % 2) ? rng() & 0xffffffffu
                             : 0x80001000 + (rng() % 240);
        m.writeReg("X", idx, v);
        st.regs["X"][idx] = v;
      }
      m.writeMem(4, kBase, word);
      for (int b = 0; b < 4; b++)
        st.mem[kBase + static_cast<uint64_t>(b)] =
            static_cast<uint8_t>(word >> (8 * b));
      m.setPc(kBase);
      st.pc = kBase;

      oracle::RefResult ref = oracle::refExecute(isa, ins, word, st);
      REQUIRE(!ref.doubleWrite);
      iss::TraceRecord rec = m.step();

      std::vector<Eff> got = fromMachine(rec.writes);
      std::vector<Eff> want = fromOracle(ref.effects);
      oracle::refApply(isa, st, ref.effects);
      bool wrotePc = false;
      for (const auto& e : ref.effects) wrotePc |= e.kind == oracle::RefEffect::Pc;
      if (!wrotePc) st.pc = (st.pc + 4) & 0xffffffffu;

      if (got != want || st.pc != m.pc()) {
        failures++;
        first = fmt::format(
            "{} word 0x{:08x} trial {}: simulator [{}] oracle [{}] pc {:x}/{:x}",
            ins.name, word, t, showEffs(got), showEffs(want), m.pc(), st.pc);
        break;
      }
    }
    // Register files must agree in full after each instruction's batch.
    for (uint64_t r = 0; r < 32 && failures == 0; r++) {
      if (m.readReg("X", r) != st.readReg(isa, "X", r)) {
        failures++;
        first = fmt::format("{}: register x{} diverged", ins.name, r);
      }
    }
  }
  CHECK_MESSAGE(failures == 0, first);

  // Memory contents agree byte for byte at the end of the whole run.
  size_t checked = 0;
  for (const auto& [a, b] : m.memory()) {
    auto it = st.mem.find(a);
    uint8_t ob = it == st.mem.end() ? 0 : it->second;
    if (b != ob) {
      CHECK_MESSAGE(false, fmt::format("memory byte 0x{:x}: {} vs {}", a, b, ob));
      break;
    }
    checked++;
  }
  CHECK(checked == m.memory().size());
  for (const auto& [a, b] : st.mem)
    if (b != 0 && !m.memory().count(a)) {
      CHECK_MESSAGE(false, fmt::format("oracle-only byte at 0x{:x}", a));
      break;
    }
}

// ---------------------------------------------------------------------------
// Whole programs, locked step for step against the reference interpreter
// ---------------------------------------------------------------------------

TEST_CASE("bundled programs run to the stop address with the expected finals") {
  const frontend::Isa& isa = corpus().isa;
  for (const ProgramExpect& pe : programTable()) {
    CAPTURE(pe.file);
    iss::Machine m = loadMachine(isa, pe.file);

    oracle::RefState st;
    st.pc = kBase;
    for (const auto& [a, b] : m.memory()) st.mem[a] = b;

    uint64_t steps = 0;
    while (m.pc() != kStop && steps < 1000) {
      uint64_t pcBefore = m.pc();
      oracle::RefResult ref = refStep(isa, st);
      iss::TraceRecord rec = m.step();
      REQUIRE(rec.pc == pcBefore);
      std::vector<Eff> got = fromMachine(rec.writes);
      std::vector<Eff> want = fromOracle(ref.effects);
      REQUIRE_MESSAGE(got == want,
                      fmt::format("{} pc 0x{:x}: [{}] vs [{}]", pe.file, rec.pc,
                                  showEffs(got), showEffs(want)));
      REQUIRE(m.pc() == st.pc);
      steps++;
    }
    CHECK(m.pc() == kStop);
    CHECK(steps == pe.steps);
    for (const auto& [idx, v] : pe.regs) {
      CAPTURE(idx);
      CHECK(m.readReg("X", idx) == v);
    }
    for (const auto& [addr, v] : pe.memWords) {
      CAPTURE(addr);
      CHECK(m.readMem(4, addr) == v);
    }
  }
}

TEST_CASE("run() reports stop-hit and collects the full trace") {
  const frontend::Isa& isa = corpus().isa;
  iss::Machine m = loadMachine(isa, "sum.s");
  iss::RunResult res = m.run(kStop, 10000);
  CHECK(res.reason == iss::HaltReason::StopHit);
  CHECK(res.steps == 35);
  CHECK(res.trace.size() == 35);
  CHECK(m.readReg("X", 10) == 55);
  CHECK(m.pc() == kStop);
  // First and last lines pin the format end to end.
  CHECK(res.trace.front().line ==
        "80000000: 00a00093 addi x1, x0, 10 | X[1]=0x0000000a");
  CHECK(res.trace.back().line ==
        "8000001c: 00038067 jalr x0, x7, 0 | PC=0xe0000000, X[0]=0x80000020");
}

// ---------------------------------------------------------------------------
// Decoded-instruction cache
// ---------------------------------------------------------------------------

TEST_CASE("traces are identical with and without the decoded-instruction cache") {
  const frontend::Isa& isa = corpus().isa;
  for (const ProgramExpect& pe : programTable()) {
    CAPTURE(pe.file);
    iss::Machine cached = loadMachine(isa, pe.file, true);
    iss::Machine plain = loadMachine(isa, pe.file, false);
    iss::RunResult a = cached.run(kStop, 10000);
    iss::RunResult b = plain.run(kStop, 10000);
    CHECK(a.reason == iss::HaltReason::StopHit);
    CHECK(b.reason == iss::HaltReason::StopHit);
    REQUIRE(a.steps == b.steps);
    for (size_t i = 0; i < a.trace.size(); i++) {
      if (a.trace[i].line != b.trace[i].line) {
        CHECK_MESSAGE(false, fmt::format("{} step {}: '{}' vs '{}'", pe.file, i,
                                         a.trace[i].line, b.trace[i].line));
        break;
      }
    }
  }
}

TEST_CASE("self-modifying code re-decodes when the cached word changes") {
  const frontend::Isa& isa = corpus().isa;
  iss::Machine m = loadMachine(isa, "selfmod.s");
  iss::RunResult res = m.run(kStop, 10000);
  CHECK(res.reason == iss::HaltReason::StopHit);
  CHECK(m.readReg("X", 5) == 42);

  // The slot pc is executed twice with different words.
  CHECK(res.trace[0].pc == kBase);
  CHECK(res.trace[0].disasm == "addi x5, x0, 7");
  bool patched = false;
  for (const iss::TraceRecord& r : res.trace)
    patched |= r.pc == kBase && r.disasm == "addi x5, x0, 42" &&
               r.word == 0x02a00293;
  CHECK(patched);
}

// ---------------------------------------------------------------------------
// Snapshot semantics and write collisions
// ---------------------------------------------------------------------------

namespace {

const frontend::SpecModel& miniIsa() {
  static const frontend::SpecModel model = elabText(wrapIsa(R"(
format G : Bits<32> =
{ rd   [31..27]
, rs1  [26..22]
, rs2  [21..17]
, rest [16..0]
}

instruction SWP : G = {
  X(rd) := X(rs1)
  X(rs1) := X(rs2)
}
encoding SWP = { rest = 0 }
assembly SWP = (mnemonic, " ", register(rd), ", ", register(rs1), ", ", register(rs2))

instruction WRR : G = {
  X(rs1) := 1 as Bits<32>
  X(rs2) := 2 as Bits<32>
}
encoding WRR = { rest = 1, rd = 0 }
assembly WRR = (mnemonic, " ", register(rs1), ", ", register(rs2))

instruction MST : G = {
  MEM<4>( X(rs1) ) := X(rd)
  MEM<4>( X(rs2) ) := X(rd)
}
encoding MST = { rest = 2 }
assembly MST = (mnemonic, " ", register(rd), ", ", register(rs1), ", ", register(rs2))
)"));
  return model;
}

}  // namespace

TEST_CASE("reads see the pre-instruction snapshot under dynamic aliasing") {
  const frontend::Isa& isa = miniIsa().isa;
  iss::Machine m(isa);
  // SWP x3, x4, x3: statement one writes x3, statement two must still read
  // the old x3 when storing into x4 -- a swap, not a copy.
  uint64_t w = m.disassembler().assembleLine("swp x3, x4, x3");
  m.writeReg("X", 3, 111);
  m.writeReg("X", 4, 222);
  m.writeMem(4, 0, w);
  m.setPc(0);
  m.step();
  CHECK(m.readReg("X", 3) == 222);
  CHECK(m.readReg("X", 4) == 111);
}

TEST_CASE("dynamically aliased register writes fault") {
  const frontend::Isa& isa = miniIsa().isa;
  iss::Machine m(isa);

  // Distinct indexes: fine.
  m.writeMem(4, 0, m.disassembler().assembleLine("wrr x1, x2"));
  m.setPc(0);
  m.step();
  CHECK(m.readReg("X", 1) == 1);
  CHECK(m.readReg("X", 2) == 2);

  // Same index at runtime: fault, not last-write-wins.
  m.writeMem(4, 4, m.disassembler().assembleLine("wrr x5, x5"));
  m.setPc(4);
  std::string msg = expectError(Code::DoubleWriteFault, [&] { m.step(); });
  CHECK(msg.find("X(5)") != std::string::npos);
  CHECK(msg.find("twice") != std::string::npos);
}

TEST_CASE("overlapping memory stores fault byte-granularly") {
  const frontend::Isa& isa = miniIsa().isa;
  iss::Machine m(isa);
  uint64_t w = m.disassembler().assembleLine("mst x3, x1, x2");
  m.writeMem(4, 0, w);
  m.writeReg("X", 3, 0xaabbccdd);

  // Disjoint ranges succeed.
  m.writeReg("X", 1, 0x1000);
  m.writeReg("X", 2, 0x1004);
  m.setPc(0);
  m.step();
  CHECK(m.readMem(4, 0x1000) == 0xaabbccdd);
  CHECK(m.readMem(4, 0x1004) == 0xaabbccdd);

  // A two-byte overlap faults even though the start addresses differ.
  m.writeReg("X", 1, 0x2000);
  m.writeReg("X", 2, 0x2002);
  m.setPc(0);
  std::string msg = expectError(Code::DoubleWriteFault, [&] { m.step(); });
  CHECK(msg.find("MEM(0x2002)") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Halt conditions and loader edges
// ---------------------------------------------------------------------------

TEST_CASE("halt reasons") {
  const frontend::Isa& isa = corpus().isa;

  SUBCASE("max-steps of zero wins even when pc is already at the stop") {
    iss::Machine m = loadMachine(isa, "sum.s");
    m.setPc(kStop);
    iss::RunResult res = m.run(kStop, 0);
    CHECK(res.reason == iss::HaltReason::MaxSteps);
    CHECK(res.steps == 0);
    CHECK(res.trace.empty());
  }

  SUBCASE("the stop address halts before executing what it holds") {
    iss::Machine m(isa);
    m.writeMem(4, kBase, m.disassembler().assembleLine("addi x1, x0, 1"));
    m.setPc(kBase);
    iss::RunResult res = m.run(kBase, 100);  // stop == entry
    CHECK(res.reason == iss::HaltReason::StopHit);
    CHECK(res.steps == 0);
    CHECK(m.readReg("X", 1) == 0);
  }

  SUBCASE("a step budget interrupts a longer run") {
    iss::Machine m = loadMachine(isa, "sum.s");
    iss::RunResult res = m.run(kStop, 7);
    CHECK(res.reason == iss::HaltReason::MaxSteps);
    CHECK(res.steps == 7);
    CHECK(res.trace.size() == 7);
  }

  SUBCASE("an unknown word halts as invalid, keeping the trace so far") {
    iss::Machine m(isa);
    m.writeMem(4, kBase, m.disassembler().assembleLine("addi x1, x0, 3"));
    m.writeMem(4, kBase + 4, 0);  // all zeros decodes to nothing
    m.setPc(kBase);
    iss::RunResult res = m.run(kStop, 100);
    CHECK(res.reason == iss::HaltReason::Invalid);
    CHECK(res.steps == 1);
    CHECK(res.trace.size() == 1);
    CHECK(m.readReg("X", 1) == 3);
  }

  SUBCASE("a misaligned pc halts as invalid") {
    iss::Machine m(isa);
    m.setPc(kBase + 1);
    iss::RunResult res = m.run(kStop, 100);
    CHECK(res.reason == iss::HaltReason::Invalid);
    CHECK(res.steps == 0);
  }

  SUBCASE("names") {
    CHECK(std::string(iss::haltReasonName(iss::HaltReason::StopHit)) == "stop-hit");
    CHECK(std::string(iss::haltReasonName(iss::HaltReason::MaxSteps)) == "max-steps");
    CHECK(std::string(iss::haltReasonName(iss::HaltReason::Invalid)) == "invalid");
  }
}

TEST_CASE("step() faults carry the offending pc and word") {
  const frontend::Isa& isa = corpus().isa;
  iss::Machine m(isa);

  m.setPc(kBase + 2);
  std::string msg = expectError(Code::MisalignedFetch, [&] { m.step(); });
  CHECK(msg.find("80000002") != std::string::npos);

  m.setPc(kBase);
  msg = expectError(Code::InvalidInstruction, [&] { m.step(); });
  CHECK(msg.find("unknown instruction word 0x00000000") != std::string::npos);
}

TEST_CASE("program images must fit the address space") {
  const frontend::Isa& isa = corpus().isa;
  iss::Machine m(isa);

  std::string msg = expectError(Code::AddressOverflow, [&] {
    m.loadProgram(std::vector<uint8_t>(8, 0xff), 0xfffffffc);
  });
  CHECK(msg.find("8 bytes") != std::string::npos);

  // Exactly reaching the top of the address space is fine.
  m.loadProgram({0x11, 0x22, 0x33, 0x44}, 0xfffffffc);
  CHECK(m.readMem(1, 0xffffffff) == 0x44);

  m.loadProgram({}, 0x100000000);  // empty image never overflows
}

TEST_CASE("the bundled firmware runs to its stop address") {
  const frontend::SpecModel& model = corpus();
  REQUIRE(model.proc.has_value());
  const frontend::Processor& proc = *model.proc;
  CHECK(proc.start == kBase);
  CHECK(proc.stopPc == kStop);

  iss::Machine m(model.isa);
  m.loadFirmware(proc);
  CHECK(m.pc() == proc.start);
  iss::RunResult res = m.run(proc.stopPc, 100);
  CHECK(res.reason == iss::HaltReason::StopHit);
  CHECK(res.steps == 3);
  REQUIRE(res.trace.size() == 3);
  CHECK(res.trace[0].disasm == "add x9, x11, x12");
  CHECK(m.readReg("X", 9) == 0);  // x11 + x12 with zeroed registers
  CHECK(m.readReg("X", 7) == kStop);
  CHECK(m.pc() == kStop);
}
