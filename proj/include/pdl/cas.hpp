#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pdl/iss.hpp"
#include "pdl/mia.hpp"

namespace pdl::cas {

struct Options {
  uint64_t stopPc = 0;
  uint64_t maxCycles = 1'000'000;
};

struct Result {
  uint64_t cycles = 0;
  uint64_t retired = 0;
  uint64_t stalls = 0;   // stall cycles charged to retired instructions
  uint64_t flushes = 0;  // mispredict redirects taken
  iss::HaltReason reason = iss::HaltReason::StopHit;
  std::vector<iss::TraceRecord> trace;  // retired instructions, program order
};

// Cycle-accurate simulator for a resolved pipeline. Each cycle the stages
// evaluate oldest-first; an occupant executes exactly the progress-graph
// nodes its stage was assigned. Architectural writes commit at the end of the
// cycle of their scheduled stage; register reads see committed state unless a
// forwarding path can supply the producer's already-computed value, otherwise
// the reader and everything behind it stall. Fetch predicts not-taken; the
// verify stage compares the actual next PC against the prediction and on a
// mismatch squashes all younger stages and redirects fetch. An undecodable or
// misaligned fetch faults when it reaches the verify stage, after older
// instructions retire.
class Simulator {
 public:
  explicit Simulator(const mia::PipelineModel& model);

  iss::Machine& machine() { return m; }
  const iss::Machine& machine() const { return m; }

  // Runs until fetch reaches `stopPc` and the pipeline drains (StopHit) or a
  // bad fetch reaches verify (Invalid). Exceeding the cycle budget raises
  // MaxCycles; a load contending with fetch for the memory read port raises
  // PortConflict.
  Result run(const Options& opt);

 private:
  struct Occ {
    uint64_t pc = 0;
    uint64_t word = 0;
    int instr = -1;            // decoded index; -1 with fault set: bad fetch
    std::string fault;         // diagnostic carried to the verify stage
    Code faultCode = Code::InvalidInstruction;
    bool poisoned = false;     // fault acknowledged at verify; retires silently
    uint64_t nextPc = 0;
    int doneStage = -1;        // highest stage fully executed
    uint64_t stallCycles = 0;
    std::vector<Value> vals;   // per-node values computed so far
    std::vector<char> have;
    std::vector<ir::Effect> effects;  // for the retirement trace
  };

  const mia::PipelineModel* model;
  const frontend::Isa* isa;
  iss::Machine m;
  std::vector<std::optional<Occ>> occ;  // per stage
  uint64_t fetchPc = 0;
  bool stopFetch = false;  // a fault reached verify; drain only

  unsigned units = 4;
  uint64_t pcMask = 0;
  std::vector<ir::NodeId> regWrites;  // WriteReg nodes, id order

  Occ makeOcc(uint64_t pc);
  std::optional<Value> peek(const Occ& o, ir::NodeId id) const;
  bool stallAgainst(const Occ& reader, int stage, const std::string& file,
                    uint64_t idx, std::optional<Value>& forwarded);
  // Executes stage `s` for `o`; returns false when a hazard stalls it.
  // Successful writes are appended to `out`.
  bool exec(Occ& o, int s, bool fetched, std::vector<ir::Effect>& out);
};

Result simulate(const mia::PipelineModel& model,
                const std::vector<uint8_t>& image, uint64_t base,
                uint64_t start, const Options& opt);

struct CosimReport {
  uint64_t steps = 0;  // retired instructions, identical on both sides
  uint64_t cycles = 0;
  uint64_t stalls = 0;
  uint64_t flushes = 0;
};

// Runs the interpretive and the cycle-accurate simulator on the same image in
// lockstep-at-retirement: every retired trace line, the halt reason, the
// final registers, memory, and PC must agree, else DivergenceError with the
// first point of disagreement.
CosimReport cosim(const mia::PipelineModel& model,
                  const std::vector<uint8_t>& image, uint64_t base,
                  uint64_t start, const Options& opt);

}  // namespace pdl::cas
