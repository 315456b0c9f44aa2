#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pdl/frontend.hpp"
#include "pdl/ir.hpp"

namespace pdl::mia {

// The instruction progress graph: every instruction's behavior graph merged
// into one union graph. Structurally identical subtrees share one node whose
// origin mask is the union of the contributing instructions; nodes that
// perform the same operation on different operands coalesce into one node fed
// by instruction-selected muxes. During pipeline resolution the graph's
// availability frontier tracks how much of each instruction's semantics the
// pipeline has computed so far.
struct Ipg {
  ir::Graph g;
  size_t instrCount = 0;
};

// Unions and coalesces all instruction graphs. Coalescing merges nodes with
// identical operation identity (operator, type, widths, resource) and disjoint
// origins, inserting a mux where their operands differ; leaves (constants,
// fields, access functions) are shared only when structurally identical.
// Merges that would create a cycle are skipped.
Ipg buildIpg(const frontend::Isa& isa);

// One micro-operation a stage performs: the IPG node it computes (register or
// memory access, pure operator, or architectural write) and the instruction
// mapping that claimed it.
struct SchedOp {
  ir::NodeId node = 0;
  frontend::MapKind via = frontend::MapKind::Compute;
};

// One physical pipeline register at a stage boundary. Nodes with disjoint
// origin masks share a register (at most one of them is live for any given
// instruction); the register is as wide as its widest occupant.
struct PipeReg {
  unsigned width = 0;
  std::vector<ir::NodeId> nodes;
};

struct StageModel {
  std::string name;
  std::vector<SchedOp> ops;        // in claim order
  std::vector<PipeReg> regsOut;    // latched at this stage's exit boundary
};

// Port demand per architectural resource: for register files the read-port
// count is the sum over stages of the per-instruction maximum of simultaneous
// reads scheduled there (stages hold different instructions concurrently;
// reads of one instruction in one stage are mutually exclusive with another
// instruction's). Memory is fixed at one read and one write port; the fetch
// unit uses the read port, so a stage that fetches and loads in the same
// cycle is a runtime port conflict.
struct PortTable {
  std::map<std::string, unsigned> reads;
  std::map<std::string, unsigned> writes;
  unsigned memReads = 1;
  unsigned memWrites = 1;
};

struct ForwardPath {
  unsigned from = 0;  // producer stage whose latched value is bypassed
  unsigned to = 0;    // consumer (read) stage
  std::string resource;
};

// Stall rule synthesized by the default hazard unit: reads of `resource` in
// stage `consumer` wait while any occupant of `producers` has a pending write
// to the same index that no forwarding path can deliver.
struct HazardRule {
  std::string resource;
  unsigned consumer = 0;
  std::vector<unsigned> producers;
};

struct Control {
  int fetchStage = -1;
  int decodeStage = -1;
  int verifyStage = -1;   // flush boundary; squashes all earlier stages
  int unknownStage = -1;  // undecodable word faults when it reaches this stage
  std::map<std::string, bool> forwarded;  // resource -> readOrForward used
  std::vector<ForwardPath> forwards;
  std::vector<HazardRule> hazards;
  std::map<std::string, int> writeStage;  // resource -> stage of its writes
};

// A fully resolved pipeline: every node of every instruction's semantics
// assigned to exactly one stage.
struct PipelineModel {
  const frontend::Isa* isa = nullptr;
  std::string miaName;
  unsigned dataBusWidth = 0;
  Ipg ipg;
  std::vector<StageModel> stages;
  std::vector<int> nodeStage;  // node id -> stage index; kFree for constants
  PortTable ports;
  Control control;
  // Diagnostics: mappings that matched nothing ready when they ran but whose
  // targets were still pending (the semantics landed in a later stage).
  std::vector<std::string> notes;

  // Constants are preloaded, not scheduled into any stage.
  static constexpr int kFree = -2;
  static constexpr int kUnplaced = -1;

  size_t stageCount() const { return stages.size(); }
  // Human-readable synthesis report: stages, ops, registers, ports, control.
  std::string report() const;
};

// Algorithm "instruction resolving": walks the stages in order, replaces each
// instruction mapping with the ready IPG nodes it claims, and checks that the
// final IPG is empty (all semantics realized). Then infers ports and
// synthesizes the default hazard/forwarding/branch control.
PipelineModel resolve(const frontend::SpecModel& model, const std::string& miaName);

}  // namespace pdl::mia
