#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pdl/diag.hpp"
#include "pdl/mia.hpp"

namespace pdl::mia {

using frontend::MapKind;
using ir::Node;
using ir::NodeId;
using ir::Op;

namespace {

const char* mapName(MapKind k) {
  switch (k) {
    case MapKind::FetchNext: return "fetchNext";
    case MapKind::Decode: return "decode";
    case MapKind::Read: return "read";
    case MapKind::ReadOrForward: return "readOrForward";
    case MapKind::Compute: return "compute";
    case MapKind::Verify: return "verify";
    case MapKind::Write: return "write";
    case MapKind::UnknownCheck: return "unknownCheck";
  }
  return "?";
}

bool computable(const Node& n) {
  switch (n.op) {
    case Op::Builtin:
    case Op::Cast:
    case Op::Slice:
    case Op::Concat:
    case Op::Select:
    case Op::Mux:
      return true;
    default:
      return false;
  }
}

std::string describe(const frontend::Isa& isa, const Node& n) {
  switch (n.op) {
    case Op::Const: return fmt::format("const {}", n.cval.bits);
    case Op::Field: return fmt::format("field {}", n.name);
    case Op::AccessFn: return fmt::format("access {}.{}", n.scope, n.name);
    case Op::InstrKind: return "instruction kind";
    case Op::ReadReg: return fmt::format("read {}", n.name);
    case Op::ReadMem: return fmt::format("read {}<{}>", isa.mem.name, n.units);
    case Op::Builtin: return ir::bopName(n.bop);
    case Op::Cast: return fmt::format("cast to {}", n.type.str());
    case Op::Slice: return fmt::format("slice {}..{}", n.hi, n.lo);
    case Op::Concat: return "concat";
    case Op::Select: return "select";
    case Op::Mux: return fmt::format("mux x{}", n.inputs.size());
    case Op::WriteReg: return fmt::format("write {}", n.name);
    case Op::WriteMem: return fmt::format("write {}<{}>", isa.mem.name, n.units);
    case Op::WritePc: return fmt::format("write {}", isa.pc.name);
    default: return ir::opName(n.op);
  }
}

struct Resolver {
  const frontend::Isa& isa;
  const frontend::Mia& mia;
  PipelineModel pm;
  std::vector<char> avail;

  Resolver(const frontend::SpecModel& model, const frontend::Mia& m)
      : isa(model.isa), mia(m) {
    pm.isa = &isa;
    pm.miaName = m.name;
    pm.dataBusWidth = m.dataBusWidth;
    pm.ipg = buildIpg(isa);
    const ir::Graph& g = pm.ipg.g;
    pm.nodeStage.assign(g.size(), PipelineModel::kUnplaced);
    avail.assign(g.size(), 0);
    for (NodeId id = 0; id < g.size(); id++) {
      // Constants are preloaded into the data path, never scheduled; Start
      // and End are markers.
      if (g[id].op == Op::Const || g[id].op == Op::Start ||
          g[id].op == Op::End) {
        pm.nodeStage[id] = PipelineModel::kFree;
        avail[id] = g[id].op != Op::End;
      }
    }
    for (const frontend::Stage& st : m.stages)
      pm.stages.push_back(StageModel{st.name, {}, {}});
  }

  const ir::Graph& g() const { return pm.ipg.g; }

  bool ready(NodeId id) const {
    for (NodeId in : g()[id].inputs)
      if (!avail[in]) return false;
    return true;
  }

  void place(NodeId id, int s, MapKind via) {
    avail[id] = 1;
    pm.nodeStage[id] = s;
    pm.stages[s].ops.push_back({id, via});
  }

  // Claims every unplaced node accepted by `match` whose operands are all
  // available. Returns the number claimed; notes the mapping when matching
  // nodes exist but none were ready.
  size_t claim(int s, MapKind via, const frontend::MapOp& op,
               const std::function<bool(const Node&)>& match) {
    size_t placed = 0, pending = 0;
    for (NodeId id = 0; id < g().size(); id++) {
      if (avail[id] || pm.nodeStage[id] == PipelineModel::kFree) continue;
      if (!match(g()[id])) continue;
      if (ready(id)) {
        place(id, s, via);
        placed++;
      } else {
        pending++;
      }
    }
    if (placed == 0 && pending > 0)
      pm.notes.push_back(fmt::format(
          "stage {}: {}{}{} matched {} node(s) whose operands were not ready",
          pm.stages[s].name, mapName(op.kind),
          op.resource.empty() ? "" : " @", op.resource, pending));
    return placed;
  }

  void runStage(int s) {
    for (const frontend::MapOp& op : mia.stages[s].ops) {
      switch (op.kind) {
        case MapKind::FetchNext:
          pm.control.fetchStage = s;
          claim(s, op.kind, op, [&](const Node& n) {
            return n.op == Op::ReadReg && n.inputs.empty() &&
                   n.name == isa.pc.name;
          });
          break;
        case MapKind::Decode:
          pm.control.decodeStage = s;
          claim(s, op.kind, op, [&](const Node& n) {
            return n.op == Op::Field || n.op == Op::AccessFn ||
                   n.op == Op::InstrKind;
          });
          break;
        case MapKind::UnknownCheck:
          pm.control.unknownStage = s;
          break;
        case MapKind::Read:
        case MapKind::ReadOrForward:
          claimRead(s, op);
          break;
        case MapKind::Compute:
          // One ascending pass reaches the fixpoint: node ids are
          // topological, so operands are visited before their consumers.
          for (NodeId id = 0; id < g().size(); id++)
            if (!avail[id] && pm.nodeStage[id] != PipelineModel::kFree &&
                computable(g()[id]) && ready(id))
              place(id, s, op.kind);
          break;
        case MapKind::Verify:
          pm.control.verifyStage = s;
          claim(s, op.kind, op,
                [&](const Node& n) { return n.op == Op::WritePc; });
          break;
        case MapKind::Write:
          claimWrite(s, op);
          break;
      }
    }
  }

  void claimRead(int s, const frontend::MapOp& op) {
    if (op.kind == MapKind::ReadOrForward) {
      auto it = mia.logics.find(op.logic);
      if (it == mia.logics.end())
        fail(Code::NameError, op.span,
             fmt::format("unknown logic element '{}'", op.logic));
      if (!it->second)
        fail(Code::UnsupportedMapping, op.span,
             fmt::format("logic element '{}' is not a forwarding unit",
                         op.logic));
    }
    const std::string& r = op.resource;
    if (isa.regFile(r)) {
      if (op.kind == MapKind::ReadOrForward) pm.control.forwarded[r] = true;
      claim(s, op.kind, op, [&](const Node& n) {
        return n.op == Op::ReadReg && n.name == r;
      });
    } else if (r == isa.mem.name) {
      if (op.kind == MapKind::ReadOrForward)
        fail(Code::UnsupportedMapping, op.span,
             fmt::format("forwarding read target '{}' is not a register file",
                         r));
      claim(s, op.kind, op,
            [&](const Node& n) { return n.op == Op::ReadMem; });
    } else if (r == isa.pc.name) {
      claim(s, op.kind, op, [&](const Node& n) {
        return n.op == Op::ReadReg && n.inputs.empty() && n.name == r;
      });
    } else {
      fail(Code::UnsupportedMapping, op.span,
           fmt::format("read target '{}' is not a register file, memory, or "
                       "the program counter",
                       r));
    }
  }

  void claimWrite(int s, const frontend::MapOp& op) {
    const std::string& r = op.resource;
    if (isa.regFile(r)) {
      claim(s, op.kind, op, [&](const Node& n) {
        return n.op == Op::WriteReg && n.name == r;
      });
    } else if (r == isa.mem.name) {
      claim(s, op.kind, op,
            [&](const Node& n) { return n.op == Op::WriteMem; });
    } else if (r == isa.pc.name) {
      size_t placed = claim(
          s, op.kind, op, [&](const Node& n) { return n.op == Op::WritePc; });
      // The flush boundary defaults to wherever next-PC is produced.
      if (placed > 0 && pm.control.verifyStage < 0)
        pm.control.verifyStage = s;
    } else {
      fail(Code::UnsupportedMapping, op.span,
           fmt::format("write target '{}' is not a register file, memory, or "
                       "the program counter",
                       r));
    }
  }

  void checkResidual() {
    std::vector<NodeId> left;
    for (NodeId id = 0; id < g().size(); id++)
      if (pm.nodeStage[id] == PipelineModel::kUnplaced) left.push_back(id);
    if (left.empty()) return;
    std::vector<std::string> parts;
    for (size_t i = 0; i < pm.ipg.instrCount; i++) {
      std::vector<std::string> items;
      for (NodeId id : left)
        if ((g()[id].origin >> i) & 1) items.push_back(describe(isa, g()[id]));
      if (!items.empty())
        parts.push_back(fmt::format("{}: {}", isa.instructions[i].name,
                                    fmt::join(items, ", ")));
    }
    fail(Code::ResidualSemanticsError,
         fmt::format(
             "micro architecture '{}' leaves instruction semantics "
             "unplaced: {}",
             mia.name, fmt::join(parts, "; ")));
  }

  void buildPipeRegs() {
    size_t k = pm.stages.size();
    if (k < 2) return;
    for (size_t b = 0; b + 1 < k; b++) {
      // Live across boundary b: produced at or before b, consumed after it.
      std::vector<NodeId> live;
      for (NodeId c = 0; c < g().size(); c++) {
        if (pm.nodeStage[c] <= static_cast<int>(b)) continue;
        for (NodeId in : g()[c].inputs) {
          int s = pm.nodeStage[in];
          if (s >= 0 && s <= static_cast<int>(b) &&
              std::find(live.begin(), live.end(), in) == live.end())
            live.push_back(in);
        }
      }
      std::sort(live.begin(), live.end(), [&](NodeId a, NodeId c) {
        unsigned wa = g()[a].type.width, wc = g()[c].type.width;
        return wa != wc ? wa > wc : a < c;
      });
      std::vector<PipeReg> regs;
      std::vector<uint64_t> masks;
      for (NodeId id : live) {
        uint64_t o = g()[id].origin;
        size_t slot = regs.size();
        for (size_t r = 0; r < regs.size(); r++)
          if (!(masks[r] & o)) {
            slot = r;
            break;
          }
        if (slot == regs.size()) {
          regs.push_back(PipeReg{g()[id].type.width, {}});
          masks.push_back(0);
        }
        regs[slot].nodes.push_back(id);
        masks[slot] |= o;
      }
      pm.stages[b].regsOut = std::move(regs);
    }
  }

  void inferPorts() {
    auto demand = [&](Op what, const std::string& name, bool indexed) {
      unsigned total = 0;
      for (size_t s = 0; s < pm.stages.size(); s++) {
        std::vector<NodeId> here;
        for (const SchedOp& so : pm.stages[s].ops) {
          const Node& n = g()[so.node];
          if (n.op == what && (name.empty() || n.name == name) &&
              (!indexed || !n.inputs.empty()))
            here.push_back(so.node);
        }
        unsigned best = 0;
        for (size_t i = 0; i < pm.ipg.instrCount; i++) {
          unsigned cnt = 0;
          for (NodeId id : here)
            if ((g()[id].origin >> i) & 1) cnt++;
          best = std::max(best, cnt);
        }
        if (what == Op::ReadMem && best > pm.ports.memReads)
          fail(Code::PortConflict,
               fmt::format("stage {} needs {} simultaneous memory reads but "
                           "{} has a single read port",
                           pm.stages[s].name, best, isa.mem.name));
        if (what == Op::WriteMem && best > pm.ports.memWrites)
          fail(Code::PortConflict,
               fmt::format("stage {} needs {} simultaneous memory writes but "
                           "{} has a single write port",
                           pm.stages[s].name, best, isa.mem.name));
        total += best;
      }
      return total;
    };
    for (const frontend::RegFile& rf : isa.regFiles) {
      pm.ports.reads[rf.name] = demand(Op::ReadReg, rf.name, true);
      pm.ports.writes[rf.name] = demand(Op::WriteReg, rf.name, false);
    }
    demand(Op::ReadMem, "", false);
    demand(Op::WriteMem, "", false);
  }

  void synthControl() {
    // Per-resource write stage (latest write placement).
    auto noteWrite = [&](const Node& n, const std::string& key, int s) {
      auto it = pm.control.writeStage.find(key);
      if (it == pm.control.writeStage.end() || it->second < s)
        pm.control.writeStage[key] = s;
      (void)n;
    };
    for (size_t s = 0; s < pm.stages.size(); s++)
      for (const SchedOp& so : pm.stages[s].ops) {
        const Node& n = g()[so.node];
        if (n.op == Op::WriteReg) noteWrite(n, n.name, static_cast<int>(s));
        if (n.op == Op::WriteMem)
          noteWrite(n, isa.mem.name, static_cast<int>(s));
        if (n.op == Op::WritePc) noteWrite(n, isa.pc.name, static_cast<int>(s));
      }

    for (const frontend::RegFile& rf : isa.regFiles) {
      auto ws = pm.control.writeStage.find(rf.name);
      if (ws == pm.control.writeStage.end()) continue;
      // Stages that read this file on behalf of instructions.
      std::set<unsigned> consumers;
      for (size_t s = 0; s < pm.stages.size(); s++)
        for (const SchedOp& so : pm.stages[s].ops) {
          const Node& n = g()[so.node];
          if (n.op == Op::ReadReg && n.name == rf.name && !n.inputs.empty())
            consumers.insert(static_cast<unsigned>(s));
        }
      for (unsigned c : consumers) {
        HazardRule rule{rf.name, c, {}};
        for (int p = static_cast<int>(c) + 1; p <= ws->second; p++)
          rule.producers.push_back(static_cast<unsigned>(p));
        if (!rule.producers.empty())
          pm.control.hazards.push_back(std::move(rule));
        if (!pm.control.forwarded.count(rf.name)) continue;
        // Forwarding sources: the stages where written values are actually
        // produced. A muxed write value contributes one path per
        // alternative's producing stage.
        std::set<unsigned> sources;
        auto addSource = [&](NodeId v) {
          int s = pm.nodeStage[v];
          int from = std::max(s, static_cast<int>(c) + 1);
          if (from <= ws->second) sources.insert(static_cast<unsigned>(from));
        };
        for (NodeId id = 0; id < g().size(); id++) {
          const Node& n = g()[id];
          if (n.op != Op::WriteReg || n.name != rf.name) continue;
          NodeId v = n.inputs[1];
          if (g()[v].op == Op::Mux)
            for (NodeId alt : g()[v].inputs) addSource(alt);
          else
            addSource(v);
        }
        for (unsigned from : sources)
          pm.control.forwards.push_back(ForwardPath{from, c, rf.name});
      }
    }
  }

  PipelineModel run() {
    for (size_t s = 0; s < mia.stages.size(); s++)
      runStage(static_cast<int>(s));
    checkResidual();
    buildPipeRegs();
    inferPorts();
    synthControl();
    return std::move(pm);
  }
};

}  // namespace

PipelineModel resolve(const frontend::SpecModel& model,
                      const std::string& miaName) {
  auto it = model.mias.find(miaName);
  if (it == model.mias.end())
    fail(Code::NameError,
         fmt::format("unknown micro architecture '{}'", miaName));
  Resolver r(model, it->second);
  return r.run();
}

std::string PipelineModel::report() const {
  const ir::Graph& g = ipg.g;
  std::string out = fmt::format(
      "micro architecture '{}': {} stage(s), data bus {} bits\n"
      "instructions: {}, progress graph nodes: {}\n",
      miaName, stages.size(), dataBusWidth, ipg.instrCount, g.size());
  for (size_t s = 0; s < stages.size(); s++) {
    out += fmt::format("stage {}: {}\n", s, stages[s].name);
    for (const SchedOp& so : stages[s].ops)
      out += fmt::format("  n{:<4} {} [{}]\n", so.node,
                         describe(*isa, g[so.node]), mapName(so.via));
    if (s + 1 < stages.size()) {
      std::vector<std::string> ws;
      for (const PipeReg& r : stages[s].regsOut)
        ws.push_back(fmt::format("{}b x{}", r.width, r.nodes.size()));
      out += fmt::format(
          "  registers out: {} ({})\n", stages[s].regsOut.size(),
          ws.empty() ? std::string("none")
                     : fmt::format("{}", fmt::join(ws, ", ")));
    }
  }
  out += "ports:\n";
  for (const auto& [name, n] : ports.reads)
    out += fmt::format("  {}: {} read, {} write\n", name, n,
                       ports.writes.count(name) ? ports.writes.at(name) : 0);
  out += fmt::format("  {}: {} read, {} write\n", isa->mem.name,
                     ports.memReads, ports.memWrites);
  out += fmt::format(
      "control:\n  fetch stage {}, decode stage {}, verify stage {}, unknown "
      "word faults at stage {}\n",
      control.fetchStage, control.decodeStage, control.verifyStage,
      control.unknownStage < 0 ? control.verifyStage : control.unknownStage);
  for (const HazardRule& h : control.hazards)
    out += fmt::format("  hazard: {} read at stage {} stalls on pending "
                       "writes in stages {}\n",
                       h.resource, h.consumer, fmt::join(h.producers, ", "));
  for (const ForwardPath& f : control.forwards)
    out += fmt::format("  forward: {} stage {} -> stage {}\n", f.resource,
                       f.from, f.to);
  for (const auto& [name, s] : control.writeStage)
    out += fmt::format("  writes commit: {} at stage {}\n", name, s);
  for (const std::string& n : notes) out += fmt::format("note: {}\n", n);
  return out;
}

}  // namespace pdl::mia
