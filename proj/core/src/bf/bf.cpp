#include "rvrop/bf.hpp"

#include <map>

namespace rvrop::bf {

using build::Arg;
using build::LogicalUnit;
using chain::Slot;
using isa::Reg;
using scan::RoleKind;

BfProgram parse(std::string_view src) {
  BfProgram p;
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < src.size(); ++i) {
    Op op;
    op.pos = i;
    switch (src[i]) {
      case '>': op.kind = OpKind::Right; break;
      case '<': op.kind = OpKind::Left; break;
      case '+': op.kind = OpKind::Inc; break;
      case '-': op.kind = OpKind::Dec; break;
      case '.': op.kind = OpKind::Out; break;
      case ',': op.kind = OpKind::In; break;
      case '[':
        op.kind = OpKind::LoopOpen;
        open.push_back(p.ops.size());
        break;
      case ']':
        op.kind = OpKind::LoopClose;
        if (open.empty()) throw Error(ErrorCode::UnbalancedBracket, "unmatched ']' at " + std::to_string(i));
        op.match = open.back();
        p.ops[open.back()].match = p.ops.size();
        open.pop_back();
        break;
      default: continue;
    }
    p.ops.push_back(op);
  }
  if (!open.empty()) {
    throw Error(ErrorCode::UnbalancedBracket, "unmatched '[' at " + std::to_string(p.ops[open.back()].pos));
  }
  return p;
}

namespace {

class Compiler {
 public:
  Compiler(const scan::GadgetCatalog& cat, const CompileOptions& opts) : b_(cat, opts.builder) {
    const auto& rm = b_.role(RoleKind::READMEM);
    const auto& wm = b_.role(RoleKind::WRITEMEM);
    rd_ = rm.binding.disp;
    wd_ = wm.binding.disp;
    waddr_ = wm.binding.addr;
  }

  LogicalUnit run(const BfProgram& prog, const TapeConfig& tape) {
    LogicalUnit u = b_.unit_nop();
    u.frames.front().comment = "entry";
    u.scratch.push_back({"tape", tape.cell_count * 8, std::nullopt});
    u.append(b_.unit_set_reg(Reg::a0, Slot::label_ref("tape", static_cast<std::int64_t>(8 * tape.start_index),
                                                       "cursor")));
    for (std::size_t i = 0; i < prog.ops.size(); ++i) {
      const Op& op = prog.ops[i];
      LogicalUnit step;
      switch (op.kind) {
        case OpKind::Right: step = b_.unit_add_a0(8); break;
        case OpKind::Left: step = b_.unit_add_a0(-8); break;
        case OpKind::Inc: step = modify(1); break;
        case OpKind::Dec: step = modify(-1); break;
        case OpKind::Out: step = out(); break;
        case OpKind::In: step = in(); break;
        case OpKind::LoopOpen: step = loop_open(i); break;
        case OpKind::LoopClose: step = loop_close(op.match); break;
      }
      if (!step.frames.empty() && step.frames.front().comment.empty()) {
        step.frames.front().comment = std::string("op ") + "><+-.,[]"[static_cast<int>(op.kind)] + " @" +
                                      std::to_string(op.pos);
      }
      u.append(std::move(step));
    }
    u.append(b_.unit_call("exit", {Arg::word(0)}, false));
    // exit does not return; a zero ra traps if it ever does
    u.frames.push_back(b_.frame(b_.role(RoleKind::NOP), {{b_.role(RoleKind::NOP).a, Slot::constant(0, "halt")}}));
    return u;
  }

 private:
  // Writes a0 - wd into the address pop of a later store frame; returns
  // the label of that frame.
  std::pair<LogicalUnit, std::string> schedule_store() {
    const auto& pop = b_.pop_avoiding(waddr_, {Reg::a0});
    const std::string m = b_.fresh("store");
    LogicalUnit u = b_.unit_add_a0(-wd_);
    u.append(b_.unit_write_a0(m, pop.binding.pops.at(waddr_)));
    store_pop_[m] = &pop;
    return {std::move(u), m};
  }

  LogicalUnit store_frames(const std::string& m) {
    const auto& pop = *store_pop_.at(m);
    LogicalUnit u;
    u.frames.push_back(b_.frame(pop, {{pop.binding.pops.at(waddr_), Slot::hole("cell address - disp")}}, m));
    u.frames.push_back(b_.frame(b_.role(RoleKind::WRITEMEM)));
    return u;
  }

  LogicalUnit modify(int delta) {
    auto [body, m] = schedule_store();
    body.append(b_.unit_add_a0(wd_ - rd_));
    body.append(b_.unit_read_mem());
    body.append(b_.unit_add_a0(delta));
    body.append(store_frames(m));
    return b_.unit_save_restore_a0(std::move(body));
  }

  LogicalUnit out() {
    LogicalUnit body = b_.unit_add_a0(-rd_);
    body.append(b_.unit_read_mem());
    body.append(b_.unit_call("putchar", {Arg::a0()}, false));
    return b_.unit_save_restore_a0(std::move(body));
  }

  LogicalUnit in() {
    const auto& cb = b_.role(RoleKind::COND_BRANCH);
    auto [body, m] = schedule_store();
    body.append(b_.unit_call("getchar", {}, true));
    // cell = (c + 1 != 0) ? c : 0, so EOF (all ones) stores 0
    const std::string sel = b_.fresh("eof_select"), x = b_.fresh("eof_probe");
    body.scratch.push_back({x, 16, std::nullopt});
    body.append(b_.unit_write_a0(sel, cb.binding.nonzero_slot));
    body.append(b_.unit_add_a0(1));
    body.append(b_.unit_write_a0(x, 0, false));
    body.append(b_.unit_set_regs({{Reg::a0, Slot::label_ref(x)}}));
    body.append(b_.unit_select(Slot::constant(0, "EOF"), Slot::hole("byte read"), sel));
    body.append(store_frames(m));
    return b_.unit_save_restore_a0(std::move(body));
  }

  struct Loop {
    std::string retest, body, exit;
  };

  LogicalUnit loop_open(std::size_t i) {
    Loop l{b_.fresh("loop_test"), b_.fresh("loop_body"), b_.fresh("loop_exit")};
    loops_[i] = l;
    const std::int64_t off = b_.restore_offset();
    LogicalUnit u = b_.unit_write_a0(l.retest, off);
    u.append(b_.unit_restore_a0(l.retest));
    u.append(b_.unit_write_a0(l.body, off));
    u.append(b_.unit_write_a0(l.exit, off));
    u.append(b_.unit_cond_branch(l.exit, l.body));
    u.append(b_.unit_restore_a0(l.body));
    return u;
  }

  LogicalUnit loop_close(std::size_t open) {
    const Loop& l = loops_.at(open);
    LogicalUnit u = b_.unit_write_a0(l.retest, b_.restore_offset());
    u.append(b_.unit_branch(l.retest));
    u.append(b_.unit_restore_a0(l.exit));
    return u;
  }

  build::Builder b_;
  std::int64_t rd_ = 0, wd_ = 0;
  Reg waddr_ = Reg::s0;
  std::map<std::size_t, Loop> loops_;
  std::map<std::string, const scan::CatalogEntry*> store_pop_;
};

}  // namespace

chain::ChainProgram compile(const BfProgram& prog, const scan::GadgetCatalog& cat, const TapeConfig& tape,
                            Addr base_sp, const CompileOptions& opts) {
  if (auto missing = cat.missing_role()) {
    throw Error(ErrorCode::IncompleteCatalog, "catalog is missing " + *missing);
  }
  if (tape.cell_count == 0 || tape.start_index >= tape.cell_count) {
    throw Error(ErrorCode::InvalidOperand, "tape start index outside the tape");
  }
  Compiler c(cat, opts);
  const LogicalUnit u = c.run(prog, tape);
  std::uint64_t bytes = 0;
  for (const auto& f : u.frames) bytes += f.size_bytes();
  if (bytes > opts.max_chain_bytes) {
    throw Error(ErrorCode::ChainTooLarge, "chain needs " + std::to_string(bytes) + " bytes, limit is " +
                                              std::to_string(opts.max_chain_bytes));
  }
  return build::link(u, base_sp);
}

InterpResult interpret(const BfProgram& prog, std::string_view input, const TapeConfig& tape,
                       std::uint64_t max_steps) {
  InterpResult r;
  std::vector<std::uint64_t> cells(tape.cell_count, 0);
  std::size_t ptr = tape.start_index, in = 0;
  for (std::size_t pc = 0; pc < prog.ops.size(); ++pc) {
    if (++r.steps > max_steps) {
      r.finished = false;
      break;
    }
    const Op& op = prog.ops[pc];
    switch (op.kind) {
      case OpKind::Right: ++ptr; break;
      case OpKind::Left: --ptr; break;
      case OpKind::Inc: ++cells.at(ptr); break;
      case OpKind::Dec: --cells.at(ptr); break;
      case OpKind::Out: r.output.push_back(static_cast<char>(cells.at(ptr) & 0xff)); break;
      case OpKind::In: cells.at(ptr) = in < input.size() ? static_cast<std::uint8_t>(input[in++]) : 0; break;
      case OpKind::LoopOpen:
        if (cells.at(ptr) == 0) pc = op.match;
        break;
      case OpKind::LoopClose:
        if (cells.at(ptr) != 0) pc = op.match;
        break;
    }
  }
  return r;
}

}  // namespace rvrop::bf
