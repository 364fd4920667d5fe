#include <map>
#include <sstream>

#include "rvrop/scanner.hpp"

namespace rvrop::scan {

namespace {

using M = isa::Mnemonic;
using sym::Expr;
using sym::Op;

struct StackCell {
  Expr value;
  std::uint8_t width = 8;
};

struct PathState {
  PathEffect eff;
  std::map<std::int64_t, StackCell> stack;  // stores to sp0 + k
  std::size_t index = 0;
  bool opaque = false;
};

Expr& R(PathState& s, Reg r) { return s.eff.regs[isa::index(r)]; }

void set_reg(PathState& s, Reg rd, Expr v, bool immediate_sp_add = false) {
  if (rd == Reg::zero) return;
  if (rd == Reg::sp && !immediate_sp_add) s.eff.sp_nonimmediate = true;
  R(s, rd) = std::move(v);
}

std::optional<std::int64_t> stack_offset(const Expr& addr) {
  auto ro = sym::as_reg_offset(addr);
  if (ro && ro->first == Reg::sp) return ro->second;
  return std::nullopt;
}

bool overlaps(std::int64_t a, unsigned aw, std::int64_t b, unsigned bw) {
  return a < b + static_cast<std::int64_t>(bw) && b < a + static_cast<std::int64_t>(aw);
}

Expr do_load(PathState& s, Expr addr, std::uint8_t width, bool is_signed) {
  if (auto k = stack_offset(addr)) {
    for (const auto& [off, cell] : s.stack) {
      if (!overlaps(off, cell.width, *k, width)) continue;
      if (off == *k && cell.width == 8 && width == 8) return cell.value;
      s.opaque = true;
      return sym::unknown();
    }
    return sym::load(std::move(addr), width, is_signed);
  }
  // Forward a prior store to the same symbolic address; other aliasing
  // between distinct address expressions is not modeled.
  for (auto it = s.eff.writes.rbegin(); it != s.eff.writes.rend(); ++it) {
    if (sym::equal(it->addr, addr)) {
      if (it->width == 8 && width == 8) return it->value;
      s.opaque = true;
      return sym::unknown();
    }
  }
  s.eff.reads.push_back({addr, width});
  return sym::load(std::move(addr), width, is_signed);
}

void do_store(PathState& s, Expr addr, Expr value, std::uint8_t width) {
  if (auto k = stack_offset(addr)) {
    for (auto it = s.stack.begin(); it != s.stack.end();) {
      if (overlaps(it->first, it->second.width, *k, width)) {
        it = s.stack.erase(it);
      } else {
        ++it;
      }
    }
    s.stack[*k] = {value, width};
  }
  s.eff.writes.push_back({std::move(addr), std::move(value), width});
}

Op op_for(M m) {
  switch (m) {
    case M::Add: case M::Addi: return Op::Add;
    case M::Sub: return Op::Sub;
    case M::Slt: case M::Slti: return Op::Slt;
    case M::Sltu: case M::Sltiu: return Op::Sltu;
    case M::Xor: case M::Xori: return Op::Xor;
    case M::Or: case M::Ori: return Op::Or;
    case M::And: case M::Andi: return Op::And;
    case M::Sll: case M::Slli: return Op::Sll;
    case M::Srl: case M::Srli: return Op::Srl;
    case M::Sra: case M::Srai: return Op::Sra;
    case M::Addw: case M::Addiw: return Op::Addw;
    case M::Subw: return Op::Subw;
    case M::Sllw: case M::Slliw: return Op::Sllw;
    case M::Srlw: case M::Srliw: return Op::Srlw;
    case M::Sraw: case M::Sraiw: return Op::Sraw;
    case M::Mul: return Op::Mul;
    case M::Mulh: return Op::Mulh;
    case M::Mulhsu: return Op::Mulhsu;
    case M::Mulhu: return Op::Mulhu;
    case M::Div: return Op::Div;
    case M::Divu: return Op::Divu;
    case M::Rem: return Op::Rem;
    case M::Remu: return Op::Remu;
    case M::Mulw: return Op::Mulw;
    case M::Divw: return Op::Divw;
    case M::Divuw: return Op::Divuw;
    case M::Remw: return Op::Remw;
    case M::Remuw: return Op::Remuw;
    default: return Op::Add;
  }
}

sym::Cond branch_cond(const Instruction& e, PathState& s) {
  sym::Cond c;
  c.lhs = R(s, e.rs1);
  c.rhs = R(s, e.rs2);
  switch (e.op) {
    case M::Beq: c.cmp = sym::Cmp::Eq; break;
    case M::Bne: c.cmp = sym::Cmp::Ne; break;
    case M::Blt: c.cmp = sym::Cmp::Lt; break;
    case M::Bge: c.cmp = sym::Cmp::Ge; break;
    case M::Bltu: c.cmp = sym::Cmp::Ltu; break;
    default: c.cmp = sym::Cmp::Geu; break;
  }
  return c;
}

// Adds `c` to the path; returns false when it is constantly false.
bool add_condition(PathState& s, const sym::Cond& c) {
  if (sym::const_value(c.lhs) && sym::const_value(c.rhs)) {
    return c.holds(sym::Env{});
  }
  s.eff.conditions.push_back(c);
  return true;
}

// Executes one non-control instruction.
void exec(PathState& s, Addr pc, const Instruction& raw) {
  const Instruction e = isa::expand(raw);
  const auto imm = [&] { return sym::constant(static_cast<std::uint64_t>(e.imm)); };
  switch (e.op) {
    case M::Lui: set_reg(s, e.rd, imm()); break;
    case M::Auipc: set_reg(s, e.rd, sym::constant(pc + static_cast<std::uint64_t>(e.imm))); break;
    case M::Lb: case M::Lh: case M::Lw: case M::Ld: case M::Lbu: case M::Lhu: case M::Lwu: {
      static const std::map<M, std::pair<std::uint8_t, bool>> kShape = {
          {M::Lb, {1, true}}, {M::Lh, {2, true}}, {M::Lw, {4, true}}, {M::Ld, {8, false}},
          {M::Lbu, {1, false}}, {M::Lhu, {2, false}}, {M::Lwu, {4, false}}};
      const auto [w, sg] = kShape.at(e.op);
      set_reg(s, e.rd, do_load(s, sym::add(R(s, e.rs1), e.imm), w, sg));
      break;
    }
    case M::Sb: case M::Sh: case M::Sw: case M::Sd: {
      const std::uint8_t w = e.op == M::Sb ? 1 : e.op == M::Sh ? 2 : e.op == M::Sw ? 4 : 8;
      do_store(s, sym::add(R(s, e.rs1), e.imm), R(s, e.rs2), w);
      break;
    }
    case M::Addi: {
      const bool sp_adj = e.rd == Reg::sp && e.rs1 == Reg::sp;
      set_reg(s, e.rd, sym::add(R(s, e.rs1), e.imm), sp_adj);
      break;
    }
    case M::Slti: case M::Sltiu: case M::Xori: case M::Ori: case M::Andi:
    case M::Slli: case M::Srli: case M::Srai: case M::Addiw: case M::Slliw: case M::Srliw: case M::Sraiw:
      set_reg(s, e.rd, sym::binary(op_for(e.op), R(s, e.rs1), imm()));
      break;
    case M::Fence: break;
    case M::FloatOrAtomic:
      s.opaque = true;
      if (auto rd = isa::dest_reg(raw)) set_reg(s, *rd, sym::unknown());
      break;
    default:
      set_reg(s, e.rd, sym::binary(op_for(e.op), R(s, e.rs1), R(s, e.rs2)));
      break;
  }
}

std::string reg_list(const std::map<Reg, std::int64_t>& m) {
  std::string out;
  for (const auto& [r, k] : m) {
    if (!out.empty()) out += ",";
    out += std::string(isa::abi_name(r)) + ":" + hex(static_cast<std::uint64_t>(k));
  }
  return out;
}

}  // namespace

EffectSummary summarize_window(const std::vector<std::pair<Addr, Instruction>>& window) {
  EffectSummary sum;
  if (window.empty()) return sum;

  PathState init;
  for (unsigned i = 0; i < isa::kNumRegs; ++i) init.eff.regs[i] = sym::reg(isa::reg_from_index(i));

  std::vector<PathState> done;
  std::vector<PathState> work{init};
  const std::size_t last = window.size() - 1;
  while (!work.empty()) {
    PathState s = std::move(work.back());
    work.pop_back();
    bool alive = true;
    while (alive && s.index < last) {
      const auto& [pc, ins] = window[s.index];
      const Instruction e = isa::expand(ins);
      if (e.op == M::Beq || e.op == M::Bne || e.op == M::Blt || e.op == M::Bge || e.op == M::Bltu ||
          e.op == M::Bgeu) {
        const sym::Cond c = branch_cond(e, s);
        const Addr target = pc + static_cast<Addr>(e.imm);
        std::optional<std::size_t> j;
        for (std::size_t k = s.index + 1; k < window.size(); ++k) {
          if (window[k].first == target) j = k;
        }
        if (j) {
          PathState taken = s;
          if (add_condition(taken, c)) {
            taken.eff.taken_branches.push_back(s.index);
            taken.index = *j;
            work.push_back(std::move(taken));
          }
        }
        alive = add_condition(s, c.negated());
        ++s.index;
        continue;
      }
      if (e.op == M::Jal || e.op == M::Jalr) {
        // Only linking jumps stay in a window; the callee is assumed to
        // return with every register except ra unchanged.
        Expr target = e.op == M::Jal ? sym::constant(pc + static_cast<Addr>(e.imm)) : sym::add(R(s, e.rs1), e.imm);
        s.eff.calls.push_back(std::move(target));
        set_reg(s, e.rd, sym::constant(pc + ins.width));
        ++s.index;
        continue;
      }
      exec(s, pc, ins);
      ++s.index;
    }
    if (alive) done.push_back(std::move(s));
  }

  bool have_main = false;
  for (auto& p : done) {
    sum.opaque = sum.opaque || p.opaque;
    for (const auto& r : p.eff.regs) sum.opaque = sum.opaque || sym::contains_unknown(r);
    if (p.eff.taken_branches.empty()) {
      sum.main = std::move(p.eff);
      have_main = true;
    } else {
      sum.alternatives.push_back(std::move(p.eff));
    }
  }
  if (!have_main) {
    // Every fall-through path is infeasible; keep registers unchanged so
    // callers reject the window.
    sum.main = init.eff;
    sum.main.conditions.push_back({sym::Cmp::Ne, sym::constant(0), sym::constant(0)});
  }

  for (unsigned i = 1; i < isa::kNumRegs; ++i) {
    const Reg r = isa::reg_from_index(i);
    const Expr& e = sum.main.regs[i];
    if (sym::equal(e, sym::reg(r))) continue;
    if (auto k = sym::as_stack_slot(e)) {
      sum.pops[r] = *k;
    } else {
      sum.reg_writes[r] = e;
    }
  }
  sum.mem_reads = sum.main.reads;
  sum.mem_writes = sum.main.writes;
  sum.guards = sum.main.conditions;
  sum.calls = sum.main.calls;
  return sum;
}

std::string EffectSummary::to_string() const {
  std::ostringstream os;
  os << "pops{" << reg_list(pops) << "}";
  for (const auto& [r, e] : reg_writes) {
    if (r == Reg::sp && !main.sp_nonimmediate) continue;
    os << " " << isa::abi_name(r) << "=" << sym::to_string(e);
  }
  for (const auto& rd : mem_reads) os << " read" << 8 * rd.width << "[" << sym::to_string(rd.addr) << "]";
  for (const auto& w : mem_writes) {
    os << " write" << 8 * w.width << "[" << sym::to_string(w.addr) << "]=" << sym::to_string(w.value);
  }
  for (const auto& c : calls) os << " call(" << sym::to_string(c) << ")";
  for (const auto& g : guards) os << " guard(" << g.to_string() << ")";
  if (!alternatives.empty()) os << " alt=" << alternatives.size();
  if (opaque) os << " opaque";
  return os.str();
}

Addr Gadget::end() const {
  Addr a = entry;
  for (const auto& i : instrs) a += i.width;
  return a;
}

std::string Gadget::listing() const {
  std::ostringstream os;
  Addr a = entry;
  for (const auto& i : instrs) {
    os << hex(a) << ": " << isa::format(i) << "\n";
    a += i.width;
  }
  return os.str();
}

std::optional<Gadget> analyze_at(const image::MemoryImage& img, Addr entry, unsigned max_window) {
  if (entry % 2 != 0) return std::nullopt;
  const image::Segment* seg = img.segment_at(entry, 2);
  if (!seg || !seg->executable()) return std::nullopt;

  std::vector<std::pair<Addr, Instruction>> window;
  Addr pc = entry;
  bool returned = false;
  while (window.size() < max_window) {
    if (!seg->contains(pc, 2)) return std::nullopt;
    Instruction ins;
    try {
      ins = isa::decode(seg->bytes, pc - seg->base);
    } catch (const Error&) {
      return std::nullopt;
    }
    const Instruction e = isa::expand(ins);
    switch (e.op) {
      case M::Illegal: case M::Ecall: case M::Ebreak: case M::Csr: return std::nullopt;
      case M::Jal:
        if (e.rd != Reg::ra) return std::nullopt;
        break;
      case M::Jalr:
        if (!isa::is_return(ins) && !isa::is_call(ins)) return std::nullopt;
        break;
      default: break;
    }
    window.emplace_back(pc, ins);
    pc += ins.width;
    if (isa::is_return(ins)) {
      returned = true;
      break;
    }
  }
  if (!returned) return std::nullopt;

  Gadget g;
  g.entry = entry;
  for (const auto& [a, i] : window) g.instrs.push_back(i);
  g.summary = summarize_window(window);
  const PathEffect& m = g.summary.main;
  const Expr& ra = m.reg(Reg::ra);
  const Expr& sp = m.reg(Reg::sp);

  if (!m.sp_nonimmediate) {
    auto a = sym::as_stack_slot(ra);
    auto spo = sym::as_reg_offset(sp);
    if (!a || !spo || spo->first != Reg::sp) return std::nullopt;
    const std::int64_t b = spo->second;
    if (*a <= 0 || *a % 8 != 0 || b <= *a || b % 16 != 0) return std::nullopt;
    g.ra_offset_a = *a;
    g.sp_delta_b = b;
    g.kind = GadgetKind::Chainable;
    return g;
  }

  if (ra->op != Op::Load || sp->op != Op::Load || ra->width != 8 || sp->width != 8) return std::nullopt;
  auto rb = sym::as_reg_offset(ra->lhs);
  auto sb = sym::as_reg_offset(sp->lhs);
  if (!rb || !sb || rb->first != sb->first || rb->first == Reg::sp) return std::nullopt;
  g.kind = GadgetKind::Pivot;
  g.pivot_base = rb->first;
  g.pivot_ra_off = rb->second;
  g.pivot_sp_off = sb->second;
  return g;
}

}  // namespace rvrop::scan
