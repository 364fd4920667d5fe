#include "rvrop/emulator.hpp"

#include <cstring>
#include <sstream>

#include "rvrop/scanner.hpp"

namespace rvrop::emu {

namespace {

using M = isa::Mnemonic;

__extension__ using u128 = unsigned __int128;
__extension__ using i128 = __int128;

inline std::int64_t sx(Word v) { return static_cast<std::int64_t>(v); }
inline Word w32(Word v) { return static_cast<Word>(static_cast<std::int64_t>(static_cast<std::int32_t>(v))); }

struct TrapSignal {
  Trap trap;
};

}  // namespace

std::string_view to_string(TrapKind k) {
  switch (k) {
    case TrapKind::IllegalInstruction: return "illegal-instruction";
    case TrapKind::UnmappedAccess: return "unmapped-access";
    case TrapKind::MisalignedSpStrict: return "misaligned-sp-strict";
  }
  return "?";
}

std::string Trap::to_string() const {
  std::string s = std::string(emu::to_string(kind)) + " at pc " + hex(pc) + " (sp " + hex(sp) + ")";
  if (kind == TrapKind::UnmappedAccess) s += " address " + hex(addr);
  return s;
}

std::string trace_text(const std::vector<TraceEvent>& trace) {
  std::ostringstream os;
  os << "# n pc sp a0 a1 a2 a3 a4 a5 s0\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& e = trace[i];
    os << i << " " << hex(e.pc) << " " << hex(e.sp);
    for (Word w : e.regs) os << " " << hex(w);
    os << "\n";
  }
  return os.str();
}

Machine::Machine(const image::MemoryImage& img) {
  for (const auto& seg : img.segments()) {
    Region r;
    r.base = seg.base;
    r.bytes = seg.bytes;
    r.perms = seg.executable() ? static_cast<std::uint8_t>(seg.perms & ~image::kWrite) : seg.perms;
    r.name = "image";
    if (seg.executable()) {
      r.code.resize(r.bytes.size() / 2);
      for (std::size_t i = 0; i < r.code.size(); ++i) {
        Decoded& d = r.code[i];
        isa::Instruction ins;
        try {
          ins = isa::decode(r.bytes, 2 * i);
        } catch (const Error&) {
          continue;
        }
        const isa::Instruction e = isa::expand(ins);
        d.op = e.op;
        d.width = ins.width;
        d.rd = static_cast<std::uint8_t>(isa::index(e.rd));
        d.rs1 = static_cast<std::uint8_t>(isa::index(e.rs1));
        d.rs2 = static_cast<std::uint8_t>(isa::index(e.rs2));
        d.imm = e.imm;
        d.ret = isa::is_return(ins);
      }
    }
    regions_.push_back(std::move(r));
  }
}

void Machine::map(Addr base, std::uint64_t size, std::uint8_t perms, std::string name) {
  for (const auto& r : regions_) {
    if (base < r.base + r.bytes.size() && r.base < base + size) {
      throw Error(ErrorCode::RegionOverlap, name + " region [" + hex(base) + ", " + hex(base + size) +
                                                ") overlaps " + r.name + " at " + hex(r.base));
    }
  }
  Region r;
  r.base = base;
  r.bytes.assign(size, 0);
  r.perms = perms;
  r.name = std::move(name);
  regions_.push_back(std::move(r));
}

void Machine::load_chain(const chain::ChainImage& chain) {
  const std::uint64_t n = chain.words.size() * 8;
  map(chain.base_sp, n, image::kRead | image::kWrite, "chain");
  Region& r = regions_.back();
  for (std::size_t i = 0; i < chain.words.size(); ++i) std::memcpy(r.bytes.data() + 8 * i, &chain.words[i], 8);
  for (const auto& [a, size] : chain.scratch) map(a, size, image::kRead | image::kWrite, "scratch");
}

void Machine::set_host(Addr addr, HostFn fn) {
  for (auto& r : regions_) {
    if (!r.code.empty() && addr >= r.base && addr - r.base < r.bytes.size() && addr % 2 == 0) {
      r.code[(addr - r.base) / 2].host = fn;
      return;
    }
  }
  throw Error(ErrorCode::OutOfRange, "host stub address " + hex(addr) + " is not in executable memory");
}

void Machine::set_input(std::string input) {
  input_ = std::move(input);
  input_pos_ = 0;
}

Machine::Region* Machine::find(Addr addr, std::uint64_t len) {
  return const_cast<Region*>(static_cast<const Machine*>(this)->find(addr, len));
}

const Machine::Region* Machine::find(Addr addr, std::uint64_t len) const {
  auto hit = [&](const Region& r) {
    return addr >= r.base && len <= r.bytes.size() && addr - r.base <= r.bytes.size() - len;
  };
  if (last_data_ < regions_.size() && hit(regions_[last_data_])) return &regions_[last_data_];
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (hit(regions_[i])) {
      last_data_ = i;
      return &regions_[i];
    }
  }
  return nullptr;
}

bool Machine::mapped(Addr addr, std::uint64_t len) const { return find(addr, len) != nullptr; }

Word Machine::read_u64(Addr addr) const {
  const Region* r = find(addr, 8);
  if (!r) throw Error(ErrorCode::OutOfRange, "unmapped read at " + hex(addr));
  Word v;
  std::memcpy(&v, r->bytes.data() + (addr - r->base), 8);
  return v;
}

void Machine::write_u64(Addr addr, Word v) {
  Region* r = find(addr, 8);
  if (!r) throw Error(ErrorCode::OutOfRange, "unmapped write at " + hex(addr));
  std::memcpy(r->bytes.data() + (addr - r->base), &v, 8);
}

std::vector<std::uint8_t> Machine::read_bytes(Addr addr, std::uint64_t len) const {
  if (len == 0) return {};
  const Region* r = find(addr, len);
  if (!r) throw Error(ErrorCode::OutOfRange, "unmapped read at " + hex(addr));
  const auto* p = r->bytes.data() + (addr - r->base);
  return {p, p + len};
}

void Machine::record(const RunOptions& opts, RunResult& result) const {
  TraceEvent e;
  e.pc = pc;
  e.sp = regs_[2];
  for (unsigned i = 0; i < 6; ++i) e.regs[i] = regs_[10 + i];
  e.regs[6] = regs_[8];
  if (opts.trace_digest) {
    auto fold = [&](Word w) {
      for (int i = 0; i < 8; ++i) {
        result.trace_digest = (result.trace_digest ^ ((w >> (8 * i)) & 0xff)) * 0x100000001b3ull;
      }
    };
    fold(e.pc);
    fold(e.sp);
    for (Word w : e.regs) fold(w);
  }
  if (opts.trace) result.trace.push_back(e);
}

void Machine::call_host(HostFn fn, const RunOptions& opts, RunResult& result, bool& halted) {
  if (opts.hostile_clobber) {
    const Addr sp = regs_[2];
    for (Addr a = sp - opts.hostile_clobber; a < sp; ++a) {
      Region* r = find(a, 1);
      if (r && (r->perms & image::kWrite)) r->bytes[a - r->base] = 0xa5;
    }
  }
  switch (fn) {
    case HostFn::Putchar: result.output.push_back(static_cast<char>(regs_[10] & 0xff)); break;
    case HostFn::Getchar:
      regs_[10] = input_pos_ < input_.size() ? static_cast<std::uint8_t>(input_[input_pos_++]) : ~Word{0};
      break;
    case HostFn::Exit:
      result.status = RunStatus::Exited;
      result.exit_status = regs_[10];
      halted = true;
      return;
    case HostFn::None: break;
  }
  pc = regs_[1];
}

void Machine::boot_frame0(Addr base_sp, Addr entry, std::int64_t a0, std::int64_t b0, const RunOptions& opts,
                          RunResult& result) {
  regs_[2] = base_sp;
  pc = entry;
  if (opts.trace || opts.trace_digest) record(opts, result);
  const Region* r = find(base_sp + static_cast<Addr>(a0), 8);
  if (!r) {
    result.status = RunStatus::Trapped;
    result.trap = Trap{TrapKind::UnmappedAccess, entry, base_sp, base_sp + static_cast<Addr>(a0)};
    return;
  }
  regs_[1] = read_u64(base_sp + static_cast<Addr>(a0));
  regs_[2] = base_sp + static_cast<Addr>(b0);
  pc = regs_[1];
  if (opts.trace || opts.trace_digest) record(opts, result);
  if (opts.strict && regs_[2] % 16 != 0) {
    result.status = RunStatus::Trapped;
    result.trap = Trap{TrapKind::MisalignedSpStrict, pc, regs_[2], 0};
  }
}

void Machine::run(const RunOptions& opts, RunResult& result) {
  auto& x = regs_;
  const Region* code = nullptr;
  Word jump_target = 0;
  auto trap = [&](TrapKind k, Addr addr = 0) {
    result.status = RunStatus::Trapped;
    result.trap = Trap{k, pc, x[2], addr};
  };
  auto load = [&](Addr a, unsigned n, Word& out) -> bool {
    const Region* r = find(a, n);
    if (!r || !(r->perms & image::kRead)) {
      trap(TrapKind::UnmappedAccess, a);
      return false;
    }
    out = 0;
    std::memcpy(&out, r->bytes.data() + (a - r->base), n);
    return true;
  };
  auto store = [&](Addr a, unsigned n, Word v) -> bool {
    Region* r = find(a, n);
    if (!r || !(r->perms & image::kWrite)) {
      trap(TrapKind::UnmappedAccess, a);
      return false;
    }
    std::memcpy(r->bytes.data() + (a - r->base), &v, n);
    return true;
  };

  while (true) {
    if (opts.stop_pc && pc == *opts.stop_pc) {
      result.status = RunStatus::Stopped;
      return;
    }
    if (result.steps >= opts.max_steps) {
      result.status = RunStatus::StepLimit;
      return;
    }
    if (!code || pc < code->base || pc - code->base >= code->bytes.size()) {
      code = nullptr;
      for (const auto& r : regions_) {
        if (!r.code.empty() && pc >= r.base && pc - r.base < r.bytes.size()) code = &r;
      }
      if (!code) {
        // report the unmasked jump target, so an unwritten hole shows as itself
        trap(TrapKind::UnmappedAccess, (jump_target & ~Word{1}) == pc ? jump_target : pc);
        return;
      }
    }
    if (pc % 2 != 0) {
      trap(TrapKind::UnmappedAccess, pc);
      return;
    }
    const Decoded& d = code->code[(pc - code->base) / 2];
    ++result.steps;
    if (d.host != HostFn::None) {
      bool halted = false;
      call_host(d.host, opts, result, halted);
      if (halted) return;
      continue;
    }

    const Word a = x[d.rs1], b = x[d.rs2];
    const Word imm = static_cast<Word>(d.imm);
    Word next = pc + d.width;
    Word v = 0;
    bool wr = true;
    switch (d.op) {
      case M::Lui: v = imm; break;
      case M::Auipc: v = pc + imm; break;
      case M::Jal: v = next; next = pc + imm; break;
      case M::Jalr: v = next; jump_target = a + imm; next = jump_target & ~Word{1}; break;
      case M::Beq: case M::Bne: case M::Blt: case M::Bge: case M::Bltu: case M::Bgeu: {
        bool take = false;
        switch (d.op) {
          case M::Beq: take = a == b; break;
          case M::Bne: take = a != b; break;
          case M::Blt: take = sx(a) < sx(b); break;
          case M::Bge: take = sx(a) >= sx(b); break;
          case M::Bltu: take = a < b; break;
          default: take = a >= b; break;
        }
        if (take) next = pc + imm;
        wr = false;
        break;
      }
      case M::Lb: if (!load(a + imm, 1, v)) return; v = static_cast<Word>(static_cast<std::int8_t>(v)); break;
      case M::Lh: if (!load(a + imm, 2, v)) return; v = static_cast<Word>(static_cast<std::int16_t>(v)); break;
      case M::Lw: if (!load(a + imm, 4, v)) return; v = w32(v); break;
      case M::Ld: if (!load(a + imm, 8, v)) return; break;
      case M::Lbu: if (!load(a + imm, 1, v)) return; break;
      case M::Lhu: if (!load(a + imm, 2, v)) return; break;
      case M::Lwu: if (!load(a + imm, 4, v)) return; break;
      case M::Sb: if (!store(a + imm, 1, b)) return; wr = false; break;
      case M::Sh: if (!store(a + imm, 2, b)) return; wr = false; break;
      case M::Sw: if (!store(a + imm, 4, b)) return; wr = false; break;
      case M::Sd: if (!store(a + imm, 8, b)) return; wr = false; break;
      case M::Addi: v = a + imm; break;
      case M::Slti: v = sx(a) < sx(imm); break;
      case M::Sltiu: v = a < imm; break;
      case M::Xori: v = a ^ imm; break;
      case M::Ori: v = a | imm; break;
      case M::Andi: v = a & imm; break;
      case M::Slli: v = a << (imm & 63); break;
      case M::Srli: v = a >> (imm & 63); break;
      case M::Srai: v = static_cast<Word>(sx(a) >> (imm & 63)); break;
      case M::Add: v = a + b; break;
      case M::Sub: v = a - b; break;
      case M::Sll: v = a << (b & 63); break;
      case M::Slt: v = sx(a) < sx(b); break;
      case M::Sltu: v = a < b; break;
      case M::Xor: v = a ^ b; break;
      case M::Srl: v = a >> (b & 63); break;
      case M::Sra: v = static_cast<Word>(sx(a) >> (b & 63)); break;
      case M::Or: v = a | b; break;
      case M::And: v = a & b; break;
      case M::Addiw: v = w32(a + imm); break;
      case M::Slliw: v = w32(static_cast<std::uint32_t>(a) << (imm & 31)); break;
      case M::Srliw: v = w32(static_cast<std::uint32_t>(a) >> (imm & 31)); break;
      case M::Sraiw: v = w32(static_cast<Word>(static_cast<std::int32_t>(a) >> (imm & 31))); break;
      case M::Addw: v = w32(a + b); break;
      case M::Subw: v = w32(a - b); break;
      case M::Sllw: v = w32(static_cast<std::uint32_t>(a) << (b & 31)); break;
      case M::Srlw: v = w32(static_cast<std::uint32_t>(a) >> (b & 31)); break;
      case M::Sraw: v = w32(static_cast<Word>(static_cast<std::int32_t>(a) >> (b & 31))); break;
      case M::Mul: v = a * b; break;
      case M::Mulh: v = static_cast<Word>((static_cast<i128>(sx(a)) * static_cast<i128>(sx(b))) >> 64); break;
      case M::Mulhsu: v = static_cast<Word>((static_cast<i128>(sx(a)) * static_cast<i128>(static_cast<u128>(b))) >> 64); break;
      case M::Mulhu: v = static_cast<Word>((static_cast<u128>(a) * static_cast<u128>(b)) >> 64); break;
      case M::Div:
        v = b == 0 ? ~Word{0} : (sx(a) == INT64_MIN && sx(b) == -1) ? a : static_cast<Word>(sx(a) / sx(b));
        break;
      case M::Divu: v = b == 0 ? ~Word{0} : a / b; break;
      case M::Rem: v = b == 0 ? a : (sx(a) == INT64_MIN && sx(b) == -1) ? 0 : static_cast<Word>(sx(a) % sx(b)); break;
      case M::Remu: v = b == 0 ? a : a % b; break;
      case M::Mulw: v = w32(a * b); break;
      case M::Divw: {
        const auto p = static_cast<std::int32_t>(a), q = static_cast<std::int32_t>(b);
        v = q == 0 ? ~Word{0} : (p == INT32_MIN && q == -1) ? w32(static_cast<Word>(p)) : w32(static_cast<Word>(p / q));
        break;
      }
      case M::Divuw: {
        const auto p = static_cast<std::uint32_t>(a), q = static_cast<std::uint32_t>(b);
        v = q == 0 ? ~Word{0} : w32(p / q);
        break;
      }
      case M::Remw: {
        const auto p = static_cast<std::int32_t>(a), q = static_cast<std::int32_t>(b);
        v = q == 0 ? w32(static_cast<Word>(p)) : (p == INT32_MIN && q == -1) ? 0 : w32(static_cast<Word>(p % q));
        break;
      }
      case M::Remuw: {
        const auto p = static_cast<std::uint32_t>(a), q = static_cast<std::uint32_t>(b);
        v = q == 0 ? w32(p) : w32(p % q);
        break;
      }
      case M::Fence: wr = false; break;
      default:
        trap(TrapKind::IllegalInstruction);
        return;
    }
    if (wr && d.rd != 0) x[d.rd] = v;
    pc = next;
    if (d.ret) {
      if (opts.trace || opts.trace_digest) record(opts, result);
      if (opts.strict && x[2] % 16 != 0) {
        trap(TrapKind::MisalignedSpStrict);
        return;
      }
    }
  }
}

RunResult boot(const image::MemoryImage& img, const chain::ChainImage& chain, std::string input,
               const RunOptions& opts) {
  auto g = scan::analyze_at(img, chain.entry_gadget);
  if (!g || g->kind != scan::GadgetKind::Chainable) {
    throw Error(ErrorCode::MalformedChain, "frame 0 entry " + hex(chain.entry_gadget) + " is not a chainable gadget");
  }
  Machine m(img);
  m.load_chain(chain);
  static constexpr std::pair<const char*, HostFn> kHosts[] = {
      {"putchar", HostFn::Putchar}, {"getchar", HostFn::Getchar}, {"exit", HostFn::Exit}};
  for (const auto& [name, fn] : kHosts) {
    if (auto a = img.symbol(name)) m.set_host(*a, fn);
  }
  m.set_input(std::move(input));

  RunResult result;
  m.boot_frame0(chain.base_sp, chain.entry_gadget, g->ra_offset_a, g->sp_delta_b, opts, result);
  if (result.status == RunStatus::Trapped) return result;
  m.run(opts, result);
  return result;
}

}  // namespace rvrop::emu
