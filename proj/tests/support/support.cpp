#include "support.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace rvrop::testing {

using isa::Reg;

const synth::SynthImage& synthetic() {
  static const synth::SynthImage s = synth::build_image();
  return s;
}

const std::vector<scan::Gadget>& synthetic_gadgets() {
  static const std::vector<scan::Gadget> g = [] {
    auto gs = scan::scan(synthetic().image);
    scan::census(synthetic().image, gs);
    return gs;
  }();
  return g;
}

const scan::GadgetCatalog& synthetic_catalog() {
  static const scan::GadgetCatalog c = scan::build_catalog(synthetic().image, synthetic_gadgets());
  return c;
}

std::string data_path(const std::string& rel) { return std::string(RVROP_TEST_DATA) + "/" + rel; }
std::string oracle_path(const std::string& rel) { return std::string(RVROP_ORACLE_DIR) + "/" + rel; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- fidelity ----------------------------------------------------------------

namespace {

constexpr Addr kStackLo = 0x7ff00000, kStackSize = 0x1000;
constexpr Addr kDataLo = 0x50000000, kDataSize = 0x1000;

void collect_bases(const sym::Expr& e, std::set<std::pair<Reg, std::int64_t>>& out) {
  if (!e) return;
  if (e->op == sym::Op::Load) {
    if (auto ro = sym::as_reg_offset(e->lhs); ro && ro->first != Reg::sp) out.insert(*ro);
  }
  collect_bases(e->lhs, out);
  collect_bases(e->rhs, out);
}

void collect_bases(const scan::PathEffect& p, std::set<std::pair<Reg, std::int64_t>>& out) {
  for (const auto& r : p.reads) collect_bases(sym::load(r.addr, r.width, false), out);
  for (const auto& w : p.writes) {
    collect_bases(sym::load(w.addr, w.width, false), out);
    collect_bases(w.value, out);
  }
  for (const auto& e : p.regs) collect_bases(e, out);
  for (const auto& c : p.conditions) {
    collect_bases(c.lhs, out);
    collect_bases(c.rhs, out);
  }
}

bool holds_all(const scan::PathEffect& p, const sym::Env& env) {
  for (const auto& c : p.conditions) {
    if (!c.holds(env)) return false;
  }
  return true;
}

}  // namespace

FidelityReport check_fidelity(const scan::Gadget& g, const image::MemoryImage& img, std::size_t states,
                              std::uint64_t seed) {
  FidelityReport rep;
  std::mt19937_64 rng(seed);
  const auto& sum = g.summary;
  std::vector<const scan::PathEffect*> paths{&sum.main};
  for (const auto& a : sum.alternatives) paths.push_back(&a);

  std::set<std::pair<Reg, std::int64_t>> bases;
  for (const auto* p : paths) collect_bases(*p, bases);
  const Addr ret_stub = *synthetic().manifest.stub("ret_stub");

  std::size_t attempts = 0;
  while (rep.accepted < states && attempts < states * 20) {
    ++attempts;
    emu::Machine m(img);
    m.map(kStackLo, kStackSize, image::kRead | image::kWrite, "stack");
    m.map(kDataLo, kDataSize, image::kRead | image::kWrite, "data");
    for (Addr a = kStackLo; a < kStackLo + kStackSize; a += 8) m.write_u64(a, rng());
    for (Addr a = kDataLo; a < kDataLo + kDataSize; a += 8) m.write_u64(a, rng() % 3 == 0 ? 0 : rng());

    std::array<Word, isa::kNumRegs> regs{};
    for (unsigned i = 1; i < isa::kNumRegs; ++i) regs[i] = rng();
    regs[isa::index(Reg::sp)] = kStackLo + 0x800;
    for (const auto& [r, off] : bases) {
      regs[isa::index(r)] = kDataLo + 0x400 + 8 * (rng() % 64) - static_cast<Addr>(off);
    }
    for (const auto* p : paths) {
      for (const auto& c : p->calls) {
        if (auto ro = sym::as_reg_offset(c)) regs[isa::index(ro->first)] = ret_stub - static_cast<Addr>(ro->second);
      }
    }

    sym::Env env;
    env.regs = regs;
    bool unmapped = false;
    env.read = [&](std::uint64_t addr, unsigned width) -> std::uint64_t {
      if (!m.mapped(addr, width)) {
        unmapped = true;
        return 0;
      }
      const auto bytes = m.read_bytes(addr, width);
      std::uint64_t v = 0;
      for (unsigned i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
      return v;
    };

    // satisfy equality guards by writing the compared value into the loaded word
    const auto* want = paths[rng() % paths.size()];
    for (const auto& c : want->conditions) {
      if (c.cmp != sym::Cmp::Eq) continue;
      for (const auto& [side, other] : {std::pair{c.lhs, c.rhs}, std::pair{c.rhs, c.lhs}}) {
        if (side->op != sym::Op::Load || side->width != 8) continue;
        const Addr at = sym::eval(side->lhs, env);
        if (m.mapped(at, 8)) {
          m.write_u64(at, sym::eval(other, env));
          break;
        }
      }
    }

    const scan::PathEffect* path = nullptr;
    for (const auto* p : paths) {
      if (holds_all(*p, env)) {
        path = p;
        break;
      }
    }
    if (!path || unmapped) {
      ++rep.rejected;
      continue;
    }

    std::array<Word, isa::kNumRegs> expect{};
    std::vector<bool> known(isa::kNumRegs, true);
    for (unsigned i = 0; i < isa::kNumRegs; ++i) {
      if (sym::contains_unknown(path->regs[i])) {
        known[i] = false;
        continue;
      }
      expect[i] = sym::eval(path->regs[i], env);
    }
    std::vector<std::tuple<Addr, Word, unsigned>> stores;
    for (const auto& w : path->writes) {
      if (!sym::contains_unknown(w.value)) stores.emplace_back(sym::eval(w.addr, env), sym::eval(w.value, env), w.width);
    }
    if (unmapped) {
      ++rep.rejected;
      continue;
    }

    for (unsigned i = 1; i < isa::kNumRegs; ++i) m.reg(isa::reg_from_index(i)) = regs[i];
    m.pc = g.entry;
    emu::RunOptions opts;
    opts.max_steps = 1000;
    opts.stop_pc = expect[isa::index(Reg::ra)] & ~Addr{1};  // jalr drops bit 0
    emu::RunResult r;
    m.run(opts, r);
    ++rep.accepted;

    std::ostringstream why;
    if (r.status != emu::RunStatus::Stopped) {
      why << "run ended with status " << static_cast<int>(r.status) << (r.trap ? " " + r.trap->to_string() : "");
    } else {
      for (unsigned i = 0; i < isa::kNumRegs; ++i) {
        const Reg reg = isa::reg_from_index(i);
        if (known[i] && m.reg(reg) != expect[i]) {
          why << isa::abi_name(reg) << " = " << hex(m.reg(reg)) << ", summary says " << hex(expect[i]) << "; ";
        }
      }
      std::map<Addr, std::pair<Word, unsigned>> last;
      for (const auto& [a, v, wd] : stores) last[a] = {v, wd};
      for (const auto& [a, vw] : last) {
        const auto bytes = m.read_bytes(a, vw.second);
        Word got = 0;
        for (unsigned i = 0; i < vw.second; ++i) got |= static_cast<Word>(bytes[i]) << (8 * i);
        const Word mask = vw.second == 8 ? ~Word{0} : (Word{1} << (8 * vw.second)) - 1;
        if (got != (vw.first & mask)) why << "mem[" << hex(a) << "] = " << hex(got) << "; ";
      }
    }
    if (!why.str().empty()) {
      if (rep.mismatches++ == 0) rep.first_failure = hex(g.entry) + ": " + why.str();
    }
  }
  return rep;
}

// ---- units -------------------------------------------------------------------

std::array<Word, isa::kNumRegs> random_regs(std::mt19937_64& rng) {
  std::array<Word, isa::kNumRegs> r{};
  for (unsigned i = 1; i < isa::kNumRegs; ++i) r[i] = rng();
  return r;
}

std::set<Reg> changed(const std::array<Word, isa::kNumRegs>& before, const std::array<Word, isa::kNumRegs>& after) {
  std::set<Reg> out;
  for (unsigned i = 0; i < isa::kNumRegs; ++i) {
    const Reg r = isa::reg_from_index(i);
    if (r != Reg::ra && r != Reg::sp && before[i] != after[i]) out.insert(r);
  }
  return out;
}

UnitRun run_unit(const build::LogicalUnit& unit, const std::array<Word, isa::kNumRegs>& regs,
                 const std::function<void(emu::Machine&, const chain::ChainProgram&)>& setup, emu::RunOptions opts) {
  const auto& cat = synthetic_catalog();
  build::Builder b(cat);
  const Addr halt = *synthetic().manifest.stub("chain_halt");
  const auto& nop = *cat.first(scan::RoleKind::NOP);

  build::LogicalUnit whole = b.unit_nop();
  whole.append(unit);
  whole.frames.push_back(b.frame(nop, {{nop.a, chain::Slot::constant(halt, "halt")}}));
  auto prog = build::link(whole, kBaseSp);

  auto m = std::make_shared<emu::Machine>(synthetic().image);
  m->load_chain(chain::flatten(prog));
  for (const auto& [name, fn] : {std::pair{"putchar", emu::HostFn::Putchar}, std::pair{"getchar", emu::HostFn::Getchar},
                                 std::pair{"exit", emu::HostFn::Exit}}) {
    m->set_host(*synthetic().image.symbol(name), fn);
  }
  if (setup) setup(*m, prog);

  UnitRun out;
  out.before = regs;
  for (unsigned i = 1; i < isa::kNumRegs; ++i) m->reg(isa::reg_from_index(i)) = regs[i];
  opts.stop_pc = halt;
  m->boot_frame0(kBaseSp, nop.entry, nop.a, nop.b, opts, out.result);
  out.before[isa::index(Reg::sp)] = kBaseSp;
  if (out.result.status != emu::RunStatus::Trapped) m->run(opts, out.result);
  for (unsigned i = 0; i < isa::kNumRegs; ++i) out.after[i] = m->reg(isa::reg_from_index(i));
  out.read = [m](Addr a) { return m->read_u64(a); };
  return out;
}

// ---- brainfuck ---------------------------------------------------------------

namespace {

void gen_block(std::mt19937_64& rng, std::string& out, int depth, int budget) {
  static constexpr char kOps[] = "++++---->><<..,";
  for (int i = 0; i < budget; ++i) {
    if (depth < 3 && rng() % 6 == 0) {
      out += '[';
      gen_block(rng, out, depth + 1, 2 + static_cast<int>(rng() % 6));
      out += "-]";
    } else {
      out += kOps[rng() % (sizeof(kOps) - 1)];
    }
  }
}

}  // namespace

BfCase random_bf(std::mt19937_64& rng, std::uint64_t max_steps) {
  while (true) {
    BfCase c;
    // seed a few cells so loops run
    const int seeds = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < seeds; ++i) c.source += std::string(1 + rng() % 5, '+') + ">";
    c.source += std::string(static_cast<std::size_t>(seeds), '<');
    gen_block(rng, c.source, 0, 8 + static_cast<int>(rng() % 20));
    c.source += '.';
    for (std::size_t n = rng() % 6; n > 0; --n) c.input += static_cast<char>(rng() % 256);
    try {
      const auto r = bf::interpret(bf::parse(c.source), c.input, {}, max_steps);
      if (r.finished) return c;
    } catch (const std::out_of_range&) {
    }
  }
}

emu::RunOptions strict_options() {
  emu::RunOptions o;
  o.strict = true;
  o.hostile_clobber = 512;
  return o;
}

BfRun run_bf(const std::string& source, const std::string& input, emu::RunOptions opts) {
  BfRun r;
  r.program = bf::compile(bf::parse(source), synthetic_catalog(), {}, kBaseSp);
  r.result = emu::boot(synthetic().image, chain::flatten(r.program), input, opts);
  return r;
}

}  // namespace rvrop::testing
