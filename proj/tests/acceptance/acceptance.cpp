// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit 1 on
// any failure.

#include <chrono>
#include <iostream>
#include <random>
#include <sstream>

#include "rvrop/bf.hpp"
#include "support.hpp"

using namespace rvrop;
using isa::Reg;
namespace t = rvrop::testing;

namespace {

// tolerances
constexpr double kCorpusSeconds = 60.0;
constexpr std::size_t kRandomPrograms = 24;
constexpr std::size_t kFidelityStates = 1000;
constexpr std::size_t kReadMemStates = 200;
constexpr std::size_t kSaveRestoreStates = 100;
constexpr std::size_t kRoundTrips = 10000;
constexpr std::uint64_t kBranchSpOffset = 0x68;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

void report(int n, const char* name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << name;
  if (!o.detail.empty()) std::cout << " (" << o.detail << ")";
  std::cout << std::endl;
}

// ---- 1 and 9: differential Brainfuck suite --------------------------------

struct BfCaseRun {
  std::string name;
  std::vector<std::uint8_t> chain;
  std::string output;
  std::uint64_t digest = 0;
  std::uint64_t steps = 0;
};

std::vector<std::pair<std::string, t::BfCase>> bf_cases() {
  std::vector<std::pair<std::string, t::BfCase>> out;
  for (const char* name : {"bsort", "squares", "sierpinski", "hello"}) {
    t::BfCase c;
    c.source = t::read_file(t::data_path(std::string("bf/") + name + ".b"));
    try {
      c.input = t::read_file(t::data_path(std::string("bf/") + name + ".in"));
    } catch (const std::runtime_error&) {
    }
    out.emplace_back(name, c);
  }
  std::mt19937_64 rng(424242);
  for (std::size_t i = 0; i < kRandomPrograms; ++i) out.emplace_back("random" + std::to_string(i), t::random_bf(rng));
  return out;
}

std::vector<BfCaseRun> run_suite(Outcome& o) {
  std::vector<BfCaseRun> runs;
  auto opts = t::strict_options();
  opts.trace_digest = true;
  for (const auto& [name, c] : bf_cases()) {
    const auto prog = bf::parse(c.source);
    const auto chain = bf::compile(prog, t::synthetic_catalog(), {}, t::kBaseSp);
    const auto r = emu::boot(t::synthetic().image, chain::flatten(chain), c.input, opts);
    if (r.status != emu::RunStatus::Exited) {
      o.fail(name + " did not exit: " + (r.trap ? r.trap->to_string() : "step limit"));
    }
    const auto want = bf::interpret(prog, c.input);
    if (r.output != want.output) o.fail(name + " output differs from the reference interpreter");
    if (name.rfind("random", 0) != 0 && want.output != t::read_file(t::data_path("bf/" + name + ".out"))) {
      o.fail(name + " reference output differs from the stored expectation");
    }
    runs.push_back({name, chain::serialize(chain), r.output, r.trace_digest, r.steps});
  }
  return runs;
}

// ---- 2: scanner ground truth -----------------------------------------------

Outcome scanner_ground_truth() {
  Outcome o;
  const auto& img = t::synthetic().image;
  auto gadgets = scan::scan(img);
  const auto c = scan::census(img, gadgets);
  std::size_t found = 0;
  std::set<Addr> planted_unintended;
  for (const auto& p : t::synthetic().manifest.planted) {
    if (p.unintended) planted_unintended.insert(p.entry);
    std::size_t hits = 0;
    for (const auto& g : gadgets) {
      if (g.entry != p.entry) continue;
      ++hits;
      if (g.ra_offset_a != p.a || g.sp_delta_b != p.b) o.fail(p.label + " has wrong (a, b)");
    }
    if (hits == 0) o.fail(p.label + " missed");
    if (hits > 1) o.fail(p.label + " reported twice");
    found += hits == 1;
  }
  std::set<Addr> got_unintended;
  for (const auto& g : gadgets) {
    if (g.unintended_entry) got_unintended.insert(g.entry);
  }
  if (c.unintended < 1) o.fail("census found no unintended gadget");
  if (got_unintended != planted_unintended) o.fail("unintended entries differ from the planted ones");
  std::ostringstream d;
  d << found << "/" << t::synthetic().manifest.planted.size() << " planted found, census " << c.total << " total "
    << c.unintended << " unintended";
  if (o.pass) o.detail = d.str();
  return o;
}

// ---- 3: summary fidelity ---------------------------------------------------

Outcome summary_fidelity() {
  Outcome o;
  std::size_t checked = 0, states = 0;
  std::vector<std::string> skipped;
  for (const auto& p : t::synthetic().manifest.planted) {
    const scan::Gadget* g = nullptr;
    for (const auto& x : t::synthetic_gadgets()) {
      if (x.entry == p.entry) g = &x;
    }
    if (!g) {
      o.fail(p.label + " not scanned");
      continue;
    }
    if (g->summary.opaque) {
      skipped.push_back(p.label);
      continue;
    }
    const auto rep = t::check_fidelity(*g, t::synthetic().image, kFidelityStates, 1000 + p.entry);
    if (rep.accepted < kFidelityStates) o.fail(p.label + ": only " + std::to_string(rep.accepted) + " states accepted");
    if (rep.mismatches) o.fail(p.label + ": " + rep.first_failure);
    ++checked;
    states += rep.accepted;
  }
  if (o.pass) {
    o.detail = std::to_string(checked) + " gadgets, " + std::to_string(states) + " states";
    for (const auto& s : skipped) o.detail += "; " + s + " skipped (opaque)";
  }
  return o;
}

// ---- 4: readMEM side effects -----------------------------------------------

Outcome readmem_side_effects() {
  Outcome o;
  constexpr Addr kData = 0x50000000;
  build::Builder b(t::synthetic_catalog());
  const auto disp = static_cast<Addr>(t::synthetic_catalog().first(scan::RoleKind::READMEM)->binding.disp);
  const auto with = b.unit_read_mem(true);
  const auto without = b.unit_read_mem(false);
  std::mt19937_64 rng(4);
  for (std::size_t i = 0; i < kReadMemStates; ++i) {
    auto regs = t::random_regs(rng);
    const Addr a0 = kData + 8 * (rng() % 256);
    regs[isa::index(Reg::a0)] = a0;
    regs[isa::index(Reg::a5)] |= 1;
    const Word cell = rng();
    auto setup = [&](emu::Machine& m, const chain::ChainProgram&) {
      m.map(kData, 0x1000, image::kRead | image::kWrite, "data");
      m.write_u64(a0 + disp, cell);
    };
    const auto r1 = t::run_unit(without, regs, setup);
    const auto r0 = t::run_unit(with, regs, setup);
    if (r1.result.status != emu::RunStatus::Stopped || r0.result.status != emu::RunStatus::Stopped) {
      o.fail("unit did not complete");
      continue;
    }
    if (r1.after[isa::index(Reg::a0)] != cell + regs[isa::index(Reg::a5)]) o.fail("without precondition: a0 != mem + a5");
    if (r0.after[isa::index(Reg::a0)] != cell) o.fail("with precondition: a0 != mem");
  }
  if (o.pass) o.detail = std::to_string(kReadMemStates) + " states, a5 != 0";
  return o;
}

// ---- 5: self-modifying save/restore ----------------------------------------

build::LogicalUnit random_body(build::Builder& b, std::mt19937_64& rng) {
  static constexpr Reg kRegs[] = {Reg::a0, Reg::a1, Reg::a2, Reg::a3, Reg::a4, Reg::a5, Reg::s0, Reg::s1, Reg::s2};
  build::LogicalUnit u;
  for (std::size_t n = 1 + rng() % 5; n > 0; --n) {
    switch (rng() % 5) {
      case 0: u.append(b.unit_set_reg(kRegs[rng() % std::size(kRegs)], chain::Slot::constant(rng()))); break;
      case 1: u.append(b.unit_add_a0(static_cast<std::int64_t>(rng() % 7) - 3)); break;
      case 2: u.append(b.unit_mov_a0_to_s0()); break;
      case 3: u.append(b.unit_call("putchar", {build::Arg::a0()}, false)); break;
      default: u.append(b.unit_set_regs({{Reg::a0, chain::Slot::constant(0)}, {Reg::a2, chain::Slot::constant(rng())}})); break;
    }
  }
  return u;
}

Outcome save_restore() {
  Outcome o;
  build::Builder b(t::synthetic_catalog());
  std::mt19937_64 rng(5);
  for (std::size_t i = 0; i < kSaveRestoreStates; ++i) {
    const auto u = b.unit_save_restore_a0(random_body(b, rng));
    const auto regs = t::random_regs(rng);
    const auto r = t::run_unit(u, regs, {}, t::strict_options());
    if (r.result.status != emu::RunStatus::Stopped) {
      o.fail("unit did not complete");
    } else if (r.after[isa::index(Reg::a0)] != regs[isa::index(Reg::a0)]) {
      o.fail("a0 changed for state " + std::to_string(i));
    }
  }
  if (o.pass) o.detail = std::to_string(kSaveRestoreStates) + " random a0 values and bodies";
  return o;
}

// ---- 6: function-call protocol ---------------------------------------------

Outcome call_protocol() {
  Outcome o;
  const auto& cat = t::synthetic_catalog();
  build::Builder b(cat);
  const auto& nop = *cat.first(scan::RoleKind::NOP);
  std::mt19937_64 rng(6);
  std::size_t clobbered_words = 0;
  for (unsigned c = 0; c < 256; ++c) {
    auto u = b.unit_nop();
    u.append(b.unit_call("putchar", {build::Arg::word((rng() << 8) | c)}, false));
    u.append(b.unit_call("exit", {build::Arg::word(0)}, false));
    u.frames.push_back(b.frame(nop, {{nop.a, chain::Slot::constant(0, "halt")}}));
    const auto prog = build::link(u, t::kBaseSp);
    const auto img = chain::flatten(prog);

    emu::Machine m(t::synthetic().image);
    m.load_chain(img);
    m.set_host(*t::synthetic().image.symbol("putchar"), emu::HostFn::Putchar);
    m.set_host(*t::synthetic().image.symbol("exit"), emu::HostFn::Exit);
    auto opts = t::strict_options();
    opts.hostile_clobber = b.options().buffer_bytes;
    emu::RunResult r;
    m.boot_frame0(t::kBaseSp, nop.entry, nop.a, nop.b, opts, r);
    m.run(opts, r);
    if (r.status != emu::RunStatus::Exited) {
      o.fail("call chain did not exit for c=" + std::to_string(c));
      continue;
    }
    if (r.output != std::string(1, static_cast<char>(c))) o.fail("wrong byte for c=" + std::to_string(c));

    // words outside the buffers keep their linked value unless a fixup
    // rewrites them before use
    std::set<Addr> rewritten;
    for (const auto& fx : prog.fixups) rewritten.insert(prog.labels.at(fx.target) + static_cast<Addr>(fx.offset));
    for (std::size_t f = 0; f < prog.frames.size(); ++f) {
      const auto& fr = prog.frames[f];
      const bool buffer = !fr.gadget && fr.comment == "safety buffer";
      for (std::size_t k = 0; k < fr.slots.size(); ++k) {
        const Addr a = prog.frame_bases[f] + 8 * k;
        const Word now = m.read_u64(a);
        if (buffer) {
          clobbered_words += now == 0xa5a5a5a5a5a5a5a5ull;
        } else if (!rewritten.count(a) && now != fr.slots[k].value) {
          o.fail("frame word at " + hex(a) + " corrupted");
        }
      }
    }
  }
  if (clobbered_words == 0) o.fail("hostile callee never reached the buffer");
  if (o.pass) o.detail = "256 bytes, hostile clobber of " + std::to_string(b.options().buffer_bytes) + " bytes";
  return o;
}

// ---- 7: branch descriptor layout -------------------------------------------

Outcome branch_layout() {
  Outcome o;
  const auto& cat = t::synthetic_catalog();
  const Addr branch = cat.first(scan::RoleKind::BRANCH_UNCOND)->entry;
  const auto chain = bf::compile(bf::parse("++[>+<-]>[-]+[->+<]."), cat, {}, t::kBaseSp);
  const auto img = chain::flatten(chain);
  emu::RunOptions opts = t::strict_options();
  opts.trace = true;
  const auto r = emu::boot(t::synthetic().image, img, "", opts);
  if (r.status != emu::RunStatus::Exited) o.fail("chain did not exit");
  auto word = [&](Addr a) -> std::optional<Word> {
    if (a < img.base_sp || a + 8 > img.base_sp + 8 * img.words.size() || (a - img.base_sp) % 8) return std::nullopt;
    return img.words[(a - img.base_sp) / 8];
  };
  std::size_t pivots = 0;
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
    if (r.trace[i].pc != branch) continue;
    const Addr a0 = r.trace[i].regs[0];
    const auto ra = word(a0), sp = word(a0 + kBranchSpOffset);
    if (!ra || !sp) {
      o.fail("a0 at branch does not point into the chain");
      continue;
    }
    if (r.trace[i + 1].pc != *ra) o.fail("branch landed off mem[a0]");
    if (r.trace[i + 1].sp != *sp) o.fail("branch sp differs from mem[a0+0x68]");
    ++pivots;
  }
  if (pivots == 0) o.fail("no branch in the trace");
  if (o.pass) o.detail = std::to_string(pivots) + " pivots traced";
  return o;
}

// ---- 8: round trips --------------------------------------------------------

bool skip(isa::Mnemonic m) {
  return m == isa::Mnemonic::Illegal || m == isa::Mnemonic::FloatOrAtomic || m == isa::Mnemonic::Csr;
}

Outcome round_trips(const std::vector<BfCaseRun>& runs) {
  Outcome o;
  std::mt19937_64 rng(8);
  std::size_t words = 0, halves = 0;
  while (words < kRoundTrips) {
    const auto w = static_cast<std::uint32_t>(rng()) | 3u;
    const auto ins = isa::decode32(w);
    if (skip(ins.op)) continue;
    if (isa::encode_word(ins) != w || !isa::decode32(isa::encode_word(ins)).operands_equal(ins)) {
      o.fail("32-bit round trip failed for " + hex(w));
    }
    ++words;
  }
  while (halves < kRoundTrips) {
    const auto h = static_cast<std::uint16_t>(rng());
    if ((h & 3) == 3) continue;
    const auto ins = isa::decode16(h);
    if (skip(ins.op)) continue;
    const auto b = isa::encode(ins);
    if (b.size() != 2 || (b[0] | b[1] << 8) != h) o.fail("16-bit round trip failed for " + hex(h));
    ++halves;
  }
  for (const auto& r : runs) {
    if (chain::serialize(chain::deserialize(r.chain)) != r.chain) o.fail(r.name + " chain round trip differs");
  }
  if (o.pass) {
    o.detail = std::to_string(words + halves) + " instruction round trips, " + std::to_string(runs.size()) + " chains";
  }
  return o;
}

// ---- 9: determinism --------------------------------------------------------

Outcome determinism(const std::vector<BfCaseRun>& first) {
  Outcome o;
  Outcome ignored;
  const auto second = run_suite(ignored);
  if (second.size() != first.size()) o.fail("case count differs");
  for (std::size_t i = 0; i < std::min(first.size(), second.size()); ++i) {
    const auto& a = first[i];
    const auto& b = second[i];
    if (a.chain != b.chain) o.fail(a.name + ": chain bytes differ");
    if (a.output != b.output) o.fail(a.name + ": output differs");
    if (a.digest != b.digest || a.steps != b.steps) o.fail(a.name + ": trace differs");
  }
  if (o.pass) o.detail = std::to_string(first.size()) + " programs, chains, outputs and trace digests identical";
  return o;
}

}  // namespace

int main() {
  bool all = true;
  auto note = [&](int n, const char* name, const Outcome& o) {
    report(n, name, o);
    all = all && o.pass;
  };

  Outcome c1;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<BfCaseRun> runs;
  try {
    runs = run_suite(c1);
  } catch (const std::exception& e) {
    c1.fail(e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > kCorpusSeconds) c1.fail("took " + std::to_string(secs) + " s");
  if (c1.pass) {
    std::ostringstream d;
    d.precision(1);
    d << std::fixed << runs.size() << " programs in " << secs << " s";
    c1.detail = d.str();
  }
  note(1, "differential Brainfuck suite", c1);

  auto guarded = [](auto&& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      Outcome o;
      o.fail(std::string("exception: ") + e.what());
      return o;
    }
  };
  note(2, "scanner ground truth", guarded(scanner_ground_truth));
  note(3, "summary fidelity", guarded(summary_fidelity));
  note(4, "readMEM side effects", guarded(readmem_side_effects));
  note(5, "self-modifying save/restore", guarded(save_restore));
  note(6, "function-call protocol", guarded(call_protocol));
  note(7, "branch descriptor layout", guarded(branch_layout));
  note(8, "round trips", guarded([&] { return round_trips(runs); }));
  note(9, "determinism", guarded([&] { return determinism(runs); }));
  return all ? 0 : 1;
}
