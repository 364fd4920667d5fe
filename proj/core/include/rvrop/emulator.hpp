#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rvrop/chain.hpp"
#include "rvrop/image.hpp"
#include "rvrop/isa.hpp"

namespace rvrop::emu {

using isa::Reg;

enum class HostFn : std::uint8_t { None, Putchar, Getchar, Exit };

enum class TrapKind : std::uint8_t { IllegalInstruction, UnmappedAccess, MisalignedSpStrict };

std::string_view to_string(TrapKind k);

struct Trap {
  TrapKind kind = TrapKind::IllegalInstruction;
  Addr pc = 0;
  Addr sp = 0;
  Addr addr = 0;  // faulting data address for unmapped-access

  std::string to_string() const;
};

struct TraceEvent {
  Addr pc = 0;
  Addr sp = 0;
  std::array<Word, 7> regs{};  // a0..a5, s0

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct RunOptions {
  std::uint64_t max_steps = 500'000'000;
  bool strict = false;
  bool trace = false;
  /// Fold every trace event into RunResult::trace_digest without storing it.
  bool trace_digest = false;
  /// Bytes below sp overwritten before every host call, to model a callee
  /// that uses its stack frame.
  std::uint64_t hostile_clobber = 0;
  std::optional<Addr> stop_pc;
};

enum class RunStatus : std::uint8_t { Exited, Trapped, StepLimit, Stopped };

struct RunResult {
  RunStatus status = RunStatus::Exited;
  Word exit_status = 0;
  std::string output;
  std::optional<Trap> trap;
  std::vector<TraceEvent> trace;
  std::uint64_t trace_digest = 0xcbf29ce484222325ull;  // FNV-1a over event words
  std::uint64_t steps = 0;
};

std::string trace_text(const std::vector<TraceEvent>& trace);

class Machine {
 public:
  /// Maps a private copy of every image segment; executable segments are
  /// never writable.
  explicit Machine(const image::MemoryImage& img);

  /// Maps zeroed memory. Throws `RegionOverlap`.
  void map(Addr base, std::uint64_t size, std::uint8_t perms, std::string name);
  /// Maps chain words at base_sp and its scratch regions.
  void load_chain(const chain::ChainImage& chain);
  void set_host(Addr addr, HostFn fn);
  void set_input(std::string input);

  Word& reg(Reg r) { return regs_[isa::index(r)]; }
  Word reg(Reg r) const { return regs_[isa::index(r)]; }
  Addr pc = 0;

  // Host-side accessors; throw `OutOfRange` on unmapped addresses.
  Word read_u64(Addr addr) const;
  void write_u64(Addr addr, Word v);
  std::vector<std::uint8_t> read_bytes(Addr addr, std::uint64_t len) const;
  bool mapped(Addr addr, std::uint64_t len = 1) const;

  /// Interprets from the current pc. Output and trace accumulate in `result`.
  void run(const RunOptions& opts, RunResult& result);

  /// Simulates the NOP-frame start (ra <- [sp+a0], sp += b0, pc <- ra) for a
  /// chain whose frame 0 gadget has parameters (a0, b0).
  void boot_frame0(Addr base_sp, Addr entry, std::int64_t a0, std::int64_t b0, const RunOptions& opts,
                   RunResult& result);

 private:
  struct Decoded {
    isa::Mnemonic op = isa::Mnemonic::Illegal;
    std::uint8_t width = 2;
    std::uint8_t rd = 0, rs1 = 0, rs2 = 0;
    bool ret = false;
    HostFn host = HostFn::None;
    std::int64_t imm = 0;
  };
  struct Region {
    Addr base = 0;
    std::vector<std::uint8_t> bytes;
    std::uint8_t perms = 0;
    std::string name;
    std::vector<Decoded> code;  // one per halfword, executable regions only
  };

  Region* find(Addr addr, std::uint64_t len);
  const Region* find(Addr addr, std::uint64_t len) const;
  void record(const RunOptions& opts, RunResult& result) const;
  void call_host(HostFn fn, const RunOptions& opts, RunResult& result, bool& halted);

  std::vector<Region> regions_;
  mutable std::size_t last_data_ = 0;
  std::array<Word, isa::kNumRegs> regs_{};
  std::string input_;
  std::size_t input_pos_ = 0;
};

/// Loads `chain` into a fresh machine over `img`, boots it and runs to
/// completion. Host stubs come from the putchar/getchar/exit symbols.
/// Throws `MalformedChain` when frame 0 is not a chainable gadget.
RunResult boot(const image::MemoryImage& img, const chain::ChainImage& chain, std::string input,
               const RunOptions& opts = {});

}  // namespace rvrop::emu
