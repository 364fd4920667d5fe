#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rvrop/image.hpp"
#include "rvrop/isa.hpp"
#include "rvrop/symbolic.hpp"

namespace rvrop::scan {

using isa::Instruction;
using isa::Reg;

struct MemRead {
  sym::Expr addr;
  std::uint8_t width = 8;
};

struct MemWrite {
  sym::Expr addr;
  sym::Expr value;
  std::uint8_t width = 8;
};

/// Symbolic effect of one path through a gadget window.
struct PathEffect {
  std::array<sym::Expr, isa::kNumRegs> regs;  // final value of every register
  std::vector<sym::Cond> conditions;          // must hold for this path to be taken
  std::vector<MemRead> reads;                 // non-pop loads, in program order
  std::vector<MemWrite> writes;               // all stores, in program order
  std::vector<sym::Expr> calls;               // targets of linking jumps
  bool sp_nonimmediate = false;               // sp written by something other than sp += imm
  std::vector<std::size_t> taken_branches;    // window indices of branches taken on this path

  const sym::Expr& reg(Reg r) const { return regs[isa::index(r)]; }
};

struct EffectSummary {
  std::map<Reg, std::int64_t> pops;      // reg <- [sp0 + k]
  std::map<Reg, sym::Expr> reg_writes;   // registers changed other than by a pop
  std::vector<MemRead> mem_reads;
  std::vector<MemWrite> mem_writes;
  std::vector<sym::Cond> guards;         // conditions for the fall-through path
  std::vector<sym::Expr> calls;
  bool opaque = false;                   // window has instructions with unmodeled semantics
  PathEffect main;                       // the all-fall-through path
  std::vector<PathEffect> alternatives;  // taken in-window branches that reach the epilogue

  std::string to_string() const;
};

enum class GadgetKind : std::uint8_t {
  Chainable,
  Pivot,  // ra and sp both reloaded through one non-sp base register
};

struct Gadget {
  Addr entry = 0;
  std::vector<Instruction> instrs;
  std::int64_t ra_offset_a = 0;
  std::int64_t sp_delta_b = 0;
  EffectSummary summary;
  bool unintended_entry = false;
  GadgetKind kind = GadgetKind::Chainable;
  // Pivot only.
  Reg pivot_base = Reg::zero;
  std::int64_t pivot_ra_off = 0;
  std::int64_t pivot_sp_off = 0;

  Addr end() const;
  std::string listing() const;
};

struct ScanOptions {
  unsigned max_window = 16;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Analyzes the window starting at `entry`. Returns nothing when the window
/// is not a gadget.
std::optional<Gadget> analyze_at(const image::MemoryImage& img, Addr entry, unsigned max_window = 16);

/// Summarizes a straight-line window given as (address, instruction) pairs;
/// the last instruction must be a return.
EffectSummary summarize_window(const std::vector<std::pair<Addr, Instruction>>& window);

std::vector<Gadget> scan(const image::MemoryImage& img, const ScanOptions& opts = {});

inline const EffectSummary& summarize(const Gadget& g) { return g.summary; }

// ---- roles ---------------------------------------------------------------

enum class RoleKind : std::uint8_t {
  NOP, POP, READMEM, WRITEMEM, ADD1, SUB1, MOV_SP, CALL_JALR_A5, BRANCH_UNCOND, COND_BRANCH,
};
constexpr std::size_t kNumRoles = 10;

std::string_view to_string(RoleKind k);
std::optional<RoleKind> parse_role(std::string_view s);

/// Role-specific parameters. Only the fields named by the role are meaningful.
struct RoleBinding {
  std::map<Reg, std::int64_t> pops;  // every stack pop of the gadget, ra included
  std::set<Reg> clobbers;            // registers changed besides the role's output
  Reg dst = Reg::zero;               // READMEM, MOV_SP
  Reg addr = Reg::zero;              // READMEM, WRITEMEM
  Reg value = Reg::zero;             // WRITEMEM
  Reg reg = Reg::zero;               // ADD1, SUB1
  Reg target = Reg::zero;            // CALL_JALR_A5
  Reg base = Reg::zero;              // BRANCH_UNCOND, COND_BRANCH (tested pointer)
  Reg select = Reg::zero;            // COND_BRANCH: register popped differently per arm
  std::int64_t disp = 0;             // READMEM, WRITEMEM, MOV_SP, COND_BRANCH
  std::vector<Reg> zero_regs;        // READMEM addends that must be zero
  std::optional<Reg> guard_base;     // READMEM: guard compares pop(guard_pop) with mem[guard_base+guard_disp]
  std::int64_t guard_disp = 0;
  std::int64_t guard_pop = 0;
  std::int64_t ra_off = 0;           // BRANCH_UNCOND
  std::int64_t sp_off = 0;           // BRANCH_UNCOND
  std::int64_t zero_slot = 0;        // COND_BRANCH: select pop offset when mem[base+disp] == 0
  std::int64_t nonzero_slot = 0;
};

struct GadgetRole {
  RoleKind kind = RoleKind::NOP;
  RoleBinding binding;
};

std::vector<GadgetRole> classify(const Gadget& g, const image::MemoryImage& img);

struct Census {
  std::size_t total = 0;
  std::size_t unintended = 0;
};

struct CensusOptions {
  bool symbol_anchored = false;  // also sweep from every executable symbol
};

/// Intended instruction starts, by linear sweep.
std::set<Addr> intended_starts(const image::MemoryImage& img, const CensusOptions& opts = {});
/// Marks `unintended_entry` on each gadget and returns the counts.
Census census(const image::MemoryImage& img, std::vector<Gadget>& gadgets, const CensusOptions& opts = {});

// ---- catalog -------------------------------------------------------------

struct CatalogEntry {
  RoleKind kind = RoleKind::NOP;
  Addr entry = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
  RoleBinding binding;
};

struct GadgetCatalog {
  std::vector<CatalogEntry> entries;
  std::vector<std::pair<Addr, Word>> constants;
  std::map<std::string, Addr> functions;

  std::vector<const CatalogEntry*> all(RoleKind k) const;
  const CatalogEntry* first(RoleKind k) const;
  /// POP gadget covering `r`: fewest other pops, then smallest frame.
  const CatalogEntry* pop_for(Reg r) const;
  /// Name of the first missing role for chain building, if any.
  std::optional<std::string> missing_role() const;
};

/// One entry per (gadget, role); constants from the first word of each
/// read-only data segment; functions from the putchar/getchar/exit symbols.
GadgetCatalog build_catalog(const image::MemoryImage& img, const std::vector<Gadget>& gadgets);

std::string write_catalog(const GadgetCatalog& cat);
GadgetCatalog parse_catalog(std::string_view text);

}  // namespace rvrop::scan
