#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rvrop/chain.hpp"
#include "rvrop/scanner.hpp"

namespace rvrop::build {

using chain::Slot;
using isa::Reg;

struct LogicalUnit {
  std::vector<chain::ChainFrame> frames;
  std::vector<chain::SelfModFixup> fixups;  // sources index into `frames`
  std::vector<chain::ScratchRegion> scratch;
  std::set<Reg> outputs;                    // registers the contract defines
  std::set<Reg> clobbers;                   // registers left unspecified
  std::set<Reg> preserves;                  // registers the contract keeps, even across clobbering parts

  LogicalUnit& append(LogicalUnit other);
  std::size_t find(const std::string& label) const;
};

/// A call argument: a fixed word, or whatever a0 holds when the unit starts.
struct Arg {
  bool from_a0 = false;
  Slot value;

  static Arg a0() { return {true, {}}; }
  static Arg word(Word v) { return {false, Slot::constant(v)}; }
  static Arg slot(Slot s) { return {false, std::move(s)}; }
};

struct BuilderOptions {
  std::uint64_t buffer_bytes = 1024;
  Word fill = 0;
};

class Builder {
 public:
  /// Throws `InvalidOperand` when buffer_bytes is below 512 or not 16-aligned.
  explicit Builder(const scan::GadgetCatalog& cat, BuilderOptions opts = {});

  const scan::GadgetCatalog& catalog() const { return cat_; }
  const BuilderOptions& options() const { return opts_; }
  std::string fresh(const std::string& prefix);

  /// Gadget frame: ra slot chains to the next frame, pops get `fill`, then
  /// `at` overrides slots by byte offset.
  chain::ChainFrame frame(const scan::CatalogEntry& e, const std::map<std::int64_t, Slot>& at = {},
                          std::string label = {}) const;
  const scan::CatalogEntry& role(scan::RoleKind k) const;
  /// POP covering `r` whose other pops avoid `keep`. Throws `NoPopGadget`.
  const scan::CatalogEntry& pop_avoiding(Reg r, const std::set<Reg>& keep) const;

  LogicalUnit unit_nop();
  /// Throws `ReservedRegister` for ra/sp, `NoPopGadget`.
  LogicalUnit unit_set_reg(Reg r, Slot value);
  LogicalUnit unit_set_reg(const scan::CatalogEntry& pop, Reg r, Slot value);
  /// Sets several registers; registers already set are kept.
  LogicalUnit unit_set_regs(const std::map<Reg, Slot>& values, std::set<Reg> keep = {});
  /// a0 += k with ADD1/SUB1 frames.
  LogicalUnit unit_add_a0(std::int64_t k);
  /// a0 <- mem[a0 + disp]. Without the precondition, the READMEM addends
  /// keep their incoming values.
  LogicalUnit unit_read_mem(bool zero_precondition = true);
  /// Stores a0 at label+offset; records a self-mod fixup unless the target
  /// is scratch memory.
  LogicalUnit unit_write_a0(const std::string& label, std::int64_t offset, bool fixup = true);
  /// POP frame labeled `label` whose a0 slot is a hole.
  LogicalUnit unit_restore_a0(const std::string& label);
  /// Byte offset of the a0 hole in a restore frame.
  std::int64_t restore_offset() const;
  LogicalUnit unit_save_restore_a0(LogicalUnit body);
  LogicalUnit unit_mov_a0_to_s0();
  /// mem[a0] <- value.
  LogicalUnit unit_store_to_a0(Slot value);
  /// Throws `UnknownFunction`, `TooManyArgs`.
  LogicalUnit unit_call(const std::string& fn, const std::vector<Arg>& args, bool want_ret);
  LogicalUnit unit_branch(const std::string& target);
  LogicalUnit unit_cond_branch(const std::string& on_zero, const std::string& on_nonzero);
  /// a0 <- (mem[a0] != 0) ? nonzero : zero, with no control transfer.
  LogicalUnit unit_select(Slot on_zero, Slot on_nonzero, const std::string& label = {});

 private:
  LogicalUnit mov_a0_to(Reg r);
  chain::ChainFrame descriptor(const std::string& label, const std::string& target) const;

  const scan::GadgetCatalog& cat_;
  BuilderOptions opts_;
  unsigned counter_ = 0;
};

/// Wraps the unit into a program at base_sp and resolves it.
chain::ChainProgram link(const LogicalUnit& unit, Addr base_sp);

}  // namespace rvrop::build
