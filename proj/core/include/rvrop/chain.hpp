#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvrop/error.hpp"

namespace rvrop::chain {

constexpr Word kHoleSentinel = 0xDEADDEADDEADDEADull;
constexpr std::uint32_t kFormatVersion = 1;

enum class SlotKind : std::uint8_t {
  Constant,
  LabelRef,   // address of `label` + offset
  EntryOf,    // gadget entry of the frame labeled `label`
  NextEntry,  // gadget entry of the following frame
  Hole,       // written at run time by a self-modifying store
};

struct Slot {
  SlotKind kind = SlotKind::Constant;
  Word value = 0;  // Constant, or the resolved word
  std::string label;
  std::int64_t offset = 0;
  std::string comment;

  static Slot constant(Word v, std::string comment = {});
  static Slot label_ref(std::string label, std::int64_t offset = 0, std::string comment = {});
  static Slot entry_of(std::string label, std::string comment = {});
  static Slot next_entry();
  static Slot hole(std::string comment = {});
};

struct GadgetRef {
  Addr entry = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::string role;
};

/// One gadget frame, or a data block when `gadget` is empty.
struct ChainFrame {
  std::optional<GadgetRef> gadget;
  std::vector<Slot> slots;
  std::string label;
  std::string comment;
  bool pivot = false;                       // control leaves through a descriptor, not the next frame
  std::vector<std::string> branch_targets;  // frame labels reachable by a pivot

  std::uint64_t size_bytes() const { return slots.size() * 8; }
};

struct SelfModFixup {
  std::size_t source = 0;  // index of the frame whose gadget performs the store
  std::string target;      // frame or scratch label
  std::int64_t offset = 0;
  unsigned width = 8;
};

struct ScratchRegion {
  std::string label;
  std::uint64_t size = 0;
  std::optional<Addr> addr;  // placed after the frames when empty
};

/// Flat form stored in chain files.
struct ChainImage {
  Addr base_sp = 0;
  Addr entry_gadget = 0;
  std::vector<Word> words;
  std::vector<std::pair<Addr, std::uint64_t>> scratch;

  friend bool operator==(const ChainImage&, const ChainImage&) = default;
};

struct ChainProgram {
  std::vector<ChainFrame> frames;
  std::vector<SelfModFixup> fixups;
  std::vector<ScratchRegion> scratch;
  Addr base_sp = 0;

  // Filled by resolve().
  bool resolved = false;
  std::map<std::string, Addr> labels;
  std::vector<Addr> frame_bases;

  std::uint64_t frame_bytes() const;
  /// Index of the frame labeled `label`.
  std::optional<std::size_t> frame_index(const std::string& label) const;
};

/// Lays frames out from base_sp, places scratch regions and replaces every
/// reference with its absolute value. Throws `MisalignedBase`,
/// `UnresolvedLabel`, `RegionOverlap` or `MalformedChain`.
ChainProgram resolve(const ChainProgram& prog);

ChainImage flatten(const ChainProgram& resolved);
std::vector<std::uint8_t> serialize(const ChainImage& img);
/// Throws `UnresolvedProgram` when `prog` has not been resolved.
std::vector<std::uint8_t> serialize(const ChainProgram& prog);
/// Throws `MalformedChain`.
ChainImage deserialize(std::span<const std::uint8_t> bytes);

std::string listing(const ChainProgram& prog);

/// Every path from frame 0 to a self-mod target frame passes through one of
/// that frame's writers. Returns the labels of frames that violate this.
std::vector<std::string> check_self_mod_order(const ChainProgram& prog);

/// Contiguity, alignment and ra-slot checks on a resolved program; returns
/// a description of each violation.
std::vector<std::string> check_layout(const ChainProgram& resolved);

}  // namespace rvrop::chain
