#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rvrop/error.hpp"

namespace rvrop::image {

enum Perm : std::uint8_t { kRead = 1, kWrite = 2, kExec = 4 };

struct Segment {
  Addr base = 0;
  std::vector<std::uint8_t> bytes;
  std::uint8_t perms = kRead;

  Addr end() const { return base + bytes.size(); }
  bool contains(Addr addr, std::uint64_t len = 1) const {
    return addr >= base && len <= bytes.size() && addr - base <= bytes.size() - len;
  }
  bool executable() const { return (perms & kExec) != 0; }
};

/// Loaded address space. Immutable after construction.
class MemoryImage {
 public:
  MemoryImage() = default;
  /// Validates the segment invariants (non-overlapping, even executable bases).
  MemoryImage(std::vector<Segment> segments, std::map<std::string, Addr> symbols = {},
              std::optional<Addr> entry_hint = std::nullopt);

  const std::vector<Segment>& segments() const { return segments_; }
  const std::map<std::string, Addr>& symbols() const { return symbols_; }
  std::optional<Addr> entry_hint() const { return entry_hint_; }
  std::optional<Addr> symbol(const std::string& name) const;

  const Segment* segment_at(Addr addr, std::uint64_t len = 1) const;

  /// Bytes of [addr, addr+len) when the range lies within one segment;
  /// throws `OutOfRange` otherwise.
  std::span<const std::uint8_t> read_mem(Addr addr, std::uint64_t len) const;
  std::uint64_t read_u64(Addr addr) const;

 private:
  std::vector<Segment> segments_;
  std::map<std::string, Addr> symbols_;
  std::optional<Addr> entry_hint_;
};

MemoryImage load_elf(std::span<const std::uint8_t> bytes);
MemoryImage load_raw(std::span<const std::uint8_t> bytes, Addr base);

/// Dispatches on the ELF magic; falls back to raw at `raw_base`.
MemoryImage load_file(const std::string& path, Addr raw_base = 0x10000);

/// Writes a minimal position-dependent ELF64 RISC-V executable: one PT_LOAD
/// per segment plus .symtab/.strtab sections.
std::vector<std::uint8_t> write_elf(const MemoryImage& img);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

}  // namespace rvrop::image
