#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rvrop/image.hpp"

namespace rvrop::image {

namespace {

constexpr std::uint16_t kMachineRiscv = 243;
constexpr std::uint32_t kPtLoad = 1;
constexpr std::uint32_t kShtSymtab = 2;
constexpr std::uint32_t kShtStrtab = 3;
constexpr std::uint32_t kShtProgbits = 1;
constexpr std::uint32_t kShtDynsym = 11;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  template <typename T>
  T get(std::uint64_t off) const {
    if (off > b_.size() || sizeof(T) > b_.size() - off) {
      throw Error(ErrorCode::MalformedElf, "elf: read past end of file at " + hex(off));
    }
    T v{};
    std::memcpy(&v, b_.data() + off, sizeof(T));
    return v;
  }

  std::span<const std::uint8_t> slice(std::uint64_t off, std::uint64_t len) const {
    if (off > b_.size() || len > b_.size() - off) {
      throw Error(ErrorCode::MalformedElf, "elf: range " + hex(off) + "+" + hex(len) + " past end of file");
    }
    return b_.subspan(off, len);
  }

  std::size_t size() const { return b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
};

struct SectionHeader {
  std::uint32_t name, type;
  std::uint64_t flags, addr, offset, size;
  std::uint32_t link, info;
  std::uint64_t addralign, entsize;
};

SectionHeader read_shdr(const Reader& r, std::uint64_t off) {
  SectionHeader s{};
  s.name = r.get<std::uint32_t>(off + 0);
  s.type = r.get<std::uint32_t>(off + 4);
  s.flags = r.get<std::uint64_t>(off + 8);
  s.addr = r.get<std::uint64_t>(off + 16);
  s.offset = r.get<std::uint64_t>(off + 24);
  s.size = r.get<std::uint64_t>(off + 32);
  s.link = r.get<std::uint32_t>(off + 40);
  s.info = r.get<std::uint32_t>(off + 44);
  s.addralign = r.get<std::uint64_t>(off + 48);
  s.entsize = r.get<std::uint64_t>(off + 56);
  return s;
}

std::string read_cstr(std::span<const std::uint8_t> table, std::uint32_t off) {
  std::string out;
  for (std::size_t i = off; i < table.size() && table[i] != 0; ++i) out.push_back(static_cast<char>(table[i]));
  return out;
}

template <typename T>
void put(std::vector<std::uint8_t>& out, std::size_t off, T v) {
  if (out.size() < off + sizeof(T)) out.resize(off + sizeof(T));
  std::memcpy(out.data() + off, &v, sizeof(T));
}

}  // namespace

MemoryImage::MemoryImage(std::vector<Segment> segments, std::map<std::string, Addr> symbols,
                         std::optional<Addr> entry_hint)
    : segments_(std::move(segments)), symbols_(std::move(symbols)), entry_hint_(entry_hint) {
  std::sort(segments_.begin(), segments_.end(), [](const Segment& a, const Segment& b) { return a.base < b.base; });
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].executable() && segments_[i].base % 2 != 0) {
      throw Error(ErrorCode::OddBase, "executable segment at odd base " + hex(segments_[i].base));
    }
    if (i > 0 && segments_[i - 1].end() > segments_[i].base) {
      throw Error(ErrorCode::RegionOverlap, "segments overlap at " + hex(segments_[i].base));
    }
  }
}

std::optional<Addr> MemoryImage::symbol(const std::string& name) const {
  auto it = symbols_.find(name);
  if (it == symbols_.end()) return std::nullopt;
  return it->second;
}

const Segment* MemoryImage::segment_at(Addr addr, std::uint64_t len) const {
  for (const auto& s : segments_) {
    if (s.contains(addr, len)) return &s;
  }
  return nullptr;
}

std::span<const std::uint8_t> MemoryImage::read_mem(Addr addr, std::uint64_t len) const {
  if (len == 0) return {};
  const Segment* s = segment_at(addr, len);
  if (!s) throw Error(ErrorCode::OutOfRange, "unmapped read of " + std::to_string(len) + " bytes at " + hex(addr));
  return std::span<const std::uint8_t>(s->bytes).subspan(addr - s->base, len);
}

std::uint64_t MemoryImage::read_u64(Addr addr) const {
  auto b = read_mem(addr, 8);
  std::uint64_t v = 0;
  std::memcpy(&v, b.data(), 8);
  return v;
}

MemoryImage load_raw(std::span<const std::uint8_t> bytes, Addr base) {
  if (base % 2 != 0) throw Error(ErrorCode::OddBase, "raw image base " + hex(base) + " is odd");
  Segment s;
  s.base = base;
  s.bytes.assign(bytes.begin(), bytes.end());
  s.perms = kRead | kExec;
  return MemoryImage({std::move(s)});
}

MemoryImage load_elf(std::span<const std::uint8_t> bytes) {
  const Reader r(bytes);
  if (bytes.size() < 4 || bytes[0] != 0x7f || bytes[1] != 'E' || bytes[2] != 'L' || bytes[3] != 'F') {
    throw Error(ErrorCode::MalformedElf, "elf: bad magic");
  }
  if (bytes.size() < 64) throw Error(ErrorCode::MalformedElf, "elf: truncated header");
  if (bytes[4] != 2) throw Error(ErrorCode::WrongClass, "elf: not a 64-bit object");
  if (bytes[5] != 1) throw Error(ErrorCode::MalformedElf, "elf: not little-endian");
  if (r.get<std::uint16_t>(18) != kMachineRiscv) throw Error(ErrorCode::WrongMachine, "elf: machine is not RISC-V");

  const auto entry = r.get<std::uint64_t>(24);
  const auto phoff = r.get<std::uint64_t>(32);
  const auto shoff = r.get<std::uint64_t>(40);
  const auto phentsize = r.get<std::uint16_t>(54);
  const auto phnum = r.get<std::uint16_t>(56);
  const auto shentsize = r.get<std::uint16_t>(58);
  const auto shnum = r.get<std::uint16_t>(60);
  if (phnum > 0 && phentsize < 56) throw Error(ErrorCode::MalformedElf, "elf: bad program header size");
  if (shnum > 0 && shentsize < 64) throw Error(ErrorCode::MalformedElf, "elf: bad section header size");

  std::vector<Segment> segs;
  for (std::uint16_t i = 0; i < phnum; ++i) {
    const std::uint64_t ph = phoff + std::uint64_t{i} * phentsize;
    if (r.get<std::uint32_t>(ph) != kPtLoad) continue;
    const auto flags = r.get<std::uint32_t>(ph + 4);
    const auto offset = r.get<std::uint64_t>(ph + 8);
    const auto vaddr = r.get<std::uint64_t>(ph + 16);
    const auto filesz = r.get<std::uint64_t>(ph + 32);
    const auto memsz = r.get<std::uint64_t>(ph + 40);
    if (memsz < filesz || memsz > (1ull << 32)) throw Error(ErrorCode::MalformedElf, "elf: bad segment size");
    Segment s;
    s.base = vaddr;
    auto data = r.slice(offset, filesz);
    s.bytes.assign(data.begin(), data.end());
    s.bytes.resize(memsz, 0);
    s.perms = static_cast<std::uint8_t>(((flags & 4) ? kRead : 0) | ((flags & 2) ? kWrite : 0) |
                                        ((flags & 1) ? kExec : 0));
    segs.push_back(std::move(s));
  }

  std::map<std::string, Addr> symbols;
  if (shnum > 0) {
    std::vector<SectionHeader> shdrs;
    for (std::uint16_t i = 0; i < shnum; ++i) shdrs.push_back(read_shdr(r, shoff + std::uint64_t{i} * shentsize));
    auto pick = [&](std::uint32_t type) -> const SectionHeader* {
      for (const auto& s : shdrs) {
        if (s.type == type) return &s;
      }
      return nullptr;
    };
    const SectionHeader* symtab = pick(kShtSymtab);
    if (!symtab) symtab = pick(kShtDynsym);
    if (symtab && symtab->entsize >= 24) {
      if (symtab->link >= shdrs.size()) throw Error(ErrorCode::MalformedElf, "elf: bad symtab link");
      const auto& strsec = shdrs[symtab->link];
      auto strtab = r.slice(strsec.offset, strsec.size);
      const std::uint64_t count = symtab->size / symtab->entsize;
      for (std::uint64_t k = 1; k < count; ++k) {
        const std::uint64_t off = symtab->offset + k * symtab->entsize;
        const auto name_off = r.get<std::uint32_t>(off);
        const auto info = r.get<std::uint8_t>(off + 4);
        const auto shndx = r.get<std::uint16_t>(off + 6);
        const auto value = r.get<std::uint64_t>(off + 8);
        const unsigned type = info & 0xf;
        if (shndx == 0 || type == 3 || type == 4) continue;
        auto name = read_cstr(strtab, name_off);
        if (name.empty()) continue;
        symbols.emplace(std::move(name), value);  // first occurrence wins
      }
    }
  }

  std::optional<Addr> hint;
  if (entry != 0) hint = entry;
  return MemoryImage(std::move(segs), std::move(symbols), hint);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::OutOfRange, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

MemoryImage load_file(const std::string& path, Addr raw_base) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 4 && bytes[0] == 0x7f && bytes[1] == 'E' && bytes[2] == 'L' && bytes[3] == 'F') {
    return load_elf(bytes);
  }
  return load_raw(bytes, raw_base);
}

std::vector<std::uint8_t> write_elf(const MemoryImage& img) {
  const auto& segs = img.segments();
  const std::size_t nseg = segs.size();
  std::vector<std::uint8_t> out(64 + 56 * nseg, 0);

  // Segment payloads; file offset congruent to vaddr modulo the page size.
  std::vector<std::uint64_t> seg_off(nseg);
  for (std::size_t i = 0; i < nseg; ++i) {
    std::uint64_t off = out.size();
    const std::uint64_t want = segs[i].base % 0x1000;
    off = (off - off % 0x1000) + want;
    if (off < out.size()) off += 0x1000;
    seg_off[i] = off;
    out.resize(off, 0);
    out.insert(out.end(), segs[i].bytes.begin(), segs[i].bytes.end());
  }

  // Section names.
  std::string shstr(1, '\0');
  auto add_name = [&](const std::string& n) {
    const auto off = static_cast<std::uint32_t>(shstr.size());
    shstr += n;
    shstr.push_back('\0');
    return off;
  };
  std::vector<std::uint32_t> seg_name(nseg);
  for (std::size_t i = 0; i < nseg; ++i) {
    std::string n = segs[i].executable() ? ".text" : ((segs[i].perms & kWrite) ? ".data" : ".rodata");
    if (i > 0) n += "." + std::to_string(i);
    seg_name[i] = add_name(n);
  }
  const auto symtab_name = add_name(".symtab");
  const auto strtab_name = add_name(".strtab");
  const auto shstrtab_name = add_name(".shstrtab");

  // Symbols, ordered by address then name.
  std::vector<std::pair<std::string, Addr>> syms(img.symbols().begin(), img.symbols().end());
  std::stable_sort(syms.begin(), syms.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  std::string strtab(1, '\0');
  std::vector<std::uint8_t> symtab(24, 0);
  for (const auto& [name, addr] : syms) {
    std::uint16_t shndx = 0xfff1;  // SHN_ABS
    bool exec = false;
    for (std::size_t i = 0; i < nseg; ++i) {
      if (segs[i].contains(addr) || (addr == segs[i].end())) {
        shndx = static_cast<std::uint16_t>(i + 1);
        exec = segs[i].executable();
        break;
      }
    }
    const std::size_t off = symtab.size();
    put<std::uint32_t>(symtab, off, static_cast<std::uint32_t>(strtab.size()));
    put<std::uint8_t>(symtab, off + 4, static_cast<std::uint8_t>((1u << 4) | (exec ? 2u : 1u)));
    put<std::uint8_t>(symtab, off + 5, 0);
    put<std::uint16_t>(symtab, off + 6, shndx);
    put<std::uint64_t>(symtab, off + 8, addr);
    put<std::uint64_t>(symtab, off + 16, 0);
    strtab += name;
    strtab.push_back('\0');
  }

  auto append = [&](const void* data, std::size_t n) {
    while (out.size() % 8) out.push_back(0);
    const std::uint64_t off = out.size();
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
    return off;
  };
  const auto symtab_off = append(symtab.data(), symtab.size());
  const auto strtab_off = append(strtab.data(), strtab.size());
  const auto shstr_off = append(shstr.data(), shstr.size());
  while (out.size() % 8) out.push_back(0);
  const std::uint64_t shoff = out.size();
  const std::size_t shnum = nseg + 4;
  out.resize(shoff + 64 * shnum, 0);

  auto shdr = [&](std::size_t idx, std::uint32_t name, std::uint32_t type, std::uint64_t flags, std::uint64_t addr,
                  std::uint64_t off, std::uint64_t size, std::uint32_t link, std::uint32_t info, std::uint64_t align,
                  std::uint64_t entsize) {
    const std::size_t b = shoff + 64 * idx;
    put<std::uint32_t>(out, b + 0, name);
    put<std::uint32_t>(out, b + 4, type);
    put<std::uint64_t>(out, b + 8, flags);
    put<std::uint64_t>(out, b + 16, addr);
    put<std::uint64_t>(out, b + 24, off);
    put<std::uint64_t>(out, b + 32, size);
    put<std::uint32_t>(out, b + 40, link);
    put<std::uint32_t>(out, b + 44, info);
    put<std::uint64_t>(out, b + 48, align);
    put<std::uint64_t>(out, b + 56, entsize);
  };
  for (std::size_t i = 0; i < nseg; ++i) {
    std::uint64_t flags = 2;  // SHF_ALLOC
    if (segs[i].perms & kWrite) flags |= 1;
    if (segs[i].executable()) flags |= 4;
    shdr(i + 1, seg_name[i], kShtProgbits, flags, segs[i].base, seg_off[i], segs[i].bytes.size(), 0, 0, 2, 0);
  }
  const auto strtab_idx = static_cast<std::uint32_t>(nseg + 2);
  shdr(nseg + 1, symtab_name, kShtSymtab, 0, 0, symtab_off, symtab.size(), strtab_idx, 1, 8, 24);
  shdr(nseg + 2, strtab_name, kShtStrtab, 0, 0, strtab_off, strtab.size(), 0, 0, 1, 0);
  shdr(nseg + 3, shstrtab_name, kShtStrtab, 0, 0, shstr_off, shstr.size(), 0, 0, 1, 0);

  // ELF header.
  const std::uint8_t ident[16] = {0x7f, 'E', 'L', 'F', 2, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  std::memcpy(out.data(), ident, 16);
  put<std::uint16_t>(out, 16, 2);  // ET_EXEC
  put<std::uint16_t>(out, 18, kMachineRiscv);
  put<std::uint32_t>(out, 20, 1);
  put<std::uint64_t>(out, 24, img.entry_hint().value_or(0));
  put<std::uint64_t>(out, 32, 64);
  put<std::uint64_t>(out, 40, shoff);
  put<std::uint32_t>(out, 48, 0x5);  // EF_RISCV_RVC | float ABI double
  put<std::uint16_t>(out, 52, 64);
  put<std::uint16_t>(out, 54, 56);
  put<std::uint16_t>(out, 56, static_cast<std::uint16_t>(nseg));
  put<std::uint16_t>(out, 58, 64);
  put<std::uint16_t>(out, 60, static_cast<std::uint16_t>(shnum));
  put<std::uint16_t>(out, 62, static_cast<std::uint16_t>(nseg + 3));

  for (std::size_t i = 0; i < nseg; ++i) {
    const std::size_t b = 64 + 56 * i;
    std::uint32_t flags = 0;
    if (segs[i].perms & kRead) flags |= 4;
    if (segs[i].perms & kWrite) flags |= 2;
    if (segs[i].executable()) flags |= 1;
    put<std::uint32_t>(out, b + 0, kPtLoad);
    put<std::uint32_t>(out, b + 4, flags);
    put<std::uint64_t>(out, b + 8, seg_off[i]);
    put<std::uint64_t>(out, b + 16, segs[i].base);
    put<std::uint64_t>(out, b + 24, segs[i].base);
    put<std::uint64_t>(out, b + 32, segs[i].bytes.size());
    put<std::uint64_t>(out, b + 40, segs[i].bytes.size());
    put<std::uint64_t>(out, b + 48, 0x1000);
  }
  return out;
}

}  // namespace rvrop::image
