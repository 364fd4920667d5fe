#include "rvrop/synthetic.hpp"

#include <charconv>
#include <sstream>

namespace rvrop::synth {

namespace {

using scan::RoleKind;

const std::vector<std::string> kNopTail = {"c.ldsp ra, 8(sp)", "c.addi sp, 0x10", "c.jr ra"};

std::vector<std::string> with_tail(std::vector<std::string> head) {
  head.insert(head.end(), kNopTail.begin(), kNopTail.end());
  return head;
}

struct Plant {
  std::string label;
  Addr offset;
  std::vector<std::string> source;
  std::optional<RoleKind> role;
  std::int64_t a, b;
};

// clang-format off
const std::vector<Plant>& plants() {
  static const std::vector<Plant> kPlants = {
    {"nop", 0x000, kNopTail, RoleKind::NOP, 0x8, 0x10},
    {"pop", 0x040, {"c.ldsp ra, 0x28(sp)", "c.ldsp s0, 0x20(sp)", "c.ldsp a0, 0(sp)", "c.ldsp a1, 8(sp)",
                    "c.ldsp s1, 0x18(sp)", "c.ldsp s2, 0x10(sp)", "c.addi16sp sp, 0x30", "c.jr ra"},
     RoleKind::POP, 0x28, 0x30},
    {"pop_a4a5", 0x080, {"c.ldsp ra, 0x18(sp)", "c.ldsp a4, 8(sp)", "c.ldsp a5, 0(sp)", "c.addi16sp sp, 0x20",
                         "c.jr ra"},
     RoleKind::POP, 0x18, 0x20},
    {"pop_s0", 0x0c0, {"c.ldsp ra, 8(sp)", "c.ldsp s0, 0(sp)", "c.addi sp, 0x10", "c.jr ra"}, RoleKind::POP, 0x8, 0x10},
    {"pop_a2a3", 0x100, {"c.ldsp ra, 0x18(sp)", "c.ldsp a2, 0(sp)", "c.ldsp a3, 8(sp)", "c.addi16sp sp, 0x20",
                         "c.jr ra"},
     RoleKind::POP, 0x18, 0x20},
    {"readmem", 0x140, {"c.ld a0, 8(a0)", "c.add a0, a5", "c.ldsp a4, 0x28(sp)", "c.ld a5, 0(s0)", "bne a4, a5, 0x1e",
                        "c.ldsp ra, 0x38(sp)", "c.ldsp s0, 0x30(sp)", "c.addi16sp sp, 0x40", "c.jr ra"},
     RoleKind::READMEM, 0x38, 0x40},
    {"writemem", 0x180, {"c.sd a0, 8(s0)", "c.ldsp ra, 8(sp)", "c.ldsp s0, 0(sp)", "c.addi sp, 0x10", "c.jr ra"},
     RoleKind::WRITEMEM, 0x8, 0x10},
    {"add1", 0x1c0, with_tail({"c.addi a0, 1"}), RoleKind::ADD1, 0x8, 0x10},
    {"sub1", 0x200, with_tail({"c.addi a0, -1"}), RoleKind::SUB1, 0x8, 0x10},
    {"call_a5", 0x240, with_tail({"c.jalr a5"}), RoleKind::CALL_JALR_A5, 0x8, 0x10},
    {"branch", 0x280, {"ld ra, 0(a0)", "ld sp, 0x68(a0)", "c.jr ra"}, RoleKind::BRANCH_UNCOND, 0, 0},
    {"cond_branch", 0x2c0, {"c.ld a5, 0(a0)", "c.ldsp a0, 0(sp)", "c.bnez a5, 4", "c.ldsp a0, 8(sp)",
                            "c.ldsp ra, 0x18(sp)", "c.addi16sp sp, 0x20", "c.jr ra"},
     RoleKind::COND_BRANCH, 0x18, 0x20},
    {"fp_opaque", 0x300, with_tail({"c.fldsp f8, 0(sp)"}), std::nullopt, 0x8, 0x10},
    // The upper half of this lui encodes c.addi4spn a0, sp, 8.
    {"lui_host", 0x340, with_tail({"lui t0, 0x280"}), std::nullopt, 0x8, 0x10},
  };
  return kPlants;
}
// clang-format on

constexpr Addr kMovSpOffset = 0x342;

const std::vector<std::pair<std::string, Addr>>& stub_layout() {
  static const std::vector<std::pair<std::string, Addr>> kStubs = {
      {"putchar", 0x400}, {"getchar", 0x410}, {"exit", 0x420}, {"ret_stub", 0x430}, {"chain_halt", 0x440},
  };
  return kStubs;
}
constexpr Addr kTextSize = 0x460;

void put(std::vector<std::uint8_t>& text, Addr off, const std::vector<std::uint8_t>& bytes) {
  if (off + bytes.size() > text.size()) throw Error(ErrorCode::AssemblyFailure, "planted code overflows text");
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (text[off + i] != 0) throw Error(ErrorCode::AssemblyFailure, "planted code overlaps at " + hex(off + i));
    text[off + i] = bytes[i];
  }
}

std::vector<std::uint8_t> assemble_all(const std::vector<std::string>& lines) {
  std::vector<std::uint8_t> out;
  for (const auto& l : lines) {
    try {
      const auto bytes = isa::encode(isa::assemble(l));
      out.insert(out.end(), bytes.begin(), bytes.end());
    } catch (const Error& e) {
      throw Error(ErrorCode::AssemblyFailure, "cannot assemble '" + l + "': " + e.what());
    }
  }
  return out;
}

std::vector<std::string> disassemble(const image::MemoryImage& img, Addr entry) {
  std::vector<std::string> out;
  const auto* seg = img.segment_at(entry, 2);
  Addr pc = entry;
  for (int n = 0; n < 32; ++n) {
    const auto ins = isa::decode(seg->bytes, pc - seg->base);
    out.push_back(isa::format(ins));
    pc += ins.width;
    if (isa::is_return(ins)) break;
  }
  return out;
}

std::int64_t parse_int(std::string_view tok) {
  bool neg = !tok.empty() && tok.front() == '-';
  if (neg) tok.remove_prefix(1);
  int base = 10;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    base = 16;
    tok.remove_prefix(2);
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
  if (tok.empty() || ec != std::errc{} || p != tok.data() + tok.size()) {
    throw Error(ErrorCode::ParseError, "bad manifest number '" + std::string(tok) + "'");
  }
  return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
}

}  // namespace

const PlantedGadget* ImageManifest::find(std::string_view label) const {
  for (const auto& p : planted) {
    if (p.label == label) return &p;
  }
  return nullptr;
}

std::optional<Addr> ImageManifest::stub(std::string_view name) const {
  for (const auto& [n, a] : stubs) {
    if (n == name) return a;
  }
  return std::nullopt;
}

std::string ImageManifest::to_text() const {
  std::ostringstream os;
  os << "# label entry a b role unintended\n";
  for (const auto& p : planted) {
    os << p.label << " " << hex(p.entry) << " " << hex(static_cast<std::uint64_t>(p.a)) << " "
       << hex(static_cast<std::uint64_t>(p.b)) << " " << (p.role ? scan::to_string(*p.role) : "-") << " "
       << (p.unintended ? 1 : 0) << "\n";
    for (const auto& l : p.listing) os << "#   " << l << "\n";
  }
  for (const auto& [a, v] : constants) os << "CONST " << hex(a) << " " << hex(v) << "\n";
  for (const auto& [n, a] : stubs) os << "STUB " << n << " " << hex(a) << "\n";
  return os.str();
}

ImageManifest ImageManifest::parse(std::string_view text) {
  ImageManifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#   ", 0) == 0 && !m.planted.empty()) {
      m.planted.back().listing.push_back(line.substr(4));
      continue;
    }
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::vector<std::string> t;
    for (std::string tok; ls >> tok;) t.push_back(tok);
    if (t.empty()) continue;
    if (t[0] == "CONST" && t.size() == 3) {
      m.constants.emplace_back(static_cast<Addr>(parse_int(t[1])), static_cast<Word>(parse_int(t[2])));
    } else if (t[0] == "STUB" && t.size() == 3) {
      m.stubs.emplace_back(t[1], static_cast<Addr>(parse_int(t[2])));
    } else if (t.size() == 6) {
      PlantedGadget p;
      p.label = t[0];
      p.entry = static_cast<Addr>(parse_int(t[1]));
      p.a = parse_int(t[2]);
      p.b = parse_int(t[3]);
      if (t[4] != "-") {
        p.role = scan::parse_role(t[4]);
        if (!p.role) throw Error(ErrorCode::ParseError, "unknown manifest role '" + t[4] + "'");
      }
      p.unintended = t[5] == "1";
      m.planted.push_back(std::move(p));
    } else {
      throw Error(ErrorCode::ParseError, "bad manifest line '" + line + "'");
    }
  }
  return m;
}

SynthImage build_image(const SynthConfig& cfg) {
  if (cfg.text_base % 2 != 0) throw Error(ErrorCode::AssemblyFailure, "text base must be even");
  std::vector<std::uint8_t> text(kTextSize, 0);
  std::map<std::string, Addr> symbols;

  for (const auto& p : plants()) {
    put(text, p.offset, assemble_all(p.source));
    symbols["g_" + p.label] = cfg.text_base + p.offset;
  }
  for (const auto& [name, off] : stub_layout()) {
    put(text, off, assemble_all({name == "chain_halt" ? "c.ebreak" : "c.jr ra"}));
    symbols[name] = cfg.text_base + off;
  }
  symbols["g_mov_sp"] = cfg.text_base + kMovSpOffset;

  std::vector<std::uint8_t> rodata(16, 0);
  for (int i = 0; i < 8; ++i) rodata[i] = static_cast<std::uint8_t>(cfg.constant >> (8 * i));
  symbols["const_c"] = cfg.rodata_base;

  std::vector<image::Segment> segs;
  segs.push_back({cfg.text_base, std::move(text), image::kRead | image::kExec});
  segs.push_back({cfg.rodata_base, std::move(rodata), image::kRead});

  SynthImage out;
  out.image = image::MemoryImage(std::move(segs), std::move(symbols), cfg.text_base);

  for (const auto& p : plants()) {
    out.manifest.planted.push_back(
        {p.label, cfg.text_base + p.offset, p.role, p.a, p.b, disassemble(out.image, cfg.text_base + p.offset), false});
  }
  const Addr mov = cfg.text_base + kMovSpOffset;
  const auto mov_listing = disassemble(out.image, mov);
  if (mov_listing.empty() || mov_listing.front() != "c.addi4spn a0, sp, 8") {
    throw Error(ErrorCode::AssemblyFailure, "unintended mov_sp entry does not decode as expected");
  }
  out.manifest.planted.push_back({"mov_sp", mov, RoleKind::MOV_SP, 0x8, 0x10, mov_listing, true});
  out.manifest.constants.emplace_back(cfg.rodata_base, cfg.constant);
  for (const auto& [name, off] : stub_layout()) out.manifest.stubs.emplace_back(name, cfg.text_base + off);
  return out;
}

}  // namespace rvrop::synth
