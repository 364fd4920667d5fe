#include <charconv>
#include <sstream>

#include "rvrop/scanner.hpp"

namespace rvrop::scan {

namespace {

std::string signed_hex(std::int64_t v) {
  if (v < 0) return "-" + hex(0 - static_cast<std::uint64_t>(v));
  return hex(static_cast<std::uint64_t>(v));
}

[[noreturn]] void fail(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::CatalogParse, "catalog line " + std::to_string(line) + ": " + why);
}

std::int64_t parse_num(std::size_t line, std::string_view tok) {
  bool neg = false;
  if (!tok.empty() && tok.front() == '-') {
    neg = true;
    tok.remove_prefix(1);
  }
  int base = 10;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    base = 16;
    tok.remove_prefix(2);
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
  if (tok.empty() || ec != std::errc{} || p != tok.data() + tok.size()) fail(line, "bad number '" + std::string(tok) + "'");
  return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
}

Reg parse_reg_tok(std::size_t line, std::string_view tok) {
  auto r = isa::parse_reg(tok);
  if (!r) fail(line, "bad register '" + std::string(tok) + "'");
  return *r;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    const auto p = s.find(sep);
    if (p != 0) out.push_back(s.substr(0, p));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

std::string reg_set(const std::set<Reg>& regs) {
  std::string out;
  for (Reg r : regs) {
    if (!out.empty()) out += ",";
    out += isa::abi_name(r);
  }
  return out;
}

std::string name(Reg r) { return std::string(isa::abi_name(r)); }

}  // namespace

std::vector<const CatalogEntry*> GadgetCatalog::all(RoleKind k) const {
  std::vector<const CatalogEntry*> out;
  for (const auto& e : entries) {
    if (e.kind == k) out.push_back(&e);
  }
  return out;
}

const CatalogEntry* GadgetCatalog::first(RoleKind k) const {
  for (const auto& e : entries) {
    if (e.kind == k) return &e;
  }
  return nullptr;
}

const CatalogEntry* GadgetCatalog::pop_for(Reg r) const {
  const CatalogEntry* best = nullptr;
  for (const auto* e : all(RoleKind::POP)) {
    if (r == Reg::ra || !e->binding.pops.count(r)) continue;
    if (!best || e->binding.pops.size() < best->binding.pops.size() ||
        (e->binding.pops.size() == best->binding.pops.size() && e->b < best->b)) {
      best = e;
    }
  }
  return best;
}

std::optional<std::string> GadgetCatalog::missing_role() const {
  if (!first(RoleKind::NOP)) return "NOP";
  for (Reg r : {Reg::a0, Reg::a4, Reg::a5, Reg::s0}) {
    if (!pop_for(r)) return "POP(" + name(r) + ")";
  }
  for (RoleKind k : {RoleKind::READMEM, RoleKind::WRITEMEM, RoleKind::ADD1, RoleKind::SUB1, RoleKind::CALL_JALR_A5,
                     RoleKind::BRANCH_UNCOND, RoleKind::COND_BRANCH}) {
    if (!first(k)) return std::string(to_string(k));
  }
  return std::nullopt;
}

GadgetCatalog build_catalog(const image::MemoryImage& img, const std::vector<Gadget>& gadgets) {
  GadgetCatalog cat;
  for (const auto& g : gadgets) {
    for (auto& role : classify(g, img)) {
      CatalogEntry e;
      e.kind = role.kind;
      e.entry = g.entry;
      e.a = g.kind == GadgetKind::Pivot ? 0 : g.ra_offset_a;
      e.b = g.kind == GadgetKind::Pivot ? 0 : g.sp_delta_b;
      e.binding = std::move(role.binding);
      cat.entries.push_back(std::move(e));
    }
  }
  for (const auto& seg : img.segments()) {
    if (seg.perms == image::kRead && seg.bytes.size() >= 8) {
      const Addr a = (seg.base + 7) & ~Addr{7};
      if (seg.contains(a, 8)) cat.constants.emplace_back(a, img.read_u64(a));
    }
  }
  for (const char* fn : {"putchar", "getchar", "exit"}) {
    if (auto a = img.symbol(fn)) cat.functions[fn] = *a;
  }
  return cat;
}

std::string write_catalog(const GadgetCatalog& cat) {
  std::ostringstream os;
  os << "# role entry a b key=value...\n";
  for (const auto& e : cat.entries) {
    const auto& b = e.binding;
    os << to_string(e.kind) << " " << hex(e.entry) << " " << signed_hex(e.a) << " " << signed_hex(e.b);
    if (!b.pops.empty()) {
      os << " pops=";
      bool first = true;
      for (const auto& [r, k] : b.pops) {
        os << (first ? "" : ",") << name(r) << ":" << signed_hex(k);
        first = false;
      }
    }
    if (!b.clobbers.empty()) os << " clobbers=" << reg_set(b.clobbers);
    switch (e.kind) {
      case RoleKind::READMEM:
        os << " dst=" << name(b.dst) << " addr=" << name(b.addr) << " disp=" << signed_hex(b.disp);
        if (!b.zero_regs.empty()) os << " zero=" << reg_set({b.zero_regs.begin(), b.zero_regs.end()});
        if (b.guard_base) {
          os << " guard_base=" << name(*b.guard_base) << " guard_disp=" << signed_hex(b.guard_disp)
             << " guard_pop=" << signed_hex(b.guard_pop);
        }
        break;
      case RoleKind::WRITEMEM:
        os << " addr=" << name(b.addr) << " disp=" << signed_hex(b.disp) << " value=" << name(b.value);
        break;
      case RoleKind::ADD1:
      case RoleKind::SUB1: os << " reg=" << name(b.reg); break;
      case RoleKind::MOV_SP: os << " dst=" << name(b.dst) << " disp=" << signed_hex(b.disp); break;
      case RoleKind::CALL_JALR_A5: os << " target=" << name(b.target); break;
      case RoleKind::BRANCH_UNCOND:
        os << " base=" << name(b.base) << " ra_off=" << signed_hex(b.ra_off) << " sp_off=" << signed_hex(b.sp_off);
        break;
      case RoleKind::COND_BRANCH:
        os << " base=" << name(b.base) << " disp=" << signed_hex(b.disp) << " select=" << name(b.select)
           << " zero_slot=" << signed_hex(b.zero_slot) << " nonzero_slot=" << signed_hex(b.nonzero_slot);
        break;
      default: break;
    }
    os << "\n";
  }
  for (const auto& [a, v] : cat.constants) os << "CONST " << hex(a) << " " << hex(v) << "\n";
  for (const auto& [n, a] : cat.functions) os << "FUNC " << n << " " << hex(a) << "\n";
  return os.str();
}

GadgetCatalog parse_catalog(std::string_view text) {
  GadgetCatalog cat;
  std::size_t lineno = 0;
  for (std::string_view line : split(text, '\n')) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    std::vector<std::string_view> toks;
    for (auto t : split(line, ' ')) {
      for (auto u : split(t, '\t')) {
        if (!u.empty() && u.back() == '\r') u.remove_suffix(1);
        if (!u.empty()) toks.push_back(u);
      }
    }
    if (toks.empty()) continue;
    if (toks[0] == "CONST") {
      if (toks.size() != 3) fail(lineno, "CONST needs address and value");
      cat.constants.emplace_back(static_cast<Addr>(parse_num(lineno, toks[1])),
                                 static_cast<Word>(parse_num(lineno, toks[2])));
      continue;
    }
    if (toks[0] == "FUNC") {
      if (toks.size() != 3) fail(lineno, "FUNC needs name and address");
      cat.functions[std::string(toks[1])] = static_cast<Addr>(parse_num(lineno, toks[2]));
      continue;
    }
    auto kind = parse_role(toks[0]);
    if (!kind) fail(lineno, "unknown role '" + std::string(toks[0]) + "'");
    if (toks.size() < 4) fail(lineno, "expected entry, a and b");
    CatalogEntry e;
    e.kind = *kind;
    e.entry = static_cast<Addr>(parse_num(lineno, toks[1]));
    e.a = parse_num(lineno, toks[2]);
    e.b = parse_num(lineno, toks[3]);
    auto& b = e.binding;
    for (std::size_t i = 4; i < toks.size(); ++i) {
      const auto eq = toks[i].find('=');
      if (eq == std::string_view::npos) fail(lineno, "expected key=value");
      const auto key = toks[i].substr(0, eq);
      const auto val = toks[i].substr(eq + 1);
      if (key == "pops") {
        for (auto item : split(val, ',')) {
          const auto c = item.find(':');
          if (c == std::string_view::npos) fail(lineno, "bad pop '" + std::string(item) + "'");
          b.pops[parse_reg_tok(lineno, item.substr(0, c))] = parse_num(lineno, item.substr(c + 1));
        }
      } else if (key == "clobbers") {
        for (auto item : split(val, ',')) b.clobbers.insert(parse_reg_tok(lineno, item));
      } else if (key == "zero") {
        for (auto item : split(val, ',')) b.zero_regs.push_back(parse_reg_tok(lineno, item));
      } else if (key == "dst") {
        b.dst = parse_reg_tok(lineno, val);
      } else if (key == "addr") {
        b.addr = parse_reg_tok(lineno, val);
      } else if (key == "value") {
        b.value = parse_reg_tok(lineno, val);
      } else if (key == "reg") {
        b.reg = parse_reg_tok(lineno, val);
      } else if (key == "target") {
        b.target = parse_reg_tok(lineno, val);
      } else if (key == "base") {
        b.base = parse_reg_tok(lineno, val);
      } else if (key == "select") {
        b.select = parse_reg_tok(lineno, val);
      } else if (key == "guard_base") {
        b.guard_base = parse_reg_tok(lineno, val);
      } else if (key == "disp") {
        b.disp = parse_num(lineno, val);
      } else if (key == "guard_disp") {
        b.guard_disp = parse_num(lineno, val);
      } else if (key == "guard_pop") {
        b.guard_pop = parse_num(lineno, val);
      } else if (key == "ra_off") {
        b.ra_off = parse_num(lineno, val);
      } else if (key == "sp_off") {
        b.sp_off = parse_num(lineno, val);
      } else if (key == "zero_slot") {
        b.zero_slot = parse_num(lineno, val);
      } else if (key == "nonzero_slot") {
        b.nonzero_slot = parse_num(lineno, val);
      } else {
        fail(lineno, "unknown key '" + std::string(key) + "'");
      }
    }
    cat.entries.push_back(std::move(e));
  }
  return cat;
}

}  // namespace rvrop::scan
