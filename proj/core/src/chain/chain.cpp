#include "rvrop/chain.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <set>
#include <sstream>

namespace rvrop::chain {

namespace {

constexpr char kMagic[8] = {'R', 'V', 'R', 'O', 'P', '1', '\0', '\0'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 8 + 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos > in.size() || in.size() - pos < sizeof(T)) throw Error(ErrorCode::MalformedChain, "chain file truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += sizeof(T);
  return static_cast<T>(v);
}

std::string signed_hex(std::int64_t v) {
  if (v < 0) return "-" + hex(0 - static_cast<std::uint64_t>(v));
  return hex(static_cast<std::uint64_t>(v));
}

std::string frame_name(const ChainFrame& f, std::size_t i) {
  return f.label.empty() ? "frame" + std::to_string(i) : f.label;
}

std::string symbolic_value(const Slot& s) {
  switch (s.kind) {
    case SlotKind::Constant: return hex(s.value);
    case SlotKind::LabelRef: return s.offset ? s.label + "+" + signed_hex(s.offset) : s.label;
    case SlotKind::EntryOf: return "entry(" + s.label + ")";
    case SlotKind::NextEntry: return "entry(next)";
    case SlotKind::Hole: return "HOLE";
  }
  return "?";
}

}  // namespace

Slot Slot::constant(Word v, std::string comment) {
  Slot s;
  s.kind = SlotKind::Constant;
  s.value = v;
  s.comment = std::move(comment);
  return s;
}

Slot Slot::label_ref(std::string label, std::int64_t offset, std::string comment) {
  Slot s;
  s.kind = SlotKind::LabelRef;
  s.label = std::move(label);
  s.offset = offset;
  s.comment = std::move(comment);
  return s;
}

Slot Slot::entry_of(std::string label, std::string comment) {
  Slot s;
  s.kind = SlotKind::EntryOf;
  s.label = std::move(label);
  s.comment = std::move(comment);
  return s;
}

Slot Slot::next_entry() {
  Slot s;
  s.kind = SlotKind::NextEntry;
  return s;
}

Slot Slot::hole(std::string comment) {
  Slot s;
  s.kind = SlotKind::Hole;
  s.value = kHoleSentinel;
  s.comment = std::move(comment);
  return s;
}

std::uint64_t ChainProgram::frame_bytes() const {
  std::uint64_t n = 0;
  for (const auto& f : frames) n += f.size_bytes();
  return n;
}

std::optional<std::size_t> ChainProgram::frame_index(const std::string& label) const {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].label == label) return i;
  }
  return std::nullopt;
}

ChainProgram resolve(const ChainProgram& prog) {
  if (prog.base_sp % 16 != 0) throw Error(ErrorCode::MisalignedBase, "base_sp " + hex(prog.base_sp) + " is not 16-aligned");
  ChainProgram out = prog;
  out.labels.clear();
  out.frame_bases.clear();

  Addr at = prog.base_sp;
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    const auto& f = out.frames[i];
    if (f.gadget && static_cast<std::int64_t>(f.size_bytes()) != f.gadget->b) {
      throw Error(ErrorCode::MalformedChain, "frame " + frame_name(f, i) + " has " + std::to_string(f.slots.size()) +
                                                 " slots but b = " + signed_hex(f.gadget->b));
    }
    if (f.size_bytes() % 16 != 0) {
      throw Error(ErrorCode::MalformedChain, "frame " + frame_name(f, i) + " size is not a multiple of 16");
    }
    if (!f.label.empty() && !out.labels.emplace(f.label, at).second) {
      throw Error(ErrorCode::MalformedChain, "duplicate label " + f.label);
    }
    out.frame_bases.push_back(at);
    at += f.size_bytes();
  }
  const Addr chain_end = at;

  Addr next_free = (chain_end + 15) & ~Addr{15};
  std::vector<std::pair<Addr, Addr>> placed;
  if (chain_end > prog.base_sp) placed.emplace_back(prog.base_sp, chain_end);
  for (auto& r : out.scratch) {
    if (!r.addr) {
      r.addr = next_free;
      next_free = (next_free + r.size + 15) & ~Addr{15};
    }
    const Addr lo = *r.addr, hi = *r.addr + r.size;
    for (const auto& [plo, phi] : placed) {
      if (lo < phi && plo < hi) throw Error(ErrorCode::RegionOverlap, "scratch region " + r.label + " overlaps");
    }
    placed.emplace_back(lo, hi);
    if (!out.labels.emplace(r.label, lo).second) throw Error(ErrorCode::MalformedChain, "duplicate label " + r.label);
  }

  auto lookup = [&](const std::string& label) {
    auto it = out.labels.find(label);
    if (it == out.labels.end()) throw Error(ErrorCode::UnresolvedLabel, "unresolved label '" + label + "'");
    return it->second;
  };
  auto entry_of = [&](std::size_t i, const std::string& what) {
    if (i >= out.frames.size() || !out.frames[i].gadget) {
      throw Error(ErrorCode::MalformedChain, what + " does not name a gadget frame");
    }
    return out.frames[i].gadget->entry;
  };

  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    for (auto& s : out.frames[i].slots) {
      switch (s.kind) {
        case SlotKind::Constant: break;
        case SlotKind::LabelRef: s.value = lookup(s.label) + static_cast<Addr>(s.offset); break;
        case SlotKind::EntryOf: {
          lookup(s.label);
          s.value = entry_of(*out.frame_index(s.label), "label " + s.label);
          break;
        }
        case SlotKind::NextEntry: s.value = entry_of(i + 1, "successor of " + frame_name(out.frames[i], i)); break;
        case SlotKind::Hole: s.value = kHoleSentinel; break;
      }
    }
  }
  for (const auto& fx : out.fixups) {
    const Addr t = lookup(fx.target) + static_cast<Addr>(fx.offset);
    if (t < prog.base_sp || t + fx.width > chain_end) {
      throw Error(ErrorCode::MalformedChain, "self-mod target " + fx.target + "+" + signed_hex(fx.offset) +
                                                 " lies outside the chain region");
    }
    if (fx.source >= out.frames.size()) throw Error(ErrorCode::MalformedChain, "self-mod source out of range");
  }
  out.resolved = true;
  return out;
}

ChainImage flatten(const ChainProgram& p) {
  if (!p.resolved) throw Error(ErrorCode::UnresolvedProgram, "program has not been resolved");
  ChainImage img;
  img.base_sp = p.base_sp;
  if (!p.frames.empty() && p.frames.front().gadget) img.entry_gadget = p.frames.front().gadget->entry;
  for (const auto& f : p.frames) {
    for (const auto& s : f.slots) img.words.push_back(s.value);
  }
  for (const auto& r : p.scratch) img.scratch.emplace_back(*r.addr, r.size);
  return img;
}

std::vector<std::uint8_t> serialize(const ChainImage& img) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  out.reserve(kHeaderSize + img.words.size() * 8 + 4 + img.scratch.size() * 16);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint64_t>(out, img.base_sp);
  put_le<std::uint64_t>(out, img.words.size());
  put_le<std::uint64_t>(out, img.entry_gadget);
  for (Word w : img.words) put_le<std::uint64_t>(out, w);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.scratch.size()));
  for (const auto& [a, n] : img.scratch) {
    put_le<std::uint64_t>(out, a);
    put_le<std::uint64_t>(out, n);
  }
  return out;
}

std::vector<std::uint8_t> serialize(const ChainProgram& prog) { return serialize(flatten(prog)); }

ChainImage deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw Error(ErrorCode::MalformedChain, "not a chain file (bad magic)");
  }
  std::size_t pos = 8;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kFormatVersion) throw Error(ErrorCode::MalformedChain, "unsupported chain version " + std::to_string(version));
  ChainImage img;
  img.base_sp = get_le<std::uint64_t>(bytes, pos);
  const auto count = get_le<std::uint64_t>(bytes, pos);
  img.entry_gadget = get_le<std::uint64_t>(bytes, pos);
  if (count > (bytes.size() - pos) / 8) throw Error(ErrorCode::MalformedChain, "word count exceeds file size");
  img.words.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) img.words.push_back(get_le<std::uint64_t>(bytes, pos));
  const auto nscratch = get_le<std::uint32_t>(bytes, pos);
  for (std::uint32_t i = 0; i < nscratch; ++i) {
    const auto a = get_le<std::uint64_t>(bytes, pos);
    const auto n = get_le<std::uint64_t>(bytes, pos);
    img.scratch.emplace_back(a, n);
  }
  if (pos != bytes.size()) throw Error(ErrorCode::MalformedChain, "trailing bytes after chain");
  return img;
}

std::string listing(const ChainProgram& p) {
  std::set<std::pair<std::string, std::int64_t>> targets;
  for (const auto& fx : p.fixups) targets.emplace(fx.target, fx.offset);

  std::ostringstream os;
  if (p.resolved) os << "# base_sp " << hex(p.base_sp) << "\n";
  for (std::size_t i = 0; i < p.frames.size(); ++i) {
    const auto& f = p.frames[i];
    const std::string name = frame_name(f, i);
    os << "# " << (f.gadget ? "frame " : "data ") << i;
    if (!f.label.empty()) os << " " << f.label;
    if (f.gadget) {
      os << " " << (f.gadget->role.empty() ? "gadget" : f.gadget->role) << " @" << hex(f.gadget->entry)
         << " a=" << signed_hex(f.gadget->a) << " b=" << signed_hex(f.gadget->b);
    }
    if (!f.comment.empty()) os << " ; " << f.comment;
    os << "\n";
    for (std::size_t k = 0; k < f.slots.size(); ++k) {
      const auto& s = f.slots[k];
      const auto off = static_cast<std::int64_t>(8 * k);
      if (p.resolved) {
        os << hex(p.frame_bases[i] + static_cast<Addr>(off)) << ": " << (s.kind == SlotKind::Hole ? "HOLE" : hex(s.value));
      } else {
        os << name << "+" << signed_hex(off) << ": " << symbolic_value(s);
      }
      std::vector<std::string> notes;
      if (f.gadget && off == f.gadget->a) notes.emplace_back("ra");
      if (!s.comment.empty()) notes.push_back(s.comment);
      if (p.resolved && s.kind != SlotKind::Constant && s.kind != SlotKind::Hole) notes.push_back(symbolic_value(s));
      if (!f.label.empty() && targets.count({f.label, off})) notes.emplace_back("self-mod target");
      if (!notes.empty()) {
        os << " ;";
        for (std::size_t n = 0; n < notes.size(); ++n) os << (n ? ", " : " ") << notes[n];
      }
      os << "\n";
    }
  }
  for (const auto& r : p.scratch) {
    os << "# scratch " << r.label << " size=" << hex(r.size);
    if (r.addr) os << " @" << hex(*r.addr);
    os << "\n";
  }
  return os.str();
}

std::vector<std::string> check_self_mod_order(const ChainProgram& p) {
  const std::size_t n = p.frames.size();
  std::vector<std::vector<std::size_t>> succ(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = p.frames[i];
    if (!f.gadget) continue;
    if (!f.pivot && i + 1 < n) succ[i].push_back(i + 1);
    for (const auto& t : f.branch_targets) {
      if (auto j = p.frame_index(t)) succ[i].push_back(*j);
    }
  }

  std::map<std::size_t, std::set<std::size_t>> writers;
  for (const auto& fx : p.fixups) {
    if (auto t = p.frame_index(fx.target)) writers[*t].insert(fx.source);
  }

  std::vector<std::string> bad;
  for (const auto& [target, ws] : writers) {
    if (n == 0 || ws.count(0)) continue;
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> q{0};
    seen[0] = true;
    bool reached = false;
    while (!q.empty() && !reached) {
      const std::size_t u = q.front();
      q.pop_front();
      if (u == target) {
        reached = true;
        break;
      }
      for (std::size_t v : succ[u]) {
        if (seen[v] || (ws.count(v) && v != target)) continue;
        seen[v] = true;
        q.push_back(v);
      }
    }
    if (reached) bad.push_back(frame_name(p.frames[target], target));
  }
  return bad;
}

std::vector<std::string> check_layout(const ChainProgram& p) {
  std::vector<std::string> out;
  if (!p.resolved) {
    out.emplace_back("program is not resolved");
    return out;
  }
  for (std::size_t i = 0; i < p.frames.size(); ++i) {
    const auto& f = p.frames[i];
    const std::string name = frame_name(f, i);
    if (p.frame_bases[i] % 16 != 0) out.push_back(name + ": base not 16-aligned");
    if (i + 1 < p.frames.size() && p.frame_bases[i + 1] != p.frame_bases[i] + f.size_bytes()) {
      out.push_back(name + ": successor is not contiguous");
    }
    if (f.gadget && !f.pivot) {
      const auto& g = *f.gadget;
      if (g.a <= 0 || g.a % 8 != 0 || g.b <= g.a || g.b % 16 != 0) out.push_back(name + ": invalid (a, b)");
      if (static_cast<std::int64_t>(f.size_bytes()) != g.b) out.push_back(name + ": slot count does not match b");
      if (i + 1 < p.frames.size()) {
        const auto& next = p.frames[i + 1];
        const auto k = static_cast<std::size_t>(g.a / 8);
        if (!next.gadget) {
          out.push_back(name + ": followed by a data frame");
        } else if (k < f.slots.size() && f.slots[k].kind != SlotKind::Hole && f.slots[k].value != next.gadget->entry) {
          out.push_back(name + ": ra slot does not enter the next frame");
        }
      }
    }
  }
  return out;
}

}  // namespace rvrop::chain
