#include <array>

#include "rvrop/scanner.hpp"

namespace rvrop::scan {

namespace {

using sym::Expr;
using sym::Op;

constexpr std::array<std::string_view, kNumRoles> kRoleNames = {
    "NOP", "POP", "READMEM", "WRITEMEM", "ADD1", "SUB1", "MOV_SP", "CALL_JALR_A5", "BRANCH_UNCOND", "COND_BRANCH",
};

// Registers changed by the main path, ra and sp excluded.
std::set<Reg> changed(const EffectSummary& s) {
  std::set<Reg> out;
  for (const auto& [r, k] : s.pops) out.insert(r);
  for (const auto& [r, e] : s.reg_writes) out.insert(r);
  out.erase(Reg::ra);
  out.erase(Reg::sp);
  return out;
}

bool no_side_effects(const EffectSummary& s) {
  return s.guards.empty() && s.mem_reads.empty() && s.mem_writes.empty() && s.calls.empty() && s.alternatives.empty();
}

// True when every non-sp register write is a pop, except `except`.
bool only_pops_besides(const EffectSummary& s, std::optional<Reg> except) {
  for (const auto& [r, e] : s.reg_writes) {
    if (r == Reg::sp || (except && r == *except)) continue;
    return false;
  }
  return true;
}

RoleBinding base_binding(const EffectSummary& s, std::optional<Reg> output) {
  RoleBinding b;
  b.pops = s.pops;
  b.clobbers = changed(s);
  if (output) b.clobbers.erase(*output);
  return b;
}

void flatten_add(const Expr& e, std::vector<Expr>& terms, std::uint64_t& c) {
  if (e->op == Op::Add) {
    flatten_add(e->lhs, terms, c);
    flatten_add(e->rhs, terms, c);
  } else if (auto v = sym::const_value(e)) {
    c += *v;
  } else {
    terms.push_back(e);
  }
}

// Matches a 64-bit load through a non-sp register.
std::optional<std::pair<Reg, std::int64_t>> plain_load(const Expr& e) {
  if (!e || e->op != Op::Load || e->width != 8) return std::nullopt;
  auto ro = sym::as_reg_offset(e->lhs);
  if (!ro || ro->first == Reg::sp) return std::nullopt;
  return ro;
}

bool same_read(const MemRead& r, const Expr& load) { return r.width == load->width && sym::equal(r.addr, load->lhs); }

std::optional<GadgetRole> match_readmem(const EffectSummary& s, Reg dst, const Expr& e) {
  std::vector<Expr> terms;
  std::uint64_t c = 0;
  flatten_add(e, terms, c);
  if (c != 0) return std::nullopt;
  Expr loaded;
  std::vector<Reg> zero_regs;
  for (const auto& t : terms) {
    if (plain_load(t)) {
      if (loaded) return std::nullopt;
      loaded = t;
    } else if (t->op == Op::Reg) {
      zero_regs.push_back(t->reg);
    } else {
      return std::nullopt;
    }
  }
  if (!loaded) return std::nullopt;
  const auto [addr, disp] = *plain_load(loaded);
  for (Reg z : zero_regs) {
    if (z == addr) return std::nullopt;
  }

  GadgetRole role{RoleKind::READMEM, base_binding(s, dst)};
  auto& b = role.binding;
  b.dst = dst;
  b.addr = addr;
  b.disp = disp;
  b.zero_regs = zero_regs;

  if (s.guards.size() > 1) return std::nullopt;
  std::optional<Expr> guard_load;
  if (!s.guards.empty()) {
    const auto& g = s.guards.front();
    if (g.cmp != sym::Cmp::Eq) return std::nullopt;
    Expr pop = g.lhs, mem = g.rhs;
    if (!sym::as_stack_slot(pop)) std::swap(pop, mem);
    auto k = sym::as_stack_slot(pop);
    auto gl = plain_load(mem);
    if (!k || !gl || sym::equal(mem, loaded)) return std::nullopt;
    b.guard_base = gl->first;
    b.guard_disp = gl->second;
    b.guard_pop = *k;
    guard_load = mem;
  }
  for (const auto& r : s.mem_reads) {
    if (!same_read(r, loaded) && !(guard_load && same_read(r, *guard_load))) return std::nullopt;
  }
  return role;
}

std::optional<GadgetRole> match_cond(const EffectSummary& s, const Gadget& g) {
  if (s.alternatives.size() != 1 || s.guards.size() != 1 || !s.mem_writes.empty() || !s.calls.empty()) {
    return std::nullopt;
  }
  const PathEffect& main = s.main;
  const PathEffect& alt = s.alternatives.front();
  if (alt.conditions.size() != 1 || !alt.writes.empty() || !alt.calls.empty() || alt.sp_nonimmediate) {
    return std::nullopt;
  }
  const sym::Cond& c = s.guards.front();
  if (c.cmp != sym::Cmp::Eq && c.cmp != sym::Cmp::Ne) return std::nullopt;
  if (!sym::equal(alt.conditions.front(), c.negated())) return std::nullopt;
  Expr tested = c.lhs;
  if (sym::const_value(tested)) tested = c.rhs;
  const Expr& other = sym::equal(tested, c.lhs) ? c.rhs : c.lhs;
  if (sym::const_value(other) != std::uint64_t{0}) return std::nullopt;
  auto t = plain_load(tested);
  if (!t) return std::nullopt;

  // Both arms must keep the same frame shape.
  if (sym::as_stack_slot(alt.reg(Reg::ra)) != g.ra_offset_a) return std::nullopt;
  auto alt_sp = sym::as_reg_offset(alt.reg(Reg::sp));
  if (!alt_sp || alt_sp->first != Reg::sp || alt_sp->second != g.sp_delta_b) return std::nullopt;
  for (const auto* p : {&main, &alt}) {
    for (const auto& r : p->reads) {
      if (!same_read(r, tested)) return std::nullopt;
    }
  }

  const bool main_is_zero = c.cmp == sym::Cmp::Eq;
  for (unsigned i = 1; i < isa::kNumRegs; ++i) {
    const Reg r = isa::reg_from_index(i);
    if (r == Reg::ra || r == Reg::sp) continue;
    auto k_main = sym::as_stack_slot(main.regs[i]);
    auto k_alt = sym::as_stack_slot(alt.regs[i]);
    if (!k_main || !k_alt || *k_main == *k_alt) continue;
    GadgetRole role{RoleKind::COND_BRANCH, base_binding(s, r)};
    auto& b = role.binding;
    for (unsigned j = 1; j < isa::kNumRegs; ++j) {
      const Reg q = isa::reg_from_index(j);
      if (q != Reg::ra && q != Reg::sp && q != r && !sym::equal(alt.regs[j], sym::reg(q))) b.clobbers.insert(q);
    }
    b.select = r;
    b.base = t->first;
    b.disp = t->second;
    b.zero_slot = main_is_zero ? *k_main : *k_alt;
    b.nonzero_slot = main_is_zero ? *k_alt : *k_main;
    return role;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(RoleKind k) { return kRoleNames[static_cast<std::size_t>(k)]; }

std::optional<RoleKind> parse_role(std::string_view s) {
  for (std::size_t i = 0; i < kRoleNames.size(); ++i) {
    if (kRoleNames[i] == s) return static_cast<RoleKind>(i);
  }
  return std::nullopt;
}

std::vector<GadgetRole> classify(const Gadget& g, const image::MemoryImage&) {
  std::vector<GadgetRole> roles;
  const EffectSummary& s = g.summary;
  if (s.opaque) return roles;

  if (g.kind == GadgetKind::Pivot) {
    if (s.guards.empty() && s.mem_writes.empty() && s.calls.empty() && s.alternatives.empty()) {
      GadgetRole role{RoleKind::BRANCH_UNCOND, base_binding(s, std::nullopt)};
      role.binding.base = g.pivot_base;
      role.binding.ra_off = g.pivot_ra_off;
      role.binding.sp_off = g.pivot_sp_off;
      roles.push_back(role);
    }
    return roles;
  }

  const auto ch = changed(s);
  if (no_side_effects(s)) {
    if (ch.empty()) roles.push_back({RoleKind::NOP, base_binding(s, std::nullopt)});
    if (!ch.empty() && only_pops_besides(s, std::nullopt)) roles.push_back({RoleKind::POP, base_binding(s, std::nullopt)});
    for (const auto& [r, e] : s.reg_writes) {
      if (r == Reg::sp || r == Reg::ra || !only_pops_besides(s, r)) continue;
      auto ro = sym::as_reg_offset(e);
      if (!ro) continue;
      if (ro->first == r && (ro->second == 1 || ro->second == -1)) {
        GadgetRole role{ro->second == 1 ? RoleKind::ADD1 : RoleKind::SUB1, base_binding(s, r)};
        role.binding.reg = r;
        roles.push_back(role);
      } else if (ro->first == Reg::sp) {
        GadgetRole role{RoleKind::MOV_SP, base_binding(s, r)};
        role.binding.dst = r;
        role.binding.disp = ro->second;
        roles.push_back(role);
      }
    }
    return roles;
  }

  if (s.alternatives.empty() && s.guards.empty() && s.mem_reads.empty() && s.calls.empty() &&
      s.mem_writes.size() == 1 && only_pops_besides(s, std::nullopt)) {
    const MemWrite& w = s.mem_writes.front();
    auto ro = sym::as_reg_offset(w.addr);
    if (w.width == 8 && ro && ro->first != Reg::sp && w.value->op == Op::Reg) {
      GadgetRole role{RoleKind::WRITEMEM, base_binding(s, std::nullopt)};
      role.binding.addr = ro->first;
      role.binding.disp = ro->second;
      role.binding.value = w.value->reg;
      roles.push_back(role);
    }
  }

  if (s.calls.size() == 1 && s.alternatives.empty() && s.guards.empty() && s.mem_reads.empty() &&
      s.mem_writes.empty() && only_pops_besides(s, std::nullopt)) {
    auto ro = sym::as_reg_offset(s.calls.front());
    if (ro && ro->first == Reg::a5 && ro->second == 0) {
      GadgetRole role{RoleKind::CALL_JALR_A5, base_binding(s, std::nullopt)};
      role.binding.target = Reg::a5;
      roles.push_back(role);
    }
  }

  if (s.alternatives.empty() && s.mem_writes.empty() && s.calls.empty()) {
    for (const auto& [r, e] : s.reg_writes) {
      if (r == Reg::sp || r == Reg::ra) continue;
      if (auto role = match_readmem(s, r, e)) roles.push_back(*role);
    }
  }

  if (auto role = match_cond(s, g)) roles.push_back(*role);
  return roles;
}

}  // namespace rvrop::scan
