#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rvrop/isa.hpp"

namespace rvrop::sym {

using isa::Reg;

enum class Op : std::uint8_t {
  Const,
  Reg,      // initial value of a register
  Load,     // memory contents before the gadget runs
  Unknown,  // result of an unmodeled instruction
  Add, Sub, Mul, Mulh, Mulhsu, Mulhu, Div, Divu, Rem, Remu,
  And, Or, Xor, Sll, Srl, Sra, Slt, Sltu,
  Addw, Subw, Mulw, Sllw, Srlw, Sraw, Divw, Divuw, Remw, Remuw,
};

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Const;
  std::uint64_t value = 0;  // Const
  Reg reg = Reg::zero;      // Reg
  std::uint8_t width = 8;   // Load
  bool is_signed = false;   // Load
  Expr lhs, rhs;            // Load uses lhs as address
};

Expr constant(std::uint64_t v);
Expr reg(Reg r);
Expr load(Expr addr, std::uint8_t width, bool is_signed);
Expr unknown();
/// Builds `lhs op rhs`, folding constants and normalizing `x + c` chains.
Expr binary(Op op, Expr lhs, Expr rhs);
inline Expr add(Expr a, Expr b) { return binary(Op::Add, std::move(a), std::move(b)); }
inline Expr add(Expr a, std::int64_t c) { return add(std::move(a), constant(static_cast<std::uint64_t>(c))); }

std::optional<std::uint64_t> const_value(const Expr& e);
/// Matches `r` or `r + c`.
std::optional<std::pair<Reg, std::int64_t>> as_reg_offset(const Expr& e);
/// Matches a 64-bit load from `sp0 + k` (a stack pop); returns k.
std::optional<std::int64_t> as_stack_slot(const Expr& e);
bool equal(const Expr& a, const Expr& b);
bool contains_unknown(const Expr& e);

/// Concrete initial state an expression is evaluated against.
struct Env {
  std::array<std::uint64_t, isa::kNumRegs> regs{};
  std::function<std::uint64_t(std::uint64_t addr, unsigned width)> read;
};

std::uint64_t eval(const Expr& e, const Env& env);
std::string to_string(const Expr& e);

enum class Cmp : std::uint8_t { Eq, Ne, Lt, Ge, Ltu, Geu };

struct Cond {
  Cmp cmp = Cmp::Eq;
  Expr lhs, rhs;

  Cond negated() const;
  bool holds(const Env& env) const;
  std::string to_string() const;
};

bool equal(const Cond& a, const Cond& b);

}  // namespace rvrop::sym
