#include "rvrop/symbolic.hpp"

#include <sstream>

namespace rvrop::sym {

namespace {

std::int64_t s64(std::uint64_t v) { return static_cast<std::int64_t>(v); }
std::uint64_t sext32(std::uint64_t v) {
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(v)));
}

__extension__ using u128 = unsigned __int128;
__extension__ using i128 = __int128;

std::uint64_t mulhu(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>((static_cast<u128>(a) * b) >> 64);
}
std::uint64_t mulh(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>((static_cast<i128>(s64(a)) * s64(b)) >> 64);
}
std::uint64_t mulhsu(std::uint64_t a, std::uint64_t b) {
  return static_cast<std::uint64_t>((static_cast<i128>(s64(a)) * static_cast<i128>(b)) >> 64);
}

std::uint64_t apply(Op op, std::uint64_t a, std::uint64_t b) {
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Mulh: return mulh(a, b);
    case Op::Mulhsu: return mulhsu(a, b);
    case Op::Mulhu: return mulhu(a, b);
    case Op::Div:
      if (b == 0) return ~0ull;
      if (s64(a) == INT64_MIN && s64(b) == -1) return a;
      return static_cast<std::uint64_t>(s64(a) / s64(b));
    case Op::Divu: return b == 0 ? ~0ull : a / b;
    case Op::Rem:
      if (b == 0) return a;
      if (s64(a) == INT64_MIN && s64(b) == -1) return 0;
      return static_cast<std::uint64_t>(s64(a) % s64(b));
    case Op::Remu: return b == 0 ? a : a % b;
    case Op::And: return a & b;
    case Op::Or: return a | b;
    case Op::Xor: return a ^ b;
    case Op::Sll: return a << (b & 63);
    case Op::Srl: return a >> (b & 63);
    case Op::Sra: return static_cast<std::uint64_t>(s64(a) >> (b & 63));
    case Op::Slt: return s64(a) < s64(b) ? 1 : 0;
    case Op::Sltu: return a < b ? 1 : 0;
    case Op::Addw: return sext32(a + b);
    case Op::Subw: return sext32(a - b);
    case Op::Mulw: return sext32(a * b);
    case Op::Sllw: return sext32(static_cast<std::uint32_t>(a) << (b & 31));
    case Op::Srlw: return sext32(static_cast<std::uint32_t>(a) >> (b & 31));
    case Op::Sraw: return sext32(static_cast<std::uint64_t>(static_cast<std::int32_t>(a) >> (b & 31)));
    case Op::Divw: {
      const auto x = static_cast<std::int32_t>(a), y = static_cast<std::int32_t>(b);
      if (y == 0) return ~0ull;
      if (x == INT32_MIN && y == -1) return sext32(static_cast<std::uint32_t>(x));
      return sext32(static_cast<std::uint32_t>(x / y));
    }
    case Op::Divuw: {
      const auto x = static_cast<std::uint32_t>(a), y = static_cast<std::uint32_t>(b);
      return y == 0 ? ~0ull : sext32(x / y);
    }
    case Op::Remw: {
      const auto x = static_cast<std::int32_t>(a), y = static_cast<std::int32_t>(b);
      if (y == 0) return sext32(static_cast<std::uint32_t>(x));
      if (x == INT32_MIN && y == -1) return 0;
      return sext32(static_cast<std::uint32_t>(x % y));
    }
    case Op::Remuw: {
      const auto x = static_cast<std::uint32_t>(a), y = static_cast<std::uint32_t>(b);
      return y == 0 ? sext32(x) : sext32(x % y);
    }
    default: break;
  }
  return 0;
}

std::string_view op_symbol(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::And: return "&";
    case Op::Or: return "|";
    case Op::Xor: return "^";
    case Op::Sll: return "<<";
    case Op::Srl: return ">>u";
    case Op::Sra: return ">>s";
    case Op::Mulh: return "mulh";
    case Op::Mulhsu: return "mulhsu";
    case Op::Mulhu: return "mulhu";
    case Op::Div: return "div";
    case Op::Divu: return "divu";
    case Op::Rem: return "rem";
    case Op::Remu: return "remu";
    case Op::Slt: return "<s";
    case Op::Sltu: return "<u";
    case Op::Addw: return "+w";
    case Op::Subw: return "-w";
    case Op::Mulw: return "*w";
    case Op::Sllw: return "<<w";
    case Op::Srlw: return ">>uw";
    case Op::Sraw: return ">>sw";
    case Op::Divw: return "divw";
    case Op::Divuw: return "divuw";
    case Op::Remw: return "remw";
    case Op::Remuw: return "remuw";
    default: return "?";
  }
}

Expr make_binary(Op op, Expr a, Expr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

}  // namespace

Expr constant(std::uint64_t v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

Expr reg(Reg r) {
  if (r == Reg::zero) return constant(0);
  auto n = std::make_shared<Node>();
  n->op = Op::Reg;
  n->reg = r;
  return n;
}

Expr load(Expr addr, std::uint8_t width, bool is_signed) {
  auto n = std::make_shared<Node>();
  n->op = Op::Load;
  n->lhs = std::move(addr);
  n->width = width;
  n->is_signed = width == 8 ? false : is_signed;
  return n;
}

Expr unknown() {
  auto n = std::make_shared<Node>();
  n->op = Op::Unknown;
  return n;
}

std::optional<std::uint64_t> const_value(const Expr& e) {
  if (e && e->op == Op::Const) return e->value;
  return std::nullopt;
}

Expr binary(Op op, Expr a, Expr b) {
  const auto ca = const_value(a), cb = const_value(b);
  if (ca && cb) return constant(apply(op, *ca, *cb));
  if (op == Op::Sub && cb) return binary(Op::Add, std::move(a), constant(0 - *cb));
  if (op == Op::Add) {
    if (ca) std::swap(a, b);
    const auto c = const_value(b);
    if (c && *c == 0) return a;
    if (c && a->op == Op::Add) {
      if (auto inner = const_value(a->rhs)) return binary(Op::Add, a->lhs, constant(*inner + *c));
    }
  }
  if ((op == Op::Or || op == Op::Xor) && cb && *cb == 0) return a;
  return make_binary(op, std::move(a), std::move(b));
}

std::optional<std::pair<Reg, std::int64_t>> as_reg_offset(const Expr& e) {
  if (!e) return std::nullopt;
  if (e->op == Op::Reg) return std::make_pair(e->reg, std::int64_t{0});
  if (e->op == Op::Add && e->lhs->op == Op::Reg) {
    if (auto c = const_value(e->rhs)) return std::make_pair(e->lhs->reg, static_cast<std::int64_t>(*c));
  }
  return std::nullopt;
}

std::optional<std::int64_t> as_stack_slot(const Expr& e) {
  if (!e || e->op != Op::Load || e->width != 8) return std::nullopt;
  auto ro = as_reg_offset(e->lhs);
  if (!ro || ro->first != Reg::sp) return std::nullopt;
  return ro->second;
}

bool equal(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (!a || !b || a->op != b->op) return false;
  switch (a->op) {
    case Op::Const: return a->value == b->value;
    case Op::Reg: return a->reg == b->reg;
    case Op::Unknown: return false;
    case Op::Load: return a->width == b->width && a->is_signed == b->is_signed && equal(a->lhs, b->lhs);
    default: return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
  }
}

bool contains_unknown(const Expr& e) {
  if (!e) return false;
  if (e->op == Op::Unknown) return true;
  return contains_unknown(e->lhs) || contains_unknown(e->rhs);
}

std::uint64_t eval(const Expr& e, const Env& env) {
  switch (e->op) {
    case Op::Const: return e->value;
    case Op::Reg: return env.regs[isa::index(e->reg)];
    case Op::Unknown: throw Error(ErrorCode::UnsupportedMnemonic, "cannot evaluate an unmodeled value");
    case Op::Load: {
      const std::uint64_t v = env.read(eval(e->lhs, env), e->width);
      if (!e->is_signed || e->width == 8) return v;
      const unsigned shift = 64 - 8 * e->width;
      return static_cast<std::uint64_t>(static_cast<std::int64_t>(v << shift) >> shift);
    }
    default: return apply(e->op, eval(e->lhs, env), eval(e->rhs, env));
  }
}

std::string to_string(const Expr& e) {
  if (!e) return "<null>";
  switch (e->op) {
    case Op::Const: {
      const auto v = static_cast<std::int64_t>(e->value);
      if (v < 0 && v > -0x100000) return "-" + hex(0 - e->value);
      return hex(e->value);
    }
    case Op::Reg: return std::string(isa::abi_name(e->reg)) + "0";
    case Op::Unknown: return "?";
    case Op::Load: {
      std::string w = e->width == 8 ? "" : (std::to_string(8 * e->width) + (e->is_signed ? "s" : "u"));
      return "mem" + w + "[" + to_string(e->lhs) + "]";
    }
    case Op::Add:
      if (auto c = const_value(e->rhs); c && static_cast<std::int64_t>(*c) < 0) {
        return to_string(e->lhs) + " - " + hex(0 - *c);
      }
      return to_string(e->lhs) + " + " + to_string(e->rhs);
    default: {
      std::ostringstream os;
      os << "(" << to_string(e->lhs) << " " << op_symbol(e->op) << " " << to_string(e->rhs) << ")";
      return os.str();
    }
  }
}

Cond Cond::negated() const {
  Cond c = *this;
  switch (cmp) {
    case Cmp::Eq: c.cmp = Cmp::Ne; break;
    case Cmp::Ne: c.cmp = Cmp::Eq; break;
    case Cmp::Lt: c.cmp = Cmp::Ge; break;
    case Cmp::Ge: c.cmp = Cmp::Lt; break;
    case Cmp::Ltu: c.cmp = Cmp::Geu; break;
    case Cmp::Geu: c.cmp = Cmp::Ltu; break;
  }
  return c;
}

bool Cond::holds(const Env& env) const {
  const std::uint64_t a = eval(lhs, env), b = eval(rhs, env);
  switch (cmp) {
    case Cmp::Eq: return a == b;
    case Cmp::Ne: return a != b;
    case Cmp::Lt: return s64(a) < s64(b);
    case Cmp::Ge: return s64(a) >= s64(b);
    case Cmp::Ltu: return a < b;
    case Cmp::Geu: return a >= b;
  }
  return false;
}

std::string Cond::to_string() const {
  static constexpr std::string_view kNames[] = {"==", "!=", "<s", ">=s", "<u", ">=u"};
  return sym::to_string(lhs) + " " + std::string(kNames[static_cast<int>(cmp)]) + " " + sym::to_string(rhs);
}

bool equal(const Cond& a, const Cond& b) { return a.cmp == b.cmp && equal(a.lhs, b.lhs) && equal(a.rhs, b.rhs); }

}  // namespace rvrop::sym
