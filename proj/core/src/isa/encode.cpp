#include "rvrop/isa.hpp"

namespace rvrop::isa {

namespace {

[[noreturn]] void out_of_range(const Instruction& ins) {
  throw Error(ErrorCode::ImmediateOutOfRange,
              std::string(mnemonic_name(ins.op)) + ": immediate " + std::to_string(ins.imm) + " does not fit");
}

[[noreturn]] void bad_operand(const Instruction& ins, std::string_view why) {
  throw Error(ErrorCode::InvalidOperand, std::string(mnemonic_name(ins.op)) + ": " + std::string(why));
}

void check_signed(const Instruction& ins, unsigned width, unsigned align = 1) {
  const std::int64_t lo = -(std::int64_t{1} << (width - 1));
  const std::int64_t hi = (std::int64_t{1} << (width - 1)) - 1;
  if (ins.imm < lo || ins.imm > hi || ins.imm % align != 0) out_of_range(ins);
}

void check_unsigned(const Instruction& ins, unsigned width, unsigned align = 1) {
  if (ins.imm < 0 || ins.imm >= (std::int64_t{1} << width) || ins.imm % align != 0) out_of_range(ins);
}

std::uint32_t r(Reg x) { return index(x); }

std::uint32_t cr(const Instruction& ins, Reg x) {
  const unsigned i = index(x);
  if (i < 8 || i > 15) bad_operand(ins, "register must be one of s0, s1, a0-a5");
  return i - 8;
}

std::uint32_t field(std::uint64_t v, unsigned hi, unsigned lo, unsigned at) {
  return static_cast<std::uint32_t>(((v >> lo) & ((1ull << (hi - lo + 1)) - 1)) << at);
}

std::uint32_t rtype(std::uint32_t f7, std::uint32_t f3, std::uint32_t opc, const Instruction& i) {
  return (f7 << 25) | (r(i.rs2) << 20) | (r(i.rs1) << 15) | (f3 << 12) | (r(i.rd) << 7) | opc;
}

std::uint32_t itype(std::uint32_t f3, std::uint32_t opc, const Instruction& i) {
  check_signed(i, 12);
  return (static_cast<std::uint32_t>(i.imm & 0xfff) << 20) | (r(i.rs1) << 15) | (f3 << 12) | (r(i.rd) << 7) | opc;
}

std::uint32_t shift(std::uint32_t hi_bits, std::uint32_t f3, std::uint32_t opc, unsigned shamt_width,
                    const Instruction& i) {
  check_unsigned(i, shamt_width);
  return (hi_bits << 26) | (static_cast<std::uint32_t>(i.imm) << 20) | (r(i.rs1) << 15) | (f3 << 12) |
         (r(i.rd) << 7) | opc;
}

std::uint32_t stype(std::uint32_t f3, const Instruction& i) {
  check_signed(i, 12);
  const auto v = static_cast<std::uint64_t>(i.imm);
  return field(v, 11, 5, 25) | (r(i.rs2) << 20) | (r(i.rs1) << 15) | (f3 << 12) | field(v, 4, 0, 7) | 0x23;
}

std::uint32_t btype(std::uint32_t f3, const Instruction& i) {
  check_signed(i, 13, 2);
  const auto v = static_cast<std::uint64_t>(i.imm);
  return field(v, 12, 12, 31) | field(v, 10, 5, 25) | (r(i.rs2) << 20) | (r(i.rs1) << 15) | (f3 << 12) |
         field(v, 4, 1, 8) | field(v, 11, 11, 7) | 0x63;
}

std::uint32_t encode32(const Instruction& i) {
  using M = Mnemonic;
  switch (i.op) {
    case M::Lui:
    case M::Auipc: {
      if (i.imm % 4096 != 0 || i.imm < INT32_MIN || i.imm > INT32_MAX) out_of_range(i);
      return (static_cast<std::uint32_t>(i.imm) & 0xfffff000u) | (r(i.rd) << 7) | (i.op == M::Lui ? 0x37 : 0x17);
    }
    case M::Jal: {
      check_signed(i, 21, 2);
      const auto v = static_cast<std::uint64_t>(i.imm);
      return field(v, 20, 20, 31) | field(v, 10, 1, 21) | field(v, 11, 11, 20) | field(v, 19, 12, 12) |
             (r(i.rd) << 7) | 0x6f;
    }
    case M::Jalr: return itype(0, 0x67, i);
    case M::Beq: return btype(0, i);
    case M::Bne: return btype(1, i);
    case M::Blt: return btype(4, i);
    case M::Bge: return btype(5, i);
    case M::Bltu: return btype(6, i);
    case M::Bgeu: return btype(7, i);
    case M::Lb: return itype(0, 0x03, i);
    case M::Lh: return itype(1, 0x03, i);
    case M::Lw: return itype(2, 0x03, i);
    case M::Ld: return itype(3, 0x03, i);
    case M::Lbu: return itype(4, 0x03, i);
    case M::Lhu: return itype(5, 0x03, i);
    case M::Lwu: return itype(6, 0x03, i);
    case M::Sb: return stype(0, i);
    case M::Sh: return stype(1, i);
    case M::Sw: return stype(2, i);
    case M::Sd: return stype(3, i);
    case M::Addi: return itype(0, 0x13, i);
    case M::Slti: return itype(2, 0x13, i);
    case M::Sltiu: return itype(3, 0x13, i);
    case M::Xori: return itype(4, 0x13, i);
    case M::Ori: return itype(6, 0x13, i);
    case M::Andi: return itype(7, 0x13, i);
    case M::Slli: return shift(0, 1, 0x13, 6, i);
    case M::Srli: return shift(0, 5, 0x13, 6, i);
    case M::Srai: return shift(0x10, 5, 0x13, 6, i);
    case M::Add: return rtype(0, 0, 0x33, i);
    case M::Sub: return rtype(0x20, 0, 0x33, i);
    case M::Sll: return rtype(0, 1, 0x33, i);
    case M::Slt: return rtype(0, 2, 0x33, i);
    case M::Sltu: return rtype(0, 3, 0x33, i);
    case M::Xor: return rtype(0, 4, 0x33, i);
    case M::Srl: return rtype(0, 5, 0x33, i);
    case M::Sra: return rtype(0x20, 5, 0x33, i);
    case M::Or: return rtype(0, 6, 0x33, i);
    case M::And: return rtype(0, 7, 0x33, i);
    case M::Addiw: return itype(0, 0x1b, i);
    case M::Slliw: return shift(0, 1, 0x1b, 5, i);
    case M::Srliw: return shift(0, 5, 0x1b, 5, i);
    case M::Sraiw: return shift(0x10, 5, 0x1b, 5, i);
    case M::Addw: return rtype(0, 0, 0x3b, i);
    case M::Subw: return rtype(0x20, 0, 0x3b, i);
    case M::Sllw: return rtype(0, 1, 0x3b, i);
    case M::Srlw: return rtype(0, 5, 0x3b, i);
    case M::Sraw: return rtype(0x20, 5, 0x3b, i);
    case M::Fence:
      check_unsigned(i, 12);
      return (static_cast<std::uint32_t>(i.imm) << 20) | (r(i.rs1) << 15) | (r(i.rd) << 7) | 0x0f;
    case M::Ecall: return 0x00000073;
    case M::Ebreak: return 0x00100073;
    case M::Mul: return rtype(1, 0, 0x33, i);
    case M::Mulh: return rtype(1, 1, 0x33, i);
    case M::Mulhsu: return rtype(1, 2, 0x33, i);
    case M::Mulhu: return rtype(1, 3, 0x33, i);
    case M::Div: return rtype(1, 4, 0x33, i);
    case M::Divu: return rtype(1, 5, 0x33, i);
    case M::Rem: return rtype(1, 6, 0x33, i);
    case M::Remu: return rtype(1, 7, 0x33, i);
    case M::Mulw: return rtype(1, 0, 0x3b, i);
    case M::Divw: return rtype(1, 4, 0x3b, i);
    case M::Divuw: return rtype(1, 5, 0x3b, i);
    case M::Remw: return rtype(1, 6, 0x3b, i);
    case M::Remuw: return rtype(1, 7, 0x3b, i);
    default: break;
  }
  throw Error(ErrorCode::UnsupportedMnemonic, std::string("cannot encode ") + std::string(mnemonic_name(i.op)));
}

std::uint32_t encode16(const Instruction& i) {
  using M = Mnemonic;
  const auto v = static_cast<std::uint64_t>(i.imm);
  auto ci_imm6 = [&](std::uint32_t f3, Reg rd) {
    check_signed(i, 6);
    return (f3 << 13) | field(v, 5, 5, 12) | (r(rd) << 7) | field(v, 4, 0, 2) | 1u;
  };
  auto mem_d = [&](std::uint32_t f3, Reg data) {
    check_unsigned(i, 8, 8);
    return (f3 << 13) | field(v, 5, 3, 10) | (cr(i, i.rs1) << 7) | field(v, 7, 6, 5) | (cr(i, data) << 2);
  };
  auto mem_w = [&](std::uint32_t f3, Reg data) {
    check_unsigned(i, 7, 4);
    return (f3 << 13) | field(v, 5, 3, 10) | (cr(i, i.rs1) << 7) | field(v, 2, 2, 6) | field(v, 6, 6, 5) |
           (cr(i, data) << 2);
  };
  auto require_sp = [&]() {
    if (i.rs1 != Reg::sp) bad_operand(i, "base register must be sp");
  };
  auto arith = [&](std::uint32_t b12, std::uint32_t f2) {
    if (i.rd != i.rs1) bad_operand(i, "rd must equal rs1");
    return (0b100u << 13) | (b12 << 12) | (0b11u << 10) | (cr(i, i.rd) << 7) | (f2 << 5) | (cr(i, i.rs2) << 2) | 1u;
  };
  auto shift_imm = [&](std::uint32_t f2) {
    if (i.rd != i.rs1) bad_operand(i, "rd must equal rs1");
    check_unsigned(i, 6);
    return (0b100u << 13) | field(v, 5, 5, 12) | (f2 << 10) | (cr(i, i.rd) << 7) | field(v, 4, 0, 2) | 1u;
  };

  switch (i.op) {
    case M::CAddi4spn:
      require_sp();
      if (i.imm == 0) out_of_range(i);
      check_unsigned(i, 10, 4);
      return field(v, 5, 4, 11) | field(v, 9, 6, 7) | field(v, 2, 2, 6) | field(v, 3, 3, 5) | (cr(i, i.rd) << 2);
    case M::CFld: return mem_d(1, i.rd);
    case M::CLw: return mem_w(2, i.rd);
    case M::CLd: return mem_d(3, i.rd);
    case M::CFsd: return mem_d(5, i.rs2);
    case M::CSw: return mem_w(6, i.rs2);
    case M::CSd: return mem_d(7, i.rs2);
    case M::CNop: return 0x0001;
    case M::CAddi:
      if (i.rd != i.rs1) bad_operand(i, "rd must equal rs1");
      if (i.rd == Reg::zero && i.imm == 0) bad_operand(i, "use c.nop");
      return ci_imm6(0, i.rd);
    case M::CAddiw:
      if (i.rd != i.rs1) bad_operand(i, "rd must equal rs1");
      if (i.rd == Reg::zero) bad_operand(i, "rd must not be zero");
      return ci_imm6(1, i.rd);
    case M::CLi: return ci_imm6(2, i.rd);
    case M::CAddi16sp:
      if (i.rd != Reg::sp || i.rs1 != Reg::sp) bad_operand(i, "operand must be sp");
      if (i.imm == 0) out_of_range(i);
      check_signed(i, 10, 16);
      return (0b011u << 13) | field(v, 9, 9, 12) | (2u << 7) | field(v, 4, 4, 6) | field(v, 6, 6, 5) |
             field(v, 8, 7, 3) | field(v, 5, 5, 2) | 1u;
    case M::CLui:
      if (i.rd == Reg::sp) bad_operand(i, "rd must not be sp");
      if (i.imm == 0) out_of_range(i);
      check_signed(i, 18, 4096);
      return (0b011u << 13) | field(v, 17, 17, 12) | (r(i.rd) << 7) | field(v, 16, 12, 2) | 1u;
    case M::CSrli: return shift_imm(0);
    case M::CSrai: return shift_imm(1);
    case M::CAndi:
      if (i.rd != i.rs1) bad_operand(i, "rd must equal rs1");
      check_signed(i, 6);
      return (0b100u << 13) | field(v, 5, 5, 12) | (0b10u << 10) | (cr(i, i.rd) << 7) | field(v, 4, 0, 2) | 1u;
    case M::CSub: return arith(0, 0);
    case M::CXor: return arith(0, 1);
    case M::COr: return arith(0, 2);
    case M::CAnd: return arith(0, 3);
    case M::CSubw: return arith(1, 0);
    case M::CAddw: return arith(1, 1);
    case M::CJ:
      check_signed(i, 12, 2);
      return (0b101u << 13) | field(v, 11, 11, 12) | field(v, 4, 4, 11) | field(v, 9, 8, 9) | field(v, 10, 10, 8) |
             field(v, 6, 6, 7) | field(v, 7, 7, 6) | field(v, 3, 1, 3) | field(v, 5, 5, 2) | 1u;
    case M::CBeqz:
    case M::CBnez:
      check_signed(i, 9, 2);
      return ((i.op == M::CBeqz ? 0b110u : 0b111u) << 13) | field(v, 8, 8, 12) | field(v, 4, 3, 10) |
             (cr(i, i.rs1) << 7) | field(v, 7, 6, 5) | field(v, 2, 1, 3) | field(v, 5, 5, 2) | 1u;
    case M::CSlli:
      if (i.rd != i.rs1) bad_operand(i, "rd must equal rs1");
      check_unsigned(i, 6);
      return field(v, 5, 5, 12) | (r(i.rd) << 7) | field(v, 4, 0, 2) | 2u;
    case M::CFldsp:
    case M::CLdsp:
      require_sp();
      if (i.op == M::CLdsp && i.rd == Reg::zero) bad_operand(i, "rd must not be zero");
      check_unsigned(i, 9, 8);
      return ((i.op == M::CFldsp ? 1u : 3u) << 13) | field(v, 5, 5, 12) | (r(i.rd) << 7) | field(v, 4, 3, 5) |
             field(v, 8, 6, 2) | 2u;
    case M::CLwsp:
      require_sp();
      if (i.rd == Reg::zero) bad_operand(i, "rd must not be zero");
      check_unsigned(i, 8, 4);
      return (0b010u << 13) | field(v, 5, 5, 12) | (r(i.rd) << 7) | field(v, 4, 2, 4) | field(v, 7, 6, 2) | 2u;
    case M::CFsdsp:
    case M::CSdsp:
      require_sp();
      check_unsigned(i, 9, 8);
      return ((i.op == M::CFsdsp ? 5u : 7u) << 13) | field(v, 5, 3, 10) | field(v, 8, 6, 7) | (r(i.rs2) << 2) | 2u;
    case M::CSwsp:
      require_sp();
      check_unsigned(i, 8, 4);
      return (0b110u << 13) | field(v, 5, 2, 9) | field(v, 7, 6, 7) | (r(i.rs2) << 2) | 2u;
    case M::CJr:
      if (i.rs1 == Reg::zero) bad_operand(i, "rs1 must not be zero");
      return (0b100u << 13) | (r(i.rs1) << 7) | 2u;
    case M::CMv:
      if (i.rs2 == Reg::zero) bad_operand(i, "rs2 must not be zero");
      return (0b100u << 13) | (r(i.rd) << 7) | (r(i.rs2) << 2) | 2u;
    case M::CEbreak: return 0x9002;
    case M::CJalr:
      if (i.rs1 == Reg::zero) bad_operand(i, "rs1 must not be zero");
      return (0b100u << 13) | (1u << 12) | (r(i.rs1) << 7) | 2u;
    case M::CAdd:
      if (i.rd != i.rs1) bad_operand(i, "rd must equal rs1");
      if (i.rs2 == Reg::zero) bad_operand(i, "rs2 must not be zero");
      return (0b100u << 13) | (1u << 12) | (r(i.rd) << 7) | (r(i.rs2) << 2) | 2u;
    default: break;
  }
  throw Error(ErrorCode::UnsupportedMnemonic, std::string("cannot encode ") + std::string(mnemonic_name(i.op)));
}

}  // namespace

std::uint32_t encode_word(const Instruction& ins) { return is_compressed(ins.op) ? encode16(ins) : encode32(ins); }

std::vector<std::uint8_t> encode(const Instruction& ins) {
  const std::uint32_t w = encode_word(ins);
  std::vector<std::uint8_t> out;
  const unsigned n = is_compressed(ins.op) ? 2 : 4;
  for (unsigned k = 0; k < n; ++k) out.push_back(static_cast<std::uint8_t>(w >> (8 * k)));
  return out;
}

}  // namespace rvrop::isa
