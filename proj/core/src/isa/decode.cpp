#include "rvrop/isa.hpp"

namespace rvrop::isa {

namespace {

constexpr std::uint32_t bits(std::uint32_t v, unsigned hi, unsigned lo) {
  return (v >> lo) & ((1u << (hi - lo + 1)) - 1u);
}

constexpr std::int64_t sext(std::uint64_t v, unsigned width) {
  const std::uint64_t m = 1ull << (width - 1);
  v &= (width == 64) ? ~0ull : ((1ull << width) - 1);
  return static_cast<std::int64_t>((v ^ m) - m);
}

Instruction make(Mnemonic op, std::uint8_t width, std::uint32_t raw) {
  Instruction i;
  i.op = op;
  i.width = width;
  i.raw = raw;
  return i;
}

Reg creg(std::uint32_t three_bits) { return reg_from_index(8 + three_bits); }

}  // namespace

std::uint8_t width_of_halfword(std::uint16_t first_half) { return (first_half & 3u) == 3u ? 4 : 2; }

Instruction decode16(std::uint16_t h) {
  using M = Mnemonic;
  const std::uint32_t x = h;
  const std::uint32_t f3 = bits(x, 15, 13);
  Instruction illegal = make(M::Illegal, 2, x);
  switch (x & 3u) {
    case 0: {
      Instruction i;
      const Reg rdp = creg(bits(x, 4, 2));
      const Reg rs1p = creg(bits(x, 9, 7));
      const std::uint32_t uimm_d = (bits(x, 12, 10) << 3) | (bits(x, 6, 5) << 6);
      const std::uint32_t uimm_w = (bits(x, 12, 10) << 3) | (bits(x, 6, 6) << 2) | (bits(x, 5, 5) << 6);
      switch (f3) {
        case 0: {
          const std::uint32_t nz = (bits(x, 12, 11) << 4) | (bits(x, 10, 7) << 6) | (bits(x, 6, 6) << 2) |
                                   (bits(x, 5, 5) << 3);
          if (nz == 0) return illegal;
          i = make(M::CAddi4spn, 2, x);
          i.rd = rdp;
          i.rs1 = Reg::sp;
          i.imm = nz;
          return i;
        }
        case 1: i = make(M::CFld, 2, x); i.rd = rdp; i.rs1 = rs1p; i.imm = uimm_d; return i;
        case 2: i = make(M::CLw, 2, x); i.rd = rdp; i.rs1 = rs1p; i.imm = uimm_w; return i;
        case 3: i = make(M::CLd, 2, x); i.rd = rdp; i.rs1 = rs1p; i.imm = uimm_d; return i;
        case 5: i = make(M::CFsd, 2, x); i.rs2 = rdp; i.rs1 = rs1p; i.imm = uimm_d; return i;
        case 6: i = make(M::CSw, 2, x); i.rs2 = rdp; i.rs1 = rs1p; i.imm = uimm_w; return i;
        case 7: i = make(M::CSd, 2, x); i.rs2 = rdp; i.rs1 = rs1p; i.imm = uimm_d; return i;
        default: return illegal;
      }
    }
    case 1: {
      const Reg rd = reg_from_index(bits(x, 11, 7));
      const std::int64_t imm6 = sext((bits(x, 12, 12) << 5) | bits(x, 6, 2), 6);
      Instruction i;
      switch (f3) {
        case 0:
          if (x == 0x0001) return make(M::CNop, 2, x);
          i = make(M::CAddi, 2, x);
          i.rd = i.rs1 = rd;
          i.imm = imm6;
          return i;
        case 1:
          if (rd == Reg::zero) return illegal;
          i = make(M::CAddiw, 2, x);
          i.rd = i.rs1 = rd;
          i.imm = imm6;
          return i;
        case 2:
          i = make(M::CLi, 2, x);
          i.rd = rd;
          i.imm = imm6;
          return i;
        case 3:
          if (rd == Reg::sp) {
            const std::uint32_t v = (bits(x, 12, 12) << 9) | (bits(x, 6, 6) << 4) | (bits(x, 5, 5) << 6) |
                                    (bits(x, 4, 3) << 7) | (bits(x, 2, 2) << 5);
            if (v == 0) return illegal;
            i = make(M::CAddi16sp, 2, x);
            i.rd = i.rs1 = Reg::sp;
            i.imm = sext(v, 10);
            return i;
          } else {
            const std::uint32_t v = (bits(x, 12, 12) << 17) | (bits(x, 6, 2) << 12);
            if (v == 0) return illegal;
            i = make(M::CLui, 2, x);
            i.rd = rd;
            i.imm = sext(v, 18);
            return i;
          }
        case 4: {
          const Reg rdp = creg(bits(x, 9, 7));
          const Reg rs2p = creg(bits(x, 4, 2));
          const std::uint32_t shamt = (bits(x, 12, 12) << 5) | bits(x, 6, 2);
          switch (bits(x, 11, 10)) {
            case 0: i = make(M::CSrli, 2, x); i.rd = i.rs1 = rdp; i.imm = shamt; return i;
            case 1: i = make(M::CSrai, 2, x); i.rd = i.rs1 = rdp; i.imm = shamt; return i;
            case 2: i = make(M::CAndi, 2, x); i.rd = i.rs1 = rdp; i.imm = imm6; return i;
            default: {
              static constexpr M kOps[2][4] = {{M::CSub, M::CXor, M::COr, M::CAnd},
                                               {M::CSubw, M::CAddw, M::Illegal, M::Illegal}};
              const M op = kOps[bits(x, 12, 12)][bits(x, 6, 5)];
              if (op == M::Illegal) return illegal;
              i = make(op, 2, x);
              i.rd = i.rs1 = rdp;
              i.rs2 = rs2p;
              return i;
            }
          }
        }
        case 5: {
          const std::uint32_t v = (bits(x, 12, 12) << 11) | (bits(x, 11, 11) << 4) | (bits(x, 10, 9) << 8) |
                                  (bits(x, 8, 8) << 10) | (bits(x, 7, 7) << 6) | (bits(x, 6, 6) << 7) |
                                  (bits(x, 5, 3) << 1) | (bits(x, 2, 2) << 5);
          i = make(M::CJ, 2, x);
          i.imm = sext(v, 12);
          return i;
        }
        default: {
          const std::uint32_t v = (bits(x, 12, 12) << 8) | (bits(x, 11, 10) << 3) | (bits(x, 6, 5) << 6) |
                                  (bits(x, 4, 3) << 1) | (bits(x, 2, 2) << 5);
          i = make(f3 == 6 ? M::CBeqz : M::CBnez, 2, x);
          i.rs1 = creg(bits(x, 9, 7));
          i.imm = sext(v, 9);
          return i;
        }
      }
    }
    case 2: {
      const Reg rd = reg_from_index(bits(x, 11, 7));
      const Reg rs2 = reg_from_index(bits(x, 6, 2));
      const std::uint32_t uimm_d = (bits(x, 12, 12) << 5) | (bits(x, 6, 5) << 3) | (bits(x, 4, 2) << 6);
      const std::uint32_t uimm_w = (bits(x, 12, 12) << 5) | (bits(x, 6, 4) << 2) | (bits(x, 3, 2) << 6);
      const std::uint32_t suimm_d = (bits(x, 12, 10) << 3) | (bits(x, 9, 7) << 6);
      const std::uint32_t suimm_w = (bits(x, 12, 9) << 2) | (bits(x, 8, 7) << 6);
      Instruction i;
      switch (f3) {
        case 0:
          i = make(M::CSlli, 2, x);
          i.rd = i.rs1 = rd;
          i.imm = (bits(x, 12, 12) << 5) | bits(x, 6, 2);
          return i;
        case 1: i = make(M::CFldsp, 2, x); i.rd = rd; i.rs1 = Reg::sp; i.imm = uimm_d; return i;
        case 2:
          if (rd == Reg::zero) return illegal;
          i = make(M::CLwsp, 2, x); i.rd = rd; i.rs1 = Reg::sp; i.imm = uimm_w; return i;
        case 3:
          if (rd == Reg::zero) return illegal;
          i = make(M::CLdsp, 2, x); i.rd = rd; i.rs1 = Reg::sp; i.imm = uimm_d; return i;
        case 4:
          if (bits(x, 12, 12) == 0) {
            if (rs2 == Reg::zero) {
              if (rd == Reg::zero) return illegal;
              i = make(M::CJr, 2, x);
              i.rs1 = rd;
              return i;
            }
            i = make(M::CMv, 2, x);
            i.rd = rd;
            i.rs2 = rs2;
            return i;
          }
          if (rs2 == Reg::zero) {
            if (rd == Reg::zero) return make(M::CEbreak, 2, x);
            i = make(M::CJalr, 2, x);
            i.rd = Reg::ra;
            i.rs1 = rd;
            return i;
          }
          i = make(M::CAdd, 2, x);
          i.rd = i.rs1 = rd;
          i.rs2 = rs2;
          return i;
        case 5: i = make(M::CFsdsp, 2, x); i.rs1 = Reg::sp; i.rs2 = rs2; i.imm = suimm_d; return i;
        case 6: i = make(M::CSwsp, 2, x); i.rs1 = Reg::sp; i.rs2 = rs2; i.imm = suimm_w; return i;
        default: i = make(M::CSdsp, 2, x); i.rs1 = Reg::sp; i.rs2 = rs2; i.imm = suimm_d; return i;
      }
    }
    default: return illegal;
  }
}

Instruction decode32(std::uint32_t w) {
  using M = Mnemonic;
  Instruction illegal = make(M::Illegal, 4, w);
  if ((w & 3u) != 3u || (w & 0x1cu) == 0x1cu) return illegal;

  const std::uint32_t opcode = w & 0x7f;
  const Reg rd = reg_from_index(bits(w, 11, 7));
  const Reg rs1 = reg_from_index(bits(w, 19, 15));
  const Reg rs2 = reg_from_index(bits(w, 24, 20));
  const std::uint32_t f3 = bits(w, 14, 12);
  const std::uint32_t f7 = bits(w, 31, 25);
  const std::int64_t imm_i = static_cast<std::int32_t>(w) >> 20;
  const std::int64_t imm_s = sext((bits(w, 31, 25) << 5) | bits(w, 11, 7), 12);
  const std::int64_t imm_b =
      sext((bits(w, 31, 31) << 12) | (bits(w, 7, 7) << 11) | (bits(w, 30, 25) << 5) | (bits(w, 11, 8) << 1), 13);
  const std::int64_t imm_u = static_cast<std::int32_t>(w & 0xfffff000u);
  const std::int64_t imm_j = sext(
      (bits(w, 31, 31) << 20) | (bits(w, 19, 12) << 12) | (bits(w, 20, 20) << 11) | (bits(w, 30, 21) << 1), 21);

  auto rtype = [&](M op) {
    Instruction i = make(op, 4, w);
    i.rd = rd;
    i.rs1 = rs1;
    i.rs2 = rs2;
    return i;
  };
  auto itype = [&](M op, std::int64_t imm) {
    Instruction i = make(op, 4, w);
    i.rd = rd;
    i.rs1 = rs1;
    i.imm = imm;
    return i;
  };

  switch (opcode) {
    case 0x37: { Instruction i = make(M::Lui, 4, w); i.rd = rd; i.imm = imm_u; return i; }
    case 0x17: { Instruction i = make(M::Auipc, 4, w); i.rd = rd; i.imm = imm_u; return i; }
    case 0x6f: { Instruction i = make(M::Jal, 4, w); i.rd = rd; i.imm = imm_j; return i; }
    case 0x67:
      if (f3 != 0) return illegal;
      return itype(M::Jalr, imm_i);
    case 0x63: {
      static constexpr M kOps[8] = {M::Beq, M::Bne, M::Illegal, M::Illegal, M::Blt, M::Bge, M::Bltu, M::Bgeu};
      if (kOps[f3] == M::Illegal) return illegal;
      Instruction i = make(kOps[f3], 4, w);
      i.rs1 = rs1;
      i.rs2 = rs2;
      i.imm = imm_b;
      return i;
    }
    case 0x03: {
      static constexpr M kOps[8] = {M::Lb, M::Lh, M::Lw, M::Ld, M::Lbu, M::Lhu, M::Lwu, M::Illegal};
      if (kOps[f3] == M::Illegal) return illegal;
      return itype(kOps[f3], imm_i);
    }
    case 0x23: {
      static constexpr M kOps[8] = {M::Sb, M::Sh, M::Sw, M::Sd, M::Illegal, M::Illegal, M::Illegal, M::Illegal};
      if (kOps[f3] == M::Illegal) return illegal;
      Instruction i = make(kOps[f3], 4, w);
      i.rs1 = rs1;
      i.rs2 = rs2;
      i.imm = imm_s;
      return i;
    }
    case 0x13: {
      const std::uint32_t f6 = bits(w, 31, 26);
      const std::int64_t shamt = bits(w, 25, 20);
      switch (f3) {
        case 0: return itype(M::Addi, imm_i);
        case 2: return itype(M::Slti, imm_i);
        case 3: return itype(M::Sltiu, imm_i);
        case 4: return itype(M::Xori, imm_i);
        case 6: return itype(M::Ori, imm_i);
        case 7: return itype(M::Andi, imm_i);
        case 1: return f6 == 0 ? itype(M::Slli, shamt) : illegal;
        default:
          if (f6 == 0) return itype(M::Srli, shamt);
          if (f6 == 0x10) return itype(M::Srai, shamt);
          return illegal;
      }
    }
    case 0x1b: {
      const std::int64_t shamt = bits(w, 24, 20);
      switch (f3) {
        case 0: return itype(M::Addiw, imm_i);
        case 1: return f7 == 0 ? itype(M::Slliw, shamt) : illegal;
        case 5:
          if (f7 == 0) return itype(M::Srliw, shamt);
          if (f7 == 0x20) return itype(M::Sraiw, shamt);
          return illegal;
        default: return illegal;
      }
    }
    case 0x33: {
      static constexpr M kBase[8] = {M::Add, M::Sll, M::Slt, M::Sltu, M::Xor, M::Srl, M::Or, M::And};
      static constexpr M kMul[8] = {M::Mul, M::Mulh, M::Mulhsu, M::Mulhu, M::Div, M::Divu, M::Rem, M::Remu};
      if (f7 == 0) return rtype(kBase[f3]);
      if (f7 == 1) return rtype(kMul[f3]);
      if (f7 == 0x20 && f3 == 0) return rtype(M::Sub);
      if (f7 == 0x20 && f3 == 5) return rtype(M::Sra);
      return illegal;
    }
    case 0x3b: {
      if (f7 == 0) {
        if (f3 == 0) return rtype(M::Addw);
        if (f3 == 1) return rtype(M::Sllw);
        if (f3 == 5) return rtype(M::Srlw);
        return illegal;
      }
      if (f7 == 0x20) {
        if (f3 == 0) return rtype(M::Subw);
        if (f3 == 5) return rtype(M::Sraw);
        return illegal;
      }
      if (f7 == 1) {
        static constexpr M kOps[8] = {M::Mulw, M::Illegal, M::Illegal, M::Illegal,
                                      M::Divw, M::Divuw,   M::Remw,    M::Remuw};
        if (kOps[f3] == M::Illegal) return illegal;
        return rtype(kOps[f3]);
      }
      return illegal;
    }
    case 0x0f:
      if (f3 != 0) return illegal;
      return itype(M::Fence, bits(w, 31, 20));
    case 0x73:
      if (w == 0x00000073) return make(M::Ecall, 4, w);
      if (w == 0x00100073) return make(M::Ebreak, 4, w);
      {
        Instruction i = make(M::Csr, 4, w);
        i.rd = rd;
        return i;
      }
    case 0x07: case 0x27: case 0x43: case 0x47: case 0x4b: case 0x4f:
      return make(M::FloatOrAtomic, 4, w);
    case 0x2f: {
      Instruction i = make(M::FloatOrAtomic, 4, w);
      i.rd = rd;
      return i;
    }
    case 0x53: {
      Instruction i = make(M::FloatOrAtomic, 4, w);
      const std::uint32_t f5 = bits(w, 31, 27);
      if (f5 == 0x14 || f5 == 0x18 || f5 == 0x1c) i.rd = rd;
      return i;
    }
    default: return illegal;
  }
}

Instruction decode(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + 2 > bytes.size()) {
    throw Error(ErrorCode::TruncatedInput, "decode: fewer than 2 bytes at offset " + std::to_string(offset));
  }
  const std::uint16_t lo = static_cast<std::uint16_t>(bytes[offset] | (bytes[offset + 1] << 8));
  if (width_of_halfword(lo) == 2) return decode16(lo);
  if (offset + 4 > bytes.size()) {
    throw Error(ErrorCode::TruncatedInput, "decode: 4-byte instruction truncated at offset " + std::to_string(offset));
  }
  const std::uint32_t hi = static_cast<std::uint32_t>(bytes[offset + 2] | (bytes[offset + 3] << 8));
  return decode32(lo | (hi << 16));
}

}  // namespace rvrop::isa
