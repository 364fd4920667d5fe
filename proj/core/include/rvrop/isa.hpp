#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvrop/error.hpp"

namespace rvrop::isa {

enum class Reg : std::uint8_t {
  zero, ra, sp, gp, tp, t0, t1, t2,
  s0, s1, a0, a1, a2, a3, a4, a5,
  a6, a7, s2, s3, s4, s5, s6, s7,
  s8, s9, s10, s11, t3, t4, t5, t6,
};

constexpr unsigned kNumRegs = 32;

constexpr unsigned index(Reg r) { return static_cast<unsigned>(r); }
Reg reg_from_index(unsigned idx);
std::string_view abi_name(Reg r);
/// Accepts ABI names, `fp` for s0, and `x0`..`x31`.
std::optional<Reg> parse_reg(std::string_view name);

// clang-format off
enum class Mnemonic : std::uint8_t {
  Illegal,
  // RV64I
  Lui, Auipc, Jal, Jalr,
  Beq, Bne, Blt, Bge, Bltu, Bgeu,
  Lb, Lh, Lw, Ld, Lbu, Lhu, Lwu,
  Sb, Sh, Sw, Sd,
  Addi, Slti, Sltiu, Xori, Ori, Andi, Slli, Srli, Srai,
  Add, Sub, Sll, Slt, Sltu, Xor, Srl, Sra, Or, And,
  Addiw, Slliw, Srliw, Sraiw,
  Addw, Subw, Sllw, Srlw, Sraw,
  Fence, Ecall, Ebreak,
  // M
  Mul, Mulh, Mulhsu, Mulhu, Div, Divu, Rem, Remu,
  Mulw, Divw, Divuw, Remw, Remuw,
  // C
  CAddi4spn, CFld, CLw, CLd, CFsd, CSw, CSd,
  CNop, CAddi, CAddiw, CLi, CAddi16sp, CLui,
  CSrli, CSrai, CAndi, CSub, CXor, COr, CAnd, CSubw, CAddw,
  CJ, CBeqz, CBnez,
  CSlli, CFldsp, CLwsp, CLdsp, CFsdsp, CSwsp, CSdsp,
  CJr, CMv, CEbreak, CJalr, CAdd,
  // Decoded for width and classification only.
  FloatOrAtomic, Csr,
  Count_,
};
// clang-format on

enum class InstructionClass {
  Load,
  Store,
  OpImm,
  Op,
  Branch,
  Jal,
  Jalr,
  System,
  Illegal,
  UnsupportedDecodable,
};

std::string_view to_string(InstructionClass k);

/// One decoded RV64IMC instruction. Compressed forms keep their own mnemonic
/// but carry operands in expanded form (e.g. `c.ldsp ra, 8(sp)` has rs1 = sp).
/// Unused register fields are `zero`; immediates are sign-extended.
struct Instruction {
  Mnemonic op = Mnemonic::Illegal;
  std::uint8_t width = 2;
  Reg rd = Reg::zero;
  Reg rs1 = Reg::zero;
  Reg rs2 = Reg::zero;
  std::int64_t imm = 0;
  std::uint32_t raw = 0;

  bool operands_equal(const Instruction& o) const {
    return op == o.op && width == o.width && rd == o.rd && rs1 == o.rs1 && rs2 == o.rs2 && imm == o.imm;
  }
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

std::string_view mnemonic_name(Mnemonic m);
std::optional<Mnemonic> parse_mnemonic(std::string_view name);
bool is_compressed(Mnemonic m);

/// Operand layout used for printing, parsing and randomized generation.
enum class Format {
  None,       // ecall, c.nop
  R,          // rd, rs1, rs2
  I,          // rd, rs1, imm
  Shift,      // rd, rs1, shamt
  Load,       // rd, imm(rs1)
  Store,      // rs2, imm(rs1)
  Branch,     // rs1, rs2, offset
  U,          // rd, imm20
  J,          // rd, offset
  Jalr,       // rd, rs1, imm
  Fence,      // raw pred/succ bits in imm
  CRdImm,     // rd, imm          (c.addi, c.li, c.addi16sp, c.lui, c.andi, c.srli ...)
  CRdRs2,     // rd, rs2          (c.add, c.mv, c.sub ...)
  CRs1,       // rs1              (c.jr, c.jalr)
  CRs1Off,    // rs1, offset      (c.beqz, c.bnez)
  COff,       // offset           (c.j)
  CSpImm,     // rd, sp, imm      (c.addi4spn)
  Opaque,     // raw word only
};

Format format_of(Mnemonic m);
InstructionClass classify(const Instruction& ins);

std::uint8_t width_of_halfword(std::uint16_t first_half);

/// Decodes the instruction at `offset`. Never throws on bad encodings (they
/// yield `Mnemonic::Illegal`); throws `TruncatedInput` when fewer bytes remain
/// than the encoding needs.
Instruction decode(std::span<const std::uint8_t> bytes, std::size_t offset = 0);
Instruction decode16(std::uint16_t half);
Instruction decode32(std::uint32_t word);

/// Encodes a supported instruction. Throws `UnsupportedMnemonic`,
/// `ImmediateOutOfRange` or `InvalidOperand`.
std::vector<std::uint8_t> encode(const Instruction& ins);
std::uint32_t encode_word(const Instruction& ins);

bool is_return(const Instruction& ins);
/// jalr/c.jalr that links through ra.
bool is_call(const Instruction& ins);
bool is_cond_branch(const Instruction& ins);
/// Integer register written by the instruction, if any (x0 writes excluded).
std::optional<Reg> dest_reg(const Instruction& ins);

/// Base-ISA equivalent of a compressed instruction (operands are already
/// expanded by the decoder, so only the mnemonic changes). Width and raw are
/// kept. Non-compressed instructions are returned unchanged.
Instruction expand(const Instruction& ins);

std::string format(const Instruction& ins);

/// Parses one assembly line in the syntax produced by `format`, e.g.
/// `c.ldsp ra, 8(sp)` or `bne a4, a5, 0x1e` (branch offsets are relative).
Instruction assemble(std::string_view line);

}  // namespace rvrop::isa
