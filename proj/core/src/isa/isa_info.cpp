#include <array>
#include <sstream>

#include "rvrop/isa.hpp"

namespace rvrop {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TruncatedInput: return "truncated-input";
    case ErrorCode::ImmediateOutOfRange: return "immediate-out-of-range";
    case ErrorCode::UnsupportedMnemonic: return "unsupported-mnemonic";
    case ErrorCode::InvalidOperand: return "invalid-operand";
    case ErrorCode::ParseError: return "parse-error";
    case ErrorCode::MalformedElf: return "malformed-elf";
    case ErrorCode::WrongMachine: return "wrong-machine";
    case ErrorCode::WrongClass: return "wrong-class";
    case ErrorCode::OddBase: return "odd-base";
    case ErrorCode::OutOfRange: return "out-of-range";
    case ErrorCode::UnresolvedLabel: return "unresolved-label";
    case ErrorCode::MisalignedBase: return "misaligned-base";
    case ErrorCode::RegionOverlap: return "region-overlap";
    case ErrorCode::UnresolvedProgram: return "unresolved-program";
    case ErrorCode::MalformedChain: return "malformed-chain";
    case ErrorCode::NoPopGadget: return "no-pop-gadget";
    case ErrorCode::IncompleteCatalog: return "incomplete-catalog";
    case ErrorCode::ReservedRegister: return "reserved-register";
    case ErrorCode::UnknownFunction: return "unknown-function";
    case ErrorCode::TooManyArgs: return "too-many-args";
    case ErrorCode::UnbalancedBracket: return "unbalanced-bracket";
    case ErrorCode::ChainTooLarge: return "chain-too-large";
    case ErrorCode::AssemblyFailure: return "assembly-failure";
    case ErrorCode::CatalogParse: return "catalog-parse";
  }
  return "unknown";
}

std::string hex(std::uint64_t value) {
  std::ostringstream os;
  os << "0x" << std::hex << value;
  return os.str();
}

}  // namespace rvrop

namespace rvrop::isa {

namespace {

constexpr std::array<std::string_view, kNumRegs> kAbiNames = {
    "zero", "ra", "sp", "gp", "tp",  "t0",  "t1", "t2", "s0", "s1", "a0",
    "a1",   "a2", "a3", "a4", "a5",  "a6",  "a7", "s2", "s3", "s4", "s5",
    "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6",
};

struct MnemonicInfo {
  std::string_view name;
  Format format;
};

// Indexed by Mnemonic.
constexpr std::array<MnemonicInfo, static_cast<std::size_t>(Mnemonic::Count_)> kInfo = {{
    {"illegal", Format::Opaque},
    {"lui", Format::U},
    {"auipc", Format::U},
    {"jal", Format::J},
    {"jalr", Format::Jalr},
    {"beq", Format::Branch},
    {"bne", Format::Branch},
    {"blt", Format::Branch},
    {"bge", Format::Branch},
    {"bltu", Format::Branch},
    {"bgeu", Format::Branch},
    {"lb", Format::Load},
    {"lh", Format::Load},
    {"lw", Format::Load},
    {"ld", Format::Load},
    {"lbu", Format::Load},
    {"lhu", Format::Load},
    {"lwu", Format::Load},
    {"sb", Format::Store},
    {"sh", Format::Store},
    {"sw", Format::Store},
    {"sd", Format::Store},
    {"addi", Format::I},
    {"slti", Format::I},
    {"sltiu", Format::I},
    {"xori", Format::I},
    {"ori", Format::I},
    {"andi", Format::I},
    {"slli", Format::Shift},
    {"srli", Format::Shift},
    {"srai", Format::Shift},
    {"add", Format::R},
    {"sub", Format::R},
    {"sll", Format::R},
    {"slt", Format::R},
    {"sltu", Format::R},
    {"xor", Format::R},
    {"srl", Format::R},
    {"sra", Format::R},
    {"or", Format::R},
    {"and", Format::R},
    {"addiw", Format::I},
    {"slliw", Format::Shift},
    {"srliw", Format::Shift},
    {"sraiw", Format::Shift},
    {"addw", Format::R},
    {"subw", Format::R},
    {"sllw", Format::R},
    {"srlw", Format::R},
    {"sraw", Format::R},
    {"fence", Format::Fence},
    {"ecall", Format::None},
    {"ebreak", Format::None},
    {"mul", Format::R},
    {"mulh", Format::R},
    {"mulhsu", Format::R},
    {"mulhu", Format::R},
    {"div", Format::R},
    {"divu", Format::R},
    {"rem", Format::R},
    {"remu", Format::R},
    {"mulw", Format::R},
    {"divw", Format::R},
    {"divuw", Format::R},
    {"remw", Format::R},
    {"remuw", Format::R},
    {"c.addi4spn", Format::CSpImm},
    {"c.fld", Format::Load},
    {"c.lw", Format::Load},
    {"c.ld", Format::Load},
    {"c.fsd", Format::Store},
    {"c.sw", Format::Store},
    {"c.sd", Format::Store},
    {"c.nop", Format::None},
    {"c.addi", Format::CRdImm},
    {"c.addiw", Format::CRdImm},
    {"c.li", Format::CRdImm},
    {"c.addi16sp", Format::CRdImm},
    {"c.lui", Format::CRdImm},
    {"c.srli", Format::CRdImm},
    {"c.srai", Format::CRdImm},
    {"c.andi", Format::CRdImm},
    {"c.sub", Format::CRdRs2},
    {"c.xor", Format::CRdRs2},
    {"c.or", Format::CRdRs2},
    {"c.and", Format::CRdRs2},
    {"c.subw", Format::CRdRs2},
    {"c.addw", Format::CRdRs2},
    {"c.j", Format::COff},
    {"c.beqz", Format::CRs1Off},
    {"c.bnez", Format::CRs1Off},
    {"c.slli", Format::CRdImm},
    {"c.fldsp", Format::Load},
    {"c.lwsp", Format::Load},
    {"c.ldsp", Format::Load},
    {"c.fsdsp", Format::Store},
    {"c.swsp", Format::Store},
    {"c.sdsp", Format::Store},
    {"c.jr", Format::CRs1},
    {"c.mv", Format::CRdRs2},
    {"c.ebreak", Format::None},
    {"c.jalr", Format::CRs1},
    {"c.add", Format::CRdRs2},
    {"<fp/amo>", Format::Opaque},
    {"<csr>", Format::Opaque},
}};

}  // namespace

Reg reg_from_index(unsigned idx) { return static_cast<Reg>(idx & 31u); }

std::string_view abi_name(Reg r) { return kAbiNames[index(r)]; }

std::optional<Reg> parse_reg(std::string_view name) {
  for (unsigned i = 0; i < kNumRegs; ++i) {
    if (kAbiNames[i] == name) return reg_from_index(i);
  }
  if (name == "fp") return Reg::s0;
  if (name.size() >= 2 && name.size() <= 3 && name[0] == 'x') {
    unsigned v = 0;
    for (char c : name.substr(1)) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + static_cast<unsigned>(c - '0');
    }
    if (v < kNumRegs) return reg_from_index(v);
  }
  return std::nullopt;
}

std::string_view mnemonic_name(Mnemonic m) { return kInfo[static_cast<std::size_t>(m)].name; }

Format format_of(Mnemonic m) { return kInfo[static_cast<std::size_t>(m)].format; }

std::optional<Mnemonic> parse_mnemonic(std::string_view name) {
  for (std::size_t i = 1; i < kInfo.size(); ++i) {
    if (kInfo[i].format != Format::Opaque && kInfo[i].name == name) return static_cast<Mnemonic>(i);
  }
  return std::nullopt;
}

bool is_compressed(Mnemonic m) { return m >= Mnemonic::CAddi4spn && m <= Mnemonic::CAdd; }

std::string_view to_string(InstructionClass k) {
  switch (k) {
    case InstructionClass::Load: return "load";
    case InstructionClass::Store: return "store";
    case InstructionClass::OpImm: return "op-imm";
    case InstructionClass::Op: return "op";
    case InstructionClass::Branch: return "branch";
    case InstructionClass::Jal: return "jal";
    case InstructionClass::Jalr: return "jalr";
    case InstructionClass::System: return "system";
    case InstructionClass::Illegal: return "illegal";
    case InstructionClass::UnsupportedDecodable: return "unsupported-decodable";
  }
  return "?";
}

InstructionClass classify(const Instruction& ins) {
  using M = Mnemonic;
  switch (ins.op) {
    case M::Illegal: return InstructionClass::Illegal;
    case M::FloatOrAtomic:
    case M::CFld:
    case M::CFsd:
    case M::CFldsp:
    case M::CFsdsp: return InstructionClass::UnsupportedDecodable;
    case M::Lb: case M::Lh: case M::Lw: case M::Ld: case M::Lbu: case M::Lhu: case M::Lwu:
    case M::CLw: case M::CLd: case M::CLwsp: case M::CLdsp:
      return InstructionClass::Load;
    case M::Sb: case M::Sh: case M::Sw: case M::Sd:
    case M::CSw: case M::CSd: case M::CSwsp: case M::CSdsp:
      return InstructionClass::Store;
    case M::Beq: case M::Bne: case M::Blt: case M::Bge: case M::Bltu: case M::Bgeu:
    case M::CBeqz: case M::CBnez:
      return InstructionClass::Branch;
    case M::Jal: case M::CJ: return InstructionClass::Jal;
    case M::Jalr: case M::CJr: case M::CJalr: return InstructionClass::Jalr;
    case M::Fence: case M::Ecall: case M::Ebreak: case M::CEbreak: case M::Csr:
      return InstructionClass::System;
    case M::Lui: case M::Auipc:
    case M::Addi: case M::Slti: case M::Sltiu: case M::Xori: case M::Ori: case M::Andi:
    case M::Slli: case M::Srli: case M::Srai: case M::Addiw: case M::Slliw: case M::Srliw: case M::Sraiw:
    case M::CAddi4spn: case M::CNop: case M::CAddi: case M::CAddiw: case M::CLi: case M::CAddi16sp:
    case M::CLui: case M::CSrli: case M::CSrai: case M::CAndi: case M::CSlli:
      return InstructionClass::OpImm;
    default: return InstructionClass::Op;
  }
}

bool is_return(const Instruction& ins) {
  if (ins.op == Mnemonic::CJr) return ins.rs1 == Reg::ra;
  if (ins.op == Mnemonic::Jalr) return ins.rd == Reg::zero && ins.rs1 == Reg::ra && ins.imm == 0;
  return false;
}

bool is_call(const Instruction& ins) {
  return (ins.op == Mnemonic::CJalr || ins.op == Mnemonic::Jalr) && ins.rd == Reg::ra;
}

bool is_cond_branch(const Instruction& ins) { return classify(ins) == InstructionClass::Branch; }

std::optional<Reg> dest_reg(const Instruction& ins) {
  switch (classify(ins)) {
    case InstructionClass::Store:
    case InstructionClass::Branch:
    case InstructionClass::Illegal: return std::nullopt;
    case InstructionClass::System:
      if (ins.op == Mnemonic::Csr && ins.rd != Reg::zero) return ins.rd;
      return std::nullopt;
    case InstructionClass::UnsupportedDecodable:
      // FloatOrAtomic stores the integer destination in rd when it has one.
      if (ins.op == Mnemonic::FloatOrAtomic && ins.rd != Reg::zero) return ins.rd;
      return std::nullopt;
    default: break;
  }
  if (ins.rd == Reg::zero) return std::nullopt;
  return ins.rd;
}

Instruction expand(const Instruction& ins) {
  using M = Mnemonic;
  Instruction out = ins;
  switch (ins.op) {
    case M::CAddi4spn: out.op = M::Addi; break;
    case M::CLw: case M::CLwsp: out.op = M::Lw; break;
    case M::CLd: case M::CLdsp: out.op = M::Ld; break;
    case M::CSw: case M::CSwsp: out.op = M::Sw; break;
    case M::CSd: case M::CSdsp: out.op = M::Sd; break;
    case M::CNop: out.op = M::Addi; out.rd = out.rs1 = Reg::zero; out.imm = 0; break;
    case M::CAddi: case M::CLi: case M::CAddi16sp: out.op = M::Addi; break;
    case M::CAddiw: out.op = M::Addiw; break;
    case M::CLui: out.op = M::Lui; break;
    case M::CSrli: out.op = M::Srli; break;
    case M::CSrai: out.op = M::Srai; break;
    case M::CSlli: out.op = M::Slli; break;
    case M::CAndi: out.op = M::Andi; break;
    case M::CSub: out.op = M::Sub; break;
    case M::CXor: out.op = M::Xor; break;
    case M::COr: out.op = M::Or; break;
    case M::CAnd: out.op = M::And; break;
    case M::CSubw: out.op = M::Subw; break;
    case M::CAddw: out.op = M::Addw; break;
    case M::CMv: case M::CAdd: out.op = M::Add; break;
    case M::CJ: out.op = M::Jal; out.rd = Reg::zero; break;
    case M::CBeqz: out.op = M::Beq; out.rs2 = Reg::zero; break;
    case M::CBnez: out.op = M::Bne; out.rs2 = Reg::zero; break;
    case M::CJr: out.op = M::Jalr; out.rd = Reg::zero; out.imm = 0; break;
    case M::CJalr: out.op = M::Jalr; out.rd = Reg::ra; out.imm = 0; break;
    case M::CEbreak: out.op = M::Ebreak; break;
    case M::CFld: case M::CFsd: case M::CFldsp: case M::CFsdsp: out.op = M::FloatOrAtomic; out.rd = Reg::zero; break;
    default: break;
  }
  return out;
}

}  // namespace rvrop::isa
