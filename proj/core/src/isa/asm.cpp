#include <cctype>
#include <charconv>
#include <sstream>

#include "rvrop/isa.hpp"

namespace rvrop::isa {

namespace {

std::string imm_text(std::int64_t v) {
  if (v > -10 && v < 10) return std::to_string(v);
  std::ostringstream os;
  if (v < 0) {
    os << "-0x" << std::hex << (0 - static_cast<std::uint64_t>(v));
  } else {
    os << "0x" << std::hex << v;
  }
  return os.str();
}

bool is_float_data(Mnemonic m) {
  return m == Mnemonic::CFld || m == Mnemonic::CFsd || m == Mnemonic::CFldsp || m == Mnemonic::CFsdsp;
}

std::string reg_text(Reg r, bool fp) {
  if (fp) return "f" + std::to_string(index(r));
  return std::string(abi_name(r));
}

std::string upper20(std::int64_t imm) {
  std::ostringstream os;
  os << "0x" << std::hex << ((static_cast<std::uint64_t>(imm) >> 12) & 0xfffff);
  return os.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_fail(std::string_view line, std::string_view why, ErrorCode code = ErrorCode::ParseError) {
  throw Error(code, "cannot assemble '" + std::string(line) + "': " + std::string(why));
}

std::int64_t parse_imm(std::string_view line, std::string_view tok) {
  tok = trim(tok);
  bool neg = false;
  if (!tok.empty() && (tok.front() == '-' || tok.front() == '+')) {
    neg = tok.front() == '-';
    tok.remove_prefix(1);
  }
  int base = 10;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    base = 16;
    tok.remove_prefix(2);
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
  if (ec != std::errc{} || p != tok.data() + tok.size() || tok.empty()) parse_fail(line, "bad immediate");
  return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
}

Reg parse_reg_or_fail(std::string_view line, std::string_view tok, bool fp = false) {
  tok = trim(tok);
  if (fp && tok.size() >= 2 && tok[0] == 'f') {
    const auto n = parse_imm(line, tok.substr(1));
    if (n >= 0 && n < 32) return reg_from_index(static_cast<unsigned>(n));
  }
  auto r = parse_reg(tok);
  if (!r) parse_fail(line, "unknown register '" + std::string(tok) + "'");
  return *r;
}

// Splits "imm(reg)".
std::pair<std::int64_t, Reg> parse_mem(std::string_view line, std::string_view tok) {
  tok = trim(tok);
  const auto open = tok.find('(');
  const auto close = tok.find(')');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    parse_fail(line, "expected imm(reg)");
  }
  const auto imm_part = trim(tok.substr(0, open));
  const std::int64_t imm = imm_part.empty() ? 0 : parse_imm(line, imm_part);
  return {imm, parse_reg_or_fail(line, tok.substr(open + 1, close - open - 1))};
}

}  // namespace

std::string format(const Instruction& ins) {
  std::string out(mnemonic_name(ins.op));
  const bool fp = is_float_data(ins.op);
  auto rn = [&](Reg r) { return std::string(abi_name(r)); };
  switch (format_of(ins.op)) {
    case Format::None: return out;
    case Format::R: return out + " " + rn(ins.rd) + ", " + rn(ins.rs1) + ", " + rn(ins.rs2);
    case Format::I:
    case Format::Shift:
    case Format::Jalr: return out + " " + rn(ins.rd) + ", " + rn(ins.rs1) + ", " + imm_text(ins.imm);
    case Format::Load: return out + " " + reg_text(ins.rd, fp) + ", " + imm_text(ins.imm) + "(" + rn(ins.rs1) + ")";
    case Format::Store: return out + " " + reg_text(ins.rs2, fp) + ", " + imm_text(ins.imm) + "(" + rn(ins.rs1) + ")";
    case Format::Branch: return out + " " + rn(ins.rs1) + ", " + rn(ins.rs2) + ", " + imm_text(ins.imm);
    case Format::U: return out + " " + rn(ins.rd) + ", " + upper20(ins.imm);
    case Format::J: return out + " " + rn(ins.rd) + ", " + imm_text(ins.imm);
    case Format::Fence: return out + " " + imm_text(ins.imm);
    case Format::CRdImm:
      if (ins.op == Mnemonic::CLui) return out + " " + rn(ins.rd) + ", " + upper20(ins.imm);
      return out + " " + rn(ins.rd) + ", " + imm_text(ins.imm);
    case Format::CRdRs2: return out + " " + rn(ins.rd) + ", " + rn(ins.rs2);
    case Format::CRs1: return out + " " + rn(ins.rs1);
    case Format::CRs1Off: return out + " " + rn(ins.rs1) + ", " + imm_text(ins.imm);
    case Format::COff: return out + " " + imm_text(ins.imm);
    case Format::CSpImm: return out + " " + rn(ins.rd) + ", sp, " + imm_text(ins.imm);
    case Format::Opaque: return out + " " + hex(ins.raw);
  }
  return out;
}

Instruction assemble(std::string_view line) {
  line = trim(line);
  const auto sp = line.find_first_of(" \t");
  const auto name = line.substr(0, sp);
  auto mn = parse_mnemonic(name);
  if (!mn) parse_fail(line, "unknown mnemonic", ErrorCode::UnsupportedMnemonic);

  std::vector<std::string_view> ops;
  if (sp != std::string_view::npos) {
    std::string_view rest = line.substr(sp + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      ops.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }
  auto want = [&](std::size_t n) {
    if (ops.size() != n) parse_fail(line, "expected " + std::to_string(n) + " operands");
  };

  Instruction ins;
  ins.op = *mn;
  ins.width = is_compressed(*mn) ? 2 : 4;
  const bool fp = is_float_data(*mn);
  switch (format_of(*mn)) {
    case Format::None: want(0); break;
    case Format::R:
      want(3);
      ins.rd = parse_reg_or_fail(line, ops[0]);
      ins.rs1 = parse_reg_or_fail(line, ops[1]);
      ins.rs2 = parse_reg_or_fail(line, ops[2]);
      break;
    case Format::I:
    case Format::Shift:
    case Format::Jalr:
      want(3);
      ins.rd = parse_reg_or_fail(line, ops[0]);
      ins.rs1 = parse_reg_or_fail(line, ops[1]);
      ins.imm = parse_imm(line, ops[2]);
      break;
    case Format::Load: {
      want(2);
      ins.rd = parse_reg_or_fail(line, ops[0], fp);
      auto [imm, base] = parse_mem(line, ops[1]);
      ins.imm = imm;
      ins.rs1 = base;
      break;
    }
    case Format::Store: {
      want(2);
      ins.rs2 = parse_reg_or_fail(line, ops[0], fp);
      auto [imm, base] = parse_mem(line, ops[1]);
      ins.imm = imm;
      ins.rs1 = base;
      break;
    }
    case Format::Branch:
      want(3);
      ins.rs1 = parse_reg_or_fail(line, ops[0]);
      ins.rs2 = parse_reg_or_fail(line, ops[1]);
      ins.imm = parse_imm(line, ops[2]);
      break;
    case Format::U: {
      want(2);
      ins.rd = parse_reg_or_fail(line, ops[0]);
      const auto v = static_cast<std::uint64_t>(parse_imm(line, ops[1])) & 0xfffff;
      ins.imm = static_cast<std::int32_t>(static_cast<std::uint32_t>(v << 12));
      break;
    }
    case Format::J:
      want(2);
      ins.rd = parse_reg_or_fail(line, ops[0]);
      ins.imm = parse_imm(line, ops[1]);
      break;
    case Format::Fence:
      want(1);
      ins.imm = parse_imm(line, ops[0]);
      break;
    case Format::CRdImm:
      want(2);
      ins.rd = parse_reg_or_fail(line, ops[0]);
      if (*mn == Mnemonic::CLui) {
        const auto v = static_cast<std::uint64_t>(parse_imm(line, ops[1])) & 0xfffff;
        ins.imm = static_cast<std::int32_t>(static_cast<std::uint32_t>(v << 12));
      } else {
        ins.imm = parse_imm(line, ops[1]);
      }
      if (*mn != Mnemonic::CLi && *mn != Mnemonic::CLui) ins.rs1 = ins.rd;
      break;
    case Format::CRdRs2:
      want(2);
      ins.rd = parse_reg_or_fail(line, ops[0]);
      ins.rs2 = parse_reg_or_fail(line, ops[1]);
      if (*mn != Mnemonic::CMv) ins.rs1 = ins.rd;
      break;
    case Format::CRs1:
      want(1);
      ins.rs1 = parse_reg_or_fail(line, ops[0]);
      if (*mn == Mnemonic::CJalr) ins.rd = Reg::ra;
      break;
    case Format::CRs1Off:
      want(2);
      ins.rs1 = parse_reg_or_fail(line, ops[0]);
      ins.imm = parse_imm(line, ops[1]);
      break;
    case Format::COff:
      want(1);
      ins.imm = parse_imm(line, ops[0]);
      break;
    case Format::CSpImm:
      want(3);
      ins.rd = parse_reg_or_fail(line, ops[0]);
      ins.rs1 = parse_reg_or_fail(line, ops[1]);
      ins.imm = parse_imm(line, ops[2]);
      break;
    case Format::Opaque: parse_fail(line, "opaque mnemonic", ErrorCode::UnsupportedMnemonic);
  }
  ins.raw = encode_word(ins);
  return ins;
}

}  // namespace rvrop::isa
