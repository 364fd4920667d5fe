#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rvrop {

using Addr = std::uint64_t;
using Word = std::uint64_t;

enum class ErrorCode {
  TruncatedInput,
  ImmediateOutOfRange,
  UnsupportedMnemonic,
  InvalidOperand,
  ParseError,
  MalformedElf,
  WrongMachine,
  WrongClass,
  OddBase,
  OutOfRange,
  UnresolvedLabel,
  MisalignedBase,
  RegionOverlap,
  UnresolvedProgram,
  MalformedChain,
  NoPopGadget,
  IncompleteCatalog,
  ReservedRegister,
  UnknownFunction,
  TooManyArgs,
  UnbalancedBracket,
  ChainTooLarge,
  AssemblyFailure,
  CatalogParse,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the toolkit; `code()` distinguishes failure kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

std::string hex(std::uint64_t value);

}  // namespace rvrop
