#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rvrop/builder.hpp"
#include "rvrop/chain.hpp"
#include "rvrop/scanner.hpp"

namespace rvrop::bf {

enum class OpKind : std::uint8_t { Right, Left, Inc, Dec, Out, In, LoopOpen, LoopClose };

struct Op {
  OpKind kind = OpKind::Right;
  std::size_t match = 0;  // partner index for brackets
  std::size_t pos = 0;    // offset in the source text
};

struct BfProgram {
  std::vector<Op> ops;
};

/// Non-command characters are ignored. Throws `UnbalancedBracket`.
BfProgram parse(std::string_view src);

struct TapeConfig {
  std::size_t cell_count = 4096;
  std::size_t start_index = 2048;

  static TapeConfig with_cells(std::size_t n) { return {n, n / 2}; }
};

struct CompileOptions {
  build::BuilderOptions builder;
  std::uint64_t max_chain_bytes = 256ull << 20;
};

/// Resolved chain program. Throws `IncompleteCatalog`, `ChainTooLarge`.
chain::ChainProgram compile(const BfProgram& prog, const scan::GadgetCatalog& cat, const TapeConfig& tape,
                            Addr base_sp, const CompileOptions& opts = {});

struct InterpResult {
  std::string output;
  bool finished = true;
  std::uint64_t steps = 0;
};

/// Plain interpreter with 64-bit cells; EOF stores 0.
InterpResult interpret(const BfProgram& prog, std::string_view input, const TapeConfig& tape = {},
                       std::uint64_t max_steps = 1'000'000'000);

}  // namespace rvrop::bf
