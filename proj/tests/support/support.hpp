#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "rvrop/bf.hpp"
#include "rvrop/builder.hpp"
#include "rvrop/emulator.hpp"
#include "rvrop/scanner.hpp"
#include "rvrop/synthetic.hpp"

namespace rvrop::testing {

const synth::SynthImage& synthetic();
const std::vector<scan::Gadget>& synthetic_gadgets();
const scan::GadgetCatalog& synthetic_catalog();

std::string data_path(const std::string& rel);
std::string oracle_path(const std::string& rel);
std::string read_file(const std::string& path);

constexpr Addr kBaseSp = 0x40000000;

// ---- gadget summaries vs. execution ---------------------------------------

struct FidelityReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t mismatches = 0;
  std::string first_failure;
};

/// Runs `states` random states that satisfy some path of the gadget's
/// summary and compares all 32 registers and the stored words.
FidelityReport check_fidelity(const scan::Gadget& g, const image::MemoryImage& img, std::size_t states,
                              std::uint64_t seed);

// ---- logical units ---------------------------------------------------------

struct UnitRun {
  emu::RunResult result;
  std::array<Word, isa::kNumRegs> before{};
  std::array<Word, isa::kNumRegs> after{};
  std::function<Word(Addr)> read;  // memory after the run
};

/// Runs `unit` (prefixed with a NOP frame, suffixed with a halting frame)
/// from the given register state. `setup` may map or write memory first.
UnitRun run_unit(const build::LogicalUnit& unit, const std::array<Word, isa::kNumRegs>& regs,
                 const std::function<void(emu::Machine&, const chain::ChainProgram&)>& setup = {},
                 emu::RunOptions opts = {});

std::array<Word, isa::kNumRegs> random_regs(std::mt19937_64& rng);

/// Registers whose value differs between `before` and `after`, ignoring ra/sp.
std::set<isa::Reg> changed(const std::array<Word, isa::kNumRegs>& before, const std::array<Word, isa::kNumRegs>& after);

// ---- brainfuck -------------------------------------------------------------

struct BfCase {
  std::string source;
  std::string input;
};

/// Random program that finishes under the reference interpreter within
/// `max_steps` and keeps the cursor on the tape.
BfCase random_bf(std::mt19937_64& rng, std::uint64_t max_steps = 20000);

struct BfRun {
  chain::ChainProgram program;
  emu::RunResult result;
};

/// Strict alignment checks and a 512-byte hostile callee.
emu::RunOptions strict_options();

BfRun run_bf(const std::string& source, const std::string& input, emu::RunOptions opts = strict_options());

}  // namespace rvrop::testing
