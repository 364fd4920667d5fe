// rvrop: scan images for gadgets, compile Brainfuck to chains, run chains.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "rvrop/bf.hpp"
#include "rvrop/chain.hpp"
#include "rvrop/emulator.hpp"
#include "rvrop/image.hpp"
#include "rvrop/scanner.hpp"
#include "rvrop/synthetic.hpp"

using namespace rvrop;

namespace {

enum Exit : int {
  kOk = 0,
  kLoadFailure = 1,
  kUnbalanced = 2,
  kIncompleteCatalog = 3,
  kTrap = 10,
  kStepLimit = 11,
};

constexpr const char* kExitHelp =
    "exit codes: 0 ok (run: the chain's exit status), 1 load failure, 2 unbalanced bracket,\n"
    "            3 incomplete catalog, 10 trap, 11 step limit";

struct Failure {
  int code;
  std::string message;
};

Addr parse_addr(const std::string& s) {
  try {
    std::size_t used = 0;
    const Addr v = std::stoull(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CLI::ValidationError("address", "'" + s + "' is not a hex (0x...) or decimal address");
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kLoadFailure, "cannot read " + path};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const std::string& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw Failure{kLoadFailure, "cannot write " + path};
}

void write_text(const std::string& path, const std::string& text) { write_bytes(path, text.data(), text.size()); }

image::MemoryImage load_image(const std::string& path, Addr raw_base) {
  try {
    return image::load_file(path, raw_base);
  } catch (const Error& e) {
    throw Failure{kLoadFailure, "cannot load image " + path + ": " + e.what()};
  }
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RV64GC return-oriented programming toolkit"};
  app.footer(kExitHelp);
  app.require_subcommand(1);

  std::string image_path, out_path, format = "text", chain_path, bf_path, catalog_path, listing_path;
  std::string stdin_path, trace_path, manifest_path;
  std::string base_sp_s = "0x40000000", raw_base_s = "0x10000";
  unsigned max_window = 16, threads = 0;
  bool symbol_anchored = false, strict = false;
  std::size_t tape_cells = 4096;
  std::uint64_t buffer_bytes = 1024, max_steps = 500'000'000;

  auto* scan_cmd = app.add_subcommand("scan", "list chainable gadgets and census totals");
  scan_cmd->add_option("image", image_path, "ELF or raw image")->required();
  scan_cmd->add_option("--max-window", max_window, "instructions per gadget window")->check(CLI::Range(1u, 64u));
  scan_cmd->add_option("--format", format, "text or catalog")->check(CLI::IsMember({"text", "catalog"}));
  scan_cmd->add_option("--threads", threads, "scanner threads (0 = hardware)");
  scan_cmd->add_option("--raw-base", raw_base_s, "load address for raw images");
  scan_cmd->add_flag("--symbol-anchored", symbol_anchored, "census also sweeps from every code symbol");
  scan_cmd->add_option("-o,--output", out_path, "output file (default stdout)");

  auto* cat_cmd = app.add_subcommand("catalog", "write the gadget catalog for an image");
  cat_cmd->add_option("image", image_path, "ELF or raw image")->required();
  cat_cmd->add_option("--max-window", max_window, "instructions per gadget window")->check(CLI::Range(1u, 64u));
  cat_cmd->add_option("--raw-base", raw_base_s, "load address for raw images");
  cat_cmd->add_option("-o,--output", out_path, "output file (default stdout)");

  auto* stats_cmd = app.add_subcommand("stats", "census and role counts");
  stats_cmd->add_option("image", image_path, "ELF or raw image")->required();
  stats_cmd->add_option("--max-window", max_window, "instructions per gadget window")->check(CLI::Range(1u, 64u));
  stats_cmd->add_option("--raw-base", raw_base_s, "load address for raw images");
  stats_cmd->add_flag("--symbol-anchored", symbol_anchored, "census also sweeps from every code symbol");

  auto* compile_cmd = app.add_subcommand("compile", "compile Brainfuck into a chain");
  compile_cmd->add_option("program", bf_path, "Brainfuck source")->required();
  compile_cmd->add_option("--catalog", catalog_path, "catalog file")->required();
  compile_cmd->add_option("--base-sp", base_sp_s, "chain base address (16-aligned)");
  compile_cmd->add_option("--tape-cells", tape_cells, "tape length in 64-bit cells")->check(CLI::PositiveNumber);
  compile_cmd->add_option("--buffer-bytes", buffer_bytes, "safety buffer below call frames");
  compile_cmd->add_option("-o,--output", chain_path, "chain file")->required();
  compile_cmd->add_option("--listing", listing_path, "annotated frame listing");

  auto* run_cmd = app.add_subcommand("run", "run a chain against an image");
  run_cmd->add_option("image", image_path, "ELF or raw image")->required();
  run_cmd->add_option("chain", chain_path, "chain file")->required();
  run_cmd->add_option("--stdin", stdin_path, "file fed to getchar");
  run_cmd->add_option("--max-steps", max_steps, "instruction limit");
  run_cmd->add_option("--trace", trace_path, "write the gadget trace here");
  run_cmd->add_option("--raw-base", raw_base_s, "load address for raw images");
  run_cmd->add_flag("--strict", strict, "trap when sp is misaligned at a gadget landing");

  auto* synth_cmd = app.add_subcommand("synth", "write the synthetic test image and its manifest");
  synth_cmd->add_option("--elf", out_path, "ELF output")->required();
  synth_cmd->add_option("--manifest", manifest_path, "manifest output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const Addr raw_base = parse_addr(raw_base_s);

    if (scan_cmd->parsed() || cat_cmd->parsed() || stats_cmd->parsed()) {
      const auto img = load_image(image_path, raw_base);
      auto gadgets = scan::scan(img, {max_window, threads});
      const auto census = scan::census(img, gadgets, {symbol_anchored});

      if (cat_cmd->parsed() || format == "catalog") {
        emit(out_path, scan::write_catalog(scan::build_catalog(img, gadgets)));
      } else if (scan_cmd->parsed()) {
        std::ostringstream os;
        for (const auto& g : gadgets) {
          os << hex(g.entry) << " a=" << hex(static_cast<Word>(g.ra_offset_a))
             << " b=" << hex(static_cast<Word>(g.sp_delta_b))
             << (g.kind == scan::GadgetKind::Pivot ? " pivot" : "") << (g.unintended_entry ? " unintended" : "")
             << "  " << g.summary.to_string() << "\n";
        }
        os << "# gadgets " << census.total << " unintended " << census.unintended << "\n";
        emit(out_path, os.str());
      } else {
        std::map<std::string, std::size_t> roles;
        for (const auto& g : gadgets) {
          for (const auto& r : scan::classify(g, img)) ++roles[std::string(scan::to_string(r.kind))];
        }
        std::cout << "gadgets " << census.total << "\nunintended " << census.unintended << "\n";
        for (const auto& [name, n] : roles) std::cout << "role " << name << " " << n << "\n";
      }
      return kOk;
    }

    if (compile_cmd->parsed()) {
      const Addr base_sp = parse_addr(base_sp_s);
      if (base_sp % 16 != 0) throw Failure{kLoadFailure, "--base-sp must be 16-aligned"};
      scan::GadgetCatalog cat;
      try {
        cat = scan::parse_catalog(read_text(catalog_path));
      } catch (const Error& e) {
        throw Failure{kLoadFailure, "cannot load catalog " + catalog_path + ": " + e.what()};
      }
      const auto prog = bf::parse(read_text(bf_path));
      bf::CompileOptions opts;
      opts.builder.buffer_bytes = buffer_bytes;
      const auto chain = bf::compile(prog, cat, bf::TapeConfig::with_cells(tape_cells), base_sp, opts);
      const auto bytes = chain::serialize(chain);
      write_bytes(chain_path, bytes.data(), bytes.size());
      if (!listing_path.empty()) write_text(listing_path, chain::listing(chain));
      return kOk;
    }

    if (run_cmd->parsed()) {
      const auto img = load_image(image_path, raw_base);
      chain::ChainImage chain;
      try {
        chain = chain::deserialize(image::read_file_bytes(chain_path));
      } catch (const Error& e) {
        throw Failure{kLoadFailure, "cannot load chain " + chain_path + ": " + e.what()};
      }
      const std::string input = stdin_path.empty() ? std::string{} : read_text(stdin_path);
      emu::RunOptions opts;
      opts.max_steps = max_steps;
      opts.strict = strict;
      opts.trace = !trace_path.empty();
      emu::RunResult r;
      try {
        r = emu::boot(img, chain, input, opts);
      } catch (const Error& e) {
        throw Failure{kLoadFailure, std::string("cannot start chain: ") + e.what()};
      }
      std::cout << r.output << std::flush;
      if (opts.trace) write_text(trace_path, emu::trace_text(r.trace));
      switch (r.status) {
        case emu::RunStatus::Exited: return static_cast<int>(r.exit_status & 0xff);
        case emu::RunStatus::Trapped: std::cerr << "rvrop: trap: " << r.trap->to_string() << "\n"; return kTrap;
        case emu::RunStatus::StepLimit:
          std::cerr << "rvrop: step limit of " << max_steps << " exceeded\n";
          return kStepLimit;
        case emu::RunStatus::Stopped: return kOk;
      }
    }

    if (synth_cmd->parsed()) {
      const auto s = synth::build_image();
      const auto elf = image::write_elf(s.image);
      write_bytes(out_path, elf.data(), elf.size());
      write_text(manifest_path, s.manifest.to_text());
      return kOk;
    }
  } catch (const Failure& f) {
    std::cerr << "rvrop: " << f.message << "\n";
    return f.code;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "rvrop: " << e.what() << "\n";
    return kLoadFailure;
  } catch (const Error& e) {
    std::cerr << "rvrop: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::UnbalancedBracket: return kUnbalanced;
      case ErrorCode::IncompleteCatalog: return kIncompleteCatalog;
      default: return kLoadFailure;
    }
  }
  return kOk;
}
