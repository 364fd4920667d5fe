#include <benchmark/benchmark.h>

#include "rvrop/bf.hpp"
#include "rvrop/emulator.hpp"
#include "rvrop/scanner.hpp"
#include "rvrop/synthetic.hpp"

using namespace rvrop;

namespace {

const synth::SynthImage& image() {
  static const auto s = synth::build_image();
  return s;
}

const scan::GadgetCatalog& catalog() {
  static const auto c = [] {
    auto gs = scan::scan(image().image);
    return scan::build_catalog(image().image, gs);
  }();
  return c;
}

// nested loops, ~200k instructions
constexpr const char* kLoops = "++++++++[>++++++++[>++++++++[>+<-]<-]<-]>>>.";

void BM_Decode(benchmark::State& st) {
  const auto& seg = image().image.segments().front();
  std::int64_t n = 0;
  for (auto _ : st) {
    for (std::size_t off = 0; off + 4 <= seg.bytes.size(); off += 2) {
      benchmark::DoNotOptimize(isa::decode(seg.bytes, off));
      ++n;
    }
  }
  st.SetItemsProcessed(n);
}
BENCHMARK(BM_Decode);

void BM_Scan(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(scan::scan(image().image, {16, 1}));
}
BENCHMARK(BM_Scan);

void BM_Compile(benchmark::State& st) {
  const auto prog = bf::parse(kLoops);
  for (auto _ : st) benchmark::DoNotOptimize(bf::compile(prog, catalog(), {}, 0x40000000));
}
BENCHMARK(BM_Compile);

void BM_Emulate(benchmark::State& st) {
  const auto chain = chain::flatten(bf::compile(bf::parse(kLoops), catalog(), {}, 0x40000000));
  std::uint64_t steps = 0;
  for (auto _ : st) {
    const auto r = emu::boot(image().image, chain, "");
    steps += r.steps;
  }
  st.counters["instr/s"] = benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Emulate)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
