#include <algorithm>
#include <thread>

#include "rvrop/scanner.hpp"

namespace rvrop::scan {

namespace {

void scan_range(const image::MemoryImage& img, Addr lo, Addr hi, unsigned max_window, std::vector<Gadget>& out) {
  for (Addr a = lo; a < hi; a += 2) {
    if (auto g = analyze_at(img, a, max_window)) out.push_back(std::move(*g));
  }
}

void sweep(const image::Segment& seg, Addr from, std::set<Addr>& starts, bool stop_at_known) {
  Addr pc = from;
  while (seg.contains(pc, 2)) {
    if (stop_at_known && !starts.insert(pc).second) return;
    starts.insert(pc);
    std::uint8_t w;
    try {
      w = isa::decode(seg.bytes, pc - seg.base).width;
    } catch (const Error&) {
      return;
    }
    pc += w;
  }
}

}  // namespace

std::vector<Gadget> scan(const image::MemoryImage& img, const ScanOptions& opts) {
  const unsigned max_window = std::max(2u, opts.max_window);
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());

  struct Chunk {
    Addr lo, hi;
  };
  std::vector<Chunk> chunks;
  constexpr Addr kChunk = 0x1000;
  for (const auto& seg : img.segments()) {
    if (!seg.executable()) continue;
    for (Addr lo = seg.base; lo < seg.end(); lo += kChunk) chunks.push_back({lo, std::min(seg.end(), lo + kChunk)});
  }

  std::vector<std::vector<Gadget>> results(chunks.size());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, chunks.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < chunks.size(); ++i) scan_range(img, chunks[i].lo, chunks[i].hi, max_window, results[i]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < chunks.size(); i += threads) {
          scan_range(img, chunks[i].lo, chunks[i].hi, max_window, results[i]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<Gadget> out;
  for (auto& r : results) {
    for (auto& g : r) out.push_back(std::move(g));
  }
  std::stable_sort(out.begin(), out.end(), [](const Gadget& x, const Gadget& y) { return x.entry < y.entry; });
  return out;
}

std::set<Addr> intended_starts(const image::MemoryImage& img, const CensusOptions& opts) {
  std::set<Addr> starts;
  for (const auto& seg : img.segments()) {
    if (seg.executable()) sweep(seg, seg.base, starts, false);
  }
  if (opts.symbol_anchored) {
    for (const auto& [name, addr] : img.symbols()) {
      const auto* seg = img.segment_at(addr, 2);
      if (seg && seg->executable() && addr % 2 == 0) sweep(*seg, addr, starts, true);
    }
  }
  return starts;
}

Census census(const image::MemoryImage& img, std::vector<Gadget>& gadgets, const CensusOptions& opts) {
  const auto starts = intended_starts(img, opts);
  Census c;
  for (auto& g : gadgets) {
    g.unintended_entry = starts.count(g.entry) == 0;
    ++c.total;
    if (g.unintended_entry) ++c.unintended;
  }
  return c;
}

}  // namespace rvrop::scan
