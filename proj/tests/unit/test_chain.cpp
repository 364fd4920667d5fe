#include "doctest.h"
#include "rvrop/chain.hpp"

using namespace rvrop;
using namespace rvrop::chain;

namespace {

ChainFrame gadget_frame(Addr entry, std::int64_t a, std::int64_t b, std::string label = {}) {
  ChainFrame f;
  f.gadget = GadgetRef{entry, a, b, "NOP"};
  f.slots.assign(static_cast<std::size_t>(b / 8), Slot::constant(0));
  f.slots[static_cast<std::size_t>(a / 8)] = Slot::next_entry();
  f.label = std::move(label);
  return f;
}

ChainFrame halt_frame(Addr entry) {
  auto f = gadget_frame(entry, 8, 16, "halt");
  f.slots[1] = Slot::constant(0);
  return f;
}

ChainProgram sample() {
  ChainProgram p;
  p.base_sp = 0x40000000;
  p.frames.push_back(gadget_frame(0x10000, 8, 16, "first"));
  auto w = gadget_frame(0x10180, 8, 16, "write");
  w.slots[0] = Slot::label_ref("target", -8, "s0");
  p.frames.push_back(w);
  auto t = gadget_frame(0x100c0, 8, 16, "target");
  t.slots[0] = Slot::hole("stored");
  p.frames.push_back(t);
  auto e = gadget_frame(0x10000, 8, 16, "jump");
  e.slots[0] = Slot::entry_of("first");
  p.frames.push_back(e);
  p.frames.push_back(halt_frame(0x10000));
  p.fixups.push_back({1, "target", 0, 8});
  p.scratch.push_back({"tape", 64, std::nullopt});
  return p;
}

}  // namespace

TEST_SUITE("chain") {
  TEST_CASE("resolve lays frames out contiguously") {
    const auto r = resolve(sample());
    REQUIRE(r.resolved);
    CHECK(r.frame_bases == std::vector<Addr>{0x40000000, 0x40000010, 0x40000020, 0x40000030, 0x40000040});
    CHECK(r.frames[0].slots[1].value == 0x10180);
    CHECK(r.frames[1].slots[0].value == 0x40000018);
    CHECK(r.frames[2].slots[0].value == kHoleSentinel);
    CHECK(r.frames[3].slots[0].value == 0x10000);
    CHECK(r.labels.at("tape") == 0x40000050);
    CHECK(check_layout(r).empty());
    CHECK(check_self_mod_order(r).empty());
  }

  TEST_CASE("resolve errors") {
    auto p = sample();
    p.base_sp = 0x40000008;
    CHECK_THROWS_WITH_AS(resolve(p), doctest::Contains("16-aligned"), Error);

    p = sample();
    p.frames[1].slots[0] = Slot::label_ref("nowhere");
    try {
      resolve(p);
      FAIL("expected UnresolvedLabel");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnresolvedLabel);
    }

    p = sample();
    p.scratch.push_back({"clash", 16, Addr{0x40000010}});
    try {
      resolve(p);
      FAIL("expected RegionOverlap");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RegionOverlap);
    }

    p = sample();
    p.frames[0].slots.pop_back();
    try {
      resolve(p);
      FAIL("expected MalformedChain");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedChain);
    }

    p = sample();
    p.fixups[0].target = "tape";
    CHECK_THROWS_AS(resolve(p), Error);

    p = sample();
    p.frames.back().slots[1] = Slot::next_entry();
    CHECK_THROWS_AS(resolve(p), Error);
  }

  TEST_CASE("serialize round trip") {
    const auto r = resolve(sample());
    const auto img = flatten(r);
    CHECK(img.entry_gadget == 0x10000);
    CHECK(img.words.size() == 10);
    const auto bytes = serialize(r);
    CHECK(deserialize(bytes) == img);
    CHECK_THROWS_AS(serialize(sample()), Error);

    auto bad = bytes;
    bad[0] ^= 1;
    CHECK_THROWS_AS(deserialize(bad), Error);
    bad = bytes;
    bad.pop_back();
    CHECK_THROWS_AS(deserialize(bad), Error);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(deserialize(bad), Error);
    bad = bytes;
    bad[8] = 9;
    CHECK_THROWS_AS(deserialize(bad), Error);
    CHECK_THROWS_AS(deserialize(std::span<const std::uint8_t>(bytes.data(), 12)), Error);
  }

  TEST_CASE("listing marks ra slots and self-mod targets") {
    const auto text = listing(resolve(sample()));
    CHECK(text.find("# base_sp 0x40000000") != std::string::npos);
    CHECK(text.find("0x40000020: HOLE") != std::string::npos);
    CHECK(text.find("self-mod target") != std::string::npos);
    CHECK(text.find("# scratch tape") != std::string::npos);
    CHECK(listing(sample()).find("write+0x0") != std::string::npos);
  }

  TEST_CASE("self-mod order violations are found") {
    auto p = sample();
    std::swap(p.frames[1], p.frames[2]);
    p.fixups[0].source = 2;
    const auto bad = check_self_mod_order(p);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0] == "target");

    // a pivot that jumps past the writer
    auto q = sample();
    q.frames[0].pivot = true;
    q.frames[0].branch_targets = {"target"};
    CHECK(check_self_mod_order(q).size() == 1);
  }

  TEST_CASE("layout violations are found") {
    auto p = resolve(sample());
    p.frames[0].slots[1].value = 0x1234;
    CHECK(check_layout(p).size() == 1);
    p = resolve(sample());
    p.frame_bases[2] += 16;
    CHECK_FALSE(check_layout(p).empty());
    CHECK(check_layout(sample()).size() == 1);
  }
}
