#include "doctest.h"
#include "rvrop/image.hpp"
#include "support.hpp"

using namespace rvrop;

namespace {

ErrorCode load_error(std::vector<std::uint8_t> bytes) {
  try {
    image::load_elf(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("load succeeded");
  return ErrorCode::ParseError;
}

}  // namespace

TEST_SUITE("image") {
  TEST_CASE("elf round trip keeps segments and symbols") {
    const auto& img = testing::synthetic().image;
    const auto back = image::load_elf(image::write_elf(img));
    REQUIRE(back.segments().size() == img.segments().size());
    for (std::size_t i = 0; i < img.segments().size(); ++i) {
      CHECK(back.segments()[i].base == img.segments()[i].base);
      CHECK(back.segments()[i].bytes == img.segments()[i].bytes);
      CHECK(back.segments()[i].perms == img.segments()[i].perms);
    }
    CHECK(back.symbols() == img.symbols());
  }

  TEST_CASE("elf header validation") {
    const auto good = image::write_elf(testing::synthetic().image);
    auto wrong_machine = good;
    wrong_machine[18] = 0x3e;
    CHECK(load_error(wrong_machine) == ErrorCode::WrongMachine);
    auto wrong_class = good;
    wrong_class[4] = 1;
    CHECK(load_error(wrong_class) == ErrorCode::WrongClass);
    auto bad_magic = good;
    bad_magic[1] = 'X';
    CHECK(load_error(bad_magic) == ErrorCode::MalformedElf);
    CHECK(load_error({good.begin(), good.begin() + 40}) == ErrorCode::MalformedElf);
    CHECK(load_error({good.begin(), good.begin() + 200}) == ErrorCode::MalformedElf);
  }

  TEST_CASE("raw images") {
    const std::vector<std::uint8_t> code{0x82, 0x80};
    const auto img = image::load_raw(code, 0x4000);
    REQUIRE(img.segments().size() == 1);
    CHECK(img.segments()[0].executable());
    CHECK(img.read_mem(0x4000, 2)[0] == 0x82);
    CHECK_THROWS_AS(image::load_raw(code, 0x4001), Error);
    CHECK_THROWS_AS(img.read_mem(0x4001, 2), Error);
  }

  TEST_CASE("segment invariants") {
    image::Segment a{0x1000, std::vector<std::uint8_t>(0x100), image::kRead | image::kExec};
    image::Segment b{0x1080, std::vector<std::uint8_t>(0x100), image::kRead};
    CHECK_THROWS_AS(image::MemoryImage({a, b}), Error);
    image::Segment odd{0x2001, std::vector<std::uint8_t>(4), image::kRead | image::kExec};
    CHECK_THROWS_AS(image::MemoryImage({odd}), Error);
  }

  TEST_CASE("load_file dispatches on magic") {
    CHECK_THROWS_AS(image::load_file(testing::data_path("no/such/file")), Error);
    const auto img = image::load_file(testing::data_path("bf/hello.b"), 0x8000);
    CHECK(img.segments().front().base == 0x8000);
  }
}
