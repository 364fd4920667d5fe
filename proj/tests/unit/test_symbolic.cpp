#include "doctest.h"
#include "rvrop/symbolic.hpp"

using namespace rvrop;
using namespace rvrop::sym;
using isa::Reg;

TEST_SUITE("symbolic") {
  TEST_CASE("constant folding and offset normalization") {
    CHECK(const_value(binary(Op::Add, constant(2), constant(3))) == 5u);
    CHECK(const_value(reg(Reg::zero)) == 0u);
    const auto e = binary(Op::Sub, add(reg(Reg::sp), 0x40), constant(0x10));
    const auto ro = as_reg_offset(e);
    REQUIRE(ro);
    CHECK(ro->first == Reg::sp);
    CHECK(ro->second == 0x30);
    CHECK(equal(add(reg(Reg::a0), 0), reg(Reg::a0)));
    CHECK(equal(binary(Op::Or, reg(Reg::a1), constant(0)), reg(Reg::a1)));
  }

  TEST_CASE("stack slots") {
    CHECK(as_stack_slot(load(add(reg(Reg::sp), 0x28), 8, false)) == 0x28);
    CHECK_FALSE(as_stack_slot(load(add(reg(Reg::a0), 8), 8, false)).has_value());
    CHECK_FALSE(as_stack_slot(load(add(reg(Reg::sp), 8), 4, true)).has_value());
  }

  TEST_CASE("evaluation") {
    Env env;
    env.regs[isa::index(Reg::a0)] = 0x1000;
    env.regs[isa::index(Reg::a5)] = 3;
    env.read = [](std::uint64_t addr, unsigned width) -> std::uint64_t {
      if (addr == 0x1008) return width == 8 ? 7 : 0xff;
      return 0;
    };
    const auto e = add(load(add(reg(Reg::a0), 8), 8, false), reg(Reg::a5));
    CHECK(eval(e, env) == 10);
    CHECK(eval(load(add(reg(Reg::a0), 8), 1, true), env) == ~std::uint64_t{0});
    CHECK(eval(load(add(reg(Reg::a0), 8), 1, false), env) == 0xff);
    CHECK(eval(binary(Op::Addw, constant(0x7fffffff), constant(1)), env) == 0xffffffff80000000ull);
    CHECK(eval(binary(Op::Divu, constant(5), constant(0)), env) == ~std::uint64_t{0});
    CHECK_THROWS_AS(eval(unknown(), env), Error);
    CHECK(contains_unknown(add(unknown(), 1)));
  }

  TEST_CASE("conditions") {
    Env env;
    env.regs[isa::index(Reg::a4)] = 5;
    env.regs[isa::index(Reg::a5)] = 5;
    const Cond c{Cmp::Eq, reg(Reg::a4), reg(Reg::a5)};
    CHECK(c.holds(env));
    CHECK_FALSE(c.negated().holds(env));
    CHECK(equal(c.negated().negated(), c));
    env.regs[isa::index(Reg::a5)] = static_cast<std::uint64_t>(-1);
    CHECK(Cond{Cmp::Lt, reg(Reg::a5), reg(Reg::a4)}.holds(env));
    CHECK_FALSE(Cond{Cmp::Ltu, reg(Reg::a5), reg(Reg::a4)}.holds(env));
  }

  TEST_CASE("printing") {
    CHECK(to_string(add(load(add(reg(Reg::a0), 8), 8, false), reg(Reg::a5))) == "mem[a00 + 0x8] + a50");
  }
}
