#!/usr/bin/env python3
"""Freeze reference encodings from clang's RISC-V assembler.

Writes lines of `<assembly>\t<hex bytes>` for randomized operands. Run once
and commit the output; the C++ tests compare against it.

    python3 asm_oracle.py --count 12 > encodings.tsv
"""

import argparse
import os
import random
import struct
import subprocess
import sys
import tempfile

REGS = ["zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4", "a5",
        "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"]
CREGS = REGS[8:16]
NZ = REGS[1:]
FCREGS = [f"f{i}" for i in range(8, 16)]
FREGS = [f"f{i}" for i in range(32)]

R_OPS = ["add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and", "addw", "subw", "sllw", "srlw",
         "sraw", "mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu", "mulw", "divw", "divuw", "remw",
         "remuw"]
I_OPS = ["addi", "slti", "sltiu", "xori", "ori", "andi", "addiw"]
SHIFT64 = ["slli", "srli", "srai"]
SHIFT32 = ["slliw", "srliw", "sraiw"]
LOADS = ["lb", "lh", "lw", "ld", "lbu", "lhu", "lwu"]
STORES = ["sb", "sh", "sw", "sd"]
BRANCHES = ["beq", "bne", "blt", "bge", "bltu", "bgeu"]


def rnd_mult(lo, hi, m, nonzero=False):
    while True:
        v = random.randrange(lo // m, hi // m + 1) * m
        if not nonzero or v != 0:
            return v


def gen_base():
    c = random.choice
    r = random.randint
    kind = c(["r", "i", "s64", "s32", "ld", "st", "br", "jal", "jalr", "u", "sys"])
    if kind == "r":
        return f"{c(R_OPS)} {c(REGS)}, {c(REGS)}, {c(REGS)}"
    if kind == "i":
        return f"{c(I_OPS)} {c(REGS)}, {c(REGS)}, {r(-2048, 2047)}"
    if kind == "s64":
        return f"{c(SHIFT64)} {c(REGS)}, {c(REGS)}, {r(0, 63)}"
    if kind == "s32":
        return f"{c(SHIFT32)} {c(REGS)}, {c(REGS)}, {r(0, 31)}"
    if kind == "ld":
        return f"{c(LOADS)} {c(REGS)}, {r(-2048, 2047)}({c(REGS)})"
    if kind == "st":
        return f"{c(STORES)} {c(REGS)}, {r(-2048, 2047)}({c(REGS)})"
    if kind == "br":
        return f"{c(BRANCHES)} {c(REGS)}, {c(REGS)}, {rnd_mult(-4096, 4094, 2)}"
    if kind == "jal":
        return f"jal {c(REGS)}, {rnd_mult(-(1 << 20), (1 << 20) - 2, 2)}"
    if kind == "jalr":
        return f"jalr {c(REGS)}, {c(REGS)}, {r(-2048, 2047)}"
    if kind == "u":
        return f"{c(['lui', 'auipc'])} {c(REGS)}, {r(0, 0xfffff)}"
    return c(["ecall", "ebreak"])


def gen_compressed():
    c = random.choice
    r = random.randint
    forms = [
        lambda: f"c.addi4spn {c(CREGS)}, sp, {rnd_mult(4, 1020, 4)}",
        lambda: f"c.fld {c(FCREGS)}, {rnd_mult(0, 248, 8)}({c(CREGS)})",
        lambda: f"c.lw {c(CREGS)}, {rnd_mult(0, 124, 4)}({c(CREGS)})",
        lambda: f"c.ld {c(CREGS)}, {rnd_mult(0, 248, 8)}({c(CREGS)})",
        lambda: f"c.fsd {c(FCREGS)}, {rnd_mult(0, 248, 8)}({c(CREGS)})",
        lambda: f"c.sw {c(CREGS)}, {rnd_mult(0, 124, 4)}({c(CREGS)})",
        lambda: f"c.sd {c(CREGS)}, {rnd_mult(0, 248, 8)}({c(CREGS)})",
        lambda: "c.nop",
        lambda: f"c.addi {c(NZ)}, {c([v for v in range(-32, 32) if v])}",
        lambda: f"c.addiw {c(NZ)}, {r(-32, 31)}",
        lambda: f"c.li {c(NZ)}, {r(-32, 31)}",
        lambda: f"c.addi16sp sp, {rnd_mult(-512, 496, 16, nonzero=True)}",
        lambda: f"c.lui {c([x for x in NZ if x != 'sp'])}, {c(list(range(1, 32)) + list(range(0xfffe0, 0x100000)))}",
        lambda: f"c.srli {c(CREGS)}, {r(1, 63)}",
        lambda: f"c.srai {c(CREGS)}, {r(1, 63)}",
        lambda: f"c.andi {c(CREGS)}, {r(-32, 31)}",
        lambda: f"{c(['c.sub', 'c.xor', 'c.or', 'c.and', 'c.subw', 'c.addw'])} {c(CREGS)}, {c(CREGS)}",
        lambda: f"c.j {rnd_mult(-2048, 2046, 2)}",
        lambda: f"{c(['c.beqz', 'c.bnez'])} {c(CREGS)}, {rnd_mult(-256, 254, 2)}",
        lambda: f"c.slli {c(NZ)}, {r(1, 63)}",
        lambda: f"c.fldsp {c(FREGS)}, {rnd_mult(0, 504, 8)}(sp)",
        lambda: f"c.lwsp {c(NZ)}, {rnd_mult(0, 252, 4)}(sp)",
        lambda: f"c.ldsp {c(NZ)}, {rnd_mult(0, 504, 8)}(sp)",
        lambda: f"c.fsdsp {c(FREGS)}, {rnd_mult(0, 504, 8)}(sp)",
        lambda: f"c.swsp {c(REGS)}, {rnd_mult(0, 252, 4)}(sp)",
        lambda: f"c.sdsp {c(REGS)}, {rnd_mult(0, 504, 8)}(sp)",
        lambda: f"c.jr {c(NZ)}",
        lambda: f"c.mv {c(NZ)}, {c(NZ)}",
        lambda: "c.ebreak",
        lambda: f"c.jalr {c(NZ)}",
        lambda: f"c.add {c(NZ)}, {c(NZ)}",
    ]
    return c(forms)()


def text_section(obj):
    data = open(obj, "rb").read()
    shoff, = struct.unpack_from("<Q", data, 0x28)
    shentsize, shnum, shstrndx = struct.unpack_from("<HHH", data, 0x3A)
    sections = []
    for i in range(shnum):
        name, _, _, _, off, size = struct.unpack_from("<IIQQQQ", data, shoff + i * shentsize)
        sections.append((name, off, size))
    strtab = sections[shstrndx]
    for name, off, size in sections:
        end = data.index(b"\0", strtab[1] + name)
        if data[strtab[1] + name:end] == b".text":
            return data[off:off + size]
    raise RuntimeError("no .text")


def assemble(lines):
    with tempfile.TemporaryDirectory() as d:
        src = os.path.join(d, "in.s")
        obj = os.path.join(d, "in.o")
        with open(src, "w") as f:
            for line in lines:
                f.write((".option rvc\n" if line.startswith("c.") else ".option norvc\n") + line + "\n")
        subprocess.run(["clang", "--target=riscv64", "-march=rv64gc", "-c", src, "-o", obj], check=True)
        return text_section(obj)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()
    random.seed(args.seed)
    lines = [gen_base() if i % 2 else gen_compressed() for i in range(args.count)]
    text = assemble(lines)
    pos = 0
    out = sys.stdout
    out.write("# clang --target=riscv64 -march=rv64gc, seed %d\n" % args.seed)
    for line in lines:
        n = 4 if text[pos] & 3 == 3 else 2
        out.write(f"{line}\t{text[pos:pos + n].hex(' ')}\n")
        pos += n
    if pos != len(text):
        raise RuntimeError("length mismatch")


if __name__ == "__main__":
    main()
