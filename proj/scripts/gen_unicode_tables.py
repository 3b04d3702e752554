#!/usr/bin/env python3
"""Regenerate include/lmprobe/unicode_tables.hpp.

Emits sorted codepoint ranges for the Unicode general categories the
byte-level BPE pre-tokenizer needs (L* letters, N* numbers) plus the
White_Space set. Run with the CPython build whose unicodedata you want
to pin and commit the result.
"""

import sys
import unicodedata

WHITESPACE = [
    0x0009, 0x000A, 0x000B, 0x000C, 0x000D, 0x0020, 0x0085, 0x00A0,
    0x1680, 0x2000, 0x2001, 0x2002, 0x2003, 0x2004, 0x2005, 0x2006,
    0x2007, 0x2008, 0x2009, 0x200A, 0x2028, 0x2029, 0x202F, 0x205F,
    0x3000,
]


def ranges_for(prefix: str):
    ranges = []
    start = None
    for cp in range(0x110000):
        cat = unicodedata.category(chr(cp))
        if cat.startswith(prefix):
            if start is None:
                start = cp
        else:
            if start is not None:
                ranges.append((start, cp - 1))
                start = None
    if start is not None:
        ranges.append((start, 0x10FFFF))
    return ranges


def emit(out, name, ranges):
    out.write(f"inline constexpr CodepointRange {name}[] = {{\n")
    for i in range(0, len(ranges), 4):
        chunk = ", ".join(f"{{0x{a:X}, 0x{b:X}}}" for a, b in ranges[i:i + 4])
        out.write(f"    {chunk},\n")
    out.write("};\n\n")


def main():
    letters = ranges_for("L")
    numbers = ranges_for("N")
    out = sys.stdout
    out.write("// Generated by scripts/gen_unicode_tables.py (unicodedata "
              f"{unicodedata.unidata_version}). Do not edit by hand.\n")
    out.write("#pragma once\n\n#include <cstdint>\n\n")
    out.write("namespace lmprobe::uni {\n\n")
    out.write("struct CodepointRange {\n    uint32_t first;\n    uint32_t last;\n};\n\n")
    emit(out, "kLetterRanges", letters)
    emit(out, "kNumberRanges", numbers)
    emit(out, "kWhitespace", [(c, c) for c in WHITESPACE])
    out.write("}  // namespace lmprobe::uni\n")


if __name__ == "__main__":
    main()
