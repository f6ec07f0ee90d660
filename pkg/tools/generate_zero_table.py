#!/usr/bin/env python3
"""Regenerate the packaged table of nontrivial zeta zero ordinates.

One-time developer tool; the package itself never imports mpmath. Writes
src/primezero/data/zeta_zeros.txt in the zero-table text format the library
ingests (one ascending ordinate per line, '#' comments).
"""
import pathlib

import mpmath

N_ZEROS = 650
OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "primezero" / "data" / "zeta_zeros.txt"


def main():
    mpmath.mp.dps = 30
    lines = [
        "# Ordinates of the first %d nontrivial zeta zeros (positive imaginary parts)." % N_ZEROS,
        "# 18 significant digits; ascending; regenerate with tools/generate_zero_table.py",
    ]
    for k in range(1, N_ZEROS + 1):
        g = mpmath.zetazero(k).imag
        lines.append(mpmath.nstr(g, 18))
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("wrote", OUT, "last ordinate", lines[-1])


if __name__ == "__main__":
    main()
