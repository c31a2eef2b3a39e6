#!/usr/bin/env python3
"""Regenerate src/cropforge/_sobol_tables.py.

The primitive polynomials and initial direction numbers are the classic
Joe-Kuo "new-joe-kuo-6.21201" set; scipy ships the full 21201-dimension
table, from which the first 64 dimensions are extracted and frozen here so
the package itself does not depend on scipy.

Usage: python tools/generate_sobol_tables.py
"""

import pathlib

import numpy as np
from scipy.stats._sobol import get_poly_vinit

MAX_DIM = 64

HEADER = '''"""Primitive polynomials and initial direction numbers for the Sobol
generator, dimensions 1..%d (Joe-Kuo set).

Generated by tools/generate_sobol_tables.py; do not edit by hand.
"""

''' % MAX_DIM


def main():
    poly = get_poly_vinit("poly", np.uint32)
    vinit = get_poly_vinit("vinit", np.uint64)
    polys, minit = [], []
    for d in range(MAX_DIM):
        p = int(poly[d])
        degree = p.bit_length() - 1
        polys.append(p)
        minit.append([int(x) for x in vinit[d, :degree]])

    out = pathlib.Path(__file__).resolve().parents[1] / "src/cropforge/_sobol_tables.py"
    with out.open("w") as f:
        f.write(HEADER)
        f.write(f"MAX_DIMENSION = {MAX_DIM}\n\n")
        f.write("# Full binary encoding of each primitive polynomial.\n")
        f.write(f"POLYNOMIALS = {tuple(polys)!r}\n\n")
        f.write("# Initial m values per dimension (degree entries each).\n")
        f.write("INITIAL_M = (\n")
        for m in minit:
            f.write(f"    {tuple(m)!r},\n")
        f.write(")\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
