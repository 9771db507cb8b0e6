#!/usr/bin/env python3
"""Write imaginary parts of the first COUNT nontrivial zeta zeros, one per line.

Usage: gen_zeros.py COUNT DIGITS > zeros.txt
"""
import sys

import mpmath


def main():
    count = int(sys.argv[1])
    digits = int(sys.argv[2])
    mpmath.mp.dps = digits + 20
    print(f"# imaginary parts of the first {count} nontrivial zeros of zeta")
    print(f"# {digits} significant digits, computed with mpmath {mpmath.__version__}")
    for k in range(1, count + 1):
        g = mpmath.zetazero(k).imag
        print(mpmath.nstr(g, digits, strip_zeros=False))


if __name__ == "__main__":
    main()
