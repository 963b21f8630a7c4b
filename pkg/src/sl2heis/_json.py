"""Helpers for writing JSON with full float precision.

Python's ``repr`` of a float already round-trips, but we pin the output to
17 significant digits so files are byte-stable across interpreter versions.
Parsing is ordinary ``json.loads``; only the writers are custom.
"""

import math


def fnum(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("cannot serialize non-finite float %r" % x)
    s = format(x, ".17g")
    # normalize "-0" so identical values serialize identically
    return "0" if s == "-0" else s


def flist(xs) -> str:
    return "[" + ", ".join(fnum(x) for x in xs) + "]"


def fmatrix(m) -> str:
    return "[" + ", ".join(flist(row) for row in m) + "]"
