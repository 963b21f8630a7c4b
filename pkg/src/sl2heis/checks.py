"""Algebra self-checks: structure constants, Jacobi, and Ad closed forms.

These are the cheap invariants everything else rests on, packaged so the
command-line front end and the test suite run the identical code.
"""

from __future__ import annotations

import numpy as np

from .algebra import (
    AlgebraElement,
    bracket,
    gen_a,
    gen_b,
    gen_c,
    gen_x,
    gen_y,
    gen_z,
)
from .group import adjoint
from .group import exp as group_exp

AD_GRID = (-2.0, -1.0, -0.1, 0.1, 1.0, 2.0)


def bracket_table_residual(d: int = 1) -> float:
    """Largest deviation of bracket() from the structure-constant table."""
    a, b, c, z = gen_a(d), gen_b(d), gen_c(d), gen_z(d)
    zero = AlgebraElement(d)
    pairs = [
        (bracket(b, a), c),
        (bracket(a, c), 2.0 * a),
        (bracket(b, c), -2.0 * b),
        (bracket(a, z), zero),
        (bracket(b, z), zero),
        (bracket(c, z), zero),
    ]
    for i in range(d):
        x_i, y_i = gen_x(i, d), gen_y(i, d)
        pairs += [
            (bracket(x_i, y_i), z),
            (bracket(a, x_i), y_i),
            (bracket(b, x_i), zero),
            (bracket(c, x_i), x_i),
            (bracket(a, y_i), zero),
            (bracket(b, y_i), x_i),
            (bracket(c, y_i), -1.0 * y_i),
            (bracket(z, x_i), zero),
            (bracket(z, y_i), zero),
        ]
        for j in range(d):
            if j != i:
                pairs.append((bracket(x_i, gen_y(j, d)), zero))
    return max((got - want).norm() for got, want in pairs)


def _random_element(d: int, rng: np.random.Generator) -> AlgebraElement:
    return AlgebraElement(
        d,
        a=rng.standard_normal(),
        b=rng.standard_normal(),
        c=rng.standard_normal(),
        xi=rng.standard_normal(d),
        eta=rng.standard_normal(d),
        zeta=rng.standard_normal(),
    )


def jacobi_residual(d: int = 1, seed: int = 1234, samples: int = 200) -> float:
    """Largest Jacobi-identity violation over random triples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x, y, w = (_random_element(d, rng) for _ in range(3))
        total = (
            bracket(x, bracket(y, w))
            + bracket(y, bracket(w, x))
            + bracket(w, bracket(x, y))
        )
        worst = max(worst, total.norm())
    return worst


def ad_closed_form_residual(d: int = 1) -> float:
    """Relative error of the three Ad closed forms over the standard grid.

    Ad(e^{v b})(tau a) = tau a + v tau c - v^2 tau b,
    Ad(e^{v c})(a)     = e^{-2v} a,
    Ad(e^{v X_1})(tau a) = tau a - v tau Y_1 - (v^2 tau / 2) Z.
    """
    a, b, c = gen_a(d), gen_b(d), gen_c(d)
    x1, y1, z = gen_x(0, d), gen_y(0, d), gen_z(d)
    worst = 0.0
    for v in AD_GRID:
        got = adjoint(group_exp(v * c), a)
        want = np.exp(-2.0 * v) * a
        worst = max(worst, (got - want).norm() / want.norm())
        for tau in AD_GRID:
            got = adjoint(group_exp(v * b), tau * a)
            want = tau * a + v * tau * c - v * v * tau * b
            worst = max(worst, (got - want).norm() / want.norm())

            got = adjoint(group_exp(v * x1), tau * a)
            want = tau * a - v * tau * y1 - 0.5 * v * v * tau * z
            worst = max(worst, (got - want).norm() / want.norm())
    return worst


def check_algebra(d: int = 1, seed: int = 1234, samples: int = 200, tol: float = 1e-9) -> dict:
    residuals = {
        "bracket_table": bracket_table_residual(d),
        "jacobi": jacobi_residual(d, seed, samples),
        "ad_closed_forms": ad_closed_form_residual(d),
    }
    return {
        "ok": bool(max(residuals.values()) <= tol),
        "tol": tol,
        "d": d,
        "seed": seed,
        "samples": samples,
        "residuals": residuals,
    }
