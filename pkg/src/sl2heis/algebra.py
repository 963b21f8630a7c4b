"""The Lie algebra sl2(R) acting on d Heisenberg pairs.

Elements live in the semidirect sum sl2(R) + h_d(R).  We write them in the
basis {a, b, c, X_1..X_d, Y_1..Y_d, Z} with the nonzero brackets

    [b, a] = c        [a, c] = 2a       [b, c] = -2b
    [X_i, Y_i] = Z
    [a, X_i] = Y_i    [b, Y_i] = X_i
    [c, X_i] = X_i    [c, Y_i] = -Y_i

and Z central.  The sl2 part is realized by 2x2 traceless matrices

    A = [[0, 1], [0, 0]],  B = [[0, 0], [1, 0]],  C = [[-1, 0], [0, 1]],

so that the matrix commutator reproduces the first row of the table.  The
derivation action on a symplectic pair (x_i, y_i), stacked as a column, is
then given by the swap conjugate s M s with s = [[0, 1], [1, 0]]:

    a -> [[0, 0], [1, 0]],  b -> [[0, 1], [0, 0]],  c -> [[1, 0], [0, -1]].

Everything downstream (group exponential, adjoint, simulation) works in
this default realization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._json import flist, fnum

_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def _as_pair_vector(v, d: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape == () and d == 1:
        arr = arr.reshape(1)
    if arr.shape != (d,):
        raise ValueError(f"{name} must have shape ({d},), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """An element a*A + b*B + c*C + sum_i (xi_i X_i + eta_i Y_i) + zeta*Z."""

    d: int
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    xi: np.ndarray = field(default=None)
    eta: np.ndarray = field(default=None)
    zeta: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be a positive integer")
        xi = np.zeros(self.d) if self.xi is None else _as_pair_vector(self.xi, self.d, "xi")
        eta = np.zeros(self.d) if self.eta is None else _as_pair_vector(self.eta, self.d, "eta")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "zeta", float(self.zeta))

    def sl2_matrix(self) -> np.ndarray:
        """The 2x2 matrix of the sl2 part in the default realization."""
        return (
            self.a * DEFAULT_REALIZATION.A
            + self.b * DEFAULT_REALIZATION.B
            + self.c * DEFAULT_REALIZATION.C
        )

    def pairs(self) -> np.ndarray:
        """Heisenberg pair coordinates as a (2, d) array, row 0 = xi."""
        return np.vstack([self.xi, self.eta])

    def norm(self) -> float:
        return float(
            np.sqrt(
                self.a**2
                + self.b**2
                + self.c**2
                + np.sum(self.xi**2)
                + np.sum(self.eta**2)
                + self.zeta**2
            )
        )

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        if self.d != other.d:
            raise ValueError("cannot add elements with different d")
        return AlgebraElement(
            self.d,
            self.a + other.a,
            self.b + other.b,
            self.c + other.c,
            self.xi + other.xi,
            self.eta + other.eta,
            self.zeta + other.zeta,
        )

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return self + (-other)

    def __neg__(self) -> "AlgebraElement":
        return self * -1.0

    def __mul__(self, t: float) -> "AlgebraElement":
        t = float(t)
        return AlgebraElement(
            self.d, t * self.a, t * self.b, t * self.c, t * self.xi, t * self.eta, t * self.zeta
        )

    __rmul__ = __mul__

    def allclose(self, other: "AlgebraElement", atol: float = 1e-12) -> bool:
        return (
            self.d == other.d
            and abs(self.a - other.a) <= atol
            and abs(self.b - other.b) <= atol
            and abs(self.c - other.c) <= atol
            and bool(np.all(np.abs(self.xi - other.xi) <= atol))
            and bool(np.all(np.abs(self.eta - other.eta) <= atol))
            and abs(self.zeta - other.zeta) <= atol
        )

    def to_json(self) -> str:
        return (
            "{"
            + f'"d": {self.d}, '
            + f'"a": {fnum(self.a)}, "b": {fnum(self.b)}, "c": {fnum(self.c)}, '
            + f'"xi": {flist(self.xi)}, "eta": {flist(self.eta)}, '
            + f'"zeta": {fnum(self.zeta)}'
            + "}"
        )

    @staticmethod
    def from_json(text: str) -> "AlgebraElement":
        obj = json.loads(text)
        return AlgebraElement(
            d=int(obj["d"]),
            a=float(obj.get("a", 0.0)),
            b=float(obj.get("b", 0.0)),
            c=float(obj.get("c", 0.0)),
            xi=obj.get("xi", None),
            eta=obj.get("eta", None),
            zeta=float(obj.get("zeta", 0.0)),
        )

    def __repr__(self):
        return (
            f"AlgebraElement(d={self.d}, a={self.a}, b={self.b}, c={self.c}, "
            f"xi={self.xi.tolist()}, eta={self.eta.tolist()}, zeta={self.zeta})"
        )


def gen_a(d: int = 1) -> AlgebraElement:
    return AlgebraElement(d, a=1.0)


def gen_b(d: int = 1) -> AlgebraElement:
    return AlgebraElement(d, b=1.0)


def gen_c(d: int = 1) -> AlgebraElement:
    return AlgebraElement(d, c=1.0)


def gen_x(i: int = 0, d: int = 1) -> AlgebraElement:
    xi = np.zeros(d)
    xi[i] = 1.0
    return AlgebraElement(d, xi=xi)


def gen_y(i: int = 0, d: int = 1) -> AlgebraElement:
    eta = np.zeros(d)
    eta[i] = 1.0
    return AlgebraElement(d, eta=eta)


def gen_z(d: int = 1) -> AlgebraElement:
    return AlgebraElement(d, zeta=1.0)


@dataclass(frozen=True)
class BasisRealization:
    """A triple of 2x2 matrices realizing the sl2 relations.

    ``validate`` checks [B, A] = C, [A, C] = 2A, [B, C] = -2B and linear
    independence; ``decompose`` solves M = alpha*A + beta*B + gamma*C.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "C"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (2, 2):
                raise ValueError(f"{name} must be a 2x2 matrix")
            object.__setattr__(self, name, m)

    def validate(self, tol: float = 1e-12) -> None:
        comm = lambda p, q: p @ q - q @ p
        checks = [
            ("[B, A] = C", comm(self.B, self.A) - self.C),
            ("[A, C] = 2A", comm(self.A, self.C) - 2.0 * self.A),
            ("[B, C] = -2B", comm(self.B, self.C) + 2.0 * self.B),
        ]
        for label, resid in checks:
            err = float(np.max(np.abs(resid)))
            if err > tol:
                raise ValueError(f"realization violates {label} (max residual {err:.3e})")
        stack = np.column_stack([self.A.ravel(), self.B.ravel(), self.C.ravel()])
        if np.linalg.matrix_rank(stack) != 3:
            raise ValueError("realization matrices are linearly dependent")

    def decompose(self, M, tol: float = 1e-10):
        """Coefficients (alpha, beta, gamma) with M = alpha*A + beta*B + gamma*C."""
        M = np.asarray(M, dtype=float)
        stack = np.column_stack([self.A.ravel(), self.B.ravel(), self.C.ravel()])
        coef, *_ = np.linalg.lstsq(stack, M.ravel(), rcond=None)
        resid = float(np.max(np.abs(stack @ coef - M.ravel())))
        if resid > tol:
            raise ValueError(f"matrix is not in the span of the realization (residual {resid:.3e})")
        return float(coef[0]), float(coef[1]), float(coef[2])

    def compose(self, alpha: float, beta: float, gamma: float) -> np.ndarray:
        return alpha * self.A + beta * self.B + gamma * self.C


DEFAULT_REALIZATION = BasisRealization(
    A=np.array([[0.0, 1.0], [0.0, 0.0]]),
    B=np.array([[0.0, 0.0], [1.0, 0.0]]),
    C=np.array([[-1.0, 0.0], [0.0, 1.0]]),
)
DEFAULT_REALIZATION.validate()


def pair_derivation(M) -> np.ndarray:
    """Derivation matrix acting on a stacked pair (x_i, y_i).

    For the default realization this is conjugation by the swap matrix,
    which sends A, B, C to the pair actions of a, b, c listed in the
    module docstring.
    """
    return _SWAP @ np.asarray(M, dtype=float) @ _SWAP


def omega(p1: np.ndarray, p2: np.ndarray) -> float:
    """Symplectic form sum_i (x1_i y2_i - y1_i x2_i) on stacked (2, d) pairs."""
    return float(np.dot(p1[0], p2[1]) - np.dot(p1[1], p2[0]))


def bracket(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """Lie bracket [x, y] in sl2(R) + h_d(R)."""
    if x.d != y.d:
        raise ValueError("cannot bracket elements with different d")
    Mx, My = x.sl2_matrix(), y.sl2_matrix()
    alpha, beta, gamma = DEFAULT_REALIZATION.decompose(Mx @ My - My @ Mx)
    px, py = x.pairs(), y.pairs()
    pair = pair_derivation(Mx) @ py - pair_derivation(My) @ px
    return AlgebraElement(
        x.d, a=alpha, b=beta, c=gamma, xi=pair[0], eta=pair[1], zeta=omega(px, py)
    )


def rho_apply(m: AlgebraElement, h: AlgebraElement) -> AlgebraElement:
    """Apply the derivation of the sl2 part of m to the pair part of h.

    This is the restriction of ``bracket(m, h)`` when m is pure sl2 and h
    is pure Heisenberg; the center is annihilated.
    """
    if m.d != h.d:
        raise ValueError("dimension mismatch")
    if h.a != 0.0 or h.b != 0.0 or h.c != 0.0:
        raise ValueError("rho acts on pure Heisenberg elements; h has an sl2 part")
    pair = pair_derivation(m.sl2_matrix()) @ h.pairs()
    return AlgebraElement(m.d, xi=pair[0], eta=pair[1])
