"""Classical phase-space transport under the controlled oscillator.

The Hamiltonian |p|^2/2 + u0 |q|^2/2 + u.q is quadratic, so every control
segment generates an exact affine symplectic flow and a transported density
is a pullback of the initial one through a closed-form map.  There is no
time stepping anywhere in this module; Lp errors of an experiment measure
control synthesis quality only, never numerical diffusion.

Coordinates are ordered (q_1..q_d, p_1..p_d).  The correspondence with the
group layer is through the dictionary Lambda0 (see ``lambda0``) composed
with the control involution (negate u0, u, r): for every schedule s,

    lambda0(simulate(negated_controls(s))) == schedule_map(s).

Both sides compose earlier-segment-outermost, and the two generator pins
(free drift maps to the shear (q + t p, p), a u0 pulse of weight w maps to
(q, p - w q)) fix the orientation once; ``correspondence_check`` re-verifies
them on demand.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from ._json import fnum
from .group import GroupElement
from .schedule import ControlSchedule, ControlSegment, negated_controls
from .simulate import simulate
from .synth import plan_target

_SYMPLECTIC_TOL = 1e-10
_U0_LINEAR = 1e-12
_EPS_MACHINE = 2.2204460492503131e-16


class SupportEscapeError(RuntimeError):
    """Pullback needed density values outside the source's sampled domain."""


def _symplectic_j(d: int) -> np.ndarray:
    j = np.zeros((2 * d, 2 * d))
    j[:d, d:] = np.eye(d)
    j[d:, :d] = -np.eye(d)
    return j


def _resymplectified(m: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Project M back onto the symplectic manifold (one Newton step per pass).

    With E = M^T J M - J (antisymmetric), M(I + JE/2) cancels the defect to
    first order.  Rounding in long products of strong-pulse maps legitimately
    produces defects of order ||M||^2 u, far above the strict tolerance, and
    this projection removes exactly that drift without touching the map
    otherwise.  Matrices that are not symplectic to within their own rounding
    scale stay as they are and fail validation.
    """
    scale = max(1.0, float(np.max(np.abs(m))) ** 2)
    for _ in range(2):
        e = m.T @ j @ m - j
        defect = float(np.max(np.abs(e)))
        if defect <= 1e-14 * scale:
            break
        if defect > 1e-6 * scale:
            break  # genuinely wrong, not rounding drift
        m = m @ (np.eye(m.shape[0]) + 0.5 * (j @ e))
    return m


@dataclass(frozen=True, eq=False)
class AffineSymplecticMap:
    """x -> M x + b on phase space, with M symplectic."""

    d: int
    M: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.M, dtype=float)
        b = np.asarray(self.b, dtype=float)
        n = 2 * self.d
        if m.shape != (n, n) or b.shape != (n,):
            raise ValueError(f"need a {n}x{n} matrix and length-{n} shift")
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite affine map")
        j = _symplectic_j(self.d)
        m = _resymplectified(m, j)
        # the acceptance band widens with the rounding scale of M^T J M
        tol = max(_SYMPLECTIC_TOL, 64.0 * n * float(np.max(np.abs(m))) ** 2 * _EPS_MACHINE)
        if np.max(np.abs(m.T @ j @ m - j)) > tol:
            raise ValueError("linear part is not symplectic")
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "b", b)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to points of shape (2d,) or (2d, n)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            return self.M @ pts + self.b
        return self.M @ pts + self.b[:, None]

    def compose(self, other: "AffineSymplecticMap") -> "AffineSymplecticMap":
        """self after other: (self.compose(other))(x) = self(other(x))."""
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return AffineSymplecticMap(self.d, self.M @ other.M, self.M @ other.b + self.b)

    def inverse(self) -> "AffineSymplecticMap":
        j = _symplectic_j(self.d)
        m_inv = -j @ self.M.T @ j  # symplectic inverse, exact up to rounding
        return AffineSymplecticMap(self.d, m_inv, -(m_inv @ self.b))

    def allclose(self, other: "AffineSymplecticMap", atol: float = 1e-12) -> bool:
        return (
            self.d == other.d
            and np.max(np.abs(self.M - other.M)) <= atol
            and np.max(np.abs(self.b - other.b)) <= atol
        )

    def deviation(self, other: "AffineSymplecticMap") -> float:
        return float(np.max(np.abs(self.M - other.M)) + np.max(np.abs(self.b - other.b)))

    def __repr__(self):
        return f"AffineSymplecticMap(d={self.d})"


def identity_map(d: int = 1) -> AffineSymplecticMap:
    return AffineSymplecticMap(d, np.eye(2 * d), np.zeros(2 * d))


def _axis_flow(u0: float, dt: float):
    """2x2 linear flow of q' = p, p' = -u0 q over time dt."""
    if u0 > _U0_LINEAR:
        w = math.sqrt(u0)
        cw, sw = math.cos(w * dt), math.sin(w * dt)
        return np.array([[cw, sw / w], [-w * sw, cw]])
    if u0 < -_U0_LINEAR:
        w = math.sqrt(-u0)
        ch, sh = math.cosh(w * dt), math.sinh(w * dt)
        return np.array([[ch, sh / w], [w * sh, ch]])
    return np.array([[1.0, dt], [0.0, 1.0]])


def segment_map(seg: ControlSegment, d: int = None) -> AffineSymplecticMap:
    """Exact flow of one control segment.

    Hamilton's equations q' = p, p' = -u0 q - u are linear, so the flow is
    trigonometric for u0 > 0, a shear for u0 = 0 and hyperbolic for u0 < 0,
    with the affine part from the constant force by variation of constants
    (equivalently: flow around the displaced equilibrium q* = -u/u0).
    """
    if d is None:
        d = seg.d
    elif seg.d != d:
        raise ValueError("segment dimension mismatch")
    dt = seg.dt
    a = _axis_flow(seg.u0, dt)
    m = np.zeros((2 * d, 2 * d))
    m[:d, :d] = a[0, 0] * np.eye(d)
    m[:d, d:] = a[0, 1] * np.eye(d)
    m[d:, :d] = a[1, 0] * np.eye(d)
    m[d:, d:] = a[1, 1] * np.eye(d)

    b = np.zeros(2 * d)
    if np.any(seg.u != 0.0):
        if abs(seg.u0) > _U0_LINEAR:
            q_star = -seg.u / seg.u0
            x_star = np.concatenate([q_star, np.zeros(d)])
            b = x_star - m @ x_star
        else:
            b = np.concatenate([-seg.u * (dt * dt / 2.0), -seg.u * dt])
    return AffineSymplecticMap(d, m, b)


def partial_segment_map(seg: ControlSegment, t: float) -> AffineSymplecticMap:
    """Flow of the segment truncated to time t in [0, dt]."""
    if not 0.0 <= t <= seg.dt:
        raise ValueError("t outside the segment")
    if t == 0.0:
        return identity_map(seg.d)
    return segment_map(ControlSegment(t, seg.u0, seg.u, seg.r), seg.d)


def schedule_map(schedule: ControlSchedule) -> AffineSymplecticMap:
    """Composite map Phi with transported density rho0 o Phi.

    Earlier segments are outer factors: for s1 followed by s2 the composite
    is Phi_1 o Phi_2, matching the pullback law (rho0 o Phi_1) o Phi_2.
    """
    acc = identity_map(schedule.d)
    for seg in schedule:
        acc = acc.compose(segment_map(seg, schedule.d))
    return acc


# ---------------------------------------------------------------------------
# Correspondence with the group layer
# ---------------------------------------------------------------------------

def lambda0(g: GroupElement) -> AffineSymplecticMap:
    """Linear dictionary from group elements to affine symplectic maps.

    The 2x2 part acts identically on every (q_j, p_j) plane; the pair part
    (x, y) lands crosswise in the shift, b_q = y and b_p = x; the center
    coordinate and the winding are dropped (they act as global phase /
    covering data, invisible on densities).  This is a homomorphism:
    lambda0(g h) = lambda0(g) o lambda0(h).
    """
    d = g.d
    m = np.zeros((2 * d, 2 * d))
    m[:d, :d] = g.S[0, 0] * np.eye(d)
    m[:d, d:] = g.S[0, 1] * np.eye(d)
    m[d:, :d] = g.S[1, 0] * np.eye(d)
    m[d:, d:] = g.S[1, 1] * np.eye(d)
    b = np.concatenate([g.v[1], g.v[0]])
    return AffineSymplecticMap(d, m, b)


def lambda0_inverse(phi: AffineSymplecticMap, atol: float = 1e-12) -> GroupElement:
    """Preimage of an axis-uniform affine map, with z = 0 and winding 0.

    Requires M to act by the same 2x2 block on every (q_j, p_j) plane;
    raises ValueError otherwise.  The center and covering coordinates are
    not visible classically, so the canonical preimage sets them to zero.
    """
    d = phi.d
    s = np.array(
        [
            [phi.M[0, 0], phi.M[0, d]],
            [phi.M[d, 0], phi.M[d, d]],
        ]
    )
    expected = lambda0(GroupElement(d, S=s)).M
    if np.max(np.abs(phi.M - expected)) > atol:
        raise ValueError("map does not act axis-uniformly; no canonical preimage")
    v = np.vstack([phi.b[d:], phi.b[:d]])
    return GroupElement(d, S=s, v=v, z=0.0, winding=0)


def correspondence_check(schedule: ControlSchedule, atol: float = 1e-8) -> dict:
    """Verify the group/classical dictionary on a schedule.

    Checks lambda0(simulate(negated_controls(s))) against schedule_map(s)
    and re-pins the orientation on the two generator cases (free drift and
    a u0 pulse).  Returns a report dict; ok is False above atol.
    """
    d = schedule.d
    flipped = negated_controls(schedule)
    lhs = lambda0(simulate(flipped))
    rhs = schedule_map(schedule)
    deviation = lhs.deviation(rhs)

    pins = {}
    t = 0.7
    drift_map = segment_map(ControlSegment(t, 0.0, np.zeros(d), 0.0), d)
    m_shear = np.eye(2 * d)
    m_shear[:d, d:] = t * np.eye(d)
    pins["drift"] = drift_map.deviation(AffineSymplecticMap(d, m_shear, np.zeros(2 * d)))

    w = 0.4
    dt = 1e-4
    pulse_map = segment_map(ControlSegment(dt, w / dt, np.zeros(d), 0.0), d)
    m_kick = np.eye(2 * d)
    m_kick[d:, :d] = -w * np.eye(d)
    pins["u0_pulse"] = pulse_map.deviation(AffineSymplecticMap(d, m_kick, np.zeros(2 * d)))

    pin_tol = max(atol, 1e-3)  # generator pins use a finite pulse duration
    ok = deviation <= atol and pins["drift"] <= 1e-12 and pins["u0_pulse"] <= pin_tol
    return {
        "ok": bool(ok),
        "deviation": deviation,
        "generator_pins": pins,
        "atol": atol,
    }


# ---------------------------------------------------------------------------
# Density sources and grids
# ---------------------------------------------------------------------------

class GaussianDensity:
    """Normalized Gaussian on phase space, evaluable anywhere."""

    def __init__(self, d: int = 1, mean=None, cov=None):
        self.d = d
        n = 2 * d
        self.mean = np.zeros(n) if mean is None else np.asarray(mean, dtype=float)
        cov = np.eye(n) if cov is None else np.asarray(cov, dtype=float)
        if self.mean.shape != (n,) or cov.shape != (n, n):
            raise ValueError("mean/cov shape mismatch")
        self.cov = cov
        self._prec = np.linalg.inv(cov)
        det = np.linalg.det(cov)
        if det <= 0:
            raise ValueError("covariance must be positive definite")
        self._norm = 1.0 / math.sqrt(((2.0 * math.pi) ** n) * det)

    domain_bounds = None  # analytic: defined on all of phase space

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        delta = pts - self.mean[:, None]
        quad = np.einsum("in,ij,jn->n", delta, self._prec, delta)
        return self._norm * np.exp(-0.5 * quad)


class RingDensity:
    """Radially symmetric ridge at radius R (d=1), normalized analytically."""

    def __init__(self, radius: float = 2.0, width: float = 0.5):
        if radius <= 0 or width <= 0:
            raise ValueError("radius and width must be positive")
        self.d = 1
        self.radius = radius
        self.width = width
        r, w = radius, width
        # integral of 2*pi*r*exp(-(r-R)^2/(2 w^2)) dr over r >= 0
        radial = w * w * math.exp(-r * r / (2 * w * w)) + r * w * math.sqrt(
            math.pi / 2.0
        ) * (1.0 + math.erf(r / (w * math.sqrt(2.0))))
        self._norm = 1.0 / (2.0 * math.pi * radial)

    domain_bounds = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        rad = np.hypot(pts[0], pts[1])
        return self._norm * np.exp(-((rad - self.radius) ** 2) / (2.0 * self.width**2))


class GridDensity:
    """Bilinear interpolant of a sampled d=1 density (accuracy is O(h^2))."""

    def __init__(self, grid: "PhaseGrid"):
        if grid.d != 1:
            raise ValueError("grid sources are supported for d=1 only")
        self.d = 1
        self.grid = grid
        # interpolation domain is the cell-center hull, half a cell inside
        self.domain_bounds = tuple(
            (lo + 0.5 * (hi - lo) / grid.N, hi - 0.5 * (hi - lo) / grid.N)
            for lo, hi in grid.bounds
        )

    def __call__(self, points: np.ndarray) -> np.ndarray:
        g = self.grid
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[1])
        coords = []
        inside = np.ones(pts.shape[1], dtype=bool)
        for ax in range(2):
            lo, hi = g.bounds[ax]
            h = (hi - lo) / g.N
            # fractional index into cell centers
            f = (pts[ax] - lo) / h - 0.5
            inside &= (f >= 0.0) & (f <= g.N - 1.0)
            coords.append(f)
        fq, fp = coords
        iq = np.clip(np.floor(fq[inside]).astype(int), 0, g.N - 2)
        ip = np.clip(np.floor(fp[inside]).astype(int), 0, g.N - 2)
        tq = fq[inside] - iq
        tp = fp[inside] - ip
        v = g.values
        out[inside] = (
            v[iq, ip] * (1 - tq) * (1 - tp)
            + v[iq + 1, ip] * tq * (1 - tp)
            + v[iq, ip + 1] * (1 - tq) * tp
            + v[iq + 1, ip + 1] * tq * tp
        )
        return out


class PhaseGrid:
    """Cell-centered samples of a density on a rectangular phase-space box.

    bounds is a ((lo, hi), ...) pair per axis in (q..., p...) order; values
    has shape (N,) * 2d; p_norm is the exponent used by lp_distance.
    """

    def __init__(self, d: int, bounds, N: int, values: np.ndarray = None, p_norm: float = 2.0):
        self.d = d
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != 2 * d or any(hi <= lo for lo, hi in bounds):
            raise ValueError("need 2d (lo, hi) pairs with lo < hi")
        if p_norm < 1.0:
            raise ValueError("p_norm must be >= 1")
        self.bounds = bounds
        self.N = int(N)
        self.p_norm = float(p_norm)
        if values is None:
            values = np.zeros((self.N,) * (2 * d))
        values = np.asarray(values, dtype=float)
        if values.shape != (self.N,) * (2 * d):
            raise ValueError("values shape mismatch")
        if np.any(values < -1e-12) or not np.all(np.isfinite(values)):
            raise ValueError("density samples must be finite and nonnegative")
        self.values = values

    @classmethod
    def default(cls, d: int = 1, half_width: float = 8.0, N: int = 512, p_norm: float = 2.0):
        return cls(d, ((-half_width, half_width),) * (2 * d), N, p_norm=p_norm)

    def axes(self):
        out = []
        for lo, hi in self.bounds:
            h = (hi - lo) / self.N
            out.append(lo + h * (np.arange(self.N) + 0.5))
        return out

    def points(self) -> np.ndarray:
        """All nodes as a (2d, N^2d) array, row-major in values order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh])

    def cell_volume(self) -> float:
        vol = 1.0
        for lo, hi in self.bounds:
            vol *= (hi - lo) / self.N
        return vol

    def mass(self) -> float:
        return float(np.sum(self.values) * self.cell_volume())

    def with_values(self, values: np.ndarray) -> "PhaseGrid":
        return PhaseGrid(self.d, self.bounds, self.N, values, self.p_norm)

    def same_geometry(self, other: "PhaseGrid") -> bool:
        return self.d == other.d and self.N == other.N and self.bounds == other.bounds

    def to_bytes(self) -> bytes:
        header = {
            "d": self.d,
            "bounds": [[fnum(lo), fnum(hi)] for lo, hi in self.bounds],
            "N": self.N,
            "p": fnum(self.p_norm),
        }
        body = np.ascontiguousarray(self.values, dtype="<f8").tobytes()
        return json.dumps(header).encode() + b"\n" + body

    @staticmethod
    def from_bytes(raw: bytes) -> "PhaseGrid":
        buf = io.BytesIO(raw)
        header = json.loads(buf.readline().decode())
        d, n = int(header["d"]), int(header["N"])
        bounds = tuple((float(lo), float(hi)) for lo, hi in header["bounds"])
        body = np.frombuffer(buf.read(), dtype="<f8")
        if body.size != n ** (2 * d):
            raise ValueError("density payload size mismatch")
        values = body.reshape((n,) * (2 * d)).copy()
        return PhaseGrid(d, bounds, n, values, float(header["p"]))

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @staticmethod
    def load(path) -> "PhaseGrid":
        with open(path, "rb") as fh:
            return PhaseGrid.from_bytes(fh.read())


def lp_distance(g1: PhaseGrid, g2: PhaseGrid) -> float:
    if not g1.same_geometry(g2) or g1.p_norm != g2.p_norm:
        raise ValueError("grids must share geometry and exponent")
    p = g1.p_norm
    diff = np.abs(g1.values - g2.values)
    return float(np.sum(diff**p) * g1.cell_volume()) ** (1.0 / p)


def pullback(rho0, phi: AffineSymplecticMap, grid: PhaseGrid) -> PhaseGrid:
    """Sample rho0(phi(x)) on the grid nodes.

    Exact on nodes for analytic sources.  If the source has a bounded
    domain, any image point falling outside it where the clamped boundary
    value is non-negligible raises SupportEscapeError (information would be
    silently lost otherwise).
    """
    if phi.d != grid.d:
        raise ValueError("dimension mismatch")
    pts = phi.apply(grid.points())
    bounds = getattr(rho0, "domain_bounds", None)
    if bounds is not None:
        escaped = np.zeros(pts.shape[1], dtype=bool)
        clamped = pts.copy()
        for ax, (lo, hi) in enumerate(bounds):
            escaped |= (pts[ax] < lo) | (pts[ax] > hi)
            np.clip(clamped[ax], lo, hi, out=clamped[ax])
        if np.any(escaped):
            edge = float(np.max(rho0(clamped[:, escaped])))
            peak = float(np.max(rho0.grid.values)) if hasattr(rho0, "grid") else 1.0
            if edge > 1e-9 * max(peak, 1e-300):
                raise SupportEscapeError(
                    f"{int(np.sum(escaped))} pullback points left the sampled domain "
                    f"with boundary density {edge:.3e}"
                )
    values = rho0(pts).reshape(grid.values.shape)
    return grid.with_values(values)


# ---------------------------------------------------------------------------
# Target family and experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LiouvilleTargetParams:
    alpha: float
    t: float
    r: float
    s: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "s", np.atleast_1d(np.asarray(self.s, dtype=float)))
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(self.w, dtype=float)))
        if self.s.shape != self.w.shape:
            raise ValueError("s and w must have the same length")

    @property
    def d(self) -> int:
        return self.s.shape[0]


def target_map(params: LiouvilleTargetParams) -> AffineSymplecticMap:
    """Affine map of the reachable family rho0(a(q+tp+s), a^-1(p+r(q+tp+s)+w)).

    The r-row acts on the already-shifted position argument, which is what
    makes the linear part [[a, at], [r/a, (1+tr)/a]] unimodular for every
    parameter choice; its determinant is identically 1.
    """
    a, t, r = params.alpha, params.t, params.r
    d = params.d
    s2 = np.array([[a, a * t], [r / a, (1.0 + t * r) / a]])
    m = np.zeros((2 * d, 2 * d))
    m[:d, :d] = s2[0, 0] * np.eye(d)
    m[:d, d:] = s2[0, 1] * np.eye(d)
    m[d:, :d] = s2[1, 0] * np.eye(d)
    m[d:, d:] = s2[1, 1] * np.eye(d)
    b = np.concatenate([a * params.s, (params.r * params.s + params.w) / a])
    return AffineSymplecticMap(d, m, b)


def build_target(rho0, params: LiouvilleTargetParams, grid: PhaseGrid) -> PhaseGrid:
    """Sample the reachable-family target on the grid."""
    return pullback(rho0, target_map(params), grid)


def group_target_for(params: LiouvilleTargetParams) -> GroupElement:
    """Canonical group preimage of the target map (z = 0, winding 0)."""
    return lambda0_inverse(target_map(params))


def reach_experiment(
    rho0,
    params: LiouvilleTargetParams,
    tol: float,
    *,
    grid: PhaseGrid = None,
    p_norms=(1.0, 2.0),
    eps0: float = 0.01,
    kick_cap: float = None,
) -> dict:
    """Plan, transport, and compare against the reachable-family target.

    The planner works on the group side; the physical schedule is its
    control involution (the two sides differ by u -> -u), and the density
    is pulled back through the schedule's exact composite map, so the
    reported Lp errors contain no transport discretization at all.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = params.d
    if grid is None:
        grid = PhaseGrid.default(d=d)
    if grid.d != d:
        raise ValueError("grid dimension mismatch")

    g_target = group_target_for(params)
    group_tol = min(1e-9, 0.001 * tol)
    plan = plan_target(g_target, group_tol, eps0=eps0, kick_cap=kick_cap)
    physical = negated_controls(plan.schedule)

    phi = schedule_map(physical)
    achieved = pullback(rho0, phi, grid)
    wanted = build_target(rho0, params, grid)

    errors = {}
    for p in p_norms:
        a = PhaseGrid(grid.d, grid.bounds, grid.N, achieved.values, p_norm=p)
        w = PhaseGrid(grid.d, grid.bounds, grid.N, wanted.values, p_norm=p)
        errors[fnum(p)] = lp_distance(a, w)

    mass_in = pullback(rho0, identity_map(d), grid).mass()
    mass_out = achieved.mass()
    report = {
        "ok": bool(plan.error <= group_tol and all(e <= tol for e in errors.values())),
        "tol": tol,
        "errors": errors,
        "total_time": physical.total_time(),
        "group_error": plan.error,
        "planner_ok": plan.ok,
        "epsilon": plan.epsilon,
        "mass_initial": mass_in,
        "mass_final": mass_out,
        "mass_drift": abs(mass_out - mass_in),
        "params": {
            "alpha": params.alpha,
            "t": params.t,
            "r": params.r,
            "s": [float(x) for x in params.s],
            "w": [float(x) for x in params.w],
        },
        "grid": {"N": grid.N, "bounds": [list(b) for b in grid.bounds]},
        "schedule": json.loads(physical.to_json()),
    }
    return report
