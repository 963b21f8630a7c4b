"""Exact integration of the controlled left-invariant system.

Under piecewise-constant controls the trajectory of

    dq/dt = q (a + u0(t) b + sum_i u_i(t) X_i + r(t) Z),   q(0) = identity

is a finite product of group exponentials, one per segment, earlier segments
as left factors.  There is no time-stepping error: each factor is exact up
to the center quadrature in ``group.exp``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._json import fnum
from .algebra import AlgebraElement
from .group import GroupElement, distance, identity, multiply
from .group import exp as group_exp
from .schedule import ControlSchedule

SWEEP_CSV_HEADER = ("epsilon", "error", "total_time", "max_amplitude")


def segment_element(seg, d: int) -> AlgebraElement:
    """The algebra element dt * (a + u0 b + sum u_i X_i + r Z) of one segment."""
    return AlgebraElement(
        d,
        a=seg.dt,
        b=seg.dt * seg.u0,
        xi=seg.dt * seg.u,
        zeta=seg.dt * seg.r,
    )


def simulate(schedule: ControlSchedule) -> GroupElement:
    """Endpoint of the controlled flow started at the identity."""
    q = identity(schedule.d)
    for seg in schedule.segments:
        q = multiply(q, group_exp(segment_element(seg, schedule.d)))
    return q


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    error: float
    total_time: float
    max_amplitude: float


def sweep(target: GroupElement, recipe, eps_list, jobs: int = 1):
    """Error of recipe(eps) against ``target`` for each accuracy parameter.

    ``recipe`` maps eps to a ControlSchedule.  ``eps_list`` must be strictly
    decreasing and positive.  Rows come back in input order; with jobs > 1
    the rows are computed concurrently but ordering is preserved.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("eps_list must be nonempty")
    if any(e <= 0.0 for e in eps_list):
        raise ValueError("eps_list entries must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")

    def row(eps: float) -> SweepRow:
        sched = recipe(eps)
        achieved = simulate(sched)
        return SweepRow(
            epsilon=eps,
            error=distance(achieved, target),
            total_time=sched.total_time(),
            max_amplitude=sched.max_amplitude(),
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(row, eps_list))
    return [row(eps) for eps in eps_list]


def fit_loglog_slope(rows) -> float:
    """Least-squares slope of log(error) against log(epsilon)."""
    eps = np.array([r.epsilon for r in rows])
    err = np.array([max(r.error, 1e-300) for r in rows])
    slope, _ = np.polyfit(np.log(eps), np.log(err), 1)
    return float(slope)


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER)
        for r in rows:
            writer.writerow(
                [fnum(r.epsilon), fnum(r.error), fnum(r.total_time), fnum(r.max_amplitude)]
            )


def read_sweep_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != SWEEP_CSV_HEADER:
            raise ValueError(f"unexpected sweep CSV header {header!r}")
        for rec in reader:
            rows.append(SweepRow(*(float(x) for x in rec)))
    return rows
