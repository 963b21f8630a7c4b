"""Control schedules on the group SL2(R) x H_d(R) and their verification.

The package has three layers:

* exact arithmetic in the Lie algebra and group (``algebra``, ``group``),
* schedule synthesis and the group-level simulator (``schedule``, ``synth``,
  ``simulate``),
* two independent realizations used to verify synthesized schedules: a
  split-step Schroedinger solver (``quantum``) and exact affine-symplectic
  phase-space transport (``liouville``).

A FastAPI service (``sl2heis.service``) exposes the same operations over
HTTP; the command line client in ``sl2heis.cli`` talks to it in-process.
"""

from .algebra import (
    AlgebraElement,
    BasisRealization,
    DEFAULT_REALIZATION,
    bracket,
    rho_apply,
    gen_a,
    gen_b,
    gen_c,
    gen_x,
    gen_y,
    gen_z,
)
from .group import (
    GroupElement,
    exp,
    multiply,
    inverse,
    adjoint,
    iwasawa,
    distance,
    identity,
)
from .schedule import ControlSegment, ControlSchedule
from .simulate import simulate, sweep, SweepRow
from .synth import (
    pulse,
    drift,
    recipe_c,
    recipe_y,
    recipe_scaled_drift,
    recipe_rotation,
    plan_heisenberg,
    plan_target,
    SynthReport,
)

__version__ = "0.1.0"

__all__ = [
    "AlgebraElement",
    "BasisRealization",
    "DEFAULT_REALIZATION",
    "bracket",
    "rho_apply",
    "gen_a",
    "gen_b",
    "gen_c",
    "gen_x",
    "gen_y",
    "gen_z",
    "GroupElement",
    "exp",
    "multiply",
    "inverse",
    "adjoint",
    "iwasawa",
    "distance",
    "identity",
    "ControlSegment",
    "ControlSchedule",
    "simulate",
    "sweep",
    "SweepRow",
    "pulse",
    "drift",
    "recipe_c",
    "recipe_y",
    "recipe_scaled_drift",
    "recipe_rotation",
    "plan_heisenberg",
    "plan_target",
    "SynthReport",
    "__version__",
]
