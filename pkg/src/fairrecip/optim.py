"""Alternating Frank-Wolfe maximization of welfare objectives over policies.

Each outer iteration updates every left agent's matrix ``A_i`` towards the
maximizer of the linearized right-side objective, then every ``B_j`` towards
the maximizer of the linearized left-side objective (using the new ``A``).
The per-agent linear problems go to one of the oracles in ``birkhoff``.

Gradients are rank one: ``grad_A[i][j, k] = w[i, j] * e_left[k]`` with
``w[i, j] = p[i, j] * eb[j, i] * s(V_j)``, where ``s`` is 1 for SW, ``1 / V``
for log-NSW and ``V ** (alpha - 1)`` for alpha-SW.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .birkhoff import (
    SinkhornConfig,
    SinkhornOverflowError,
    linear_max_exact_batch,
    linear_max_sinkhorn_batch,
    round_to_birkhoff,
)
from .core import Instance, Policy, uniform_policy, validate_policy
from .metrics import UTILITY_FLOOR, alpha_welfare, log_nsw

OBJECTIVES = ("sw", "nsw", "alpha")
ORACLES = ("exact", "sinkhorn")
STEP_SCHEDULES = ("constant", "diminishing")
TRACE_COLUMNS = ("iteration", "sw", "objective_left", "objective_right", "step_seconds")


class OptimizationError(RuntimeError):
    """An oracle failed inside the optimizer."""


@dataclass(frozen=True)
class Objective:
    """Welfare objective: ``"sw"``, ``"nsw"`` (log-NSW) or ``"alpha"`` with ``alpha`` in (0, 1)."""

    kind: str = "sw"
    alpha: Optional[float] = None

    def __post_init__(self):
        kind = str(self.kind).lower().replace("-", "").replace("_", "")
        kind = {"alphasw": "alpha"}.get(kind, kind)
        if kind not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.kind!r}; expected one of {OBJECTIVES}")
        object.__setattr__(self, "kind", kind)
        if kind == "alpha":
            if self.alpha is None or not 0.0 < float(self.alpha) < 1.0:
                raise ValueError(f"alpha-SW needs alpha in (0, 1), got {self.alpha!r}")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise ValueError(f"alpha is only meaningful for the alpha objective, got kind={kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "alpha":
            return f"alpha={self.alpha:g}"
        return self.kind.upper()

    def scale(self, utils: np.ndarray) -> np.ndarray:
        """Derivative of the per-agent welfare term at ``utils``."""
        if self.kind == "sw":
            return np.ones_like(utils)
        u = np.maximum(utils, UTILITY_FLOOR)
        if self.kind == "nsw":
            return 1.0 / u
        return u ** (self.alpha - 1.0)

    def value(self, utils: np.ndarray) -> float:
        if self.kind == "sw":
            return float(np.sum(utils))
        if self.kind == "nsw":
            return log_nsw(utils)
        return alpha_welfare(utils, self.alpha)


def as_objective(obj: Union[str, Objective, float]) -> Objective:
    """Accept an ``Objective``, a name, ``"alpha=0.5"`` or a bare alpha value."""
    if isinstance(obj, Objective):
        return obj
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return Objective("sw") if float(obj) == 1.0 else Objective("alpha", float(obj))
    text = str(obj).strip()
    if "=" in text:
        name, val = text.split("=", 1)
        if name.strip().lower() in ("alpha", "alphasw", "alpha_sw"):
            return as_objective(float(val))
    return Objective(text)


@dataclass(frozen=True)
class OptimConfig:
    objective: Objective = field(default_factory=Objective)
    oracle: str = "exact"
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    step_schedule: str = "constant"
    eta: float = 0.1
    max_outer_iters: int = 100
    converge_tol: float = 0.01
    # the step out of the starting policy can leave SW nearly unchanged by accident
    min_outer_iters: int = 2
    # None means the uniform policy
    init: Optional[Policy] = None
    # recorded for provenance; the optimizer itself draws no random numbers
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objective", as_objective(self.objective))
        oracle = str(self.oracle).lower()
        if oracle not in ORACLES:
            raise ValueError(f"unknown oracle {self.oracle!r}; expected one of {ORACLES}")
        object.__setattr__(self, "oracle", oracle)
        sched = str(self.step_schedule).lower()
        if sched not in STEP_SCHEDULES:
            raise ValueError(f"unknown step schedule {self.step_schedule!r}; expected one of {STEP_SCHEDULES}")
        object.__setattr__(self, "step_schedule", sched)
        if sched == "constant" and not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if int(self.max_outer_iters) != self.max_outer_iters or self.max_outer_iters < 1:
            raise ValueError(f"max_outer_iters must be a positive integer, got {self.max_outer_iters!r}")
        if int(self.min_outer_iters) != self.min_outer_iters or self.min_outer_iters < 1:
            raise ValueError(f"min_outer_iters must be a positive integer, got {self.min_outer_iters!r}")
        if self.converge_tol < 0:
            raise ValueError(f"converge_tol must be nonnegative, got {self.converge_tol!r}")

    def step_size(self, t: int) -> float:
        """Step for outer iteration ``t`` (1-based)."""
        if self.step_schedule == "constant":
            return self.eta
        return 2.0 / (t + 2.0)


@dataclass
class OptimTrace:
    sw: list = field(default_factory=list)
    objective_left: list = field(default_factory=list)
    objective_right: list = field(default_factory=list)
    step_seconds: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        """Outer iterations performed; entry 0 of every list is the initial policy."""
        return len(self.sw) - 1

    def rows(self) -> list[dict]:
        return [
            dict(zip(TRACE_COLUMNS, (t, s, fl, fr, dt)))
            for t, (s, fl, fr, dt) in enumerate(
                zip(self.sw, self.objective_left, self.objective_right, self.step_seconds)
            )
        ]

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(self.rows())


# --- gradients ---------------------------------------------------------------


def _exposures(inst: Instance, a, b):
    return a @ inst.e_left, b @ inst.e_right


def _weights_a(inst, objective, ea, eb):
    # w[i, j] = p_ij * eb[j, i] * s(V_j)
    v = (inst.p * ea * eb.T).sum(axis=0)
    return inst.p * eb.T * objective.scale(v)[None, :]


def _weights_b(inst, objective, ea, eb):
    # w[j, i] = p_ij * ea[i, j] * s(U_i)
    u = (inst.p * ea * eb.T).sum(axis=1)
    return (inst.p * ea * objective.scale(u)[:, None]).T


def gradients_A(objective, inst: Instance, pol: Policy) -> np.ndarray:
    """``(n, m, m)`` stack of gradients of the right-side objective w.r.t. every ``A_i``."""
    objective = as_objective(objective)
    ea, eb = _exposures(inst, pol.a, pol.b)
    return _weights_a(inst, objective, ea, eb)[:, :, None] * inst.e_left[None, None, :]


def gradients_B(objective, inst: Instance, pol: Policy) -> np.ndarray:
    """``(m, n, n)`` stack of gradients of the left-side objective w.r.t. every ``B_j``."""
    objective = as_objective(objective)
    ea, eb = _exposures(inst, pol.a, pol.b)
    return _weights_b(inst, objective, ea, eb)[:, :, None] * inst.e_right[None, None, :]


def gradient_A(objective, inst: Instance, pol: Policy, i: int) -> np.ndarray:
    if not 0 <= i < inst.n:
        raise IndexError(f"left agent index {i} out of range for n={inst.n}")
    return gradients_A(objective, inst, pol)[i]


def gradient_B(objective, inst: Instance, pol: Policy, j: int) -> np.ndarray:
    if not 0 <= j < inst.m:
        raise IndexError(f"right agent index {j} out of range for m={inst.m}")
    return gradients_B(objective, inst, pol)[j]


def side_objectives(objective, inst: Instance, a, b) -> tuple[float, float]:
    """``(F1, F2)``: the objective evaluated on left and right utilities."""
    objective = as_objective(objective)
    ea, eb = _exposures(inst, a, b)
    mm = inst.p * ea * eb.T
    return objective.value(mm.sum(axis=1)), objective.value(mm.sum(axis=0))


# --- optimizer ---------------------------------------------------------------


class _Oracle:
    """Batched linear maximizer that keeps Sinkhorn warm-start state per side."""

    def __init__(self, cfg: OptimConfig):
        self.cfg = cfg
        self.state = {}

    def __call__(self, gains, side, t):
        if self.cfg.oracle == "exact":
            return linear_max_exact_batch(gains)
        scfg = self.cfg.sinkhorn
        lu, lv = self.state.get(side, (None, None)) if scfg.warm_start else (None, None)
        try:
            res = linear_max_sinkhorn_batch(gains, scfg, lu, lv)
        except SinkhornOverflowError as exc:
            who = "unknown agent" if exc.batch_index is None else f"{side} agent {exc.batch_index}"
            raise OptimizationError(f"oracle failed at outer iteration {t}, {who}: {exc}") from exc
        if scfg.warm_start:
            self.state[side] = (res.log_u, res.log_v)
        if not res.converged:
            # keep the iterate inside the polytope when scaling stops early
            return round_to_birkhoff(res.x)
        return res.x


def alternating_maximize(
    inst: Instance,
    cfg: OptimConfig = OptimConfig(),
    callback: Optional[Callable[[int, Policy], None]] = None,
) -> tuple[Policy, OptimTrace]:
    """Alternating Frank-Wolfe ascent; returns the final policy and its trace.

    ``callback(t, policy)`` is invoked after every outer iteration.
    """
    objective = cfg.objective
    init = cfg.init if cfg.init is not None else uniform_policy(inst)
    bad = validate_policy(init, inst)
    if bad:
        raise ValueError(f"initial policy is not doubly stochastic: {bad[0]}")
    a = np.array(init.a)
    b = np.array(init.b)
    oracle = _Oracle(cfg)
    e_left, e_right = inst.e_left, inst.e_right

    trace = OptimTrace()

    def record(seconds):
        ea, eb = _exposures(inst, a, b)
        mm = inst.p * ea * eb.T
        trace.sw.append(float(mm.sum()))
        trace.objective_left.append(objective.value(mm.sum(axis=1)))
        trace.objective_right.append(objective.value(mm.sum(axis=0)))
        trace.step_seconds.append(seconds)

    record(0.0)
    for t in range(1, cfg.max_outer_iters + 1):
        eta = cfg.step_size(t)
        start = time.perf_counter()
        ea, eb = _exposures(inst, a, b)
        gains = _weights_a(inst, objective, ea, eb)[:, :, None] * e_left[None, None, :]
        a = (1.0 - eta) * a + eta * oracle(gains, "left", t)
        ea = a @ e_left
        gains = _weights_b(inst, objective, ea, eb)[:, :, None] * e_right[None, None, :]
        b = (1.0 - eta) * b + eta * oracle(gains, "right", t)
        record(time.perf_counter() - start)
        if callback is not None:
            callback(t, Policy(a, b))
        if t >= cfg.min_outer_iters and abs(trace.sw[-1] - trace.sw[-2]) < cfg.converge_tol:
            trace.converged = True
            break
    return Policy(a, b), trace
