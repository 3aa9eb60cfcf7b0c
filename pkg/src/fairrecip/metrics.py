"""Utilities, welfare functions and fairness measures of a policy."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .core import Instance, Policy

UTILITY_FLOOR = 1e-12
ENVY_TOL = 1e-6

# Column order of one evaluation row; stable across releases.
METRIC_COLUMNS = (
    "method",
    "seed",
    "lambda",
    "expected_matches",
    "left_envy",
    "right_envy",
    "gini_left",
    "gini_right",
    "wall_time_s",
)

_SIDES = ("left", "right")


def _check_side(side: str) -> str:
    if side not in _SIDES:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return side


def _check_shapes(inst: Instance, pol: Policy) -> None:
    n, m = inst.n, inst.m
    if pol.a.shape != (n, m, m) or pol.b.shape != (m, n, n):
        raise ValueError(
            f"policy shapes A{pol.a.shape}, B{pol.b.shape} do not fit an instance with n={n}, m={m}"
        )


def match_matrix(inst: Instance, pol: Policy) -> np.ndarray:
    """Pairwise match probabilities ``P[i, j]`` under the policy."""
    _check_shapes(inst, pol)
    ea, eb = pol.exposures(inst)
    return inst.p * ea * eb.T


def utilities(inst: Instance, pol: Policy) -> tuple[np.ndarray, np.ndarray]:
    """Expected matches of every left agent and every right agent."""
    mm = match_matrix(inst, pol)
    return mm.sum(axis=1), mm.sum(axis=0)


def social_welfare(inst: Instance, pol: Policy) -> float:
    return float(match_matrix(inst, pol).sum())


def log_nsw(utils) -> float:
    """Sum of log utilities, or ``-inf`` if any utility is at or below the floor."""
    u = np.asarray(utils, dtype=float)
    if np.any(u <= UTILITY_FLOOR):
        return -np.inf
    return float(np.log(u).sum())


def alpha_welfare(utils, alpha: float) -> float:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    u = np.maximum(np.asarray(utils, dtype=float), 0.0)
    return float(np.sum(u**alpha) / alpha)


def _side_utils(inst, pol, side):
    u, v = utilities(inst, pol)
    return u if _check_side(side) == "left" else v


def nsw_log(inst: Instance, pol: Policy, side: str) -> float:
    return log_nsw(_side_utils(inst, pol, side))


def alpha_sw(inst: Instance, pol: Policy, side: str, alpha: float) -> float:
    return alpha_welfare(_side_utils(inst, pol, side), alpha)


def opportunity_matrix(inst: Instance, pol: Policy, side: str) -> np.ndarray:
    """Utility each agent would get from every same-side agent's opportunity.

    Entry ``[i, i2]`` is agent ``i``'s utility had it been placed in the
    opposite side's lists exactly where ``i2`` is. The diagonal holds the actual
    utilities.
    """
    _check_side(side)
    _check_shapes(inst, pol)
    ea, eb = pol.exposures(inst)
    if side == "left":
        return (inst.p * ea) @ eb
    return (inst.p.T * eb) @ ea


def opportunity_utility(inst: Instance, pol: Policy, side: str, i: int, i_prime: int) -> float:
    _check_side(side)
    size = inst.n if side == "left" else inst.m
    for idx in (i, i_prime):
        if not 0 <= idx < size:
            raise IndexError(f"agent index {idx} out of range for {side} side of size {size}")
    _check_shapes(inst, pol)
    ea, eb = pol.exposures(inst)
    if side == "left":
        return float(np.dot(inst.p[i] * ea[i], eb[:, i_prime]))
    return float(np.dot(inst.p[:, i] * eb[i], ea[:, i_prime]))


def count_envy(opp: np.ndarray, tol: float = ENVY_TOL) -> int:
    """Number of ordered pairs ``(i, i2)`` where ``opp[i, i2]`` beats ``opp[i, i]`` by more than ``tol``."""
    own = np.diag(opp)[:, None]
    return int(np.count_nonzero(opp > own + tol))


def envy_counts(inst: Instance, pol: Policy, envy_tol: float = ENVY_TOL) -> tuple[int, int]:
    return (
        count_envy(opportunity_matrix(inst, pol, "left"), envy_tol),
        count_envy(opportunity_matrix(inst, pol, "right"), envy_tol),
    )


def gini(utils) -> float:
    """Gini index via the sorted-values identity; 0 for an all-zero vector."""
    x = np.sort(np.asarray(utils, dtype=float))
    n = x.size
    total = x.sum()
    if n == 0 or total <= 0.0:
        return 0.0
    weights = 2.0 * np.arange(n) - n + 1.0
    # the index is nonnegative; clamp rounding noise on constant vectors
    return max(0.0, float(np.dot(weights, x) / (n * total)))


def pareto_dominates(utils_new, utils_old, tol: float = 1e-9) -> bool:
    """True if no agent is worse off (beyond ``tol``) and some agent is better off by more than ``tol``."""
    new = np.asarray(utils_new, dtype=float)
    old = np.asarray(utils_old, dtype=float)
    if new.shape != old.shape:
        raise ValueError(f"length mismatch: {new.shape} vs {old.shape}")
    return bool(np.all(new >= old - tol) and np.any(new > old + tol))


@dataclass
class MetricsReport:
    expected_matches: float
    left_utilities: np.ndarray
    right_utilities: np.ndarray
    left_envy: int
    right_envy: int
    gini_left: float
    gini_right: float
    nsw_log_left: float
    nsw_log_right: float

    def row(
        self,
        method: str,
        seed: Optional[int] = None,
        lam: Optional[float] = None,
        wall_time_s: float = 0.0,
    ) -> dict:
        return {
            "method": method,
            "seed": "" if seed is None else seed,
            "lambda": "" if lam is None else lam,
            "expected_matches": self.expected_matches,
            "left_envy": self.left_envy,
            "right_envy": self.right_envy,
            "gini_left": self.gini_left,
            "gini_right": self.gini_right,
            "wall_time_s": wall_time_s,
        }

    def as_dict(self) -> dict:
        d = asdict(self)
        d["left_utilities"] = self.left_utilities.tolist()
        d["right_utilities"] = self.right_utilities.tolist()
        return d


def evaluate(inst: Instance, pol: Policy, envy_tol: float = ENVY_TOL) -> MetricsReport:
    """All metrics for ``pol`` judged under ``inst``'s preferences."""
    u, v = utilities(inst, pol)
    left_envy, right_envy = envy_counts(inst, pol, envy_tol)
    return MetricsReport(
        expected_matches=float(u.sum()),
        left_utilities=u,
        right_utilities=v,
        left_envy=left_envy,
        right_envy=right_envy,
        gini_left=gini(u),
        gini_right=gini(v),
        nsw_log_left=log_nsw(u),
        nsw_log_right=log_nsw(v),
    )
