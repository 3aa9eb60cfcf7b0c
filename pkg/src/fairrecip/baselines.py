"""Comparison policies: Naive, Prod, TU and IterLP.

All four return deterministic policies made of permutation matrices. Ranking
ties go to the lowest candidate index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._assignment import solve_min_cost
from .core import Instance, Policy, policy_from_rankings, rankings_from_scores

_TIE_TOL = 1e-12


def naive_policy(inst: Instance) -> Policy:
    """Each agent ranks the other side by its own preference probabilities."""
    return policy_from_rankings(rankings_from_scores(inst.p1), rankings_from_scores(inst.p2))


def prod_policy(inst: Instance) -> Policy:
    """Both sides rank by the mutual score ``p1[i, j] * p2[j, i]``."""
    return policy_from_rankings(rankings_from_scores(inst.p), rankings_from_scores(inst.p.T))


@dataclass(frozen=True)
class TuConfig:
    beta: float = 1.0
    iters: int = 100

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if int(self.iters) != self.iters or self.iters < 1:
            raise ValueError(f"iters must be a positive integer, got {self.iters!r}")


def _root_step(s):
    # sqrt(1 + s^2) - s, written to avoid cancellation when s is large
    return 1.0 / (np.sqrt(1.0 + s * s) + s)


def tu_kernel(inst: Instance, cfg: TuConfig) -> np.ndarray:
    """``exp((p1[i, j] + p2[j, i]) / (2 beta))`` as an ``n x m`` matrix."""
    with np.errstate(over="ignore"):
        k = np.exp((inst.p1 + inst.p2.T) / (2.0 * cfg.beta))
    if not np.all(np.isfinite(k)):
        raise FloatingPointError(
            f"TU kernel overflowed with beta={cfg.beta:g}; preferences over 2*beta must stay below ~709, use a larger beta"
        )
    return k


def tu_iterates(inst: Instance, cfg: TuConfig = TuConfig()):
    """Run the fixed-point updates; returns ``(kernel, X, Y)``.

    Every ``X_i`` is updated from the previous ``Y``, then every ``Y_j`` from
    the new ``X``.
    """
    k = tu_kernel(inst, cfg)
    x = np.ones(inst.n)
    y = np.ones(inst.m)
    for _ in range(cfg.iters):
        x = _root_step(0.5 * (k @ y))
        y = _root_step(0.5 * (k.T @ x))
    return k, x, y


def tu_scores(inst: Instance, cfg: TuConfig = TuConfig()) -> np.ndarray:
    k, x, y = tu_iterates(inst, cfg)
    mu = k * x[:, None] * y[None, :]
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise FloatingPointError(f"TU scores left the positive finite range with beta={cfg.beta:g}")
    return mu


def tu_policy(inst: Instance, cfg: TuConfig = TuConfig()) -> Policy:
    mu = tu_scores(inst, cfg)
    return policy_from_rankings(rankings_from_scores(mu), rankings_from_scores(mu.T))


# --- IterLP --------------------------------------------------------------------


def max_weight_matching(weights: np.ndarray, allowed: Optional[np.ndarray] = None) -> np.ndarray:
    """Maximum-weight bipartite matching with nonnegative weights.

    Returns ``match[i]`` = matched column or -1. Forbidden and zero-weight
    edges are never reported as matched (they add nothing to the weight).
    The bipartite matching polytope is integral, so this is also an optimal
    vertex of the LP relaxation. Ties go to the lexicographically smallest
    assignment.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError("weights must be a matrix")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    n, m = w.shape
    if allowed is not None:
        w = np.where(allowed, w, 0.0)
    d = max(n, m)
    pad = np.zeros((d, d))
    pad[:n, :m] = w
    cost = np.ascontiguousarray(pad.max() - pad)
    cols = solve_min_cost(cost, _TIE_TOL)[:n]
    out = np.full(n, -1, dtype=np.int64)
    for i, j in enumerate(cols):
        if j < m and w[i, j] > 0:
            out[i] = j
    return out


@dataclass
class IterLPRounds:
    """Per-round record of the matching step, for inspection and tests."""

    matchings: list


def _best_unplaced(scores, placed):
    s = np.where(placed, -np.inf, scores)
    # argmax returns the first maximum, i.e. the lowest index on ties
    return int(np.argmax(s))


def iterlp_policy(inst: Instance, rounds: Optional[int] = None, record: Optional[IterLPRounds] = None) -> Policy:
    """Fill list positions one round at a time from maximum-weight matchings on ``p``.

    In each round every matched pair puts each other at the current position and
    the edge is removed. An agent left unmatched (or whose list is otherwise
    incomplete) takes its highest-``p`` candidate not yet in its list, and that
    edge is removed too. ``rounds`` defaults to ``max(n, m)`` so that every list
    is complete.
    """
    n, m = inst.n, inst.m
    p = inst.p
    total = max(n, m) if rounds is None else int(rounds)
    if total < max(n, m):
        raise ValueError(f"rounds={total} cannot fill lists of length {max(n, m)}")
    allowed = np.ones((n, m), dtype=bool)
    left_placed = np.zeros((n, m), dtype=bool)
    right_placed = np.zeros((m, n), dtype=bool)
    left_ranks = np.full((n, m), -1, dtype=np.int64)
    right_ranks = np.full((m, n), -1, dtype=np.int64)
    for k in range(total):
        match = max_weight_matching(p, allowed)
        if record is not None:
            record.matchings.append(match.copy())
        partner_of_right = np.full(m, -1, dtype=np.int64)
        for i, j in enumerate(match):
            if j >= 0:
                partner_of_right[j] = i
        chosen = []
        if k < m:
            for i in range(n):
                j = int(match[i])
                if j < 0 or left_placed[i, j]:
                    j = _best_unplaced(p[i], left_placed[i])
                left_ranks[i, k] = j
                left_placed[i, j] = True
                chosen.append((i, j))
        if k < n:
            for j in range(m):
                i = int(partner_of_right[j])
                if i < 0 or right_placed[j, i]:
                    i = _best_unplaced(p[:, j], right_placed[j])
                right_ranks[j, k] = i
                right_placed[j, i] = True
                chosen.append((i, j))
        for i, j in chosen:
            allowed[i, j] = False
    return policy_from_rankings(left_ranks, right_ranks)
