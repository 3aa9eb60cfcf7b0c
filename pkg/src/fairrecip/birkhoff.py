"""Linear maximization over doubly stochastic matrices.

Two oracles are provided. ``linear_max_exact`` solves the assignment problem
(the optimum of a linear objective over the Birkhoff polytope is attained at a
permutation matrix). ``linear_max_sinkhorn`` solves the entropy-regularized
problem by Sinkhorn scaling of ``exp(-tau * C)``. Both have batched variants
operating on ``(batch, d, d)`` stacks, which is how the optimizer calls them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._assignment import solve_min_cost, solve_min_cost_batch

_TIE_TOL = 1e-12


class SinkhornOverflowError(FloatingPointError):
    """Scaling vectors left the floating point range.

    ``batch_index`` is the first problem in the stack that overflowed, or
    ``None`` when it could not be told apart.
    """

    def __init__(self, msg, iteration=None, batch_index=None):
        super().__init__(msg)
        self.iteration = iteration
        self.batch_index = batch_index


@dataclass(frozen=True)
class SinkhornConfig:
    tau: float = 200.0
    max_iters: int = 500
    stop_tol: float = 1e-6
    log_domain: bool = False
    # Newton steps on the entropic dual instead of alternating scaling; log domain only
    newton: bool = False
    # reuse the previous call's scaling vectors when the optimizer allows it
    warm_start: bool = True

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if self.stop_tol < 0:
            raise ValueError(f"stop_tol must be nonnegative, got {self.stop_tol!r}")
        if self.newton and not self.log_domain:
            raise ValueError("newton=True requires log_domain=True")


@dataclass
class SinkhornResult:
    x: np.ndarray
    iterations: int
    max_deviation: float
    converged: bool
    log_u: np.ndarray
    log_v: np.ndarray


def _as_finite(g, name="gain matrix") -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim < 2 or g.shape[-1] != g.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError(f"{name} contains non-finite entries")
    return g


def gain_to_cost(gain) -> np.ndarray:
    """``max(G) - G``: nonnegative costs whose minimizers are the maximizers of ``G``.

    A ``(batch, d, d)`` stack is transformed matrix by matrix.
    """
    g = _as_finite(gain)
    top = g.max(axis=(-2, -1), keepdims=True)
    return top - g


def best_permutation(gain) -> np.ndarray:
    """Column chosen for each row by the maximum-gain assignment."""
    cost = np.ascontiguousarray(gain_to_cost(gain))
    if cost.ndim != 2:
        raise ValueError("best_permutation expects a single square matrix")
    return solve_min_cost(cost, _TIE_TOL)


def best_permutation_batch(gains) -> np.ndarray:
    cost = np.ascontiguousarray(gain_to_cost(gains))
    if cost.ndim != 3:
        raise ValueError("expected a (batch, d, d) stack")
    return solve_min_cost_batch(cost, _TIE_TOL)


def permutation_matrices(cols: np.ndarray) -> np.ndarray:
    cols = np.asarray(cols)
    *lead, d = cols.shape
    out = np.zeros((*lead, d, d))
    np.put_along_axis(out, cols[..., None], 1.0, axis=-1)
    return out


def linear_max_exact(gain) -> np.ndarray:
    """Permutation matrix maximizing ``sum(G * X)`` over doubly stochastic ``X``.

    Among optimal permutations the lexicographically smallest column sequence
    (row 0 first) is returned.
    """
    return permutation_matrices(best_permutation(gain))


def linear_max_exact_batch(gains) -> np.ndarray:
    return permutation_matrices(best_permutation_batch(gains))


def _logsumexp(a, axis):
    top = a.max(axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    out = np.log(np.exp(a - top).sum(axis=axis, keepdims=True)) + top
    return np.squeeze(out, axis=axis)


def sinkhorn_batch(
    costs,
    cfg: SinkhornConfig = SinkhornConfig(),
    log_u: Optional[np.ndarray] = None,
    log_v: Optional[np.ndarray] = None,
) -> SinkhornResult:
    """Scale ``exp(-tau * C)`` towards unit row and column sums, for a stack of costs.

    Iterates ``u <- 1 / (K v)``, ``v <- 1 / (K^T u)`` until every row sum of
    ``diag(u) K diag(v)`` is within ``stop_tol`` of 1 (column sums are exact
    right after the ``v`` update) or ``max_iters`` is hit. ``log_u``/``log_v``
    optionally seed the scaling vectors.
    """
    c = np.asarray(costs, dtype=float)
    if c.ndim != 3 or c.shape[1] != c.shape[2]:
        raise ValueError(f"expected a (batch, d, d) cost stack, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    if np.any(c < 0):
        raise ValueError("cost matrix must be nonnegative")
    b, d, _ = c.shape
    f = np.zeros((b, d)) if log_u is None else np.array(log_u, dtype=float)
    g = np.zeros((b, d)) if log_v is None else np.array(log_v, dtype=float)
    if cfg.newton:
        return _sinkhorn_newton(-cfg.tau * c, f, g, cfg)
    if cfg.log_domain:
        return _sinkhorn_log(-cfg.tau * c, f, g, cfg)
    return _sinkhorn_plain(np.exp(-cfg.tau * c), f, g, cfg)


def _overflow(cfg, it, *arrays):
    idx = None
    for a in arrays:
        bad = ~np.isfinite(a.reshape(a.shape[0], -1)).all(axis=1)
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            break
    hint = "lower tau" if cfg.log_domain else "lower tau or enable log_domain"
    return SinkhornOverflowError(
        f"Sinkhorn scaling overflowed at iteration {it} with tau={cfg.tau:g}; {hint}",
        iteration=it,
        batch_index=idx,
    )


def _sinkhorn_plain(kern, f, g, cfg):
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        u = np.exp(f)
        v = np.exp(g)
        kt = np.swapaxes(kern, 1, 2)
        it = 0
        dev = np.inf
        while True:
            kv = np.matmul(kern, v[..., None])[..., 0]
            resid = np.abs(u * kv - 1.0)
            dev = float(np.max(resid))
            if not np.isfinite(dev):
                raise _overflow(cfg, it, resid)
            if dev <= cfg.stop_tol or it >= cfg.max_iters:
                break
            u = 1.0 / kv
            v = 1.0 / np.matmul(kt, u[..., None])[..., 0]
            it += 1
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise _overflow(cfg, it, u, v)
        x = u[:, :, None] * kern * v[:, None, :]
        log_u = np.log(u)
        log_v = np.log(v)
    dev = max(dev, float(np.max(np.abs(x.sum(axis=1) - 1.0))))
    return SinkhornResult(x, it, dev, dev <= cfg.stop_tol, log_u, log_v)


_ABSORB = 1e12


def _sinkhorn_log(logk, f, g, cfg):
    """Stabilized scaling with log-domain potentials ``f``, ``g``.

    One log-sum-exp sweep absorbs the starting potentials, after which plain
    scaling runs on the rebalanced kernel ``exp(logk + f + g)``. Whenever a
    scaling factor leaves ``[1e-12, 1e12]`` it is absorbed into ``f``/``g`` and
    the kernel is rebuilt, so nothing overflows. Iterates equal the textbook
    log-sum-exp updates up to rounding.
    """
    f = -_logsumexp(logk + g[:, None, :], axis=2)
    g = -_logsumexp(logk + f[:, :, None], axis=1)
    it = 1

    def rebuild():
        return np.exp(f[:, :, None] + logk + g[:, None, :])

    kern = rebuild()
    u = np.ones_like(f)
    v = np.ones_like(g)
    while True:
        kv = np.matmul(kern, v[..., None])[..., 0]
        resid = np.abs(u * kv - 1.0)
        dev = float(np.max(resid))
        if not np.isfinite(dev):
            raise _overflow(cfg, it, resid)
        if dev <= cfg.stop_tol or it >= cfg.max_iters:
            break
        with np.errstate(divide="ignore"):
            u = 1.0 / kv
            v = 1.0 / np.matmul(np.swapaxes(kern, 1, 2), u[..., None])[..., 0]
        it += 1
        top = max(u.max(), v.max(), 1.0 / u.min(), 1.0 / v.min())
        if not top < _ABSORB:
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise _overflow(cfg, it, u, v)
            f = f + np.log(u)
            g = g + np.log(v)
            u = np.ones_like(f)
            v = np.ones_like(g)
            kern = rebuild()
    x = u[:, :, None] * kern * v[:, None, :]
    f = f + np.log(u)
    g = g + np.log(v)
    dev = max(dev, float(np.max(np.abs(x.sum(axis=1) - 1.0))))
    return SinkhornResult(x, it, dev, dev <= cfg.stop_tol, f, g)


def _dual_value(logk, f, g):
    with np.errstate(over="ignore"):
        mass = np.exp(f[:, :, None] + logk + g[:, None, :]).sum(axis=(1, 2))
    return f.sum(axis=1) + g.sum(axis=1) - mass


def _sinkhorn_newton(logk, f, g, cfg):
    """Damped Newton ascent on the dual of the entropic problem.

    The Hessian block ``[[diag(r), X], [X^T, diag(c)]]`` is reduced to its
    Schur complement in the column variables; its null direction (shifting
    ``f`` up and ``g`` down) is removed by a small ridge.
    """
    b, d, _ = logk.shape
    g = -_logsumexp(logk + f[:, :, None], axis=1)
    it = 0
    eye = np.eye(d)
    while True:
        with np.errstate(over="ignore"):
            x = np.exp(f[:, :, None] + logk + g[:, None, :])
        r = x.sum(axis=2)
        c = x.sum(axis=1)
        gf = 1.0 - r
        gg = 1.0 - c
        dev = float(max(np.abs(gf).max(), np.abs(gg).max()))
        if not np.isfinite(dev):
            raise _overflow(cfg, it, gf, gg)
        if dev <= cfg.stop_tol or it >= cfg.max_iters:
            break
        rinv = 1.0 / np.maximum(r, 1e-300)
        xr = x * rinv[:, :, None]
        schur = np.einsum("bij,bik->bjk", x, xr)
        schur = -schur
        schur[:, np.arange(d), np.arange(d)] += c
        ridge = 1e-12 * np.maximum(c.max(axis=1), 1.0)
        schur += ridge[:, None, None] * eye
        rhs = gg - np.einsum("bij,bi->bj", xr, gf)
        dg = np.linalg.solve(schur, rhs[..., None])[..., 0]
        df = rinv * gf - np.einsum("bij,bj->bi", xr, dg)
        base = _dual_value(logk, f, g)
        slope = (gf * df).sum(axis=1) + (gg * dg).sum(axis=1)
        step = np.ones(b)
        active = slope > 0
        for _ in range(40):
            if not active.any():
                break
            fn = f + step[:, None] * df
            gn = g + step[:, None] * dg
            val = _dual_value(logk, fn, gn)
            ok = np.isfinite(val) & (val >= base + 1e-4 * step * slope)
            active &= ~ok
            step = np.where(active, step * 0.5, step)
        # where no ascent step was found, fall back to one scaling sweep
        stuck = (slope <= 0) | active
        step = np.where(stuck, 0.0, step)
        f = f + step[:, None] * df
        g = g + step[:, None] * dg
        if stuck.any():
            fs = -_logsumexp(logk[stuck] + g[stuck][:, None, :], axis=2)
            f[stuck] = fs
            g[stuck] = -_logsumexp(logk[stuck] + fs[:, :, None], axis=1)
        it += 1
    return SinkhornResult(x, it, dev, dev <= cfg.stop_tol, f, g)


def round_to_birkhoff(x) -> np.ndarray:
    """Nearby exactly doubly stochastic matrix for a nonnegative ``x`` (or a stack).

    Rows, then columns, are scaled down where their sums exceed 1, and the
    remaining deficits are filled by a rank-one correction. The L1 change is at
    most twice the total marginal violation of ``x`` (Altschuler, Weed and
    Rigollet, 2017).
    """
    x = np.array(x, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    r = x.sum(axis=2)
    x *= np.minimum(1.0, 1.0 / np.maximum(r, 1e-300))[:, :, None]
    c = x.sum(axis=1)
    x *= np.minimum(1.0, 1.0 / np.maximum(c, 1e-300))[:, None, :]
    dr = np.maximum(1.0 - x.sum(axis=2), 0.0)
    dc = np.maximum(1.0 - x.sum(axis=1), 0.0)
    mass = dr.sum(axis=1)
    safe = np.where(mass > 0, mass, 1.0)
    x += dr[:, :, None] * dc[:, None, :] / safe[:, None, None]
    return x[0] if single else x


def sinkhorn(cost, cfg: SinkhornConfig = SinkhornConfig()) -> SinkhornResult:
    """Single-matrix Sinkhorn scaling; ``result.x`` is the scaled matrix."""
    c = _as_finite(cost, "cost matrix")
    if c.ndim != 2:
        raise ValueError("sinkhorn expects a single square matrix; use sinkhorn_batch for stacks")
    res = sinkhorn_batch(c[None], cfg)
    return SinkhornResult(res.x[0], res.iterations, res.max_deviation, res.converged, res.log_u[0], res.log_v[0])


def linear_max_sinkhorn(gain, cfg: SinkhornConfig = SinkhornConfig()) -> np.ndarray:
    """Entropy-regularized approximate maximizer of ``sum(G * X)``."""
    return sinkhorn(gain_to_cost(gain), cfg).x


def linear_max_sinkhorn_batch(gains, cfg: SinkhornConfig = SinkhornConfig(), log_u=None, log_v=None) -> SinkhornResult:
    return sinkhorn_batch(gain_to_cost(gains), cfg, log_u, log_v)
