"""Market model: preference matrices, examination model and recommendation policies.

Index conventions: left agents ``i`` in ``range(n)``, right agents ``j`` in
``range(m)``. ``Policy.a[i]`` is the ``m x m`` matrix whose entry ``[j, k]`` is
the probability that right agent ``j`` sits at (0-based) position ``k`` of left
agent ``i``'s list; ``Policy.b[j]`` is the analogous ``n x n`` matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

EXAM_KINDS = ("log", "inv")
_KIND_ALIASES = {
    "log": "log",
    "inverselog": "log",
    "inverse_log": "log",
    "inv": "inv",
    "inverserank": "inv",
    "inverse_rank": "inv",
}


class InstanceError(ValueError):
    """Raised when preference data violates the instance invariants."""


@dataclass(frozen=True)
class ExaminationModel:
    """Position-based examination probabilities ``e(k)``.

    ``kind`` is ``"log"`` for ``1 / log2(k + 1)`` or ``"inv"`` for ``1 / k``.
    Positions beyond ``threshold`` get weight 0. ``threshold=None`` means the
    full list length, which is what the synthetic experiments use.
    """

    kind: str = "log"
    threshold: Optional[int] = None

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ValueError(f"unknown examination kind {self.kind!r}; expected one of {EXAM_KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.threshold is not None:
            if int(self.threshold) != self.threshold or self.threshold < 1:
                raise ValueError(f"threshold must be a positive integer, got {self.threshold!r}")
            object.__setattr__(self, "threshold", int(self.threshold))

    def vector(self, d: int) -> np.ndarray:
        return examination_vector(self, d)


def examination_vector(exam: ExaminationModel, d: int) -> np.ndarray:
    """Return ``[e(1), ..., e(d)]`` for the given model."""
    if d < 1:
        raise ValueError(f"list length must be >= 1, got {d}")
    k = np.arange(1, d + 1, dtype=float)
    if exam.kind == "log":
        e = 1.0 / np.log2(k + 1.0)
    else:
        e = 1.0 / k
    if exam.threshold is not None:
        e[exam.threshold:] = 0.0
    return e


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """A two-sided market.

    ``p1[i, j]`` is the probability that left agent ``i`` likes right agent
    ``j``; ``p2[j, i]`` the probability that right agent ``j`` likes left agent
    ``i``. Arrays are copied and made read-only on construction.
    """

    p1: np.ndarray
    p2: np.ndarray
    exam: ExaminationModel = field(default_factory=ExaminationModel)

    def __post_init__(self):
        p1 = _frozen(self.p1)
        p2 = _frozen(self.p2)
        if p1.ndim != 2 or p2.ndim != 2:
            raise InstanceError("p1 and p2 must be 2-D matrices")
        n, m = p1.shape
        if n < 1 or m < 1:
            raise InstanceError(f"both sides need at least one agent, got n={n}, m={m}")
        if p2.shape != (m, n):
            raise InstanceError(f"p2 must have shape {(m, n)} to match p1 {p1.shape}, got {p2.shape}")
        for name, arr in (("p1", p1), ("p2", p2)):
            if not np.all(np.isfinite(arr)):
                raise InstanceError(f"{name} contains non-finite entries")
            bad = np.argwhere((arr < 0.0) | (arr > 1.0))
            if len(bad):
                r, c = bad[0]
                raise InstanceError(
                    f"{name}[{r}, {c}] = {arr[r, c]!r} lies outside [0, 1] ({len(bad)} offending entries)"
                )
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)
        object.__setattr__(self, "_p", _frozen(p1 * p2.T))

    @property
    def n(self) -> int:
        return self.p1.shape[0]

    @property
    def m(self) -> int:
        return self.p1.shape[1]

    @property
    def p(self) -> np.ndarray:
        """Mutual match probabilities ``p[i, j] = p1[i, j] * p2[j, i]``."""
        return self._p

    @property
    def e_left(self) -> np.ndarray:
        """Examination weights over the ``m`` positions of a left agent's list."""
        return examination_vector(self.exam, self.m)

    @property
    def e_right(self) -> np.ndarray:
        """Examination weights over the ``n`` positions of a right agent's list."""
        return examination_vector(self.exam, self.n)

    def with_preferences(self, p1, p2) -> "Instance":
        return Instance(p1, p2, self.exam)

    def __repr__(self):
        return f"Instance(n={self.n}, m={self.m}, exam={self.exam!r})"


@dataclass(frozen=True, eq=False)
class Policy:
    """Stacked recommendation matrices: ``a`` has shape ``(n, m, m)``, ``b`` ``(m, n, n)``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _frozen(self.a)
        b = _frozen(self.b)
        if a.ndim != 3 or b.ndim != 3:
            raise ValueError("policy stacks must be 3-D arrays")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[0]

    def exposures(self, inst: Instance) -> tuple[np.ndarray, np.ndarray]:
        """Expected examination of each candidate.

        Returns ``(ea, eb)`` with ``ea[i, j] = sum_k e(k) a[i, j, k]`` and
        ``eb[j, i] = sum_l e(l) b[j, i, l]``.
        """
        return self.a @ inst.e_left, self.b @ inst.e_right


@dataclass(frozen=True)
class PolicyViolation:
    matrix: str  # "A" or "B"
    index: int
    kind: str  # "shape", "negative", "row_sum", "col_sum"
    position: Optional[int] = None
    value: Optional[float] = None

    def __str__(self):
        where = f"{self.matrix}[{self.index}]"
        if self.position is not None:
            where += f" {self.kind.split('_')[0]} {self.position}"
        val = "" if self.value is None else f" (value {self.value:.6g})"
        return f"{where}: {self.kind}{val}"


def uniform_policy(inst: Instance) -> Policy:
    n, m = inst.n, inst.m
    return Policy(np.full((n, m, m), 1.0 / m), np.full((m, n, n), 1.0 / n))


def validate_policy(pol: Policy, inst: Instance, tol: float = 1e-6) -> list[PolicyViolation]:
    """Check shapes, nonnegativity and unit margins; an empty list means valid."""
    out: list[PolicyViolation] = []
    n, m = inst.n, inst.m
    for name, stack, count, d in (("A", pol.a, n, m), ("B", pol.b, m, n)):
        if stack.shape != (count, d, d):
            out.append(PolicyViolation(name, -1, "shape", value=None))
            continue
        for idx in range(count):
            mat = stack[idx]
            neg = np.argwhere(mat < -tol)
            for r, c in neg:
                out.append(PolicyViolation(name, idx, "negative", int(r), float(mat[r, c])))
            rows = mat.sum(axis=1)
            for r in np.flatnonzero(np.abs(rows - 1.0) > tol):
                out.append(PolicyViolation(name, idx, "row_sum", int(r), float(rows[r])))
            cols = mat.sum(axis=0)
            for c in np.flatnonzero(np.abs(cols - 1.0) > tol):
                out.append(PolicyViolation(name, idx, "col_sum", int(c), float(cols[c])))
    return out


def _permutation_stack(ranks: Sequence[Sequence[int]], d: int, side: str) -> np.ndarray:
    ranks = np.asarray(ranks, dtype=int)
    if ranks.ndim != 2 or ranks.shape[1] != d:
        raise ValueError(f"{side} rankings must each list all {d} candidates")
    expected = np.arange(d)
    for idx, r in enumerate(ranks):
        if not np.array_equal(np.sort(r), expected):
            raise ValueError(f"{side} ranking {idx} is not a permutation of range({d}): {r.tolist()}")
    out = np.zeros((len(ranks), d, d))
    agents = np.repeat(np.arange(len(ranks)), d)
    positions = np.tile(expected, len(ranks))
    out[agents, ranks.ravel(), positions] = 1.0
    return out


def policy_from_rankings(left_ranks, right_ranks) -> Policy:
    """Deterministic policy from ranked candidate lists.

    ``left_ranks[i][k]`` is the right agent placed at position ``k`` of left
    agent ``i``'s list, and symmetrically for ``right_ranks``.
    """
    left_ranks = np.asarray(left_ranks, dtype=int)
    right_ranks = np.asarray(right_ranks, dtype=int)
    n = left_ranks.shape[0]
    m = right_ranks.shape[0]
    return Policy(_permutation_stack(left_ranks, m, "left"), _permutation_stack(right_ranks, n, "right"))


def rankings_from_scores(scores: np.ndarray) -> np.ndarray:
    """Rank candidates by descending score per row, ties to the lowest index."""
    return np.argsort(-np.asarray(scores, dtype=float), axis=1, kind="stable")


# --- CSV I/O -----------------------------------------------------------------


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"preference file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise InstanceError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InstanceError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InstanceError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.array(rows, dtype=float)


def write_matrix_csv(path, mat: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(mat, dtype=float):
            writer.writerow([repr(float(x)) for x in row])


def load_instance(p1_path, p2_path, exam: Optional[ExaminationModel] = None) -> Instance:
    """Load ``p1`` (n rows x m cols) and ``p2`` (m rows x n cols) from header-less CSV files."""
    return Instance(read_matrix_csv(p1_path), read_matrix_csv(p2_path), exam or ExaminationModel())


def save_instance(inst: Instance, p1_path, p2_path) -> None:
    write_matrix_csv(p1_path, inst.p1)
    write_matrix_csv(p2_path, inst.p2)
