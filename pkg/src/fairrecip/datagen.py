"""Synthetic markets with tunable popularity bias, and preference perturbation.

Random numbers come from ``numpy.random.default_rng(seed)`` (PCG64). Entries
are visited row-major, ``p1`` first and then ``p2``. Normal noise is produced
from the same kind of uniform stream through the inverse normal CDF, so the
mapping from seed to instance does not depend on numpy's normal sampler.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .core import ExaminationModel, Instance, load_instance, save_instance

META_FILE = "meta.txt"
P1_FILE = "p1.csv"
P2_FILE = "p2.csv"


@dataclass(frozen=True)
class GenConfig:
    n: int = 75
    m: int = 50
    lam: float = 0.0
    exam: ExaminationModel = field(default_factory=ExaminationModel)
    seed: int = 0

    def __post_init__(self):
        for name in ("n", "m"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam!r}")
        if self.lam > 0 and min(self.n, self.m) < 2:
            raise ValueError(
                f"lambda > 0 needs at least two agents per side (popularity divides by size - 1), got n={self.n}, m={self.m}"
            )


def popularity(size: int) -> np.ndarray:
    """Shared popularity score ``(k - 1) / (size - 1)`` for ``k = 1..size``."""
    if size < 2:
        raise ValueError("popularity needs at least two agents")
    return np.arange(size, dtype=float) / (size - 1)


def generate(cfg: GenConfig, rng: Optional[np.random.Generator] = None) -> Instance:
    """Draw a market; ``rng`` overrides the generator seeded from ``cfg.seed``."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    u1 = rng.random((cfg.n, cfg.m))
    u2 = rng.random((cfg.m, cfg.n))
    lam = cfg.lam
    if lam > 0:
        p1 = lam * popularity(cfg.m)[None, :] + (1.0 - lam) * u1
        p2 = lam * popularity(cfg.n)[None, :] + (1.0 - lam) * u2
    else:
        p1, p2 = u1, u2
    # guard against 1 + tiny rounding at lam close to 1
    return Instance(np.clip(p1, 0.0, 1.0), np.clip(p2, 0.0, 1.0), cfg.exam)


def _open_uniform(rng, shape):
    # random() lies on the grid k / 2**53; shifting by half a step keeps it in (0, 1)
    return rng.random(shape) + 2.0**-54


def perturb(
    inst: Instance, sigma: float, seed: int = 0, rng: Optional[np.random.Generator] = None
) -> Instance:
    """Add independent ``Normal(0, sigma**2)`` noise to every preference and clamp to [0, 1].

    Passing the generator used by ``generate`` continues its stream, which is
    how the experiment harness draws noise for a generated market.
    """
    if not sigma >= 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma!r}")
    if sigma == 0:
        return inst.with_preferences(inst.p1, inst.p2)
    if rng is None:
        rng = np.random.default_rng(seed)
    z1 = ndtri(_open_uniform(rng, inst.p1.shape))
    z2 = ndtri(_open_uniform(rng, inst.p2.shape))
    p1 = np.clip(inst.p1 + sigma * z1, 0.0, 1.0)
    p2 = np.clip(inst.p2 + sigma * z2, 0.0, 1.0)
    return inst.with_preferences(p1, p2)


def generate_perturbed(cfg: GenConfig, sigma: float) -> tuple[Instance, Instance]:
    """``(true, perturbed)`` markets drawn from one stream seeded by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    true = generate(cfg, rng)
    return true, perturb(true, sigma, rng=rng)


# --- export ------------------------------------------------------------------


def write_meta(path, meta: dict) -> None:
    lines = [f"{k}={'' if v is None else v}" for k, v in meta.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_meta(path) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def export_instance(inst: Instance, directory, cfg: Optional[GenConfig] = None) -> Path:
    """Write ``p1.csv``, ``p2.csv`` and ``meta.txt`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_instance(inst, d / P1_FILE, d / P2_FILE)
    meta = {
        "n": inst.n,
        "m": inst.m,
        "lambda": None if cfg is None else repr(float(cfg.lam)),
        "seed": None if cfg is None else cfg.seed,
        "exam": inst.exam.kind,
        "K": inst.exam.threshold,
    }
    write_meta(d / META_FILE, meta)
    return d


def import_instance(directory) -> tuple[Instance, dict]:
    """Inverse of ``export_instance``; the examination model comes from the metadata."""
    d = Path(directory)
    meta_path = d / META_FILE
    if not meta_path.exists():
        raise FileNotFoundError(f"metadata file not found: {meta_path}")
    meta = read_meta(meta_path)
    k = meta.get("K") or None
    exam = ExaminationModel(meta.get("exam", "log"), None if k is None else int(k))
    inst = load_instance(d / P1_FILE, d / P2_FILE, exam)
    for key, size in (("n", inst.n), ("m", inst.m)):
        if key in meta and int(meta[key]) != size:
            raise ValueError(f"{meta_path}: {key}={meta[key]} but the CSV files give {size}")
    return inst, meta
