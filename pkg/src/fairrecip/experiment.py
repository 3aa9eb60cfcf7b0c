"""Experiment harness behind the command line: run methods over seeds, sweep one axis.

A run evaluates every (seed, method) cell on a market that is either generated
from ``GenConfig`` fields or loaded from CSV. With ``sigma > 0`` the policy is
computed on perturbed preferences and judged on the true ones.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import TuConfig, iterlp_policy, naive_policy, prod_policy, tu_policy
from .birkhoff import SinkhornConfig
from .core import ExaminationModel, Instance, Policy, load_instance
from .datagen import GenConfig, generate_perturbed, perturb
from .metrics import ENVY_TOL, METRIC_COLUMNS, evaluate
from .optim import Objective, OptimConfig, OptimizationError, alternating_maximize

log = logging.getLogger(__name__)

BASELINES = {"naive": "Naive", "prod": "Prod", "tu": "TU", "iterlp": "IterLP"}
WELFARE = {"sw": "SW", "nsw": "NSW"}
SWEEP_AXES = ("lambda", "alpha", "tau", "sigma", "size")
SWEEP_COLUMNS = ("axis", "axis_value") + METRIC_COLUMNS
FAILED = "failed"


class ConfigError(ValueError):
    """Invalid experiment specification."""


# --- parsing helpers ---------------------------------------------------------------


def parse_seeds(text) -> list[int]:
    """``"0..9"`` (inclusive), ``"1,4,7"``, ``"3"`` or a list of ints."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    if isinstance(text, int):
        return [text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(-?\d+)\.\.(-?\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ConfigError(f"empty seed range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise ConfigError(f"bad seed {part!r}; use e.g. 0..9 or 0,1,2") from None
    return out


@dataclass(frozen=True)
class Method:
    name: str  # naive, prod, tu, iterlp, sw, nsw, alpha
    alpha: Optional[float] = None

    @property
    def is_welfare(self) -> bool:
        return self.name in ("sw", "nsw", "alpha")

    def label(self, oracle: str) -> str:
        if self.name in BASELINES:
            return BASELINES[self.name]
        base = WELFARE.get(self.name) or f"alpha={self.alpha:g}"
        return base if oracle == "exact" else f"{base}/{oracle}"


def parse_method(text) -> Method:
    t = str(text).strip().lower().replace("-", "").replace("_", "")
    if t in BASELINES or t in WELFARE:
        return Method(t)
    m = re.fullmatch(r"(?:alpha|alphasw)(?:=|:)?([0-9.eE+-]*)", t)
    if m:
        if not m.group(1):
            # alpha supplied by a sweep
            return Method("alpha")
        a = float(m.group(1))
        if a == 1.0:
            return Method("sw")
        Objective("alpha", a)
        return Method("alpha", a)
    raise ConfigError(f"unknown method {text!r}; expected naive, prod, tu, iterlp, sw, nsw or alpha=<value>")


@dataclass(frozen=True)
class RunSpec:
    methods: tuple = ("naive", "prod", "tu", "iterlp")
    seeds: tuple = (0,)
    # generated market
    n: int = 75
    m: int = 50
    lam: float = 0.0
    # CSV market; overrides generation when both are set
    p1: Optional[str] = None
    p2: Optional[str] = None
    exam: str = "log"
    threshold: Optional[int] = None
    sigma: float = 0.0
    # optimizer
    oracle: str = "exact"
    eta: float = 0.1
    step_schedule: str = "constant"
    max_outer_iters: int = 100
    converge_tol: float = 0.01
    tau: float = 200.0
    sinkhorn_iters: int = 500
    stop_tol: float = 1e-6
    log_domain: bool = False
    # TU
    beta: float = 1.0
    tu_iters: int = 100
    envy_tol: float = ENVY_TOL
    # write 0 instead of measured seconds, for byte-identical reruns
    timing: bool = True
    jobs: int = 1
    # directory for one .npz policy file per cell
    policy_dir: Optional[str] = None

    def validate(self, open_alpha: bool = False) -> "RunSpec":
        """Raise ``ConfigError`` on any invalid field; ``open_alpha`` allows a bare ``alpha`` method."""
        try:
            methods = [parse_method(m) for m in self.methods]
            if not methods:
                raise ConfigError("no methods given")
            ExaminationModel(self.exam, self.threshold)
            if (self.p1 is None) != (self.p2 is None):
                raise ConfigError("p1 and p2 must be given together")
            if self.p1 is None:
                GenConfig(self.n, self.m, self.lam)
            for path in (self.p1, self.p2):
                if path is not None and not Path(path).exists():
                    raise ConfigError(f"preference file not found: {path}")
            if self.sigma < 0:
                raise ConfigError(f"sigma must be nonnegative, got {self.sigma}")
            if self.oracle not in ("exact", "sinkhorn"):
                raise ConfigError(f"unknown oracle {self.oracle!r}; expected exact or sinkhorn")
            for meth in methods:
                if meth.is_welfare and not (open_alpha and meth.name == "alpha" and meth.alpha is None):
                    self.optim_config(meth)
            self.optim_config(Method("sw"))
            TuConfig(self.beta, self.tu_iters)
            if self.jobs < 1:
                raise ConfigError("jobs must be >= 1")
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    def exam_model(self) -> ExaminationModel:
        return ExaminationModel(self.exam, self.threshold)

    def optim_config(self, method: Method) -> OptimConfig:
        if method.name == "alpha" and method.alpha is None:
            raise ConfigError("method 'alpha' needs a value (alpha=0.5) unless sweeping the alpha axis")
        return OptimConfig(
            objective=Objective(method.name, method.alpha),
            oracle=self.oracle,
            sinkhorn=SinkhornConfig(
                tau=self.tau, max_iters=self.sinkhorn_iters, stop_tol=self.stop_tol, log_domain=self.log_domain
            ),
            step_schedule=self.step_schedule,
            eta=self.eta,
            max_outer_iters=self.max_outer_iters,
            converge_tol=self.converge_tol,
        )


_SPEC_FIELDS = {f.name for f in fields(RunSpec)}
_ALIASES = {"lambda": "lam", "K": "threshold", "k": "threshold"}


def spec_from_dict(d: dict) -> RunSpec:
    clean = {}
    for k, v in d.items():
        key = _ALIASES.get(k, k)
        if key not in _SPEC_FIELDS:
            raise ConfigError(f"unknown config key {k!r}")
        clean[key] = v
    if "methods" in clean:
        m = clean["methods"]
        clean["methods"] = tuple(m.split(",")) if isinstance(m, str) else tuple(m)
    if "seeds" in clean:
        clean["seeds"] = tuple(parse_seeds(clean["seeds"]))
    try:
        return RunSpec(**clean)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> dict:
    """Read a YAML or JSON mapping; returns ``{}`` for an empty file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text) if text.strip() else {}
        else:
            import yaml

            data = yaml.safe_load(text) or {}
    except Exception as exc:
        raise ConfigError(f"{path}: cannot parse config: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


# --- running -----------------------------------------------------------------------


def build_policy(spec: RunSpec, method: Method, inst: Instance) -> Policy:
    if method.name == "naive":
        return naive_policy(inst)
    if method.name == "prod":
        return prod_policy(inst)
    if method.name == "tu":
        return tu_policy(inst, TuConfig(spec.beta, spec.tu_iters))
    if method.name == "iterlp":
        return iterlp_policy(inst)
    pol, _ = alternating_maximize(inst, spec.optim_config(method))
    return pol


def markets(spec: RunSpec, seed: int) -> tuple[Instance, Instance]:
    """``(true, seen)`` markets for one seed; ``seen`` feeds the policy builder."""
    exam = spec.exam_model()
    if spec.p1 is not None:
        true = load_instance(spec.p1, spec.p2, exam)
        return true, perturb(true, spec.sigma, seed)
    return generate_perturbed(GenConfig(spec.n, spec.m, spec.lam, exam, seed), spec.sigma)


def _failed_row(label, seed, lam):
    row = {c: FAILED for c in METRIC_COLUMNS}
    row.update(method=label, seed=seed, **{"lambda": lam})
    return row


def run_cell(spec: RunSpec, method: Method, seed: int) -> tuple[dict, Optional[str]]:
    """One metrics row and an error message (``None`` on success)."""
    label = method.label(spec.oracle)
    lam = "" if spec.p1 is not None else spec.lam
    try:
        true, seen = markets(spec, seed)
        start = time.perf_counter()
        pol = build_policy(spec, method, seen)
        elapsed = time.perf_counter() - start
    except (OptimizationError, FloatingPointError, ArithmeticError) as exc:
        return _failed_row(label, seed, lam), f"{label} seed {seed}: {exc}"
    if spec.policy_dir is not None:
        d = Path(spec.policy_dir)
        d.mkdir(parents=True, exist_ok=True)
        save_policy(pol, d / f"{re.sub(r'[^A-Za-z0-9.=-]', '_', label)}_seed{seed}.npz")
    report = evaluate(true, pol, spec.envy_tol)
    return report.row(label, seed, lam, elapsed if spec.timing else 0.0), None


def _cell_job(args):
    spec, method, seed = args
    return run_cell(spec, method, seed)


def _map(spec: RunSpec, jobs: list):
    if spec.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            return list(pool.map(_cell_job, jobs))
    return [_cell_job(j) for j in jobs]


def run(spec: RunSpec) -> tuple[list[dict], list[str]]:
    """Rows ordered by seed, then by the method order of the run spec; plus error messages."""
    spec.validate()
    methods = [parse_method(m) for m in spec.methods]
    jobs = [(spec, meth, seed) for seed in sorted(spec.seeds) for meth in methods]
    results = _map(spec, jobs)
    return [r for r, _ in results], [e for _, e in results if e]


def _apply_axis(spec: RunSpec, methods: list, axis: str, value):
    if axis == "lambda":
        return replace(spec, lam=float(value)), methods
    if axis == "sigma":
        return replace(spec, sigma=float(value)), methods
    if axis == "tau":
        return replace(spec, tau=float(value)), methods
    if axis == "size":
        n, m = parse_size(value)
        return replace(spec, n=n, m=m), methods
    a = float(value)
    out = [
        (Method("sw") if a == 1.0 else Method("alpha", a)) if meth.name == "alpha" else meth
        for meth in methods
    ]
    return spec, out


def parse_size(value) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*(?:[xX]\s*(\d+))?\s*", str(value))
    if not m:
        raise ConfigError(f"bad size {value!r}; use N or NxM")
    n = int(m.group(1))
    return n, int(m.group(2) or n)


def _check_axis(spec: RunSpec, methods: list, axis: str):
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if axis == "alpha" and not any(m.name == "alpha" for m in methods):
        raise ConfigError("the alpha axis needs an 'alpha' method")
    if axis == "tau" and spec.oracle != "sinkhorn":
        raise ConfigError("the tau axis needs oracle: sinkhorn")
    if axis in ("lambda", "size") and spec.p1 is not None:
        raise ConfigError(f"the {axis} axis needs a generated market, not CSV files")


def _format_value(axis, v):
    if axis == "size":
        n, m = parse_size(v)
        return f"{n}x{m}"
    return repr(float(v))


def sweep(spec: RunSpec, axis: str, values) -> tuple[list[dict], list[str]]:
    """Rows ordered by axis value (as given), seed, then method; plus error messages."""
    spec.validate(open_alpha=axis == "alpha")
    methods = [parse_method(m) for m in spec.methods]
    _check_axis(spec, methods, axis)
    jobs, tags = [], []
    for v in values:
        cell, meths = _apply_axis(spec, methods, axis, v)
        if axis != "alpha":
            cell.validate()
        for seed in sorted(spec.seeds):
            for meth in meths:
                jobs.append((cell, meth, seed))
                tags.append(_format_value(axis, v))
    results = _map(spec, jobs)
    rows = []
    for tag, (row, _) in zip(tags, results):
        rows.append({"axis": axis, "axis_value": tag, **row})
    return rows, [e for _, e in results if e]


# --- output ------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def rows_to_csv(rows: list[dict], columns=METRIC_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="raise")
    w.writeheader()
    for r in rows:
        w.writerow({k: _cell(r[k]) for k in columns})
    return buf.getvalue()


def write_rows(rows: list[dict], path, columns=METRIC_COLUMNS) -> None:
    text = rows_to_csv(rows, columns)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)


def save_policy(pol: Policy, path) -> None:
    np.savez_compressed(path, a=pol.a, b=pol.b)


def load_policy(path) -> Policy:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"policy file not found: {path}")
    with np.load(path) as z:
        return Policy(z["a"], z["b"])
