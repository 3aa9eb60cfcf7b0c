"""scikit-learn style wrappers around the policy builders.

``fit(X, y)`` takes the left preference matrix ``p1`` as ``X`` and the right
preference matrix ``p2`` as ``y`` (or an ``Instance`` as ``X`` alone) and stores
the computed policy in ``policy_``. ``score`` reports expected matches of that
policy under possibly different, e.g. true, preferences.
"""

from __future__ import annotations

from typing import Optional

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .baselines import TuConfig, iterlp_policy, naive_policy, prod_policy, tu_policy
from .birkhoff import SinkhornConfig
from .core import ExaminationModel, Instance, Policy
from .metrics import ENVY_TOL, MetricsReport, evaluate
from .optim import OptimConfig, Objective, alternating_maximize


def check_preferences(X, y=None, exam: Optional[ExaminationModel] = None) -> Instance:
    """Build an ``Instance`` from ``(p1, p2)`` arrays, or pass an ``Instance`` through.

    An ``Instance`` keeps its own examination model; ``exam`` applies to arrays.
    """
    if isinstance(X, Instance):
        if y is not None:
            raise ValueError("pass either an Instance or (p1, p2), not both")
        return X
    if y is None:
        raise ValueError("the right-side preference matrix p2 is required as y")
    p1 = check_array(X, dtype=float, ensure_all_finite=True)
    p2 = check_array(y, dtype=float, ensure_all_finite=True)
    return Instance(p1, p2, exam or ExaminationModel())


class _PolicyEstimator(BaseEstimator):
    def _exam(self):
        return ExaminationModel(self.exam, self.threshold)

    def _build(self, inst: Instance) -> Policy:
        raise NotImplementedError

    def fit(self, X, y=None):
        inst = check_preferences(X, y, self._exam())
        self.policy_ = self._build(inst)
        self.n_left_, self.n_right_ = inst.n, inst.m
        return self

    def predict(self, X=None):
        """The fitted policy; input, if given, is only checked for matching sizes."""
        check_is_fitted(self, "policy_")
        if X is not None:
            n = X.n if isinstance(X, Instance) else check_array(X).shape[0]
            if n != self.n_left_:
                raise ValueError(f"fitted for {self.n_left_} left agents, got {n}")
        return self.policy_

    def evaluate(self, X, y=None, envy_tol: float = ENVY_TOL) -> MetricsReport:
        check_is_fitted(self, "policy_")
        inst = check_preferences(X, y, self._exam())
        if (inst.n, inst.m) != (self.n_left_, self.n_right_):
            raise ValueError(
                f"fitted for n={self.n_left_}, m={self.n_right_}, got n={inst.n}, m={inst.m}"
            )
        return evaluate(inst, self.policy_, envy_tol)

    def score(self, X, y=None) -> float:
        """Expected number of matches of the fitted policy under ``(X, y)``."""
        return self.evaluate(X, y).expected_matches


class NaiveRecommender(_PolicyEstimator):
    def __init__(self, exam="log", threshold=None):
        self.exam = exam
        self.threshold = threshold

    def _build(self, inst):
        return naive_policy(inst)


class ProdRecommender(_PolicyEstimator):
    def __init__(self, exam="log", threshold=None):
        self.exam = exam
        self.threshold = threshold

    def _build(self, inst):
        return prod_policy(inst)


class TURecommender(_PolicyEstimator):
    def __init__(self, beta=1.0, iters=100, exam="log", threshold=None):
        self.beta = beta
        self.iters = iters
        self.exam = exam
        self.threshold = threshold

    def _build(self, inst):
        return tu_policy(inst, TuConfig(self.beta, self.iters))


class IterLPRecommender(_PolicyEstimator):
    def __init__(self, exam="log", threshold=None):
        self.exam = exam
        self.threshold = threshold

    def _build(self, inst):
        return iterlp_policy(inst)


class WelfareRecommender(_PolicyEstimator):
    """Alternating Frank-Wolfe policy for the SW, NSW or alpha-SW objective.

    ``alpha`` is used only with ``objective="alpha"``. ``trace_`` holds the
    optimizer trace after fitting.
    """

    def __init__(
        self,
        objective="nsw",
        alpha=None,
        oracle="exact",
        tau=200.0,
        sinkhorn_iters=500,
        log_domain=False,
        step_schedule="constant",
        eta=0.1,
        max_outer_iters=100,
        converge_tol=0.01,
        exam="log",
        threshold=None,
    ):
        self.objective = objective
        self.alpha = alpha
        self.oracle = oracle
        self.tau = tau
        self.sinkhorn_iters = sinkhorn_iters
        self.log_domain = log_domain
        self.step_schedule = step_schedule
        self.eta = eta
        self.max_outer_iters = max_outer_iters
        self.converge_tol = converge_tol
        self.exam = exam
        self.threshold = threshold

    def config(self) -> OptimConfig:
        return OptimConfig(
            objective=Objective(self.objective, self.alpha),
            oracle=self.oracle,
            sinkhorn=SinkhornConfig(tau=self.tau, max_iters=self.sinkhorn_iters, log_domain=self.log_domain),
            step_schedule=self.step_schedule,
            eta=self.eta,
            max_outer_iters=self.max_outer_iters,
            converge_tol=self.converge_tol,
        )

    def _build(self, inst):
        pol, self.trace_ = alternating_maximize(inst, self.config())
        return pol
