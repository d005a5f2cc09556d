"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .tensor import Tensor, no_grad


class EvaluationError(RuntimeError):
    """The checked function produced a non-finite value."""


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str | None
    worst_index: tuple[int, ...] | None
    per_param: dict[str, float] = field(default_factory=dict)
    n_checked: int = 0
    n_skipped: int = 0

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def relative_error(analytic, numeric) -> np.ndarray:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def _value(fn: Callable[[], Tensor]):
    with no_grad():
        out = fn()
    if out.data.size != 1:
        raise EvaluationError(f"function must be scalar, got shape {out.shape}")
    v = out.data.reshape(-1)[0]
    if not np.isfinite(v):
        raise EvaluationError(f"function value is not finite ({v})")
    return v


def grad_check(
    fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    epsilon: float = 1e-4,
    skip: Callable[[], bool] | None = None,
    extended: bool = False,
) -> GradCheckReport:
    """Compare tape gradients of scalar ``fn()`` against central differences.

    ``fn`` must read the current values of ``params`` on every call. ``skip``,
    evaluated at each perturbed point, flags entries whose perturbation lands
    near a non-smooth boundary; those entries are not compared.

    With ``extended`` the perturbed evaluations run on ``np.longdouble``
    copies of the parameters. Cancellation in f(x+e) - f(x-e) then stays far
    below the gradient size even for entries around 1e-8, where float64
    roundoff alone would exceed the relative tolerance.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} outside [1e-6, 1e-3]")
    for p in params.values():
        p.grad = None
    out = fn()
    if not np.isfinite(out.item()):
        raise EvaluationError(f"function value is not finite ({out.item()})")
    out.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}

    originals = {k: p.data for k, p in params.items()}
    if extended:
        for p in params.values():
            p.data = p.data.astype(np.longdouble)
    try:
        report = _compare(fn, params, analytic, epsilon, skip)
    finally:
        for k, p in params.items():
            p.data = originals[k]
    return report


def _compare(fn, params, analytic, epsilon, skip) -> GradCheckReport:
    report = GradCheckReport(0.0, None, None)
    for name, p in params.items():
        worst = 0.0
        flat = p.data.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + epsilon
            skipped = skip is not None and skip()
            fp = _value(fn)
            flat[j] = orig - epsilon
            skipped = skipped or (skip is not None and skip())
            fm = _value(fn)
            flat[j] = orig
            if skipped:
                report.n_skipped += 1
                continue
            numeric = float((fp - fm) / (2.0 * epsilon))
            err = float(relative_error(analytic[name].reshape(-1)[j], numeric))
            report.n_checked += 1
            if err > worst:
                worst = err
            if err > report.max_rel_error:
                report.max_rel_error = err
                report.worst_param = name
                report.worst_index = tuple(int(i) for i in np.unravel_index(j, p.shape))
        report.per_param[name] = worst
    return report
