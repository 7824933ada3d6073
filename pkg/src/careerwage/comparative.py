"""Comparative statics of the uninformed robust policy along one parameter axis.

Axes:

* ``discount``: v -> delta * v.
* ``premium``: u -> mean(u) + s * (u - mean(u)), a single-crossing steepening.
* ``covariance``: on a uniform prior, u(t) = (1 - t) * u_rev + t * u where
  u_rev reverses the assignment of u across the productivity ranking, so
  Cov(u(t), p) is affine and increasing in t when u is assortative.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment, LinearWeights, SchemaError
from .uninformed import robust_policy
from .wage_policy import more_dispersed

AXES = ("discount", "premium", "covariance")
CSV_COLUMNS = ("axis", "value", "w_low", "w_high", "range", "variance", "mean", "atoms",
               "binding_residual_max", "error")


@dataclass
class SweepPoint:
    value: float
    w_low: float = float("nan")
    w_high: float = float("nan")
    range: float = float("nan")
    variance: float = float("nan")
    mean: float = float("nan")
    atoms: int = 0
    binding_residual_max: float = float("nan")
    error: str = ""
    policy: object = field(default=None, repr=False)


@dataclass
class SweepResult:
    axis: str
    points: list
    more_dispersed_pairs: list

    @property
    def values(self):
        return [p.value for p in self.points]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for p in self.points:
            wr.writerow([self.axis, repr(p.value), repr(p.w_low), repr(p.w_high), repr(p.range),
                         repr(p.variance), repr(p.mean), p.atoms, repr(p.binding_residual_max),
                         p.error])
        return buf.getvalue()


def _assortative_reversal(env: Environment) -> np.ndarray:
    """u re-assigned so the largest u goes to the least productive type."""
    u = env.value_fn.u
    by_p = np.argsort(env.work_gain, kind="stable")
    rev = np.empty_like(u)
    rev[by_p] = np.sort(u)[::-1]
    return rev


def env_at(base: Environment, axis: str, value: float) -> Environment:
    """The environment at one point of an axis."""
    if axis == "discount":
        if not 0 <= value <= 1:
            raise ValueError("discount factor must lie in [0, 1]")
        return base.replace(value_fn=base.value_fn.scaled(value))
    if not isinstance(base.value_fn, LinearWeights):
        raise ValueError(f"the {axis} axis needs linear weights")
    u = base.value_fn.u
    if axis == "premium":
        bar = float(base.prior @ u)
        return base.replace(value_fn=LinearWeights(bar + value * (u - bar)))
    if axis == "covariance":
        if np.ptp(base.prior) > 1e-12:
            raise ValueError("the covariance axis needs a uniform prior")
        if not 0 <= value <= 1:
            raise ValueError("covariance mixing weight must lie in [0, 1]")
        rev = _assortative_reversal(base)
        return base.replace(value_fn=LinearWeights((1 - value) * rev + value * u))
    raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")


def _evaluate(base, axis, value) -> SweepPoint:
    pt = SweepPoint(float(value))
    try:
        env = env_at(base, axis, value)
        sol = robust_policy(env)
    except (ValueError, SchemaError) as exc:
        pt.error = str(exc)
        return pt
    pol = sol.policy
    pt.w_low, pt.w_high = sol.w_low, sol.w_high
    pt.range, pt.variance, pt.mean = pol.support_range, pol.variance, pol.mean
    pt.atoms = len(sol.mass_points) if sol.strategic_uncertainty else 0
    pt.binding_residual_max = sol.binding_residual_max
    pt.policy = pol
    return pt


def sweep(base: Environment, axis: str, points) -> SweepResult:
    """Solve along ``axis`` and compare adjacent points for dispersion.

    Points are evaluated in order; invalid points carry an error string.
    ``more_dispersed_pairs`` lists (i, i+1, verdict) where verdict says
    whether point i+1 is more dispersed than point i.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")
    if base.informed:
        raise ValueError("sweeps use the uninformed solver")
    values = np.asarray(points, dtype=float)
    if values.ndim != 1 or values.size < 1 or np.any(np.diff(values) <= 0):
        raise ValueError("axis values must be strictly increasing")
    pts = [_evaluate(base, axis, v) for v in values]
    pairs = []
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        if a.policy is None or b.policy is None:
            continue
        pairs.append((i, i + 1, more_dispersed(b.policy, a.policy)))
    return SweepResult(axis, pts, pairs)
