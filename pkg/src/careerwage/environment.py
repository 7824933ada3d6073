"""Model primitives: environments, Bayesian posteriors and career values.

Types are indexed ``0..K-1``. In informed mode the constructor relabels the
types so that the per-type effective cost ``c_k / p_k`` strictly decreases
with the index; the original labels are kept in ``Environment.types`` and the
original positions in ``Environment.order``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.optimize import minimize_scalar

UNINFORMED = "uninformed"
INFORMED = "informed"

WEAK_TOL = 1e-12
STRICT_GAP = 1e-9


class SchemaError(ValueError):
    """Invalid environment document; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True, eq=False)
class LinearWeights:
    """Market value linear in the posterior: v(mu) = sum_k mu_k u_k."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.ndim != 1 or np.any(u < 0) or not np.all(np.isfinite(u)):
            raise SchemaError("value_fn", "linear weights must be finite and nonnegative")
        object.__setattr__(self, "u", u)

    def __call__(self, mu):
        return np.asarray(mu) @ self.u

    def scaled(self, factor: float) -> "LinearWeights":
        return LinearWeights(self.u * factor)

    def relabeled(self, order) -> "LinearWeights":
        return LinearWeights(self.u[list(order)])

    def is_increasing(self) -> bool:
        d = np.diff(self.u)
        return bool(np.all(d >= 0) and np.any(d > 0))

    def to_dict(self):
        return {"linear": self.u.tolist()}


@dataclass(frozen=True, eq=False)
class PiecewiseLinearBinary:
    """Binary-type market value, piecewise linear in the posterior of type 1.

    ``x`` are knot abscissae (strictly increasing, from 0 to 1) and ``v`` the
    values there; evaluation interpolates linearly.
    """

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise SchemaError("value_fn", "pwl needs at least two [x, v] knots")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise SchemaError("value_fn", "pwl abscissae must increase strictly from 0 to 1")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise SchemaError("value_fn", "pwl values must be finite and nonnegative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    def __call__(self, mu):
        return np.interp(np.asarray(mu)[..., 1], self.x, self.v)

    def scaled(self, factor: float) -> "PiecewiseLinearBinary":
        return PiecewiseLinearBinary(self.x, self.v * factor)

    def relabeled(self, order) -> "PiecewiseLinearBinary":
        if tuple(order) == (0, 1):
            return self
        # the tracked coordinate is now the other type
        return PiecewiseLinearBinary(1.0 - self.x[::-1], self.v[::-1])

    def is_increasing(self) -> bool:
        d = np.diff(self.v)
        return bool(np.all(d >= 0) and np.any(d > 0))

    def to_dict(self):
        return {"pwl": np.column_stack([self.x, self.v]).tolist()}


ValueFunction = Union[LinearWeights, PiecewiseLinearBinary]


@dataclass(frozen=True, eq=False)
class Environment:
    types: tuple
    prior: np.ndarray
    shirk_rate: np.ndarray
    work_gain: np.ndarray
    cost: np.ndarray
    value_fn: ValueFunction
    info_mode: str = UNINFORMED
    order: tuple = field(default=None)

    def __post_init__(self):
        types = tuple(str(t) for t in self.types)
        K = len(types)
        if K < 2:
            raise SchemaError("types", "need at least two types")
        if len(set(types)) != K:
            raise SchemaError("types", "labels must be distinct")
        arrays = {}
        for name in ("prior", "shirk_rate", "work_gain", "cost"):
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != (K,) or not np.all(np.isfinite(a)):
                raise SchemaError(name, f"expected {K} finite numbers")
            arrays[name] = a
        mu, p0, p, c = arrays["prior"], arrays["shirk_rate"], arrays["work_gain"], arrays["cost"]
        if np.any(mu <= 0) or abs(mu.sum() - 1.0) > 1e-12:
            raise SchemaError("prior", "must be positive and sum to 1")
        if np.any(p0 < 0) or np.any(p0 > 1):
            raise SchemaError("shirk_rate", "must lie in [0, 1]")
        if np.any(p <= 0) or np.any(p0 + p > 1 + 1e-15):
            raise SchemaError("work_gain", "must be positive with shirk_rate + work_gain <= 1")
        if np.any(c <= 0):
            raise SchemaError("cost", "must be positive")
        if not np.any(p0 > 0):
            raise SchemaError("shirk_rate", "success must be on path (some shirk_rate > 0)")
        if not np.any(p0 + p < 1):
            raise SchemaError("work_gain", "failure must be on path (some shirk_rate + work_gain < 1)")
        mode = str(self.info_mode).lower()
        if mode not in (UNINFORMED, INFORMED):
            raise SchemaError("info_mode", "must be 'uninformed' or 'informed'")
        vf = self.value_fn
        if not isinstance(vf, (LinearWeights, PiecewiseLinearBinary)):
            raise SchemaError("value_fn", "unsupported value function")
        if isinstance(vf, LinearWeights) and vf.u.shape != (K,):
            raise SchemaError("value_fn", f"linear weights need {K} entries")
        if isinstance(vf, PiecewiseLinearBinary) and K != 2:
            raise SchemaError("value_fn", "pwl value functions require exactly two types")

        order = tuple(range(K)) if self.order is None else tuple(self.order)
        if mode == INFORMED:
            lam = c / p
            perm = tuple(int(i) for i in np.argsort(-lam, kind="stable"))
            if np.any(np.diff(lam[list(perm)]) >= 0):
                raise SchemaError("cost", "informed mode needs distinct per-type effective costs")
            if perm != tuple(range(K)):
                types = tuple(types[i] for i in perm)
                mu, p0, p, c = mu[list(perm)], p0[list(perm)], p[list(perm)], c[list(perm)]
                vf = vf.relabeled(perm)
                order = tuple(order[i] for i in perm)
        for name, a in (("prior", mu), ("shirk_rate", p0), ("work_gain", p), ("cost", c)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "value_fn", vf)
        object.__setattr__(self, "info_mode", mode)
        object.__setattr__(self, "order", order)

    @property
    def K(self) -> int:
        return len(self.types)

    @property
    def informed(self) -> bool:
        return self.info_mode == INFORMED

    @property
    def is_linear(self) -> bool:
        """Linear value function and type-independent shirking success rate."""
        return isinstance(self.value_fn, LinearWeights) and bool(np.ptp(self.shirk_rate) == 0)

    def replace(self, **changes) -> "Environment":
        fields = dict(types=self.types, prior=self.prior, shirk_rate=self.shirk_rate,
                      work_gain=self.work_gain, cost=self.cost, value_fn=self.value_fn,
                      info_mode=self.info_mode, order=self.order)
        fields.update(changes)
        return Environment(**fields)

    def to_dict(self) -> dict:
        return {
            "types": list(self.types),
            "prior": self.prior.tolist(),
            "shirk_rate": self.shirk_rate.tolist(),
            "work_gain": self.work_gain.tolist(),
            "cost": self.cost.tolist(),
            "value_fn": self.value_fn.to_dict(),
            "info_mode": self.info_mode,
        }


def environment_from_dict(doc: dict) -> Environment:
    if not isinstance(doc, dict):
        raise SchemaError("<root>", "environment document must be a JSON object")
    required = ("types", "prior", "shirk_rate", "work_gain", "cost", "value_fn")
    for name in required:
        if name not in doc:
            raise SchemaError(name, "missing field")
    unknown = set(doc) - set(required) - {"info_mode"}
    if unknown:
        raise SchemaError(sorted(unknown)[0], "unknown field")
    vf = doc["value_fn"]
    if not isinstance(vf, dict) or len(vf) != 1:
        raise SchemaError("value_fn", 'expected {"linear": [...]} or {"pwl": [[x, v], ...]}')
    ((kind, data),) = vf.items()
    try:
        if kind == "linear":
            value_fn = LinearWeights(data)
        elif kind == "pwl":
            arr = np.asarray(data, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise SchemaError("value_fn", "pwl knots must be [x, v] pairs")
            value_fn = PiecewiseLinearBinary(arr[:, 0], arr[:, 1])
        else:
            raise SchemaError("value_fn", f"unknown form {kind!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError("value_fn", str(exc)) from exc
    try:
        return Environment(
            types=doc["types"], prior=doc["prior"], shirk_rate=doc["shirk_rate"],
            work_gain=doc["work_gain"], cost=doc["cost"], value_fn=value_fn,
            info_mode=doc.get("info_mode", UNINFORMED),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError("<root>", str(exc)) from exc


def load_environment(path) -> Environment:
    with open(Path(path)) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("<root>", f"invalid JSON: {exc}") from exc
    return environment_from_dict(doc)


# ---------------------------------------------------------------------------
# Bayes updating and career value

def _profile(env: Environment, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if env.informed:
        if q.shape[-1:] != (env.K,):
            raise ValueError(f"informed mode needs a q-profile with {env.K} entries")
    else:
        q = q[..., None] * np.ones(env.K)
    if np.any(q < 0) or np.any(q > 1):
        raise ValueError("working probabilities must lie in [0, 1]")
    return q


def success_probability(env: Environment, q) -> np.ndarray:
    """Market-expected probability of success given working probabilities."""
    s = env.shirk_rate + _profile(env, q) * env.work_gain
    return s @ env.prior


def posteriors(env: Environment, q):
    """Posterior beliefs after success and after failure.

    Accepts a scalar/array of total working probabilities (uninformed) or a
    profile with a trailing axis of length K (informed). Returns arrays whose
    trailing axis indexes types.
    """
    s = env.shirk_rate + _profile(env, q) * env.work_gain
    joint_s = env.prior * s
    joint_f = env.prior * (1.0 - s)
    mu_hi = joint_s / joint_s.sum(axis=-1, keepdims=True)
    mu_lo = joint_f / joint_f.sum(axis=-1, keepdims=True)
    return mu_hi, mu_lo


def career_value(env: Environment, q):
    """D(q) = v(posterior after success) - v(posterior after failure)."""
    mu_hi, mu_lo = posteriors(env, q)
    return env.value_fn(mu_hi) - env.value_fn(mu_lo)


def effective_cost(env: Environment, with_flag: bool = False):
    """Effective cost of working.

    Uninformed: prior-weighted cost per unit of success gain (a float).
    Informed: the per-type profile ``c_k / p_k``. With ``with_flag`` also
    returns whether the cost exceeds the maximal career value, the standing
    model assumption that keeps wages positive.
    """
    mu, p, c = env.prior, env.work_gain, env.cost
    if env.informed:
        lam = c / p
        top = float(lam.min())
    else:
        denom = float(mu @ p)
        if denom <= 0:
            raise ValueError("expected work gain is zero")
        lam = float(mu @ c) / denom
        top = lam
    if not with_flag:
        return lam
    return lam, bool(top > max_career_value(env))


def max_career_value(env: Environment, n: int = 4097) -> float:
    if not env.informed:
        return float(career_value(env, np.linspace(0.0, 1.0, n)).max())
    m = 65 if env.K == 2 else 9
    axes = np.meshgrid(*([np.linspace(0.0, 1.0, m)] * env.K), indexing="ij")
    pts = np.stack([a.ravel() for a in axes], axis=-1)
    return float(career_value(env, pts).max())


def linear_closed_form(env: Environment, q):
    """Cov(u, p) * T(q) for linear environments with a common shirking rate."""
    if not env.is_linear:
        raise ValueError("closed form needs linear weights and a type-independent shirk rate")
    q = np.asarray(q, dtype=float)
    p0 = float(env.shirk_rate[0])
    ep = float(env.prior @ env.work_gain)
    t = q / ((p0 + ep * q) * (1.0 - p0 - ep * q))
    return _covariance(env) * t


def _covariance(env: Environment) -> float:
    mu, u, p = env.prior, env.value_fn.u, env.work_gain
    return float(mu @ (u * p) - (mu @ u) * (mu @ p))


class CareerValueFn:
    """Tabulated career value with minimum and continuity metadata.

    Uninformed: samples ``grid_n + 1`` equally spaced q in [0, 1]; the grid
    minimum is polished by a bounded scalar minimization on the neighbouring
    cells. Informed: a coarse lattice of profiles is kept for diagnostics.
    """

    def __init__(self, env: Environment, grid_n: int = 4096):
        if grid_n < 16:
            raise ValueError("grid_n must be at least 16")
        self.env = env
        self.grid_n = grid_n
        if env.informed:
            m = min(grid_n, 129) if env.K == 2 else 9
            axes = np.meshgrid(*([np.linspace(0.0, 1.0, m)] * env.K), indexing="ij")
            self.grid = np.stack([a.ravel() for a in axes], axis=-1)
            self.values = career_value(env, self.grid)
            i = int(np.argmin(self.values))
            self.min_value = float(self.values[i])
            self.argmin = self.grid[i]
            self.lipschitz = None
            return
        self.grid = np.linspace(0.0, 1.0, grid_n + 1)
        self.values = career_value(env, self.grid)
        self.spacing = 1.0 / grid_n
        self.lipschitz = float(np.max(np.abs(np.diff(self.values))) / self.spacing)
        i = int(np.argmin(self.values))
        best_q, best = float(self.grid[i]), float(self.values[i])
        lo, hi = self.grid[max(i - 1, 0)], self.grid[min(i + 1, grid_n)]
        if hi > lo:
            res = minimize_scalar(lambda x: float(career_value(env, x)), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12})
            if res.fun < best:
                best_q, best = float(res.x), float(res.fun)
        self.min_value = best
        self.argmin = best_q

    def __call__(self, q):
        return career_value(self.env, q)


def build_career_value_fn(env: Environment, grid_n: int = 4096) -> CareerValueFn:
    return CareerValueFn(env, grid_n)


# ---------------------------------------------------------------------------
# Structural diagnostics

@dataclass(frozen=True, eq=False)
class Complementarity:
    verdict: str  # "Complementary" | "Dominated" | "Mixed"
    P: np.ndarray
    QS: np.ndarray
    QF: np.ndarray


def _fosd(a: np.ndarray, b: np.ndarray):
    """(weakly dominates, strict somewhere) for a over b; types ordered by index."""
    ca, cb = np.cumsum(a)[:-1], np.cumsum(b)[:-1]
    weak = bool(np.all(ca <= cb + WEAK_TOL))
    strict = bool(np.any(cb - ca > STRICT_GAP))
    return weak, strict


def complementarity_check(env: Environment) -> Complementarity:
    """Compare the effort-effect profile with the two shirking-effect profiles."""
    vf = env.value_fn
    if not vf.is_increasing():
        raise ValueError("complementarity test needs a value function increasing in type order")
    mu, p0, p = env.prior, env.shirk_rate, env.work_gain
    P = mu * p / (mu @ p)
    QS = mu * p0 / (mu @ p0)
    QF = mu * (1 - p0) / (mu @ (1 - p0))
    ws, ss = _fosd(P, QS)
    wf, sf = _fosd(P, QF)
    if ws and wf and (ss or sf):
        verdict = "Complementary"
    elif _fosd(QS, P)[0] and _fosd(QF, P)[0]:
        verdict = "Dominated"
    else:
        verdict = "Mixed"
    return Complementarity(verdict, P, QS, QF)


def linear_criterion(env: Environment):
    """(Cov(u, p), Cov(u, p) > 0) for linear environments."""
    if not env.is_linear:
        raise ValueError("linear criterion needs linear weights and a type-independent shirk rate")
    cov = _covariance(env)
    return cov, cov > 0


def example_environment(info_mode: str = UNINFORMED) -> Environment:
    """Two-type example with D(q) = 10q / ((1 + 5q)(9 - 5q)) and unit effective cost."""
    return Environment(types=("L", "H"), prior=[0.5, 0.5], shirk_rate=[0.1, 0.1],
                       work_gain=[0.3, 0.7], cost=[0.5, 0.5],
                       value_fn=LinearWeights([0.0, 1.0]), info_mode=info_mode)


def informed_example_environment() -> Environment:
    """Two-type informed example with per-type effective costs (1.2, 1)."""
    return Environment(types=("L", "H"), prior=[0.5, 0.5], shirk_rate=[0.1, 0.1],
                       work_gain=[0.3, 0.7], cost=[0.36, 0.7],
                       value_fn=LinearWeights([0.0, 1.0]), info_mode=INFORMED)
