"""Seeded random environment families used by property suites and sweeps."""
from __future__ import annotations

import numpy as np

from .environment import (INFORMED, Environment, LinearWeights,
                          PiecewiseLinearBinary, career_value, max_career_value)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _with_cost(types, prior, p0, p, vf, rng, headroom=(1.1, 2.0)):
    """Uninformed env whose effective cost exceeds max D by a random factor."""
    probe = Environment(types, prior, p0, p, np.ones(len(types)), vf)
    lam = max(max_career_value(probe), 1e-3) * rng.uniform(*headroom)
    shape = rng.uniform(0.5, 1.5, size=len(types))
    c = shape * lam * (prior @ p) / (prior @ (shape * p))
    return probe.replace(cost=c)


def random_linear_environment(seed=None, K=None, sign=None) -> Environment:
    """Linear uninformed env with a common shirk rate in [0.05, 0.3].

    ``sign`` = +1 or -1 forces the sign of Cov(u, p); None leaves it random.
    """
    rng = _rng(seed)
    K = K or int(rng.integers(2, 5))
    types = tuple(f"t{k}" for k in range(K))
    prior = rng.dirichlet(np.ones(K) * 2.0)
    p0 = rng.uniform(0.05, 0.3)
    p = rng.uniform(0.05, 1.0 - p0, size=K)
    u = rng.uniform(0.0, 1.0, size=K)
    if sign is not None:
        # align (or anti-align) the ranking of u with that of p
        u = np.sort(u)[np.argsort(np.argsort(sign * p))]
        if np.ptp(p) < 1e-3:
            p[0] = p[0] * 0.5
    return _with_cost(types, prior, np.full(K, p0), p, LinearWeights(u), rng)


def _has_dip(env, n=2049, depth=1e-6) -> bool:
    d = career_value(env, np.linspace(0.0, 1.0, n))
    return bool(np.any(np.diff(d) < -depth))


def zigzag_environment(seed=None, max_tries=200) -> Environment:
    """Binary env with a piecewise-linear value whose career value dips somewhere."""
    rng = _rng(seed)
    for _ in range(max_tries):
        a = rng.uniform(0.3, 0.7)
        b = a + rng.uniform(0.02, 0.12)
        va = a * rng.uniform(0.8, 1.2)
        vb = max(va - rng.uniform(0.03, 0.2), 0.0)
        v1 = vb + rng.uniform(0.1, 0.6)
        vf = PiecewiseLinearBinary([0.0, a, b, 1.0], [0.0, va, vb, v1])
        prior = np.array([1 - (m := rng.uniform(0.3, 0.7)), m])
        p0 = np.full(2, rng.uniform(0.05, 0.3))
        p = np.sort(rng.uniform(0.1, 1.0 - p0[0], size=2))
        env = _with_cost(("L", "H"), prior, p0, p, vf, rng)
        if _has_dip(env):
            return env
    raise RuntimeError("no dipping environment found")


def increasing_pwl_environment(seed=None, max_tries=200) -> Environment:
    """Binary env with an increasing piecewise-linear value and strictly increasing D."""
    rng = _rng(seed)
    for _ in range(max_tries):
        knots = np.sort(rng.uniform(0.05, 0.95, size=2))
        x = np.concatenate([[0.0], knots, [1.0]])
        v = np.cumsum(np.concatenate([[0.0], rng.uniform(0.05, 0.5, size=3)]))
        vf = PiecewiseLinearBinary(x, v)
        prior = np.array([1 - (m := rng.uniform(0.3, 0.7)), m])
        p0 = np.full(2, rng.uniform(0.05, 0.3))
        p = np.sort(rng.uniform(0.1, 1.0 - p0[0], size=2))
        env = _with_cost(("L", "H"), prior, p0, p, vf, rng)
        d = career_value(env, np.linspace(0.0, 1.0, 4097))
        if np.all(np.diff(d) > 0):
            return env
    raise RuntimeError("no increasing environment found")


def random_informed_binary(seed=None, gap_scale=(0.0, 2.0)) -> Environment:
    """Informed binary env with v = posterior of the productive type.

    The cost gap lambda_L - lambda_H is drawn as a random multiple of
    D(1,1) - D(0,0), so both sides of the dispersion criterion occur.
    """
    rng = _rng(seed)
    m = rng.uniform(0.2, 0.8)
    prior = np.array([1 - m, m])
    p0 = np.full(2, rng.uniform(0.05, 0.3))
    p = np.sort(rng.uniform(0.1, 1.0 - p0[0], size=2))
    if p[1] - p[0] < 0.05:
        p[0] = max(p[1] - 0.1, 0.02)
    vf = LinearWeights([0.0, 1.0])
    probe = Environment(("L", "H"), prior, p0, p, np.array([2.0, 1.0]) * p, vf, INFORMED)
    spread = float(career_value(probe, np.ones(2)) - career_value(probe, np.zeros(2)))
    lam_h = max_career_value_informed(probe) * rng.uniform(1.1, 2.0)
    lam_l = lam_h + spread * rng.uniform(*gap_scale) + 1e-6
    return probe.replace(cost=np.array([lam_l, lam_h]) * p)


def max_career_value_informed(env: Environment, n: int = 65) -> float:
    g = np.linspace(0.0, 1.0, n)
    mesh = np.stack(np.meshgrid(*([g] * env.K), indexing="ij"), axis=-1).reshape(-1, env.K)
    return float(np.max(career_value(env, mesh)))


def search_multitype_environment(seed=0, K=3, tries=2000,
                                 require=("a2", "a3_narrow_value", "a3_spacing")):
    """Random search for an informed env with dispersion passing the named checks.

    Concavity ("a1") is not required by default: with linear weights the
    Hessian of D restricted to span{mu p, u mu p} has determinant -a^2 < 0,
    so no linear-weight environment is concave.
    """
    from .informed import assumptions_check, critical_wages_informed

    rng = _rng(seed)
    for _ in range(tries):
        prior = rng.dirichlet(np.ones(K) * 3.0)
        p0 = np.full(K, rng.uniform(0.05, 0.3))
        p = np.sort(rng.uniform(0.05, 1.0 - p0[0], size=K))
        u = np.sort(rng.uniform(0, 1, size=K))
        vf = LinearWeights(u)
        base = Environment(tuple(f"t{k}" for k in range(K)), prior, p0, p,
                           np.linspace(2.0, 1.0, K) * p, vf, INFORMED)
        top = max_career_value_informed(base, 17)
        lam_k = top * rng.uniform(1.05, 1.6)
        steps = rng.uniform(0.01, 0.3, size=K - 1) * top
        lam = lam_k + np.concatenate([np.cumsum(steps[::-1])[::-1], [0.0]])
        env = base.replace(cost=lam * p)
        w_low, w_high = critical_wages_informed(env)
        if w_high <= w_low + 1e-4:
            continue
        report = assumptions_check(env)
        if all(getattr(report, name).holds for name in require):
            return env
    raise RuntimeError("no environment passed the checks")


def three_type_environment() -> Environment:
    """K = 3 informed env with dispersion passing the ordering and narrowness checks.

    Rounded from :func:`search_multitype_environment` (seed 3) and scaled by
    10. Effective costs are (0.887, 0.781, 0.646).
    """
    p = np.array([0.14, 0.175, 0.62])
    lam = np.array([0.887, 0.781, 0.646])
    return Environment(types=("low", "mid", "high"), prior=[0.58, 0.27, 0.15],
                       shirk_rate=[0.17, 0.17, 0.17], work_gain=p, cost=lam * p,
                       value_fn=LinearWeights([3.9, 4.3, 5.2]), info_mode=INFORMED)
