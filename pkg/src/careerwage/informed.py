"""Robust wage policies for a worker who privately knows his type.

Types are indexed internally by decreasing effective cost, so index 0 is the
least productive type and the last index is the pivot whose threshold
anchors every other type's threshold at ``w + lambda_k - lambda_pivot``.

The greedy tail R^G is built backward from the wage where even universal
shirking cannot be sustained: at each wage the equilibrium-breaking
constraint is made to bind, using tail values already fixed at higher wages.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment, career_value
from .wage_policy import TailWagePolicy, WagePolicy

DIVISIONS = 1024
BISECT_ITERS = 40
AUDIT_N = 2000
STRUCTURAL_ATOM = 1e-6


class AssumptionError(ValueError):
    """Raised when the multi-type construction's assumptions fail."""

    def __init__(self, report: "AssumptionReport"):
        super().__init__("assumptions failed: " + ", ".join(report.failed()))
        self.report = report


class NotImplementableError(ValueError):
    def __init__(self, witness: dict):
        super().__init__(f"target profile is not implementable: {witness}")
        self.witness = witness


def _require_informed(env: Environment, binary: bool = False):
    if not env.informed:
        raise ValueError("environment is in uninformed mode")
    if binary and env.K != 2:
        raise ValueError("this construction needs exactly two types")


def _lams(env: Environment):
    lam = env.cost / env.work_gain
    return lam, lam - lam[-1]


def _D(env, *cols):
    return career_value(env, np.stack(np.broadcast_arrays(*cols), axis=-1))


def critical_wages_informed(env: Environment):
    """(w_low, w_high): the partial-implementation wage and the full-dispersion top.

    w_low = lambda_1 - D(1,...,1); w_high is the largest
    lambda_k - D(0,...,0,1,...,1) with k leading zeros, floored at w_low.
    """
    _require_informed(env)
    lam, _ = _lams(env)
    K = env.K
    w_low = float(lam[0] - career_value(env, np.ones(K)))
    corners = []
    for k in range(1, K + 1):
        q = np.ones(K)
        q[:k] = 0.0
        corners.append(float(lam[k - 1] - career_value(env, q)))
    return w_low, max(max(corners), w_low)


def dispersion_criterion(env: Environment) -> bool:
    """Binary: D(1,1) - D(0,0) > lambda_L - lambda_H."""
    _require_informed(env, binary=True)
    lam, _ = _lams(env)
    return bool(career_value(env, np.ones(2)) - career_value(env, np.zeros(2)) > lam[0] - lam[1])


def check_binary_monotonicity(env: Environment, n: int = 33) -> bool:
    """D strictly decreasing in q_L and strictly increasing in q_H on a grid."""
    g = np.linspace(0.0, 1.0, n)
    qL, qH = np.meshgrid(g, g, indexing="ij")
    d = _D(env, qL, qH)
    return bool(np.all(np.diff(d, axis=0) < 0) and np.all(np.diff(d, axis=1) > 0))


class GreedyTail(TailWagePolicy):
    """Continuous greedy tail through ascending samples (w, R)."""

    def __init__(self, w, R, w_l: float, w_top: float, step: float):
        w = np.asarray(w, dtype=float)
        R = np.asarray(R, dtype=float)
        super().__init__(WagePolicy.from_tail(w, R, R))
        self.w, self.R = w, R
        self.w_l, self.w_top, self.step = float(w_l), float(w_top), float(step)

    def __call__(self, w):
        return np.interp(w, self.w, self.R, left=1.0, right=0.0)

    def right(self, w):
        return self(w)


def _bisect_pivot(env, w, fixed, lam_p):
    """Solve w + D(fixed..., x) = lam_p for x in [0, 1], vectorized over rows.

    Returns x and a mask of rows where even x = 1 leaves the constraint slack
    (the construction has run past its lower end).
    """
    ones = np.ones_like(w)
    g1 = w + _D(env, *fixed, ones) - lam_p
    g0 = w + _D(env, *fixed, 0 * ones) - lam_p
    lo, hi = np.zeros_like(w), np.ones_like(w)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        up = w + _D(env, *fixed, mid) - lam_p < 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    x = np.where(g0 >= 0, 0.0, 0.5 * (lo + hi))
    return x, g1 < 0


def _refine_floor(fun, a, b, iters=60):
    """Root of an increasing ``fun`` on [a, b] with fun(a) < 0 <= fun(b)."""
    for _ in range(iters):
        m = 0.5 * (a + b)
        if fun(m) < 0:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def greedy_policy(env: Environment, divisions: int = DIVISIONS) -> GreedyTail:
    """Greedy tail R^G for a binary informed worker.

    The wage grid descends from lambda_H - D(0,0) in steps of
    lambda_0 / divisions, so the tail at ``w + lambda_0`` is always an
    already-solved grid value.
    """
    _require_informed(env, binary=True)
    if not check_binary_monotonicity(env):
        raise ValueError("career value is not monotone in each type's effort; "
                         "use greedy_policy_multi")
    lam, off = _lams(env)
    lam_h, lam0 = float(lam[1]), float(off[0])
    w_top = float(lam_h - career_value(env, np.zeros(2)))
    h = lam0 / divisions
    ws, Rs = [], []
    prev = np.zeros(divisions)
    floor_r = 0.0
    w_l = None
    b = 0
    while w_l is None:
        w = w_top - h * (b * divisions + np.arange(divisions))
        x, fail = _bisect_pivot(env, w, (prev,), lam_h)
        below = w < 0
        stop = fail | below
        n_ok = int(np.argmax(stop)) if stop.any() else divisions
        x = np.maximum.accumulate(np.maximum(x[:n_ok], floor_r))
        ws.append(w[:n_ok])
        Rs.append(x)
        if n_ok < divisions:
            hi_w = w[n_ok - 1] if n_ok else ws[-2][-1]
            lo_w = w[n_ok]
            up_w = np.concatenate(ws)[::-1]
            up_r = np.concatenate(Rs)[::-1]
            def look(v):
                return np.interp(v + lam0, up_w, up_r, left=1.0, right=0.0)
            if below[n_ok] and not fail[n_ok]:
                w_l = max(lo_w, 0.0)
            else:
                w_l = _refine_floor(lambda v: v + float(_D(env, look(v), 1.0)) - lam_h,
                                    lo_w, hi_w)
            break
        prev, floor_r = x, x[-1]
        b += 1
    w_desc = np.concatenate(ws)
    r_desc = np.concatenate(Rs)
    w_asc = np.concatenate([[w_l], w_desc[::-1]])
    r_asc = np.concatenate([[1.0], r_desc[::-1]])
    keep = np.concatenate([np.diff(w_asc) > 0, [True]])
    return GreedyTail(w_asc[keep], r_asc[keep], w_l, w_top, h)


@dataclass
class InformedSolution:
    w_low_tilde: float
    w_high_tilde: float
    greedy_tail: GreedyTail
    policy: WagePolicy
    atom_list: list
    binding_residuals: np.ndarray
    target: tuple = (1.0, 1.0)
    dispersion: bool = True
    audit: dict = field(default_factory=dict)

    @property
    def binding_residual_max(self) -> float:
        return float(np.max(self.binding_residuals, initial=0.0))

    def report(self) -> dict:
        return {"w_low_tilde": self.w_low_tilde, "w_high_tilde": self.w_high_tilde,
                "dispersion": self.dispersion, "target_q": list(self.target),
                "mean": self.policy.mean, "variance": self.policy.variance,
                "support_range": self.policy.support_range,
                "atoms": [list(a) for a in self.atom_list],
                "greedy_support": [self.greedy_tail.w_l, self.greedy_tail.w_top],
                "binding_residual_max": self.binding_residual_max,
                **{k: v for k, v in self.audit.items() if not isinstance(v, np.ndarray)}}


def structural_atoms(policy: WagePolicy, threshold: float = STRUCTURAL_ATOM):
    """Atoms at positive wages with mass above ``threshold``."""
    return [(w, m) for w, m in policy.atoms if w > 0 and m > threshold]


def _tail_policy(points, R_at, R_right) -> WagePolicy:
    x = np.asarray(points, dtype=float)
    order = np.argsort(x, kind="stable")
    x, ra, rr = x[order], np.asarray(R_at)[order], np.asarray(R_right)[order]
    keep = np.concatenate([[True], np.diff(x) > 1e-15])
    return WagePolicy.from_tail(x[keep], ra[keep], rr[keep])


def _audit(env, policy: WagePolicy, lo: float, hi: float, n: int = AUDIT_N):
    """Binding residuals on (lo, hi] and the strict-slack check below the pivot threshold."""
    lam, off = _lams(env)
    lam_p = float(lam[-1])
    if hi <= lo:
        return np.zeros(0), 0.0
    w = np.linspace(lo, hi, n + 1)[1:]
    q = policy.tail(w[:, None] + off[None, :])
    resid = np.abs(w + career_value(env, q) - lam_p)
    # below the pivot's on-path threshold everyone works and shirking must stay optimal
    w_piv = lam_p - float(career_value(env, np.ones(env.K)))
    wb = np.linspace(w_piv - 1.0, w_piv, 200, endpoint=False)
    wb = wb[wb >= 0]
    if wb.size:
        qb = policy.tail(wb[:, None] + off[None, :])
        slack = float(np.max(wb + career_value(env, qb) - lam_p))
    else:
        slack = -np.inf
    return resid, slack


def _from_greedy(env, tail: GreedyTail, w_low: float, w_high: float, dispersion: bool):
    if not dispersion:
        pol = WagePolicy.degenerate(w_low)
        return InformedSolution(w_low, w_low, tail, pol, [(w_low, 1.0)], np.zeros(0),
                                tuple([1.0] * env.K), False)
    above = tail.w > w_low
    pts = np.concatenate([[w_low], tail.w[above]])
    r0 = float(tail(w_low))
    r_at = np.concatenate([[1.0], tail.R[above]])
    r_right = np.concatenate([[r0], tail.R[above]])
    pol = _tail_policy(pts, r_at, r_right)
    resid, slack = _audit(env, pol, w_low, w_high)
    sol = InformedSolution(w_low, w_high, tail, pol, structural_atoms(pol), resid,
                           tuple([1.0] * env.K), True)
    sol.audit = {"slack_below_pivot_threshold": slack, "greedy_step": tail.step,
                 "greedy_floor": tail.w_l}
    return sol


def robust_policy_informed(env: Environment, divisions: int = DIVISIONS) -> InformedSolution:
    """R(w) = 1 up to w_low, then the greedy tail; one mass point at w_low."""
    _require_informed(env, binary=True)
    w_low, w_high = critical_wages_informed(env)
    tail = greedy_policy(env, divisions)
    return _from_greedy(env, tail, w_low, w_high, dispersion_criterion(env))


def target_thresholds(env: Environment, Q):
    """On-path threshold wages lambda_k - D(Q) per type."""
    lam, _ = _lams(env)
    return lam - float(career_value(env, np.asarray(Q, dtype=float)))


def implementable(env: Environment, Q, tail: GreedyTail | None = None):
    """(implementable, witness) for a binary target profile Q = (Q_L, Q_H).

    Q fails exactly when the low type's target threshold lies in the greedy
    tail's support and the greedy tail there already reaches Q_L.
    """
    _require_informed(env, binary=True)
    qL, qH = (float(v) for v in Q)
    if not (0 <= qL <= qH <= 1):
        raise ValueError("need 0 <= Q_L <= Q_H <= 1")
    tail = tail or greedy_policy(env)
    wbar_l = float(target_thresholds(env, (qL, qH))[0])
    r = float(tail(wbar_l))
    inside = tail.w_l <= wbar_l <= tail.w_top
    ok = not (inside and qL <= r)
    return ok, {"w_bar_L": wbar_l, "greedy_tail_at_w_bar_L": r, "in_greedy_support": inside,
                "Q": [qL, qH]}


def _crossings(tail: GreedyTail, level: float):
    """Wages where the piecewise-linear greedy tail equals ``level``."""
    if level <= 0 or level >= 1:
        return []
    R, w = tail.R, tail.w
    i = np.nonzero((R[:-1] >= level) & (R[1:] <= level) & (R[:-1] > R[1:]))[0]
    return [float(w[j] + (R[j] - level) / (R[j] - R[j + 1]) * (w[j + 1] - w[j])) for j in i]


def robust_policy_informed_Q(env: Environment, Q, divisions: int = DIVISIONS) -> InformedSolution:
    """Tail max{R^K_Q, min(R^G, Q_H)} inducing the profile Q = (Q_L, Q_H)."""
    _require_informed(env, binary=True)
    qL, qH = (float(v) for v in Q)
    if qL == 1.0 and qH == 1.0:
        return robust_policy_informed(env, divisions)
    tail = greedy_policy(env, divisions)
    ok, witness = implementable(env, (qL, qH), tail)
    if not ok:
        raise NotImplementableError(witness)
    w_low, w_high = critical_wages_informed(env)
    wl, wh = (float(v) for v in target_thresholds(env, (qL, qH)))

    def keep_at(w):
        w = np.asarray(w, dtype=float)
        return np.where(w <= 0, 1.0, np.where(w <= wh, qH, np.where(w <= wl, qL, 0.0)))

    def keep_right(w):
        w = np.asarray(w, dtype=float)
        return np.where(w < 0, 1.0, np.where(w < wh, qH, np.where(w < wl, qL, 0.0)))

    pts = np.unique(np.concatenate([[0.0, wh, wl], tail.w[tail.w > 0],
                                    _crossings(tail, qH), _crossings(tail, qL)]))
    g = np.minimum(tail(pts), qH)
    r_at = np.maximum(keep_at(pts), g)
    r_right = np.maximum(keep_right(pts), g)
    # keep one zero-tail point past the last positive value
    last = min(int(np.nonzero(r_at > 0)[0][-1]) + 2, pts.size)
    pts, r_at, r_right = pts[:last], r_at[:last], r_right[:last]
    r_right[-1] = 0.0
    pol = _tail_policy(pts, r_at, r_right)
    top = float(pol.support_bounds[1])
    resid, slack = _audit(env, pol, max(wl, wh), top)
    sol = InformedSolution(w_low, w_high, tail, pol, structural_atoms(pol), resid, (qL, qH),
                           True)
    sol.audit = {"w_bar_L": wl, "w_bar_H": wh, "slack_below_pivot_threshold": slack}
    return sol


# ---------------------------------------------------------------------------
# Expected wage on path

def payment_weights(env: Environment):
    """r_k: on-path success probability when exactly the types >= k work.

    Entry k (0-based, internal order) covers wages in [wbar_k, wbar_{k-1});
    the extra last entry covers [0, wbar_{K-1}) where nobody works.
    """
    mu, p0, p = env.prior, env.shirk_rate, env.work_gain
    K = env.K
    return np.array([float(np.sum(mu[:k] * p0[:k]) + np.sum(mu[k:] * (p0[k:] + p[k:])))
                     for k in range(K + 1)])


def _tail_integral(policy: WagePolicy, a: float, b: float) -> float:
    """Integral of R(w) = 1 - F(w) over [a, b]."""
    if b <= a:
        return 0.0
    x = policy.x
    pts = np.unique(np.concatenate([[a, b], x[(x > a) & (x < b)]]))
    # F is linear between breakpoints, so the trapezoid on right limits is exact
    fa = policy.cdf(pts[:-1])
    fb = policy.cdf_left(pts[1:])
    width = np.diff(pts)
    return float(np.sum(width * (1.0 - 0.5 * (fa + fb))))


def expected_wage(env: Environment, policy: WagePolicy, Q) -> float:
    """Expected success-contingent wage when type k works at wages >= its threshold."""
    _require_informed(env)
    th = target_thresholds(env, Q)
    mu, p0, p = env.prior, env.shirk_rate, env.work_gain

    def pay(w):
        w = np.atleast_1d(w)
        works = w[:, None] >= th[None, :] - 1e-12
        return (mu * (p0 + p * works)).sum(axis=1)

    total = sum(w * m * float(pay(w)[0]) for w, m in policy.atoms)
    x = policy.x
    cuts = np.unique(np.concatenate([x, th[(th > x[0]) & (th < x[-1])]]))
    a, b = cuts[:-1], cuts[1:]
    mass = policy.cdf_left(b) - policy.cdf(a)
    total += float(np.sum(pay(0.5 * (a + b)) * mass * 0.5 * (a + b)))
    return float(total)


def objective_decomposition(env: Environment, policy: WagePolicy, Q):
    """(V, C) with expected wage = V + C.

    V integrates the tail against the payment weights on each threshold
    interval; C collects the boundary terms r_k (wbar_k R(wbar_k) -
    wbar_{k-1} R(wbar_{k-1})).
    """
    _require_informed(env)
    th = target_thresholds(env, Q)
    r = payment_weights(env)
    K = env.K
    upper = np.concatenate([[np.inf], th])       # wbar_{k-1}
    lower = np.concatenate([th, [0.0]])          # wbar_k
    top = float(policy.x[-1])
    V = C = 0.0
    for k in range(K + 1):
        a, b = lower[k], min(upper[k], top)
        V += r[k] * _tail_integral(policy, a, b)
        ta = a * float(policy.tail(a)) if a > 0 else 0.0
        tb = upper[k] * float(policy.tail(upper[k])) if np.isfinite(upper[k]) else 0.0
        C += r[k] * (ta - tb)
    return float(V), float(C)


# ---------------------------------------------------------------------------
# Many types

@dataclass
class AssumptionVerdict:
    holds: bool
    worst_value: float
    worst_point: list
    detail: str = ""

    def to_dict(self):
        return {"holds": self.holds, "worst_value": self.worst_value,
                "worst_point": self.worst_point, "detail": self.detail}


@dataclass
class AssumptionReport:
    a1: AssumptionVerdict
    a2: AssumptionVerdict
    a3_narrow_value: AssumptionVerdict
    a3_spacing: AssumptionVerdict

    @property
    def ok(self) -> bool:
        return all(v.holds for v in (self.a1, self.a2, self.a3_narrow_value, self.a3_spacing))

    def failed(self):
        names = ("a1", "a2", "a3_narrow_value", "a3_spacing")
        return [n for n in names if not getattr(self, n).holds]

    def to_dict(self):
        return {n: getattr(self, n).to_dict() for n in
                ("a1", "a2", "a3_narrow_value", "a3_spacing")} | {"ok": self.ok}


def _samples(K, rng, lo=0.0, hi=1.0, per_axis=None, n_random=400):
    per_axis = per_axis or (9 if K <= 3 else 5)
    g = np.linspace(lo, hi, per_axis)
    lattice = np.array(list(itertools.product(g, repeat=K)))
    return np.vstack([lattice, rng.uniform(lo, hi, size=(n_random, K))])


def _gradient(env, q, h):
    K = q.shape[1]
    grads = np.empty_like(q)
    for k in range(K):
        e = np.zeros(K)
        e[k] = h
        grads[:, k] = (career_value(env, q + e) - career_value(env, q - e)) / (2 * h)
    return grads


def assumptions_check(env: Environment, seed: int = 0, tol: float = 1e-9) -> AssumptionReport:
    """Grid checks of concavity, ordered effort effects and the narrowness conditions."""
    _require_informed(env)
    rng = np.random.default_rng(seed)
    K = env.K
    lam, _ = _lams(env)
    h = 1e-4
    inner = _samples(K, rng, 2 * h, 1 - 2 * h)

    # concavity: largest Hessian eigenvalue from central differences
    hess = np.empty((inner.shape[0], K, K))
    for i in range(K):
        for j in range(K):
            ei, ej = np.zeros(K), np.zeros(K)
            ei[i], ej[j] = h, h
            hess[:, i, j] = (career_value(env, inner + ei + ej) - career_value(env, inner + ei - ej)
                             - career_value(env, inner - ei + ej)
                             + career_value(env, inner - ei - ej)) / (4 * h * h)
    top_eig = np.linalg.eigvalsh(0.5 * (hess + np.swapaxes(hess, 1, 2)))[:, -1]
    i = int(np.argmax(top_eig))
    scale = max(1.0, float(np.max(np.abs(hess))))
    a1 = AssumptionVerdict(bool(top_eig[i] <= 1e-5 * scale), float(top_eig[i]), inner[i].tolist(),
                           "largest Hessian eigenvalue")

    grad = _gradient(env, inner, h)
    margins = np.column_stack([grad[:, -1]] + [grad[:, k + 1] - grad[:, k] for k in range(K - 1)])
    flat = int(np.argmin(margins))
    r, c = divmod(flat, margins.shape[1])
    a2 = AssumptionVerdict(bool(margins[r, c] > tol), float(margins[r, c]), inner[r].tolist(),
                           "pivot slope" if c == 0 else f"slope gap between types {c - 1} and {c}")

    d_all = float(career_value(env, np.ones(K)))
    worst, worst_pt, worst_k = -np.inf, None, None
    for k in range(1, K):
        free = np.sort(_samples(k, rng, 0.0, 1.0), axis=1)
        # the all-ones profile makes the k = 1 inequality read 0 < 0
        free = free[np.max(1.0 - free, axis=1) >= 1e-3]
        q = np.hstack([free, np.ones((free.shape[0], K - k))])
        gap = d_all - career_value(env, q) - (lam[0] - lam[k - 1])
        j = int(np.argmax(gap))
        if gap[j] > worst:
            worst, worst_pt, worst_k = float(gap[j]), q[j].tolist(), k
    a3a = AssumptionVerdict(bool(worst < 0), worst, worst_pt, f"k={worst_k}")

    steps = lam[:-1] - lam[1:]
    kmin = int(np.argmin(steps))
    spread = d_all - float(career_value(env, np.zeros(K)))
    val = spread - (lam[0] - lam[-1]) - float(steps[kmin])
    a3b = AssumptionVerdict(bool(val < 0), float(val), [], f"k={kmin + 1}")
    return AssumptionReport(a1, a2, a3a, a3b)


def greedy_policy_multi(env: Environment, step: float | None = None,
                        require_assumptions: bool = True) -> InformedSolution:
    """Greedy construction for K >= 2 types with interpolated offset lookups.

    At each wage the tail values at ``w + lambda_k - lambda_pivot`` come from
    linear interpolation of already-solved samples; the binding constraint is
    then solved for the pivot's tail value by bisection.
    """
    _require_informed(env)
    if require_assumptions:
        report = assumptions_check(env)
        if not report.ok:
            raise AssumptionError(report)
    K = env.K
    lam, off = _lams(env)
    lam_p = float(lam[-1])
    gap = float(np.min(off[:-1]))
    if step is None:
        step = gap / 1000.0
    block = max(1, int(np.floor(gap / step)))
    w_top = float(lam_p - career_value(env, np.zeros(K)))
    w_low, w_high = critical_wages_informed(env)
    solved_w = np.array([w_top])          # ascending
    solved_r = np.array([0.0])
    w_l = None
    b = 0
    while w_l is None:
        w = w_top - step * (1 + b * block + np.arange(block))
        fixed = [np.interp(w + off[k], solved_w, solved_r, left=1.0, right=0.0)
                 for k in range(K - 1)]
        x, fail = _bisect_pivot(env, w, fixed, lam_p)
        stop = fail | (w < 0)
        n_ok = int(np.argmax(stop)) if stop.any() else block
        x = np.maximum.accumulate(np.maximum(x[:n_ok], solved_r[0]))
        solved_w = np.concatenate([w[:n_ok][::-1], solved_w])
        solved_r = np.concatenate([x[::-1], solved_r])
        if n_ok < block:
            lo_w, hi_w = w[n_ok], solved_w[0]
            if w[n_ok] < 0 and not fail[n_ok]:
                w_l = max(lo_w, 0.0)
            else:
                def f(v):
                    fx = [np.interp(v + off[k], solved_w, solved_r, left=1.0, right=0.0)
                          for k in range(K - 1)]
                    return v + float(_D(env, *fx, 1.0)) - lam_p
                w_l = _refine_floor(f, lo_w, hi_w)
        b += 1
    w_asc = np.concatenate([[w_l], solved_w])
    r_asc = np.concatenate([[1.0], solved_r])
    keep = np.concatenate([np.diff(w_asc) > 0, [True]])
    tail = GreedyTail(w_asc[keep], r_asc[keep], w_l, w_top, step)
    return _from_greedy(env, tail, w_low, w_high, w_top > w_low)
