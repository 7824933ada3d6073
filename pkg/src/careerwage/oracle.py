"""Brute-force equilibrium enumeration and full-implementation verdicts.

This module never calls the solvers. It scans candidate threshold
equilibria induced by an arbitrary wage policy:

* uninformed: every total working probability q on a grid (plus the
  breakpoints induced by atoms) is paired with its threshold interval
  F^{-1}(1 - q);
* informed: the pivot type's threshold t is scanned and every other type's
  threshold sits at t plus its cost offset.

Sign changes of the indifference gap are bracketed and bisected, so
equilibria between grid points are not missed.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .environment import Environment, career_value, effective_cost
from .wage_policy import WagePolicy

DEFAULT_TOL = 1e-7
DEFAULT_GRID = 10_000
MATCH_TOL = 1e-6
FULL = 1e-12


@dataclass
class EquilibriumRecord:
    mode: str
    thresholds: tuple
    q: tuple
    q_range: tuple
    mixing: tuple
    residual: float
    classification: str
    continuum: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass
class Verdict:
    fully_implements: bool
    witnesses: list
    tolerance: float
    target: tuple
    target_present: bool
    records: list = field(default_factory=list)

    def to_dict(self):
        return {"fully_implements": self.fully_implements, "tolerance": self.tolerance,
                "target": list(self.target), "target_present": self.target_present,
                "witnesses": [r.to_dict() for r in self.witnesses],
                "records": [r.to_dict() for r in self.records]}


def _classify(q) -> str:
    q = np.atleast_1d(q)
    if np.all(q >= 1 - FULL):
        return "FullWork"
    if np.all(q <= FULL):
        return "FullShirk"
    return "Mixed"


def _mixing(policy: WagePolicy, w: float, q: float, tol: float):
    """Probability of working at an atom threshold, or None off atoms."""
    lo, hi = float(policy.cdf_left(w)), float(policy.cdf(w))
    if hi - lo <= 0:
        return None
    b = (q - (1.0 - hi)) / (hi - lo)
    if b < -tol or b > 1 + tol:
        return float("nan")
    return float(min(max(b, 0.0), 1.0))


# ---------------------------------------------------------------------------
# Uninformed

def enumerate_uninformed(env: Environment, policy: WagePolicy, q_grid_n: int = DEFAULT_GRID,
                         tol: float = DEFAULT_TOL):
    """All threshold equilibria (q, w) with w in F^{-1}(1 - q) and w + D(q) = lambda."""
    if env.informed:
        raise ValueError("environment is in informed mode")
    if q_grid_n < 100:
        raise ValueError("q_grid_n must be at least 100")
    lam = effective_cost(env)
    breaks = 1.0 - np.concatenate([policy.f_left, policy.f_right])
    q = np.unique(np.clip(np.concatenate([np.linspace(0.0, 1.0, q_grid_n + 1), breaks]), 0, 1))

    def sign(qv):
        lo, hi = policy.inverse_set(1.0 - qv)
        d = career_value(env, qv)
        s = np.where(lo + d - lam > tol, 1, np.where(hi + d - lam < -tol, -1, 0))
        return s, lo, hi, d

    s, lo, hi, d = sign(q)

    def record(qa, qb):
        qm = 0.5 * (qa + qb)
        l, h = policy.inverse_set(1.0 - qm)
        dm = float(career_value(env, qm))
        w = float(min(max(lam - dm, l), h))
        resid = abs(w + dm - lam)
        mix = _mixing(policy, w, qm, tol)
        cls = "FullWork" if qa >= 1 - FULL else "FullShirk" if qb <= FULL else "Mixed"
        return EquilibriumRecord("uninformed", (w,), (qm,), (float(qa), float(qb)),
                                 (mix,), resid, cls)

    records = []
    n = q.size
    # corners are reported on their own, interior zero-runs are merged
    if s[0] == 0:
        records.append(record(0.0, 0.0))
    i = 1
    while i < n - 1:
        if s[i] == 0:
            j = i
            while j + 1 < n - 1 and s[j + 1] == 0:
                j += 1
            records.append(record(q[i], q[j]))
            i = j + 1
            continue
        i += 1
    if s[-1] == 0:
        records.append(record(1.0, 1.0))
    # brackets with opposite strict signs hide an equilibrium
    for k in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        a, b, sa = q[k], q[k + 1], s[k]
        for _ in range(80):
            m = 0.5 * (a + b)
            sm = int(sign(np.array([m]))[0][0])
            if sm == 0 or b - a < 1e-15:
                break
            if sm == sa:
                a = m
            else:
                b = m
        records.append(record(m, m))
    records.sort(key=lambda r: r.q_range[0])
    return records


# ---------------------------------------------------------------------------
# Informed

def _offsets(env: Environment):
    lam = env.cost / env.work_gain
    return lam, lam - lam[-1]


def _box_range(env, lo_q, hi_q):
    """Min and max of D over boxes [lo_q, hi_q] (rows are boxes)."""
    K = lo_q.shape[1]
    corners = np.array(list(itertools.product((0, 1), repeat=K)), dtype=bool)
    vals = []
    for c in corners:
        vals.append(career_value(env, np.where(c, hi_q, lo_q)))
    vals = np.stack(vals, axis=1)
    wide = (hi_q - lo_q) > 0
    one_d = wide.sum(axis=1) == 1
    if np.any(one_d) and K > 2:
        # nonmonotone directions: sample along the single free coordinate
        idx = np.nonzero(one_d)[0]
        ts = np.linspace(0.0, 1.0, 17)
        pts = lo_q[idx][:, None, :] + ts[None, :, None] * (hi_q[idx] - lo_q[idx])[:, None, :]
        extra = career_value(env, pts)
        vmin = vals.min(axis=1)
        vmax = vals.max(axis=1)
        vmin[idx] = np.minimum(vmin[idx], extra.min(axis=1))
        vmax[idx] = np.maximum(vmax[idx], extra.max(axis=1))
        return vmin, vmax
    return vals.min(axis=1), vals.max(axis=1)


def _informed_boxes(env, policy, t):
    lam, off = _offsets(env)
    w = t[:, None] + off[None, :]
    hi_q = policy.tail(w)
    lo_q = 1.0 - policy.cdf(w)
    return lo_q, hi_q


def _solve_box(env, lam_pivot, t, lo_q, hi_q, tol):
    """A working profile in the box solving t + D(q) = lambda_pivot."""
    target = lam_pivot - t
    wide = np.nonzero(hi_q - lo_q > 0)[0]
    if wide.size == 0:
        return lo_q.copy(), False
    if wide.size == 1:
        k = wide[0]
        xs = np.linspace(lo_q[k], hi_q[k], 65)
        pts = np.tile(lo_q, (xs.size, 1))
        pts[:, k] = xs
        g = career_value(env, pts) - target
        hit = np.nonzero(np.abs(g) <= tol)[0]
        cross = np.nonzero(g[:-1] * g[1:] < 0)[0]
        if cross.size:
            a, b = xs[cross[0]], xs[cross[0] + 1]
            ga = g[cross[0]]
            for _ in range(80):
                m = 0.5 * (a + b)
                p = lo_q.copy()
                p[k] = m
                gm = float(career_value(env, p)) - target
                if (gm < 0) == (ga < 0):
                    a = m
                else:
                    b = m
            p = lo_q.copy()
            p[k] = 0.5 * (a + b)
            return p, False
        p = lo_q.copy()
        p[k] = xs[hit[0]] if hit.size else xs[np.argmin(np.abs(g))]
        return p, False
    # several mixing types: unique only at the extreme corners of the box
    K = lo_q.size
    corners = [np.where(np.array(c, bool), hi_q, lo_q) for c in itertools.product((0, 1), repeat=K)]
    vals = np.array([float(career_value(env, c)) for c in corners])
    best = int(np.argmin(np.abs(vals - target)))
    if abs(vals[best] - target) <= tol and (vals[best] <= vals.min() + tol or vals[best] >= vals.max() - tol):
        return corners[best], False
    return corners[best], True


def enumerate_informed(env: Environment, policy: WagePolicy, w_grid_n: int = DEFAULT_GRID,
                       tol: float = DEFAULT_TOL):
    """Threshold equilibria of an informed worker, scanning the pivot threshold.

    The pivot is the type with the lowest effective cost; type k's threshold
    is the pivot's plus ``lambda_k - lambda_pivot``.
    """
    if not env.informed:
        raise ValueError("environment is in uninformed mode")
    if w_grid_n < 100:
        raise ValueError("w_grid_n must be at least 100")
    lam, off = _offsets(env)
    lam_p = float(lam[-1])
    K = env.K
    d_all = float(career_value(env, np.ones(K)))
    d_none = float(career_value(env, np.zeros(K)))
    lo_s, hi_s = policy.support_bounds
    t_lo = min(lo_s - off.max(), lam_p - d_all) - 0.05
    t_hi = max(hi_s, lam_p - d_none) + 0.05
    bps = (policy.x[:, None] - off[None, :]).ravel()
    t = np.unique(np.concatenate([np.linspace(t_lo, t_hi, w_grid_n + 1), bps,
                                  [lam_p - d_all, lam_p - d_none]]))

    def sign(tv):
        lo_q, hi_q = _informed_boxes(env, policy, tv)
        dmin, dmax = _box_range(env, lo_q, hi_q)
        s = np.where(tv + dmin - lam_p > tol, 1, np.where(tv + dmax - lam_p < -tol, -1, 0))
        return s, lo_q, hi_q

    s, lo_q, hi_q = sign(t)

    def record(ta, tb):
        tm = 0.5 * (ta + tb)
        lq, hq = _informed_boxes(env, policy, np.array([tm]))
        qv, cont = _solve_box(env, lam_p, tm, lq[0], hq[0], tol)
        resid = abs(tm + float(career_value(env, qv)) - lam_p)
        ths = tuple(float(tm + o) for o in off)
        mix = tuple(_mixing(policy, th, float(qk), tol) for th, qk in zip(ths, qv))
        return EquilibriumRecord("informed", ths, tuple(float(v) for v in qv),
                                 (float(ta), float(tb)), mix, resid, _classify(qv),
                                 continuum=bool(cont or tb > ta))

    records = []
    n = t.size
    i = 0
    while i < n:
        if s[i] == 0:
            j = i
            while j + 1 < n and s[j + 1] == 0:
                j += 1
            records.append(record(t[i], t[j]))
            i = j + 1
        else:
            i += 1
    for k in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        a, b, sa = t[k], t[k + 1], s[k]
        for _ in range(80):
            m = 0.5 * (a + b)
            sm = int(sign(np.array([m]))[0][0])
            if sm == 0 or b - a < 1e-15:
                break
            if sm == sa:
                a = m
            else:
                b = m
        records.append(record(m, m))
    records.sort(key=lambda r: r.q_range[0])
    return records


def enumerate_informed_binary(env: Environment, policy: WagePolicy, w_grid_n: int = DEFAULT_GRID,
                              tol: float = DEFAULT_TOL):
    if env.K != 2:
        raise ValueError("binary enumeration needs exactly two types")
    return enumerate_informed(env, policy, w_grid_n, tol)


# ---------------------------------------------------------------------------
# Verdicts

def _matches(rec: EquilibriumRecord, target: np.ndarray, match_tol: float) -> bool:
    if rec.continuum:
        return False
    if rec.mode == "uninformed":
        qa, qb = rec.q_range
        return abs(qa - target[0]) <= match_tol and abs(qb - target[0]) <= match_tol
    return bool(np.all(np.abs(np.asarray(rec.q) - target) <= match_tol))


def fully_implements(env: Environment, policy: WagePolicy, target=1.0, *, grid_n: int = DEFAULT_GRID,
                     tol: float = DEFAULT_TOL, match_tol: float = MATCH_TOL) -> Verdict:
    """Is ``target`` the unique equilibrium outcome under ``policy``?

    ``target`` is a total working probability (uninformed) or a profile in the
    environment's internal type order (informed). The verdict also fails when
    the target equilibrium itself is absent.
    """
    if env.informed:
        tgt = np.broadcast_to(np.asarray(target, dtype=float), (env.K,)).copy()
        records = enumerate_informed(env, policy, grid_n, tol)
    else:
        tgt = np.array([float(target)])
        records = enumerate_uninformed(env, policy, grid_n, tol)
    good = [r for r in records if _matches(r, tgt, match_tol)]
    bad = [r for r in records if not _matches(r, tgt, match_tol)]
    ok = bool(good) and not bad
    return Verdict(ok, bad, tol, tuple(tgt.tolist()), bool(good), records)


def records_csv(records) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["mode", "classification", "thresholds", "q", "q_range_lo", "q_range_hi",
                 "mixing", "residual", "continuum"])
    for r in records:
        wr.writerow([r.mode, r.classification, json.dumps(list(r.thresholds)), json.dumps(list(r.q)),
                     repr(r.q_range[0]), repr(r.q_range[1]),
                     json.dumps([None if m is None or math.isnan(m) else m for m in r.mixing]),
                     repr(r.residual), r.continuum])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Feasible approximations of limit policies

def _rebuild(points):
    pts = sorted(points)
    x = np.array([p[0] for p in pts])
    keep = np.concatenate([[True], np.diff(x) > 0])
    pts = [p for p, k in zip(pts, keep) if k]
    return WagePolicy([p[0] for p in pts], [p[1] for p in pts], [p[2] for p in pts])


def approximating_policy(policy: WagePolicy, eps: float, mode: str = "uninformed", *,
                         split_at=None, purify=()) -> WagePolicy:
    """Feasible policy close to a limit policy.

    uninformed: shift right by ``eps`` and spread each atom linearly over
    the preceding half-``eps`` window, which keeps the CDF strictly below the
    input on the shifted support and removes all atoms.

    informed: shift right by ``eps``; with ``split_at`` (the low type's
    target threshold) wages below ``split_at + eps`` are shifted by
    ``2 eps`` instead. ``purify`` lists (threshold, Q_k) pairs at which the
    tail is linearized on [threshold - eps, threshold] so that it equals Q_k
    at the threshold.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    atoms = [a for a, _ in policy.atoms]
    if len(atoms) > 1 and eps >= np.min(np.diff(atoms)):
        raise ValueError("eps exceeds the spacing between mass points")
    x, fl, fr = policy.x, policy.f_left, policy.f_right
    if mode == "uninformed":
        pts = []
        ramps = [(a + eps / 2, a + eps) for a in atoms]
        for xi, l, r in zip(x, fl, fr):
            xs = xi + eps
            if any(s < xs < e for s, e in ramps):
                continue
            if r > l:
                start = float(policy.cdf(xi - eps / 2))
                pts.append((xi + eps / 2, start, start))
                pts.append((xs, r, r))
            else:
                pts.append((xs, l, r))
        return _rebuild(pts)
    if mode != "informed":
        raise ValueError("mode must be 'uninformed' or 'informed'")
    if split_at is None:
        out = policy.shifted(eps)
    else:
        s = float(split_at)
        pts = [(xi + 2 * eps, l, r) for xi, l, r in zip(x, fl, fr) if xi < s - eps]
        pts.append((s + eps, float(policy.cdf_left(s - eps)), float(policy.cdf(s))))
        pts += [(xi + eps, l, r) for xi, l, r in zip(x, fl, fr) if xi > s]
        out = _rebuild(pts)
    for th, qk in purify:
        out = _linearize(out, float(th), float(qk), eps)
    return out


def _linearize(policy: WagePolicy, th: float, qk: float, eps: float) -> WagePolicy:
    if policy.tail(th) <= qk + 1e-15:
        return policy
    pts = [(xi, l, r) for xi, l, r in zip(policy.x, policy.f_left, policy.f_right)
           if not (th - eps <= xi <= th)]
    a = th - eps
    pts.append((a, float(policy.cdf_left(a)), float(policy.cdf(a))))
    pts.append((th, 1.0 - qk, float(policy.cdf(th))))
    return _rebuild(pts)


# ---------------------------------------------------------------------------
# Exhaustive searches over step policies

def _interval_min(env, lo, hi, fine):
    """Min of D over [lo, hi], excluding q = 1 when hi = 1 and lo < 1."""
    qs = fine[(fine >= lo) & (fine <= hi)]
    if hi >= 1.0 and lo < 1.0:
        qs = qs[qs < 1.0]
    qs = np.unique(np.concatenate([qs, [lo] if lo < 1.0 else [], [hi] if hi < 1.0 else []]))
    return float(career_value(env, qs).min())


def uninformed_step_search(env: Environment, wages, levels: int = 8, fine_n: int = 4096):
    """Cheapest fully-implementing step policy with atoms on ``wages``.

    Searches every nondecreasing CDF with values in {0, 1/levels, ..., 1} at
    the sorted grid ``wages`` (last value 1). Full implementation of q = 1
    holds iff every candidate pair (q < 1, w) on the policy's graph has
    w + D(q) > lambda, i.e. for each grid wage g_i with F(g_i) > 0,
    g_i + min D over [1 - F(g_i), 1 - F(g_{i-1})] minus {1} exceeds lambda.
    The minimum over all such sequences is found by dynamic programming over
    the CDF level, which visits every sequence implicitly.

    Returns (mean, cdf_levels, count_fully_implementing).
    """
    lam = effective_cost(env)
    g = np.sort(np.asarray(wages, dtype=float))
    L = levels
    fine = np.linspace(0.0, 1.0, fine_n + 1)
    mins = np.full((L + 1, L + 1), np.inf)
    for a in range(L + 1):
        for b in range(a, L + 1):
            lo, hi = 1 - b / L, 1 - a / L
            if lo < 1.0:
                mins[a, b] = _interval_min(env, lo, hi, fine)
    n = g.size
    inf = math.inf
    cost = np.full(L + 1, inf)
    count = np.zeros(L + 1)
    back = np.zeros((n, L + 1), dtype=int)
    cost[0], count[0] = 0.0, 1.0
    for i in range(n):
        new_cost = np.full(L + 1, inf)
        new_count = np.zeros(L + 1)
        for b in range(L + 1):
            for a in range(b + 1):
                if count[a] == 0:
                    continue
                if b > 0 and not g[i] + mins[a, b] > lam:
                    continue
                c = cost[a] + g[i] * (b - a) / L
                new_count[b] += count[a]
                if c < new_cost[b]:
                    new_cost[b], back[i, b] = c, a
        cost, count = new_cost, new_count
    if count[L] == 0:
        return None, None, 0
    path = [L]
    for i in range(n - 1, 0, -1):
        path.append(back[i, path[-1]])
    F = np.array(path[::-1]) / L
    return float(cost[L]), F, int(count[L])


def uninformed_step_bruteforce(env: Environment, wages, levels: int = 4, fine_n: int = 4096):
    """Explicit enumeration twin of :func:`uninformed_step_search` for small grids."""
    lam = effective_cost(env)
    g = np.sort(np.asarray(wages, dtype=float))
    L = levels
    fine = np.linspace(0.0, 1.0, fine_n + 1)
    best, best_F, total = None, None, 0
    for seq in itertools.combinations_with_replacement(range(L + 1), g.size - 1):
        F = list(seq) + [L]
        ok, prev = True, 0
        for gi, b in zip(g, F):
            if b > 0:
                lo, hi = 1 - b / L, 1 - prev / L
                if not gi + _interval_min(env, lo, hi, fine) > lam:
                    ok = False
                    break
            prev = b
        if not ok:
            continue
        total += 1
        mean = float(np.sum(g * np.diff(np.concatenate([[0], F])) / L))
        if best is None or mean < best:
            best, best_F = mean, np.array(F) / L
    return best, best_F, total


def step_policy(wages, cdf_levels) -> WagePolicy:
    F = np.asarray(cdf_levels, dtype=float)
    m = np.diff(np.concatenate([[0.0], F]))
    return WagePolicy.from_atoms([(w, mm) for w, mm in zip(wages, m) if mm > 0])


def _binary_step_ok(env, g, R, Q, tol=1e-12):
    """Exact full-implementation check for informed binary step policies.

    ``R`` has one row per candidate: R[:, i] = P(W >= g_i), nonincreasing,
    with R(w) = 1 below g_0 and 0 above g_{-1}. Returns a boolean per row.
    """
    lam, off = _offsets(env)
    lam_h, d0 = float(lam[-1]), float(off[0])
    m, n = R.shape
    bps = np.unique(np.concatenate([g, g - d0]))
    Rpad = np.concatenate([np.ones((m, 1)), R, np.zeros((m, 1))], axis=1)

    def tail_at(w):
        # R(w) = R_i for w in (g_{i-1}, g_i]
        i = np.searchsorted(g, w, side="left")
        return Rpad[:, i + 1] if i < n else np.zeros(m)

    def tail_right(w):
        i = np.searchsorted(g, w, side="right")
        return Rpad[:, i + 1] if i < n else np.zeros(m)

    ok = np.ones(m, dtype=bool)
    found = np.zeros(m, dtype=bool)
    Q = np.asarray(Q, dtype=float)

    def note(qv, cont):
        nonlocal found
        is_target = np.all(np.abs(qv - Q[None, :]) <= 1e-9, axis=1) & ~cont
        found |= is_target
        return is_target

    # open intervals between breakpoints, plus the two unbounded ends
    edges = np.concatenate([[-np.inf], bps, [np.inf]])
    for a, b in zip(edges[:-1], edges[1:]):
        mid = (a + b) / 2 if np.isfinite(a) and np.isfinite(b) else (b - 1.0 if np.isfinite(b) else a + 1.0)
        qh, ql = tail_at(mid), tail_at(mid + d0)
        qv = np.stack([ql, qh], axis=1)
        tstar = lam_h - career_value(env, qv)
        eq = (tstar > a) & (tstar < b)
        tgt = note(qv, np.zeros(m, bool))
        ok &= ~eq | tgt
    for t in bps:
        hq = np.stack([tail_at(t + d0), tail_at(t)], axis=1)
        lq = np.stack([tail_right(t + d0), tail_right(t)], axis=1)
        y = lam_h - t
        dmin = career_value(env, np.stack([hq[:, 0], lq[:, 1]], axis=1))
        dmax = career_value(env, np.stack([lq[:, 0], hq[:, 1]], axis=1))
        eq = (dmin <= y + tol) & (y - tol <= dmax)
        if not eq.any():
            continue
        wide = (hq - lq) > 0
        two = wide.all(axis=1)
        at_min = np.abs(dmin - y) <= tol
        at_max = np.abs(dmax - y) <= tol
        cont = two & ~at_min & ~at_max
        q = lq.copy()
        q[two & at_min] = np.stack([hq[:, 0], lq[:, 1]], axis=1)[two & at_min]
        q[two & at_max & ~at_min] = np.stack([lq[:, 0], hq[:, 1]], axis=1)[two & at_max & ~at_min]
        rows = np.nonzero(eq & ~two & wide.any(axis=1))[0]
        if rows.size:
            # one mixing type: solve along its coordinate (D is monotone in each)
            k = np.argmax(wide[rows], axis=1)
            a_, b_ = lq[rows, k], hq[rows, k]
            base = q[rows].copy()

            def gap(v):
                p = base.copy()
                p[np.arange(rows.size), k] = v
                return career_value(env, p) - y

            ga = gap(a_)
            for _ in range(60):
                mm = 0.5 * (a_ + b_)
                same = (gap(mm) <= 0) == (ga <= 0)
                a_ = np.where(same, mm, a_)
                b_ = np.where(same, b_, mm)
            q[rows, k] = 0.5 * (a_ + b_)
        tgt = note(q, cont)
        ok &= ~eq | tgt
    return ok & found


def informed_step_search(env: Environment, Q, wages, levels: int = 4, chunk: int = 20000):
    """Search all tail step policies on ``wages`` for one implementing ``Q``.

    Tail values take the levels {0, 1/levels, ..., 1}. Candidates violating
    the keeping condition R(w_k) >= Q_k >= R(w_k+) at the target thresholds
    cannot implement Q and are skipped; every other nonincreasing sequence is
    checked exactly. Returns (found_policy_or_None, candidates_checked).
    """
    if env.K != 2:
        raise ValueError("binary environments only")
    lam, off = _offsets(env)
    Q = np.asarray(Q, dtype=float)
    d = float(career_value(env, Q))
    th = lam - d  # target thresholds (low type, high type)
    g = np.sort(np.asarray(wages, dtype=float))
    L = levels
    lv = np.arange(L + 1) / L
    # per-wage admissible tail levels from the keeping condition
    allowed = []
    for w in g:
        ok = np.ones(L + 1, dtype=bool)
        for k in range(2):
            if w <= th[k] + 1e-12:
                ok &= lv >= Q[k] - 1e-12
            if w > th[k] + 1e-12:
                ok &= lv <= Q[k] + 1e-12
        allowed.append(np.nonzero(ok)[0])
    checked = 0

    def sequences():
        def rec(i, cap, acc):
            if i == g.size:
                yield list(acc)
                return
            for l in allowed[i][::-1]:
                if l <= cap:
                    acc.append(l)
                    yield from rec(i + 1, l, acc)
                    acc.pop()
        yield from rec(0, L, [])

    batch = []
    for seq in sequences():
        batch.append(seq)
        if len(batch) == chunk:
            R = np.array(batch) / L
            hit = _binary_step_ok(env, g, R, Q)
            checked += len(batch)
            if hit.any():
                return _tail_step_policy(g, R[int(np.argmax(hit))]), checked
            batch = []
    if batch:
        R = np.array(batch) / L
        hit = _binary_step_ok(env, g, R, Q)
        checked += len(batch)
        if hit.any():
            return _tail_step_policy(g, R[int(np.argmax(hit))]), checked
    return None, checked


def _tail_step_policy(g, R) -> WagePolicy:
    R = np.concatenate([R, [0.0]])
    mass = R[:-1] - R[1:]
    if R[0] < 1:
        raise ValueError("tail at the lowest wage must be 1")
    return WagePolicy.from_atoms([(w, m) for w, m in zip(g, mass) if m > 0])
