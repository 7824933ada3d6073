"""Benchmarks and the robustly optimal wage policy for an uninformed worker.

The optimal CDF is F*(w) = 1 - qbar(w+), where qbar(w) is the largest q with
w + D(q) = lambda. It is traced adaptively in w: cells are bisected until the
linear interpolant of qbar satisfies the indifference condition at the cell
midpoint, and cells that shrink to machine width while qbar still drops are
recorded as mass points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .environment import Environment, career_value, effective_cost
from .wage_policy import WagePolicy

GRID_N = 4096
ROOT_TOL = 1e-12
KNOT_TOL = 1e-9
INITIAL_CELLS = 512
CELL_FLOOR = 1e-12
UNCERTAINTY_GAP = 1e-10


def _require_uninformed(env: Environment):
    if env.informed:
        raise ValueError("environment is in informed mode")


class QbarSolver:
    """Largest root of w + D(q) = lambda over q in [0, q_max].

    The q-grid is scanned from the top for the last point with
    w + D(q) <= lambda, then the bracketing cell is bisected.
    """

    def __init__(self, env: Environment, grid_n: int = GRID_N, q_max: float = 1.0):
        _require_uninformed(env)
        self.env = env
        self.lam = effective_cost(env)
        self.q_max = float(q_max)
        grid = np.linspace(0.0, self.q_max, grid_n + 1)
        vals = career_value(env, grid)
        i = int(np.argmin(vals))
        q_star, d_star = float(grid[i]), float(vals[i])
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_n)]
        if hi > lo:
            res = minimize_scalar(lambda x: float(career_value(env, x)), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12})
            if res.fun < d_star:
                q_star, d_star = float(res.x), float(res.fun)
        # keep the refined minimizer on the grid so every level >= min D brackets
        self.grid = np.unique(np.append(grid, q_star))
        self.values = career_value(env, self.grid)
        self.suffix_min = np.minimum.accumulate(self.values[::-1])[::-1]
        self.spacing = self.q_max / grid_n
        self.d_min = d_star
        self.d_top = float(career_value(env, self.q_max))
        self.w_low = self.lam - self.d_top
        self.w_high = self.lam - self.d_min

    def __call__(self, w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        lam = self.lam
        # last grid point with D <= lambda - w, via the nondecreasing suffix minimum
        slack = 1e-13 * max(1.0, abs(lam))
        idx = np.searchsorted(self.suffix_min, lam - w + slack, side="right") - 1
        if np.any(idx < 0):
            raise ValueError("no root: wage above the highest critical wage")
        n = self.grid.size
        top = idx == n - 1
        if np.any(top & (w + self.values[-1] - lam < -1e-12)):
            raise ValueError("no root: wage below the lowest critical wage")
        idx_c = np.minimum(idx, n - 2)
        lo = self.grid[idx_c].copy()
        hi = self.grid[idx_c + 1].copy()
        active = ~top
        while active.any() and np.max(hi[active] - lo[active]) > ROOT_TOL:
            mid = 0.5 * (lo + hi)
            go = w + career_value(self.env, mid) - lam <= 0
            lo = np.where(active & go, mid, lo)
            hi = np.where(active & ~go, mid, hi)
        return np.where(top, self.q_max, lo)


def critical_wages(env: Environment, grid_n: int = GRID_N):
    """(w_low, w_high) = (lambda - D(1), lambda - min D)."""
    s = QbarSolver(env, grid_n)
    return s.w_low, s.w_high


def strategic_uncertainty(env: Environment, grid_n: int = GRID_N) -> bool:
    s = QbarSolver(env, grid_n)
    return bool(s.d_min < s.d_top - UNCERTAINTY_GAP)


def qbar(env: Environment, w, grid_n: int = GRID_N):
    """Largest q in [0, 1] with w + D(q) = lambda."""
    s = QbarSolver(env, grid_n)
    lo, hi = s.w_low, s.w_high
    wa = np.asarray(w, dtype=float)
    if np.any(wa < lo - 1e-12) or np.any(wa > hi + 1e-12):
        raise ValueError(f"wage outside [{lo:.9g}, {hi:.9g}]")
    out = s(np.clip(wa, lo, hi))
    return float(out[0]) if np.ndim(w) == 0 else out


@dataclass
class UninformedSolution:
    lam: float
    w_low: float
    w_high: float
    strategic_uncertainty: bool
    policy: WagePolicy
    mass_points: list
    qbar_w: np.ndarray
    qbar_q: np.ndarray
    target: float = 1.0
    binding_residual_max: float = 0.0
    minorant_violation: float = 0.0
    audit: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "lambda": self.lam, "w_low": self.w_low, "w_high": self.w_high,
            "strategic_uncertainty": self.strategic_uncertainty, "target_q": self.target,
            "mean": self.policy.mean, "variance": self.policy.variance,
            "support_range": self.policy.support_range,
            "mass_points": [list(a) for a in self.mass_points],
            "binding_residual_max": self.binding_residual_max,
            "minorant_violation": self.minorant_violation,
        }


def _trace(solver: QbarSolver, w_lo: float, w_hi: float, jump_q: float):
    """Adaptive knots of qbar on [w_lo, w_hi] and detected jump cells."""
    ws = np.linspace(w_lo, w_hi, INITIAL_CELLS + 1)
    qs = solver(ws)
    lam, env = solver.lam, solver.env
    done_w, done_q = [ws], [qs]
    jumps = []
    a, b, qa, qb = ws[:-1], ws[1:], qs[:-1], qs[1:]
    floor = CELL_FLOOR * max(1.0, abs(w_hi))
    while a.size:
        mid = 0.5 * (a + b)
        qm = solver(mid)
        resid = np.abs(mid + career_value(env, 0.5 * (qa + qb)) - lam)
        ok = (resid <= KNOT_TOL) | (qa - qb <= 0)
        narrow = (b - a) <= floor
        is_jump = ~ok & narrow & (qa - qb > jump_q)
        for i in np.nonzero(is_jump)[0]:
            jumps.append((float(a[i]), float(b[i]), float(qa[i]), float(qb[i])))
        split = ~ok & ~narrow
        done_w.append(mid[split])
        done_q.append(qm[split])
        a, b, qa, qb, qm, mid = a[split], b[split], qa[split], qb[split], qm[split], mid[split]
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
        qa, qb = np.concatenate([qa, qm]), np.concatenate([qm, qb])
    w = np.concatenate(done_w)
    q = np.concatenate(done_q)
    order = np.argsort(w, kind="stable")
    return w[order], q[order], jumps


def _assemble(w, q, jumps, w_low, zero_mass: float = 0.0):
    """Breakpoints of F* = 1 - qbar(w+) from traced knots and jump cells.

    Each jump cell [a, b] collapses onto a single breakpoint carrying the
    drop of qbar; ``zero_mass`` adds a firing atom at wage 0.
    """
    fl = 1.0 - q
    fr = 1.0 - q
    keep = np.ones(w.size, dtype=bool)
    for a, b, qa, qb in jumps:
        ia = int(np.searchsorted(w, a))
        ib = int(np.searchsorted(w, b))
        at = ia if a == w_low else ib
        fl[at] = 1.0 - qa
        fr[at] = 1.0 - qb
        keep[ib if at == ia else ia] = False
    w, fl, fr = w[keep], fl[keep], fr[keep]
    fr[-1] = 1.0
    if zero_mass > 0:
        w = np.concatenate([[0.0], w])
        fl = np.concatenate([[0.0], fl])
        fr = np.concatenate([[zero_mass], fr])
    return WagePolicy(w, fl, fr)


def _audit(solution: UninformedSolution, solver: QbarSolver, n: int = 1000):
    pol = solution.policy
    lam = solver.lam
    lo, hi = solution.w_low, solution.w_high
    if hi - lo <= 0:
        return 0.0, 0.0
    w = np.linspace(lo, hi, n, endpoint=False)
    atom_w = np.array([a for a, _ in pol.atoms])
    if atom_w.size:
        w = w[np.min(np.abs(w[:, None] - atom_w[None, :]), axis=1) > 1e-9]
    q = np.clip(1.0 - pol.cdf(w), 0.0, solution.target)
    resid = float(np.max(np.abs(w + career_value(solver.env, q) - lam))) if w.size else 0.0
    # F*(w-) must lie weakly below every point (lambda - D(q), 1 - q) of the graph
    gq = solver.grid
    gw = lam - solver.values
    inside = (gw >= lo) & (gw <= hi)
    viol = pol.cdf_left(gw[inside]) - (1.0 - gq[inside])
    minorant = float(max(np.max(viol, initial=0.0), 0.0))
    return resid, minorant


def _solve(env: Environment, q_max: float, grid_n: int) -> UninformedSolution:
    solver = QbarSolver(env, grid_n, q_max)
    lam, w_low, w_high = solver.lam, solver.w_low, solver.w_high
    su = bool(solver.d_min < solver.d_top - UNCERTAINTY_GAP)
    zero_mass = 1.0 - q_max
    if not su:
        if zero_mass > 0:
            pol = WagePolicy.from_atoms([(0.0, zero_mass), (w_low, q_max)])
        else:
            pol = WagePolicy.degenerate(w_low)
        sol = UninformedSolution(lam, w_low, w_low, False, pol, [(w_low, q_max)],
                                 np.array([w_low]), np.array([q_max]), target=q_max)
        return sol
    jump_q = 10.0 * solver.spacing
    w, q, jumps = _trace(solver, w_low, w_high, jump_q)
    pol = _assemble(w, q, jumps, w_low, zero_mass)
    mass = [(a, m) for a, m in pol.atoms if a > 0 or zero_mass == 0]
    sol = UninformedSolution(lam, w_low, w_high, True, pol, mass, w, q, target=q_max)
    sol.binding_residual_max, sol.minorant_violation = _audit(sol, solver)
    sol.audit = {"jump_cells": jumps, "grid_n": grid_n, "knots": int(w.size)}
    return sol


def robust_policy(env: Environment, grid_n: int = GRID_N) -> UninformedSolution:
    """Cheapest-in-the-limit policy fully implementing full work."""
    _require_uninformed(env)
    return _solve(env, 1.0, grid_n)


def robust_policy_partial(env: Environment, Q: float, grid_n: int = GRID_N) -> UninformedSolution:
    """Robust policy for a fixed total working probability Q.

    Mass 1 - Q sits at wage 0; the rest follows F* with qbar restricted to
    [0, Q].
    """
    _require_uninformed(env)
    Q = float(Q)
    if not 0.0 <= Q <= 1.0:
        raise ValueError("Q must lie in [0, 1]")
    if Q == 1.0:
        return robust_policy(env, grid_n)
    lam = effective_cost(env)
    if Q == 0.0:
        d0 = float(career_value(env, 0.0))
        return UninformedSolution(lam, lam - d0, lam - d0, False, WagePolicy.degenerate(0.0),
                                  [], np.array([0.0]), np.array([0.0]), target=0.0)
    return _solve(env, Q, grid_n)
