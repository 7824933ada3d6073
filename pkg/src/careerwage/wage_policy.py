"""Mixed discrete/continuous wage distributions.

A policy is stored canonically as sorted breakpoints ``x`` with the CDF's left
limit ``f_left`` and value ``f_right`` at each breakpoint. Between consecutive
breakpoints the CDF is linear from ``f_right[i]`` to ``f_left[i + 1]``. Atoms
are the breakpoints where the two differ.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

ATOM_FLOOR = 1e-12
MASS_TOL = 1e-12
SUPPORT_GAP = 1e-9


@dataclass(frozen=True)
class Piece:
    """Absolutely continuous segment with piecewise-linear CDF.

    ``knots`` are (wage, cdf) pairs on the global CDF scale from ``cdf_from``
    at ``start`` to ``cdf_to`` at ``end``; the piece carries mass
    ``cdf_to - cdf_from``.
    """

    start: float
    end: float
    cdf_from: float
    cdf_to: float
    knots: tuple

    def to_dict(self):
        return {"from": self.start, "to": self.end, "cdf_from": self.cdf_from,
                "cdf_to": self.cdf_to, "knots": [list(k) for k in self.knots]}


class WagePolicy:
    """Distribution over nonnegative wages (atoms plus piecewise-linear CDF)."""

    def __init__(self, x, f_left, f_right):
        x = np.array(x, dtype=float)
        if not (np.all(np.isfinite(f_left)) and np.all(np.isfinite(f_right))):
            raise ValueError("CDF levels must be finite")
        fl = np.clip(np.array(f_left, dtype=float), 0.0, 1.0)
        fr = np.clip(np.array(f_right, dtype=float), 0.0, 1.0)
        if x.ndim != 1 or x.size == 0 or fl.shape != x.shape or fr.shape != x.shape:
            raise ValueError("breakpoints and CDF levels must be equal-length 1-d arrays")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise ValueError("wages must be finite and nonnegative")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        path = np.empty(2 * x.size)
        path[0::2], path[1::2] = fl, fr
        if np.any(np.diff(path) < -1e-9):
            raise ValueError("CDF must be nondecreasing")
        if abs(path[0]) > MASS_TOL or abs(path[-1] - 1.0) > 1e-9:
            raise ValueError(f"total mass must be 1 (got {path[-1] - path[0]:.3e})")
        path = np.maximum.accumulate(path)
        path[0], path[-1] = 0.0, 1.0
        fl, fr = path[0::2].copy(), path[1::2].copy()
        # numerical-noise atoms are folded into the neighbouring segment
        tiny = (fr - fl > 0) & (fr - fl < ATOM_FLOOR)
        for i in np.nonzero(tiny)[0]:
            if i > 0:
                fl[i] = fr[i]
            else:
                fr[i] = fl[i]
        for a in (x, fl, fr):
            a.setflags(write=False)
        self.x, self.f_left, self.f_right = x, fl, fr
        self._px = np.repeat(x, 2)
        self._pf = np.ravel(np.column_stack([fl, fr]))

    # -- constructors -----------------------------------------------------
    @classmethod
    def degenerate(cls, w: float) -> "WagePolicy":
        return cls([w], [0.0], [1.0])

    @classmethod
    def from_atoms(cls, atoms) -> "WagePolicy":
        atoms = sorted((float(w), float(m)) for w, m in atoms if m > 0)
        x = np.array([w for w, _ in atoms])
        m = np.array([m for _, m in atoms])
        if abs(m.sum() - 1.0) > MASS_TOL * 100:
            raise ValueError("atom masses must sum to 1")
        m = m / m.sum()
        fr = np.cumsum(m)
        fl = fr - m
        return cls(x, fl, fr)

    @classmethod
    def from_cdf_samples(cls, w, F) -> "WagePolicy":
        """Continuous policy interpolating CDF samples (F[0] = 0, F[-1] = 1)."""
        F = np.asarray(F, dtype=float)
        return cls(w, F, F)

    @classmethod
    def from_tail(cls, w, r_at, r_right) -> "WagePolicy":
        """Build from tail samples R(w) and right limits R(w+) at breakpoints."""
        return cls(w, 1.0 - np.asarray(r_at, dtype=float), 1.0 - np.asarray(r_right, dtype=float))

    @classmethod
    def from_atoms_pieces(cls, atoms, pieces) -> "WagePolicy":
        pts = [float(w) for w, _ in atoms]
        parsed = []
        for p in pieces:
            kw = np.array([k[0] for k in p.knots], dtype=float)
            kc = np.array([k[1] for k in p.knots], dtype=float)
            if kw.size < 2 or np.any(np.diff(kw) <= 0) or np.any(np.diff(kc) < 0):
                raise ValueError("piece knots must be increasing in wage and CDF")
            parsed.append((kw, kc))
            pts.extend(kw.tolist())
        x = np.unique(np.array(pts))

        def continuous(at):
            total = np.zeros_like(at)
            for kw, kc in parsed:
                total += np.interp(at, kw, kc) - kc[0]
            return total

        aw = np.array([float(w) for w, _ in atoms])
        am = np.array([float(m) for _, m in atoms])
        cont = continuous(x)
        below = np.array([am[aw < xi].sum() for xi in x])
        at = np.array([am[aw <= xi].sum() for xi in x])
        return cls(x, below + cont, at + cont)

    @classmethod
    def from_dict(cls, doc) -> "WagePolicy":
        try:
            atoms = [(float(w), float(m)) for w, m in doc.get("atoms", [])]
            pieces = [Piece(float(p["from"]), float(p["to"]), float(p["cdf_from"]),
                            float(p["cdf_to"]), tuple((float(a), float(b)) for a, b in p["knots"]))
                      for p in doc.get("pieces", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed policy document: {exc}") from exc
        if not atoms and not pieces:
            raise ValueError("policy document has neither atoms nor pieces")
        return cls.from_atoms_pieces(atoms, pieces)

    @classmethod
    def from_json(cls, text: str) -> "WagePolicy":
        return cls.from_dict(json.loads(text))

    # -- structure ----------------------------------------------------------
    @property
    def atoms(self):
        jump = self.f_right - self.f_left
        return [(float(w), float(m)) for w, m in zip(self.x, jump) if m > 0]

    @property
    def pieces(self):
        out = []
        n = self.x.size
        i = 0
        while i < n - 1:
            if self.f_left[i + 1] - self.f_right[i] <= 0:
                i += 1
                continue
            j = i + 1
            while (j < n - 1 and self.f_right[j] == self.f_left[j]
                   and self.f_left[j + 1] - self.f_right[j] > 0):
                j += 1
            knots = [(float(self.x[i]), float(self.f_right[i]))]
            knots += [(float(self.x[k]), float(self.f_left[k])) for k in range(i + 1, j + 1)]
            out.append(Piece(float(self.x[i]), float(self.x[j]), float(self.f_right[i]),
                             float(self.f_left[j]), tuple(knots)))
            i = j
        return out

    def to_dict(self):
        return {"atoms": [[w, m] for w, m in self.atoms],
                "pieces": [p.to_dict() for p in self.pieces]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def cdf_csv(self, n: int = 1001) -> str:
        """Sampled CDF and tail as CSV text (columns w, cdf, tail)."""
        lo, hi = self.support_bounds
        pad = max(hi - lo, 1e-3) * 0.05
        w = np.unique(np.concatenate([np.linspace(max(lo - pad, 0.0), hi + pad, n), self.x]))
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["w", "cdf", "tail"])
        for a, f, t in zip(w, self.cdf(w), self.tail(w)):
            wr.writerow([repr(float(a)), repr(float(f)), repr(float(t))])
        return buf.getvalue()

    # -- evaluation -----------------------------------------------------------
    def cdf(self, w):
        """F(w), right-continuous."""
        w = np.asarray(w, dtype=float)
        x, fl, fr = self.x, self.f_left, self.f_right
        i = np.searchsorted(x, w, side="right") - 1
        ic = np.clip(i, 0, x.size - 1)
        inext = np.clip(ic + 1, 0, x.size - 1)
        dx = x[inext] - x[ic]
        slope = np.where(dx > 0, (fl[inext] - fr[ic]) / np.where(dx > 0, dx, 1.0), 0.0)
        val = fr[ic] + slope * (w - x[ic])
        val = np.where(i >= x.size - 1, 1.0, val)
        return np.where(i < 0, 0.0, np.clip(val, 0.0, 1.0))

    def cdf_left(self, w):
        """F(w-), the left limit."""
        w = np.asarray(w, dtype=float)
        x, fl, fr = self.x, self.f_left, self.f_right
        j = np.searchsorted(x, w, side="left") - 1
        jc = np.clip(j, 0, x.size - 1)
        jnext = np.clip(jc + 1, 0, x.size - 1)
        dx = x[jnext] - x[jc]
        slope = np.where(dx > 0, (fl[jnext] - fr[jc]) / np.where(dx > 0, dx, 1.0), 0.0)
        val = fr[jc] + slope * (w - x[jc])
        val = np.where(j >= x.size - 1, 1.0, val)
        return np.where(j < 0, 0.0, np.clip(val, 0.0, 1.0))

    def tail(self, w):
        """R(w) = 1 - F(w-), the probability of a wage at least w."""
        return 1.0 - self.cdf_left(w)

    def inverse_set(self, u):
        """Closed wage interval [lo, hi] on which quantile ``u`` is attained.

        Every w in the interval satisfies F(w-) <= u <= F(w); ``hi`` is
        ``inf`` for u = 1. Accepts arrays.
        """
        u = np.asarray(u, dtype=float)
        if np.any(u < -MASS_TOL) or np.any(u > 1 + MASS_TOL):
            raise ValueError("quantile must lie in [0, 1]")
        u = np.clip(u, 0.0, 1.0)
        px, pf = self._px, self._pf
        last = pf.size - 1

        j = np.clip(np.searchsorted(pf, u, side="left"), 1, last)
        df = pf[j] - pf[j - 1]
        t = np.where(df > 0, (u - pf[j - 1]) / np.where(df > 0, df, 1.0), 1.0)
        lo = px[j - 1] + np.clip(t, 0.0, 1.0) * (px[j] - px[j - 1])
        lo = np.where(u <= 0, 0.0, lo)

        k = np.searchsorted(pf, u, side="right") - 1
        kc = np.clip(k, 0, last - 1)
        df = pf[kc + 1] - pf[kc]
        t = np.where(df > 0, (u - pf[kc]) / np.where(df > 0, df, 1.0), 0.0)
        hi = px[kc] + np.clip(t, 0.0, 1.0) * (px[kc + 1] - px[kc])
        hi = np.where(k >= last, math.inf, hi)
        hi = np.where(k < 0, px[0], hi)
        return lo, hi

    def evaluate(self, w, quantile=None):
        """(cdf(w), tail(w)) and, if ``quantile`` is given, its inverse set."""
        out = (float(self.cdf(w)), float(self.tail(w)))
        if quantile is None:
            return out
        lo, hi = self.inverse_set(quantile)
        return out + ((float(lo), float(hi)),)

    # -- statistics -----------------------------------------------------------
    def _moments(self, center: float):
        x = self.x - center
        m_atom = self.f_right - self.f_left
        seg = self.f_left[1:] - self.f_right[:-1]
        a, b = x[:-1], x[1:]
        m1 = m_atom @ x + seg @ ((a + b) / 2)
        m2 = m_atom @ (x * x) + seg @ ((a * a + a * b + b * b) / 3)
        return float(m1), float(m2)

    @property
    def mean(self) -> float:
        m1, _ = self._moments(float(self.x[0]))
        return float(self.x[0]) + m1

    @property
    def variance(self) -> float:
        m1, m2 = self._moments(float(self.x[0]))
        return max(m2 - m1 * m1, 0.0)

    @property
    def support(self):
        """Minimal closed intervals covering all growth points."""
        ivs = []
        seg = self.f_left[1:] - self.f_right[:-1]
        for i, xi in enumerate(self.x):
            if self.f_right[i] > self.f_left[i]:
                ivs.append([xi, xi])
            if i < seg.size and seg[i] > 0:
                ivs.append([xi, self.x[i + 1]])
        ivs.sort()
        merged = []
        for a, b in ivs:
            if merged and a - merged[-1][1] <= SUPPORT_GAP:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return [(float(a), float(b)) for a, b in merged]

    @property
    def support_bounds(self):
        s = self.support
        return s[0][0], s[-1][1]

    @property
    def support_range(self) -> float:
        lo, hi = self.support_bounds
        return hi - lo

    def stats(self):
        return {"mean": self.mean, "variance": self.variance,
                "support_range": self.support_range, "support_bounds": self.support_bounds}

    # -- transforms -----------------------------------------------------------
    def shifted(self, eps: float) -> "WagePolicy":
        return WagePolicy(self.x + eps, self.f_left, self.f_right)

    def __repr__(self):
        lo, hi = self.support_bounds
        return f"WagePolicy(support=[{lo:.6g}, {hi:.6g}], atoms={len(self.atoms)}, breakpoints={self.x.size})"


def stats(policy: WagePolicy):
    """(mean, variance, support_range, support_bounds)."""
    return policy.mean, policy.variance, policy.support_range, policy.support_bounds


def more_dispersed(a: WagePolicy, b: WagePolicy) -> bool:
    """Wider support range and strictly larger variance."""
    return a.support_range > b.support_range and a.variance > b.variance


class TailWagePolicy:
    """Tail view R(w) = 1 - F(w-) of a wage policy."""

    def __init__(self, policy: WagePolicy):
        self.policy = policy

    @classmethod
    def from_samples(cls, w, R) -> "TailWagePolicy":
        """Continuous tail through samples (R nonincreasing, R[0] = 1, R[-1] = 0)."""
        R = np.asarray(R, dtype=float)
        return cls(WagePolicy.from_tail(w, R, R))

    def __call__(self, w):
        return self.policy.tail(w)

    def right(self, w):
        """R(w+) = 1 - F(w)."""
        return 1.0 - self.policy.cdf(w)

    @property
    def support_bounds(self):
        return self.policy.support_bounds

    def to_policy(self) -> WagePolicy:
        return self.policy
