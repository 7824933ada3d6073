import numpy as np
import pytest
from hypothesis import given, strategies as st

from careerwage import (WagePolicy, informed_example_environment, approximating_policy, critical_wages, enumerate_informed,
                        enumerate_informed_binary, enumerate_uninformed, fully_implements,
                        robust_policy, robust_policy_informed, robust_policy_informed_Q)
from careerwage import informed as inf
from careerwage import oracle
from careerwage.generators import random_linear_environment

EPS = 1e-3


def classes(records):
    return sorted(r.classification for r in records)


def test_pr_wage_on_example_has_two_equilibria(example_env):
    w_low, _ = critical_wages(example_env)
    recs = enumerate_uninformed(example_env, WagePolicy.degenerate(w_low), 10_000)
    assert classes(recs) == ["FullShirk", "FullWork"]
    v = fully_implements(example_env, WagePolicy.degenerate(w_low), 1.0)
    assert v.target_present and not v.fully_implements
    assert all(r.q[0] < 1 for r in v.witnesses)


def test_pr_wage_unique_without_uncertainty():
    env = random_linear_environment(3, K=3, sign=-1)
    w_low, _ = critical_wages(env)
    recs = enumerate_uninformed(env, WagePolicy.degenerate(w_low))
    assert classes(recs) == ["FullWork"]
    assert fully_implements(env, WagePolicy.degenerate(w_low + 1e-6), 1.0).fully_implements


def test_fd_wage_fully_implements(example_env):
    _, w_high = critical_wages(example_env)
    assert fully_implements(example_env, WagePolicy.degenerate(w_high + 1e-6)).fully_implements
    # exactly at the FD wage full shirking survives as a tie
    assert not fully_implements(example_env, WagePolicy.degenerate(w_high)).fully_implements


def test_low_wage_has_only_shirking(example_env):
    recs = enumerate_uninformed(example_env, WagePolicy.degenerate(0.3))
    assert classes(recs) == ["FullShirk"]
    v = fully_implements(example_env, WagePolicy.degenerate(0.3))
    assert not v.target_present


def test_limit_policy_fails_but_shifted_passes(example_env):
    pol = robust_policy(example_env).policy
    shifted = approximating_policy(pol, EPS)
    v = fully_implements(example_env, shifted, 1.0)
    assert v.fully_implements and v.witnesses == []
    assert shifted.mean == pytest.approx(pol.mean + EPS, abs=1e-12)


def test_mixed_equilibrium_on_an_atom(example_env):
    # two-point policy: an interior atom supports a mixed equilibrium
    pol = WagePolicy.from_atoms([(0.7, 0.5), (1.2, 0.5)])
    recs = enumerate_uninformed(example_env, pol)
    mixed = [r for r in recs if r.classification == "Mixed"]
    for r in mixed:
        q = r.q[0]
        assert abs(r.thresholds[0] + 10 * q / ((1 + 5 * q) * (9 - 5 * q)) - 1) < 1e-7
    on_atom = [r for r in mixed if abs(r.thresholds[0] - 0.7) < 1e-12]
    assert len(on_atom) == 1 and 0 < on_atom[0].mixing[0] < 1
    # the flat stretch between atoms carries q = 0.5 at w = 1 - D(0.5)
    gap = [r for r in mixed if r.q[0] == pytest.approx(0.5)]
    assert gap and gap[0].thresholds[0] == pytest.approx(1 - 5 / 22.75, abs=1e-7)


@pytest.mark.parametrize("seed", range(6))
def test_shifted_policy_on_random_envs(seed):
    env = random_linear_environment(seed, sign=1)
    pol = robust_policy(env).policy
    assert fully_implements(env, approximating_policy(pol, EPS), 1.0, grid_n=4000).fully_implements
    w_low, _ = critical_wages(env)
    assert not fully_implements(env, WagePolicy.degenerate(w_low), 1.0, grid_n=4000).fully_implements


def test_approximating_removes_atoms():
    pol = WagePolicy.from_atoms([(1.0, 0.3), (1.5, 0.7)])
    out = approximating_policy(pol, 0.01)
    assert out.atoms == []
    w = np.linspace(1.0, 1.6, 601)
    # CDF of the approximation sits weakly below the limit policy
    assert np.all(out.cdf(w) <= pol.cdf(w) + 1e-12)
    with pytest.raises(ValueError):
        approximating_policy(pol, 0.6)
    with pytest.raises(ValueError):
        approximating_policy(pol, -0.1)
    with pytest.raises(ValueError):
        approximating_policy(pol, 0.01, mode="bogus")


def test_informed_degenerate_above_top(informed_env):
    lo, hi = inf.critical_wages_informed(informed_env)
    recs = enumerate_informed_binary(informed_env, WagePolicy.degenerate(hi + EPS))
    assert classes(recs) == ["FullWork"]


def test_informed_degenerate_at_low(informed_env):
    lo, _ = inf.critical_wages_informed(informed_env)
    v = fully_implements(informed_env, WagePolicy.degenerate(lo), (1.0, 1.0))
    assert v.target_present and not v.fully_implements


def test_informed_robust_policy_shifted(informed_env):
    pol = robust_policy_informed(informed_env).policy
    v = fully_implements(informed_env, approximating_policy(pol, EPS, "informed"), (1.0, 1.0))
    assert v.fully_implements


@pytest.mark.parametrize("Q", [(0.4, 0.8), (0.5, 0.5), (0.0, 0.1)])
def test_informed_target_profiles(informed_env, Q):
    pol = robust_policy_informed_Q(informed_env, Q).policy
    split = float(inf.target_thresholds(informed_env, Q)[0])
    v = fully_implements(informed_env, approximating_policy(pol, EPS, "informed", split_at=split), Q)
    assert v.fully_implements


def test_two_atom_target_needs_split(informed_env):
    Q = (0.4, 0.8)
    pol = robust_policy_informed_Q(informed_env, Q).policy
    v = fully_implements(informed_env, approximating_policy(pol, EPS, "informed"), Q)
    assert v.target_present and not v.fully_implements


def test_binary_and_general_informed_agree(informed_env):
    pol = WagePolicy.from_atoms([(0.8, 0.4), (0.95, 0.6)])
    a = enumerate_informed_binary(informed_env, pol, 4000)
    b = enumerate_informed(informed_env, pol, 4000)
    assert classes(a) == classes(b)


def test_records_csv(example_env):
    recs = enumerate_uninformed(example_env, WagePolicy.degenerate(7 / 12))
    lines = oracle.records_csv(recs).strip().splitlines()
    assert len(lines) == len(recs) + 1
    assert "classification" in lines[0]


def test_step_search_dp_matches_bruteforce(example_env):
    g = np.linspace(7 / 12, 1.0, 7) + 1e-6
    best_dp, F_dp, n_dp = oracle.uninformed_step_search(example_env, g, levels=4)
    best_bf, F_bf, n_bf = oracle.uninformed_step_bruteforce(example_env, g, levels=4)
    assert n_dp == n_bf > 0
    assert best_dp == pytest.approx(best_bf, abs=1e-12)


def test_step_search_optimum_is_implementing(example_env):
    g = np.linspace(7 / 12, 1.0, 9) + 1e-6
    mean, F, _ = oracle.uninformed_step_search(example_env, g, levels=4)
    pol = oracle.step_policy(g, F)
    assert pol.mean == pytest.approx(mean, abs=1e-12)
    assert fully_implements(example_env, pol, 1.0, grid_n=4000).fully_implements


@given(seed=st.integers(0, 10_000))
def test_binary_step_checker_matches_oracle(seed):
    env = informed_example_environment()
    rng = np.random.default_rng(seed)
    g = np.sort(rng.choice(np.linspace(0.4, 1.1, 15), size=5, replace=False))
    R = np.sort(rng.integers(0, 5, size=5))[::-1] / 4
    R[0] = 1.0
    Q = np.sort(rng.integers(0, 5, size=2) / 4)
    ok = bool(oracle._binary_step_ok(env, g, R[None, :], Q)[0])
    v = fully_implements(env, oracle._tail_step_policy(g, R), Q, grid_n=2000)
    assert ok == v.fully_implements


def test_informed_step_search_finds_known_policy(informed_env):
    Q = (0.5, 0.5)
    tail = inf.greedy_policy(informed_env)
    wl, wh = inf.target_thresholds(informed_env, Q)
    g = np.unique(np.concatenate([[0.0, wh, wl], np.linspace(0.3, 1.3, 22)]))
    pol, checked = oracle.informed_step_search(informed_env, Q, g, levels=4)
    assert checked > 0 and pol is not None
    assert fully_implements(informed_env, pol, Q, grid_n=4000).fully_implements
