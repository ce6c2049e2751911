import itertools

import numpy as np
import pytest

import permwalk.markov as markov
from permwalk.digraph import build
from permwalk.errors import ConvergenceError
from permwalk.markov import (
    all_pairs_hitting,
    exit_time_from_origin,
    greens_function,
    greens_matrix,
    hitting_tail,
    hitting_times,
    kernel,
    mixing_profile,
    survival_probability,
    sup_bound_pass_rate,
    visit_second_moment,
    worst_case_hitting,
)
from permwalk.perm import all_permutations, identity

from conftest import random_sigmas


def dense_hitting_oracle(P, target_idx):
    """Solve the full system h = 1 + P h off target, h = 0 on target, densely."""
    N = P.shape[0]
    A = np.eye(N) - P
    b = np.ones(N)
    for t in target_idx:
        A[t] = 0.0
        A[t, t] = 1.0
        b[t] = 0.0
    return np.linalg.solve(A, b)


def test_kernel_rows_identity1():
    k = kernel(build(identity(1)))
    assert k.row(0) == [(-1, 0.5), (1, 0.5)]
    assert k.row(-1) == [(-1, 0.5), (0, 0.5)]
    lazy = kernel(build(identity(1)), "lazy")
    assert lazy.row(0) == [(-1, 0.25), (0, 0.5), (1, 0.25)]
    with pytest.raises(ValueError):
        kernel(build(identity(1)), "fast")


def test_kernel_stationarity_and_rows(sigmas):
    for s in sigmas(50, 100):
        for mode in ("simple", "lazy"):
            k = kernel(build(s), mode)
            P = k.matrix
            pi = np.full(101, 1 / 101)
            assert np.max(np.abs(pi @ P - pi)) <= 1e-12
            assert np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-12)


def test_kernel_matches_edge_multiset(sigmas):
    for s in sigmas(6, 10):
        g = build(s)
        P = kernel(g).matrix.toarray()
        expect = np.zeros_like(P)
        for (u, v), m in g.edge_multiset().items():
            expect[u + 6, v + 6] = m / 2
        assert np.array_equal(P, expect)


@pytest.mark.parametrize("n", [1, 2, 5, 10, 30])
def test_identity_exit_time_is_n_squared(n):
    assert exit_time_from_origin(build(identity(n))) == pytest.approx(n * n, abs=1e-6)


def test_identity1_hitting_example():
    t = hitting_times(kernel(build(identity(1))), 1)
    assert t[-1] == pytest.approx(6.0, abs=1e-12)
    assert t[0] == pytest.approx(4.0, abs=1e-12)
    assert t[1] == 0.0


def test_hitting_matches_dense_oracle(sigmas):
    for s in sigmas(8, 10):
        k = kernel(build(s))
        P = k.matrix.toarray()
        for target in (0, -8, (3, -2), tuple(range(-8, 0))):
            idx = [target + 8] if isinstance(target, int) else [t + 8 for t in target]
            h = hitting_times(k, target)
            assert np.allclose(h.values, dense_hitting_oracle(P, idx), rtol=1e-10, atol=1e-10)
            assert h.residual <= 1e-10


def test_solvers_and_fundamental_agree(sigmas):
    for s in sigmas(15, 5):
        k = kernel(build(s))
        H = all_pairs_hitting(k)
        for y in (-15, 0, 7):
            d = hitting_times(k, y, method="direct").values
            gs = hitting_times(k, y, method="gauss-seidel").values
            assert np.allclose(d, gs, rtol=1e-9)
            assert np.allclose(d, H[:, y + 15], rtol=1e-9, atol=1e-8)


def test_residual_audit_pointwise(sigmas):
    for s in sigmas(20, 10):
        k = kernel(build(s))
        P = k.matrix.toarray()
        for y in range(-20, 21, 5):
            h = hitting_times(k, y).values
            r = h - 1 - P @ h
            r[y + 20] = 0.0
            assert np.max(np.abs(r)) <= 1e-9


def test_lazy_is_twice_simple(sigmas):
    for s in sigmas(20, 20):
        g = build(s)
        simple, lazy = kernel(g), kernel(g, "lazy")
        for y in (-20, -3, 0, 11):
            a = hitting_times(simple, y).values
            b = hitting_times(lazy, y).values
            assert np.allclose(a, b / 2, rtol=1e-8, atol=1e-8)


def test_convergence_error(monkeypatch):
    monkeypatch.setattr(markov, "ROW_UPDATE_CAP", 5)
    with pytest.raises(ConvergenceError) as info:
        hitting_times(kernel(build(identity(10))), 10, method="gauss-seidel")
    assert info.value.residual > 0


def test_bad_targets():
    k = kernel(build(identity(2)))
    with pytest.raises(ValueError):
        hitting_times(k, ())
    with pytest.raises(ValueError):
        hitting_times(k, 3)


def test_worst_case_identity1():
    k = kernel(build(identity(1)))
    for method in ("solve", "fundamental"):
        wc = worst_case_hitting(k, method)
        assert wc.value == pytest.approx(6.0)
        assert (wc.start, wc.target) == (1, -1)


def test_worst_case_matches_all_pairs_oracle(sigmas):
    for s in sigmas(6, 10):
        k = kernel(build(s))
        P = k.matrix.toarray()
        H = np.column_stack([dense_hitting_oracle(P, [y]) for y in range(13)])
        wc = worst_case_hitting(k)
        assert wc.value == pytest.approx(H.max(), rel=1e-10)
        assert H[wc.start + 6, wc.target + 6] == pytest.approx(H.max(), rel=1e-9)
        assert wc.value >= hitting_times(k, wc.target).values.max() - 1e-9
        assert worst_case_hitting(k, "fundamental").value == pytest.approx(wc.value, rel=1e-9)


def test_identity_worst_case_grows_quadratically():
    vals = {n: worst_case_hitting(kernel(build(identity(n))), "fundamental").value for n in (25, 50, 100, 200)}
    for n in (25, 50, 100):
        assert 3.5 <= vals[2 * n] / vals[n] <= 4.5
    for n in (5, 12, 25):
        P = kernel(build(identity(n))).matrix.toarray()
        H = np.column_stack([dense_hitting_oracle(P, [y]) for y in range(2 * n + 1)])
        wc = worst_case_hitting(kernel(build(identity(n))), "fundamental")
        assert wc.value == pytest.approx(H.max(), rel=1e-10)


@pytest.mark.parametrize("n", [1, 2])
def test_universal_exit_bound_exhaustive(n):
    for s in all_permutations(n):
        assert exit_time_from_origin(build(s)) <= 4 * n * n + 6 * n + 2


def test_greens_function_against_matrix_powers(sigmas):
    for s in sigmas(5, 5):
        for mode in ("simple", "lazy"):
            k = kernel(build(s), mode)
            P = k.matrix.toarray()
            horizon = 9
            G = sum(np.linalg.matrix_power(P, t) for t in range(horizon + 1))
            assert np.allclose(greens_matrix(k, horizon), G, atol=1e-13)
            assert greens_function(k, -5, 2, horizon) == pytest.approx(G[0, 7], abs=1e-13)


def test_greens_basic_properties():
    k = kernel(build(random_sigmas(7, 1)[0]), "lazy")
    assert greens_function(k, 3, 3, 0) == 1.0
    assert greens_function(k, 3, 4, 0) == 0.0
    assert all(greens_function(k, x, x, 15) >= 1 for x in range(-7, 8))


def _second_moment_by_paths(P, x, y, horizon):
    """Enumerate every path of the chain up to ``horizon`` steps."""
    N = P.shape[0]
    total = 0.0
    for path in itertools.product(range(N), repeat=horizon):
        prob = 1.0
        cur = x
        for v in path:
            prob *= P[cur, v]
            if prob == 0.0:
                break
            cur = v
        if prob == 0.0:
            continue
        z = (x == y) + sum(1 for v in path if v == y)
        total += prob * z * z
    return total


def test_second_moment_against_path_enumeration():
    for s in random_sigmas(2, 3):
        k = kernel(build(s), "lazy")
        P = k.matrix.toarray()
        for x, y in ((-2, 1), (0, 0), (2, -2)):
            assert visit_second_moment(k, x, y, 6) == pytest.approx(_second_moment_by_paths(P, x + 2, y + 2, 6), rel=1e-12)


def test_second_moment_bound(sigmas):
    for s in sigmas(20, 20):
        k = kernel(build(s), "lazy")
        h = 41
        G = greens_matrix(k, h)
        for x in range(-20, 21, 4):
            for y in range(-20, 21, 3):
                m2 = visit_second_moment(k, x, y, h)
                gxy, gyy = G[x + 20, y + 20], G[y + 20, y + 20]
                assert m2 <= 2 * gxy * gyy + gxy + 1e-12
                assert m2 >= gxy**2 - 1e-12


def test_mixing_profile_basics():
    s = random_sigmas(100, 1)[0]
    k = kernel(build(s), "lazy")
    prof = mixing_profile(k, 60)
    N = 201
    assert np.allclose(prof.tv[0], 1 - 1 / N)
    assert np.all(np.diff(prof.max_tv) <= 1e-12)
    assert np.all((prof.tv >= 0) & (prof.tv <= 1))
    assert prof.t_mix is not None and prof.max_tv[prof.t_mix] < 0.25 and prof.max_tv[prof.t_mix - 1] >= 0.25
    short = mixing_profile(k, 2)
    assert short.t_mix is None
    stopped = mixing_profile(k, 60, stop_at_mix=True)
    assert stopped.t_mix == prof.t_mix and stopped.t_max == prof.t_mix


def test_mixing_profile_against_matrix_powers():
    k = kernel(build(random_sigmas(4, 1)[0]), "lazy")
    P = k.matrix.toarray()
    prof = mixing_profile(k, 12)
    for t in (0, 1, 5, 12):
        Pt = np.linalg.matrix_power(P, t)
        assert np.allclose(prof.tv[t], 0.5 * np.abs(Pt - 1 / 9).sum(axis=1), atol=1e-14)
        assert prof.linf[t] == pytest.approx(np.abs(Pt - 1 / 9).max(), abs=1e-14)


def test_sup_bound_pass_rate_recorded():
    g = build(random_sigmas(11, 1)[0])
    from permwalk.expansion import phi_star_exact

    alpha = float(phi_star_exact(g).phi)
    rate = sup_bound_pass_rate(mixing_profile(kernel(g, "lazy"), 200), alpha)
    assert 0.0 <= rate <= 1.0
    with pytest.raises(ValueError):
        sup_bound_pass_rate(mixing_profile(kernel(g), 5), alpha)


def test_survival_against_dense_oracle():
    for s in random_sigmas(9, 4):
        k = kernel(build(s), "lazy")
        P = k.matrix.toarray()
        for y in (-9, 0, 4):
            Q = P.copy()
            Q[:, y + 9] = 0.0
            start = np.full(19, 1 / 19)
            start[y + 9] = 0.0
            for steps in (0, 1, 3, 8):
                expect = 1.0 if steps == 0 else (start @ np.linalg.matrix_power(Q, steps - 1)).sum()
                assert survival_probability(k, y, steps) == pytest.approx(expect, abs=1e-14)
            tail = hitting_tail(k, y, [0, 2, 5])
            assert tail[0] == pytest.approx(18 / 19)
            assert tail[2] == pytest.approx(survival_probability(k, y, 6), abs=1e-14)


def test_csv_exports():
    k = kernel(build(identity(1)))
    lines = hitting_times(k, 1).to_csv().splitlines()
    assert lines[0] == "start,target,mode,expected_steps,residual"
    assert lines[1].startswith("-1,1,simple,6.0")
    lines = hitting_times(k, (-1, 1)).to_csv().splitlines()
    assert lines[2].startswith("0,\"set:-1,1\",simple,1.0")
    prof_csv = mixing_profile(kernel(build(identity(3)), "lazy"), 400).to_csv().splitlines()
    assert prof_csv[0] == "t,max_tv,linf,t_mix_flag"
    assert prof_csv[1].startswith("0,") and prof_csv[-1].endswith(",1")


@pytest.mark.slow
def test_green_function_stays_bounded_as_n_grows():
    peaks = {}
    for n in (100, 200, 400):
        peaks[n] = float(np.median([greens_matrix(kernel(build(s), "lazy"), 2 * n + 1).max() for s in random_sigmas(n, 3, master=41)]))
    assert peaks[200] / peaks[100] <= 1.5 and peaks[400] / peaks[200] <= 1.5
    assert all(p >= 1.0 for p in peaks.values())
