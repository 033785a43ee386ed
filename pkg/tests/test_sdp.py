import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecoh.sdp import (INFEASIBLE, NUMERICAL_FAILURE, OPTIMAL, SdpProblem, derealify, hermitian_problem, realify,
                          relative_gap, solve)
from conftest import rand_herm


def test_realify_examples():
    h = np.array([[2.0, 1], [1, 3]])
    assert np.abs(realify(h) - np.kron(np.eye(2), h)).max() == 0
    y = np.array([[0, -1j], [1j, 0]])
    w = np.linalg.eigvalsh(realify(y))
    assert np.abs(w - [-1, -1, 1, 1]).max() < 1e-14
    with pytest.raises(ValueError):
        realify(np.array([[0, 1], [0, 0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_realify_identities(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rand_herm(rng, n), rand_herm(rng, n)
    assert abs(np.trace(realify(a) @ realify(b)) - 2 * np.trace(a @ b).real) < 1e-10
    assert np.abs(derealify(realify(a)) - a).max() < 1e-14
    wa = np.linalg.eigvalsh(a)
    assert np.abs(np.linalg.eigvalsh(realify(a)) - np.repeat(wa, 2)).max() < 1e-10


def test_solve_trace_example():
    p = SdpProblem([2], [np.eye(2)], [([np.diag([1.0, 0])], 1.0)])
    sol = solve(p)
    assert sol.status == OPTIMAL
    assert abs(sol.primal - 1) < 1e-7 and abs(sol.dual - 1) < 1e-7


def test_solve_holevo_lambda_min():
    y = np.array([[2.0, -1], [-1, 2]])
    p = hermitian_problem([2], [y], [([np.eye(2)], 1.0)])
    sol = solve(p)
    assert sol.status == OPTIMAL
    assert abs(sol.primal - 1) < 1e-7 and abs(sol.dual - 1) < 1e-7
    pmax = hermitian_problem([2], [y], [([np.eye(2)], 1.0)], sense="max")
    assert abs(solve(pmax).primal - 3) < 1e-7
    assert abs(solve(pmax).dual - 3) < 1e-7


def test_solve_infeasible():
    p = SdpProblem([2], [np.eye(2)], [([np.eye(2)], -1.0)])
    sol = solve(p)
    assert sol.status == INFEASIBLE
    assert np.isnan(sol.primal)


def test_lambda_min_by_sdp_matches_eig(rng):
    for _ in range(50):
        n = int(rng.integers(1, 9))
        h = rand_herm(rng, n)
        sol = solve(hermitian_problem([n], [h], [([np.eye(n)], 1.0)]))
        assert sol.status == OPTIMAL
        assert abs(sol.primal - np.linalg.eigvalsh(h)[0]) < 1e-7
        xc = derealify(sol.optimizers[0])
        assert np.abs(xc - xc.conj().T).max() < 1e-8
        assert np.linalg.eigvalsh(xc).min() > -1e-8
        assert abs(np.trace(h @ xc).real - sol.primal) < 1e-7


def test_problem_validation():
    with pytest.raises(ValueError):
        SdpProblem([2], [np.array([[0, 1], [0, 0]])])
    with pytest.raises(ValueError):
        SdpProblem([2], [np.eye(3)])
    with pytest.raises(ValueError):
        SdpProblem([2], [np.eye(2)], sense="sideways")


def test_dump_format():
    p = SdpProblem([2], [np.eye(2)], [([np.array([[1.0, 0.5], [0.5, 0]])], 1.0)])
    lines = p.dump().splitlines()
    assert lines[:4] == ["1", "1", "2", "1.0"]
    # objective entries (k=0) negated for minimization, constraint upper triangle
    assert "0 1 1 1 -1.0" in lines and "1 1 1 2 0.5" in lines


def test_relative_gap():
    assert relative_gap(1.0, 1.0) == 0
    assert abs(relative_gap(1.0, 0.5) - 0.25) < 1e-15
    assert NUMERICAL_FAILURE == "numerical-failure"
