import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecoh.states import (DensityMatrix, isotropic, l1_coherence, max_coherent, maximally_mixed, random_density,
                             random_diagonal, random_pure, robustness_of_coherence, weight_decomposition,
                             weight_of_coherence)


def test_density_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        DensityMatrix([[0.5, 0.5], [0, 0.5]])
    rho = DensityMatrix(np.eye(3) / 3)
    assert rho.dim == 3


def test_max_coherent_examples():
    assert np.abs(max_coherent(1).mat - 1).max() == 0
    assert np.abs(max_coherent(2).mat - 0.5).max() < 1e-15
    for d in range(1, 7):
        assert abs(l1_coherence(max_coherent(d)) - (d - 1)) < 1e-12
    with pytest.raises(ValueError):
        max_coherent(0)


def test_l1_examples():
    assert l1_coherence(np.diag([0.2, 0.8])) == 0
    assert abs(l1_coherence(max_coherent(2)) - 1) < 1e-12
    assert abs(l1_coherence([[0.5, 0.3], [0.3, 0.5]]) - 0.6) < 1e-12


def test_weight_examples():
    assert abs(weight_of_coherence(maximally_mixed(3))) < 1e-7
    for seed in range(3):
        assert abs(weight_of_coherence(random_pure(3, seed=seed)) - 1) < 1e-6
    for m in (2, 3, 5):
        for p in (0, 0.3, 0.8, 1):
            assert abs(weight_of_coherence(isotropic(p, m)) - p) < 1e-6


def test_weight_faithful(rng):
    for s in range(5):
        assert weight_of_coherence(random_diagonal(4, seed=s)) <= 1e-7
        w = weight_of_coherence(random_density(4, seed=s))
        assert 1e-7 < w <= 1 + 1e-7


def test_weight_decomposition_reconstructs():
    for s in range(5):
        rho = random_density(4, seed=s)
        w, sigma, tau = weight_decomposition(rho)
        assert 0 <= w <= 1
        assert np.abs(sigma.mat - np.diag(np.diag(sigma.mat))).max() < 1e-9
        rec = (1 - w) * sigma.mat + w * tau.mat
        assert np.abs(rec - rho.mat).max() < 1e-6


def test_weight_decomposition_is_minimal():
    # a decomposition with a smaller coherent weight would make ρ - (1-w')σ' PSD for some diagonal σ';
    # check one candidate family: σ' = Δ(ρ) scaled as far as positivity allows
    for s in range(5):
        rho = random_density(3, seed=s).mat
        w = weight_of_coherence(rho)
        diag = np.diag(np.diag(rho).real)
        ts = np.linspace(0, 1, 2001)
        feas = [t for t in ts if np.linalg.eigvalsh(rho - t * diag).min() >= -1e-12]
        assert 1 - max(feas) >= w - 1e-6


def test_robustness_examples():
    assert robustness_of_coherence(np.diag([0.3, 0.7])) == 0
    assert abs(robustness_of_coherence([[0.5, 0.3], [0.3, 0.5]]) - 0.6) < 1e-6
    for d in (2, 3, 4):
        assert abs(robustness_of_coherence(max_coherent(d)) - (d - 1)) < 1e-6


def test_robustness_qubit_equals_l1(rng):
    for _ in range(200):
        rho = random_density(2, seed=rng.integers(2**32))
        assert abs(robustness_of_coherence(rho) - l1_coherence(rho)) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 1))
def test_measures_convex(seed, p):
    a, b = random_density(3, seed=seed), random_density(3, seed=seed + 1)
    mix = p * a.mat + (1 - p) * b.mat
    for f in (weight_of_coherence, robustness_of_coherence):
        assert f(mix) <= p * f(a) + (1 - p) * f(b) + 1e-7


def test_random_density_examples():
    assert np.abs(random_density(1, seed=0).mat - 1).max() < 1e-15
    a, b = random_density(4, seed=7), random_density(4, seed=7)
    assert np.array_equal(a.mat, b.mat)
    mean = np.mean([random_density(2, seed=s).mat for s in range(10_000)], axis=0)
    assert np.abs(mean - np.eye(2) / 2).max() < 0.02
    assert np.linalg.eigvalsh(random_density(5, seed=1).mat).min() > 0


def test_json_roundtrip():
    rho = random_density(3, seed=4)
    back = DensityMatrix.from_json(json.dumps(rho.to_json()))
    assert np.array_equal(back.mat, rho.mat)
    with pytest.raises(ValueError):
        DensityMatrix.from_json({"dim": 2, "re": [[1.0]], "im": [[0.0]]})
