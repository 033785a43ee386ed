import json

import numpy as np
import pytest

from phasecoh.channels import (KrausError, Measurement, bell_pair_states, choi_from_json, choi_from_kraus,
                               choi_to_json, compose, dephasing_choi, identity_choi, is_mio, lemma11_channels,
                               mio_residual, output_state, parallel, phase_choi, phase_unitary, qft, random_mio,
                               trace_out, unitary_choi)
from phasecoh.tensorcore import DimensionError

from conftest import rand_kraus


def kraus_apply(ks, rho):
    return sum(k @ rho @ k.conj().T for k in ks)


def test_identity_kraus_gives_omega_projector():
    d = 3
    j = choi_from_kraus([np.eye(d)])
    om = np.zeros(d * d)
    om[[n * d + n for n in range(d)]] = 1
    assert np.abs(j.mat - np.outer(om, om)).max() < 1e-14
    assert is_mio(j)


def test_dephasing_is_diagonal_and_mio():
    j = dephasing_choi(4)
    expect = np.zeros(16)
    expect[[n * 4 + n for n in range(4)]] = 1
    assert np.abs(j.mat - np.diag(expect)).max() < 1e-14
    assert is_mio(j)


def test_hadamard_is_not_mio():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    j = unitary_choi(h)
    assert not is_mio(j)
    assert abs(mio_residual(j) - 0.5) < 1e-14


def test_kraus_validation():
    with pytest.raises(KrausError):
        choi_from_kraus([2 * np.eye(2)])
    with pytest.raises(KrausError):
        choi_from_kraus([])
    with pytest.raises(DimensionError):
        choi_from_kraus([np.eye(2), np.eye(3)])


def test_trace_preservation_of_random_kraus(rng):
    for _ in range(20):
        din, dout = rng.integers(1, 4, size=2)
        j = choi_from_kraus(rand_kraus(rng, din, dout))
        assert np.abs(trace_out(j) - np.eye(din)).max() < 1e-12


def test_output_state_matches_kraus(rng):
    for _ in range(20):
        ks = rand_kraus(rng, 3, 2)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        assert np.abs(output_state(choi_from_kraus(ks), rho) - kraus_apply(ks, rho)).max() < 1e-12


def test_phase_unitary_and_qft():
    u = phase_unitary(3, 0.7)
    assert np.abs(u - np.diag(np.exp(0.7j * np.arange(3)))).max() < 1e-15
    assert np.abs(phase_unitary(4, 0.0) - np.eye(4)).max() == 0
    assert is_mio(phase_choi(3, 1.1))
    f = qft(2)
    assert np.abs(f - np.array([[1, 1], [1, -1]]) / np.sqrt(2)).max() < 1e-15
    for d in (1, 3, 5, 8):
        f = qft(d)
        assert np.abs(f.conj().T @ f - np.eye(d)).max() < 1e-13
        # V_{2π/d} steps the Fourier basis by one
        v = phase_unitary(d, 2 * np.pi / d)
        assert np.abs(v @ f[:, 0] - f[:, 1 % d]).max() < 1e-13
    with pytest.raises(ValueError):
        qft(0)


def test_measurement_validation_and_channel():
    e0 = np.diag([1.0, 0.0])
    m = Measurement([e0, np.eye(2) - e0])
    assert np.abs(m.probabilities(np.eye(2) / 2) - 0.5).max() < 1e-15
    assert is_mio(m.as_channel())
    with pytest.raises(ValueError):
        Measurement([e0])
    with pytest.raises(ValueError):
        Measurement([np.diag([2.0, 0.0]), np.diag([-1.0, 1.0])])


@pytest.mark.parametrize("dims", [(2, 2), (3, 2), (2, 3), (3, 3)])
def test_paired_channel_examples(dims):
    d1, d2 = dims
    psi, phi = bell_pair_states(0, 1, 2)
    jn, jm = lemma11_channels(0, d1 - 1, 0, d2 - 1, psi, phi, d1, d2)
    for j in (jn, jm):
        assert np.linalg.eigvalsh(j.mat).min() > -1e-12
        assert np.abs(trace_out(j) - np.eye(d1)).max() < 1e-12
        assert mio_residual(j) <= 1e-12
    # the pair only differs on the coherence between |k n⟩ and |l m⟩
    diff = jn.mat - jm.mat
    assert np.abs(diff).max() > 0.1


def test_paired_channel_trace_and_dephased_structure():
    psi, phi = bell_pair_states(0, 2, 3)
    for jn in lemma11_channels(1, 2, 0, 1, psi, phi, 3, 2):
        t = jn.mat.reshape(3, 6, 3, 6)
        assert np.abs(np.einsum("iaja->ij", t) - np.eye(3)).max() < 1e-14
        # dephasing the input already dephases everything
        din = np.einsum("iaib->iab", t)
        for i in range(3):
            assert np.abs(din[i] - np.diag(np.diag(din[i]))).max() <= 1e-12


def test_bell_pairs_over_composite_b_are_mio(rng):
    # B made of two subsystems (dims 2 and 3); ψ± = (|i k⟩ ± |j l⟩)/√2
    for _ in range(15):
        i, j = rng.integers(0, 2, size=2)
        k, l = rng.integers(0, 3, size=2)
        if i * 3 + k == j * 3 + l:
            continue
        psi, phi = bell_pair_states(i * 3 + k, j * 3 + l, 6)
        kk, ll = rng.choice(3, size=2, replace=False)
        n, m = rng.integers(0, 2, size=2)
        for jx in lemma11_channels(kk, ll, n, m, psi, phi, 3, 2):
            assert mio_residual(jx) <= 1e-12
            assert np.linalg.eigvalsh(jx.mat).min() > -1e-12


def test_paired_channel_validation():
    psi, phi = bell_pair_states(0, 1, 2)
    with pytest.raises(ValueError):
        lemma11_channels(1, 1, 0, 1, psi, phi, 2, 2)
    with pytest.raises(ValueError):
        lemma11_channels(0, 1, 0, 1, np.array([1, 1]) / np.sqrt(2), np.array([1, 0]), 2, 2)
    with pytest.raises(ValueError):
        lemma11_channels(0, 2, 0, 1, psi, phi, 2, 2)


def test_random_mio_modes():
    for mode in ("kraus-family", "sdp-extremal"):
        for din, dout in ((2, 2), (3, 2), (2, 3)):
            j = random_mio(din, dout, mode=mode, seed=7)
            assert mio_residual(j) <= 1e-12
            assert np.linalg.eigvalsh(j.mat).min() > -1e-10
            assert np.abs(trace_out(j) - np.eye(din)).max() < 1e-9
    j = random_mio(1, 1, seed=0)
    assert np.abs(j.mat - 1).max() < 1e-14
    with pytest.raises(ValueError):
        random_mio(2, 2, mode="nope")


def test_random_mio_is_seeded():
    a = random_mio(3, 3, seed=11)
    b = random_mio(3, 3, seed=11)
    assert np.abs(a.mat - b.mat).max() == 0


def test_mio_maps_diagonal_to_diagonal(rng):
    for t in range(50):
        din, dout = 2 + t % 3, 2 + (t // 3) % 3
        j = random_mio(din, dout, seed=rng)
        for _ in range(10):
            p = rng.dirichlet(np.ones(din))
            out = output_state(j, np.diag(p))
            assert np.abs(out - np.diag(np.diag(out))).max() < 1e-12


def test_composition_and_parallel_closure(rng):
    for _ in range(10):
        a = random_mio(2, 3, seed=rng)
        b = random_mio(3, 2, seed=rng)
        ab = compose(a, b)
        assert is_mio(ab)
        assert np.abs(trace_out(ab) - np.eye(2)).max() < 1e-12
        p = parallel(a, random_mio(2, 2, seed=rng, in_label=5, out_label=6))
        assert is_mio(p)


def test_compose_matches_kraus(rng):
    k1, k2 = rand_kraus(rng, 2, 3), rand_kraus(rng, 3, 2)
    ab = compose(choi_from_kraus(k1), choi_from_kraus(k2))
    oracle = choi_from_kraus([b @ a for a in k1 for b in k2])
    assert np.abs(ab.mat - oracle.mat).max() < 1e-12
    with pytest.raises(DimensionError):
        compose(choi_from_kraus(k1), choi_from_kraus(k1))


def test_coherent_unitary_breaks_closure():
    h = unitary_choi(np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    assert not is_mio(compose(identity_choi(2), h))


def test_json_round_trip(rng):
    j = random_mio(2, 3, seed=rng)
    back = choi_from_json(json.dumps(choi_to_json(j)))
    assert np.abs(back.mat - j.mat).max() == 0
    assert back.in_dims == j.in_dims and back.out_dims == j.out_dims
