import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecoh.channels import choi_from_kraus, dephasing_choi, identity_choi, phase_choi, phase_unitary
from phasecoh.tensorcore import (CMatrix, DimensionError, LabelError, SystemDims, apply_choi, dephase, eig_hermitian,
                                 identity, ket, partial_trace, partial_transpose, projector, tensor)
from conftest import rand_herm, rand_kraus


def test_system_dims_validation():
    assert SystemDims((0, 1), (2, 3)).total == 6
    with pytest.raises(LabelError):
        SystemDims((0, 0), (2, 2))
    with pytest.raises(DimensionError):
        SystemDims((0,), (0,))
    with pytest.raises(DimensionError):
        CMatrix(np.eye(3), [0, 1], [2, 2])


def test_hermitian_flag():
    with pytest.raises(ValueError):
        CMatrix([[0, 1], [0, 0]], [0], [2], hermitian=True)
    CMatrix([[1, 1j], [-1j, 1]], [0], [2], hermitian=True)


def test_tensor_examples():
    i4 = tensor(identity([0], [2]), identity([1], [2]))
    assert np.abs(i4.mat - np.eye(4)).max() < 1e-15
    p = tensor(CMatrix(projector(ket(0, 2)), [0], [2]), CMatrix(projector(ket(1, 2)), [1], [2]))
    assert np.abs(p.mat - projector(ket(1, 4))).max() < 1e-15
    with pytest.raises(LabelError):
        tensor(identity([0], [2]), identity([0], [2]))


def test_trace_factorization(rng):
    for _ in range(20):
        a = CMatrix(rand_herm(rng, 3), ["a"], [3])
        b = CMatrix(rand_herm(rng, 2), ["b"], [2])
        out = partial_trace(tensor(a, b), ["b"])
        assert np.abs(out.mat - a.mat * np.trace(b.mat)).max() < 1e-12


def test_partial_trace_examples(rng):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = CMatrix(g, [0, 1], [2, 2])
    full = partial_trace(m, [0, 1])
    assert full.shape == (1, 1) and abs(full.mat[0, 0] - np.trace(g)) < 1e-12
    j = choi_from_kraus(rand_kraus(rng, 3, 2), 0, 1)
    assert np.abs(partial_trace(j.op, [1]).mat - np.eye(3)).max() < 1e-12
    with pytest.raises(LabelError):
        partial_trace(m, ["nope"])


def test_partial_trace_keeps_label_order(rng):
    m = CMatrix(rand_herm(rng, 12), ["x", "y", "z"], [2, 3, 2])
    out = partial_trace(m, ["y"])
    assert out.labels == ("x", "z") and out.dims == (2, 2)
    # oracle: explicit index sum
    t = m.mat.reshape(2, 3, 2, 2, 3, 2)
    ref = sum(t[:, k, :, :, k, :] for k in range(3)).reshape(4, 4)
    assert np.abs(out.mat - ref).max() < 1e-12


def test_partial_transpose_examples(rng):
    g = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    m = CMatrix(g, [0, 1], [2, 3])
    assert np.abs(partial_transpose(m, [0, 1]).mat - g.T).max() == 0
    # oracle: transpose only the second factor by index juggling
    ref = g.reshape(2, 3, 2, 3).transpose(0, 3, 2, 1).reshape(6, 6)
    assert np.abs(partial_transpose(m, [1]).mat - ref).max() == 0
    phi = 0.83
    jp = phase_choi(3, phi).op
    assert np.abs(partial_transpose(jp, [0, 1]).mat - phase_choi(3, -phi).mat).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.booleans(), min_size=3, max_size=3), st.integers(0, 2**31))
def test_partial_transpose_involution(which, seed):
    rng = np.random.default_rng(seed)
    m = CMatrix(rng.normal(size=(12, 12)), ["a", "b", "c"], [2, 3, 2])
    over = [x for x, w in zip("abc", which) if w]
    assert np.abs(partial_transpose(partial_transpose(m, over), over).mat - m.mat).max() == 0


def test_dephase_examples(holevo):
    plus = CMatrix(np.full((2, 2), 0.5), [0], [2])
    assert np.abs(dephase(plus, [0]).mat - np.eye(2) / 2).max() == 0
    assert dephase(plus, []) is plus
    from phasecoh.costfn import cost_matrix
    y = cost_matrix(holevo, 5)
    dy = dephase(CMatrix(y.matrix, [0], [5]), [0]).mat
    assert np.abs(dy - 2 * np.eye(5)).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_dephase_idempotent_and_commuting(seed):
    rng = np.random.default_rng(seed)
    m = CMatrix(rand_herm(rng, 12), ["a", "b", "c"], [2, 3, 2])
    once = dephase(m, ["a"])
    assert np.abs(dephase(once, ["a"]).mat - once.mat).max() == 0
    ab = dephase(dephase(m, ["a"]), ["c"]).mat
    ba = dephase(dephase(m, ["c"]), ["a"]).mat
    assert np.abs(ab - ba).max() == 0
    assert np.abs(ab - dephase(m, ["a", "c"]).mat).max() == 0


def test_eig_hermitian_examples(rng):
    w, _ = eig_hermitian(np.eye(3))
    assert np.abs(w - 1).max() < 1e-14
    w, _ = eig_hermitian(np.diag([3.0, 1, 2]))
    assert np.abs(w - [1, 2, 3]).max() < 1e-14
    w, _ = eig_hermitian(CMatrix([[2, -1], [-1, 2]], [0], [2]))
    assert np.abs(w - [1, 3]).max() < 1e-14
    h = rand_herm(rng, 6)
    w, v = eig_hermitian(h)
    assert np.all(np.diff(w) >= 0)
    assert np.abs(h @ v - v * w).max() < 1e-10 * np.abs(h).max()
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_apply_choi_examples(rng):
    rho = rand_herm(rng, 3)
    assert np.abs(apply_choi(identity_choi(3), rho) - rho).max() < 1e-14
    plus = np.full((2, 2), 0.5)
    assert np.abs(apply_choi(dephasing_choi(2), plus) - np.eye(2) / 2).max() < 1e-15
    phi = 1.1
    out = apply_choi(phase_choi(2, phi), plus)
    u = phase_unitary(2, phi)
    assert np.abs(out - u @ plus @ u.conj().T).max() < 1e-14
    assert abs(out[1, 0] - 0.5 * np.exp(1j * phi)) < 1e-14
    with pytest.raises(DimensionError):
        apply_choi(identity_choi(3), plus)


def test_apply_choi_matches_kraus(rng):
    for _ in range(100):
        d_in, d_out = rng.integers(1, 5, size=2)
        ks = rand_kraus(rng, d_in, d_out, k=int(rng.integers(1, 4)))
        g = rng.normal(size=(d_in, d_in)) + 1j * rng.normal(size=(d_in, d_in))
        rho = g @ g.conj().T
        ref = sum(k @ rho @ k.conj().T for k in ks)
        assert np.abs(apply_choi(choi_from_kraus(ks), rho) - ref).max() < 1e-12


def test_reorder_and_arithmetic(rng):
    a = CMatrix(rand_herm(rng, 6), [0, 1], [2, 3])
    b = a.reorder([1, 0])
    assert b.dims == (3, 2)
    assert a.allclose(b)
    assert np.abs((a + b).mat - 2 * a.mat).max() < 1e-14
    assert np.abs((a - b).mat).max() < 1e-14
    assert np.abs((2 * a).mat - 2 * a.mat).max() == 0
