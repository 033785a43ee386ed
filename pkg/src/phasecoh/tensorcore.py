"""Dense complex operators over labeled multipartite systems.

All operators are square and act on the tensor product of their systems,
row-major over the ordered label list. The computational basis is the
incoherent basis everywhere.
"""
from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12


class LabelError(ValueError):
    pass


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class SystemDims:
    labels: tuple
    dims: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        dims = tuple(int(x) for x in self.dims)
        if len(labels) != len(dims):
            raise DimensionError(f"{len(labels)} labels but {len(dims)} dims")
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate labels in {labels}")
        if any(x < 1 for x in dims):
            raise DimensionError(f"dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def dim(self, label) -> int:
        return self.dims[self.index(label)]

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown label {label!r}; have {self.labels}") from None

    def __len__(self):
        return len(self.labels)


class CMatrix:
    """Immutable square complex matrix on labeled systems."""

    __slots__ = ("_sys", "_mat")

    def __init__(self, mat, labels: Sequence[Hashable], dims: Sequence[int], hermitian: bool = False):
        sys = SystemDims(tuple(labels), tuple(dims))
        arr = np.array(mat, dtype=complex)
        n = sys.total
        if arr.shape != (n, n):
            raise DimensionError(f"matrix shape {arr.shape} does not match systems of total dimension {n}")
        if hermitian:
            dev = np.abs(arr - arr.conj().T).max() if n else 0.0
            if dev > HERMITIAN_TOL * max(1.0, np.abs(arr).max()):
                raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")
        arr.setflags(write=False)
        self._sys = sys
        self._mat = arr

    @property
    def mat(self) -> np.ndarray:
        return self._mat

    @property
    def systems(self) -> SystemDims:
        return self._sys

    @property
    def labels(self) -> tuple:
        return self._sys.labels

    @property
    def dims(self) -> tuple:
        return self._sys.dims

    @property
    def shape(self):
        return self._mat.shape

    def dim(self, label) -> int:
        return self._sys.dim(label)

    def with_mat(self, mat) -> "CMatrix":
        return CMatrix(mat, self.labels, self.dims)

    def relabel(self, mapping: dict) -> "CMatrix":
        return CMatrix(self._mat, [mapping.get(x, x) for x in self.labels], self.dims)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.abs(self._mat - self._mat.conj().T).max() <= tol)

    def trace(self) -> complex:
        return complex(np.trace(self._mat))

    def tensor_view(self) -> np.ndarray:
        return self._mat.reshape(self.dims + self.dims)

    def __add__(self, other: "CMatrix") -> "CMatrix":
        other = other.reorder(self.labels)
        return self.with_mat(self._mat + other.mat)

    def __sub__(self, other: "CMatrix") -> "CMatrix":
        other = other.reorder(self.labels)
        return self.with_mat(self._mat - other.mat)

    def __mul__(self, scalar) -> "CMatrix":
        return self.with_mat(self._mat * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "CMatrix") -> "CMatrix":
        other = other.reorder(self.labels)
        return self.with_mat(self._mat @ other.mat)

    def reorder(self, labels: Sequence[Hashable]) -> "CMatrix":
        """Permute the tensor factors into the given label order."""
        labels = tuple(labels)
        if labels == self.labels:
            return self
        if sorted(map(repr, labels)) != sorted(map(repr, self.labels)) or len(labels) != len(self.labels):
            raise LabelError(f"cannot reorder {self.labels} into {labels}")
        perm = [self._sys.index(x) for x in labels]
        k = len(perm)
        t = self.tensor_view().transpose(perm + [p + k for p in perm])
        dims = [self.dims[p] for p in perm]
        n = self._sys.total
        return CMatrix(t.reshape(n, n), labels, dims)

    def allclose(self, other: "CMatrix", atol: float = 1e-12) -> bool:
        other = other.reorder(self.labels)
        return bool(np.abs(self._mat - other.mat).max() <= atol)

    def __repr__(self):
        return f"CMatrix(labels={self.labels}, dims={self.dims})"


def identity(labels: Sequence[Hashable], dims: Sequence[int]) -> CMatrix:
    n = int(np.prod(dims, dtype=np.int64))
    return CMatrix(np.eye(n), labels, dims)


def _check_labels(m: CMatrix, over: Iterable) -> list:
    over = list(over)
    for x in over:
        m.systems.index(x)
    return over


def tensor(a: CMatrix, b: CMatrix) -> CMatrix:
    """Kronecker product with concatenated labels."""
    clash = set(a.labels) & set(b.labels)
    if clash:
        raise LabelError(f"label collision in tensor product: {sorted(map(repr, clash))}")
    return CMatrix(np.kron(a.mat, b.mat), a.labels + b.labels, a.dims + b.dims)


def partial_trace(m: CMatrix, over: Iterable) -> CMatrix:
    over = set(_check_labels(m, over))
    keep = [i for i, x in enumerate(m.labels) if x not in over]
    gone = [i for i, x in enumerate(m.labels) if x in over]
    k = len(m.labels)
    t = m.tensor_view()
    letters = iter(string.ascii_letters)
    row = [next(letters) for _ in range(k)]
    col = [next(letters) for _ in range(k)]
    for i in gone:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dims = [m.dims[i] for i in keep]
    n = int(np.prod(dims, dtype=np.int64))
    return CMatrix(res.reshape(n, n), [m.labels[i] for i in keep], dims)


def partial_transpose(m: CMatrix, over: Iterable) -> CMatrix:
    over = set(_check_labels(m, over))
    k = len(m.labels)
    perm = list(range(2 * k))
    for i, x in enumerate(m.labels):
        if x in over:
            perm[i], perm[i + k] = i + k, i
    t = m.tensor_view().transpose(perm)
    n = m.systems.total
    return m.with_mat(t.reshape(n, n))


def dephase_mask(dims: Sequence[int], positions: Iterable[int]) -> np.ndarray:
    """0/1 mask keeping entries whose row and column indices agree on ``positions``."""
    dims = list(dims)
    n = int(np.prod(dims, dtype=np.int64))
    idx = np.indices(dims).reshape(len(dims), n) if dims else np.zeros((0, 1), dtype=int)
    mask = np.ones((n, n), dtype=bool)
    for p in positions:
        mask &= idx[p][:, None] == idx[p][None, :]
    return mask.astype(float)


def dephase(m: CMatrix, over: Iterable) -> CMatrix:
    over = _check_labels(m, over)
    if not over:
        return m
    pos = [m.systems.index(x) for x in over]
    return m.with_mat(m.mat * dephase_mask(m.dims, pos))


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    a = m.mat if isinstance(m, CMatrix) else np.asarray(m, dtype=complex)
    scale = max(1.0, float(np.abs(a).max())) if a.size else 1.0
    if a.size and np.abs(a - a.conj().T).max() > HERMITIAN_TOL * scale:
        raise ValueError("eig_hermitian requires a Hermitian matrix")
    return np.linalg.eigh((a + a.conj().T) / 2)


def link(a: CMatrix, b: CMatrix) -> CMatrix:
    """Link product: trace over shared labels of (1 ⊗ b^{T_shared})(a ⊗ 1).

    Result labels are a's unshared labels followed by b's unshared labels.
    """
    shared = [x for x in a.labels if x in b.labels]
    for x in shared:
        if a.dim(x) != b.dim(x):
            raise DimensionError(f"shared label {x!r} has dims {a.dim(x)} and {b.dim(x)}")
    letters = iter(string.ascii_letters)
    ra = {x: next(letters) for x in a.labels}
    ca = {x: next(letters) for x in a.labels}
    rb = {x: (ra[x] if x in ra else next(letters)) for x in b.labels}
    # contraction rule: sum_{m,s} A[(u,m),(u',s)] b[(m,v),(s,v')]
    cb = {x: (ca[x] if x in ca else next(letters)) for x in b.labels}
    if len(set(ra.values()) | set(ca.values()) | set(rb.values()) | set(cb.values())) > 52:
        raise DimensionError("too many systems for link product")
    ua = [x for x in a.labels if x not in shared]
    ub = [x for x in b.labels if x not in shared]
    sa = "".join(ra[x] for x in a.labels) + "".join(ca[x] for x in a.labels)
    sb = "".join(rb[x] for x in b.labels) + "".join(cb[x] for x in b.labels)
    out = "".join(ra[x] for x in ua) + "".join(rb[x] for x in ub) + "".join(ca[x] for x in ua) + "".join(cb[x] for x in ub)
    res = np.einsum(f"{sa},{sb}->{out}", a.tensor_view(), b.tensor_view(), optimize=True)
    dims = [a.dim(x) for x in ua] + [b.dim(x) for x in ub]
    n = int(np.prod(dims, dtype=np.int64))
    return CMatrix(res.reshape(n, n), ua + ub, dims)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex).ravel()
    return np.outer(vec, vec.conj())


class ChoiMatrix:
    """Choi operator J = sum |n><m| ⊗ N(|n><m|) with declared input and output systems.

    The matrix is stored with input labels first, then output labels.
    """

    __slots__ = ("op", "in_labels", "out_labels")

    def __init__(self, mat, in_labels, in_dims, out_labels, out_dims):
        in_labels, out_labels = tuple(in_labels), tuple(out_labels)
        if isinstance(mat, CMatrix):
            mat = mat.reorder(in_labels + out_labels).mat
        self.op = CMatrix(mat, in_labels + out_labels, tuple(in_dims) + tuple(out_dims))
        self.in_labels = in_labels
        self.out_labels = out_labels

    @classmethod
    def from_op(cls, op: CMatrix, in_labels, out_labels) -> "ChoiMatrix":
        return cls(op.reorder(tuple(in_labels) + tuple(out_labels)).mat,
                   in_labels, [op.dim(x) for x in in_labels],
                   out_labels, [op.dim(x) for x in out_labels])

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def in_dims(self) -> tuple:
        return tuple(self.op.dim(x) for x in self.in_labels)

    @property
    def out_dims(self) -> tuple:
        return tuple(self.op.dim(x) for x in self.out_labels)

    @property
    def d_in(self) -> int:
        return int(np.prod(self.in_dims, dtype=np.int64))

    @property
    def d_out(self) -> int:
        return int(np.prod(self.out_dims, dtype=np.int64))

    def relabel(self, mapping: dict) -> "ChoiMatrix":
        return ChoiMatrix(self.mat, [mapping.get(x, x) for x in self.in_labels], self.in_dims,
                          [mapping.get(x, x) for x in self.out_labels], self.out_dims)

    def is_cptp(self, tol: float = 1e-9) -> bool:
        if not self.op.is_hermitian(tol):
            return False
        if np.linalg.eigvalsh((self.mat + self.mat.conj().T) / 2).min() < -tol:
            return False
        tr = partial_trace(self.op, self.out_labels).mat
        return bool(np.abs(tr - np.eye(self.d_in)).max() <= tol)

    def __repr__(self):
        return f"ChoiMatrix(in={self.in_labels}{self.in_dims}, out={self.out_labels}{self.out_dims})"


def apply_choi(j: ChoiMatrix, rho) -> np.ndarray:
    """N(rho) = Tr_in[(rho^T ⊗ 1) J], returned as a plain matrix over j's outputs."""
    rho = rho.mat if isinstance(rho, CMatrix) else np.asarray(rho, dtype=complex)
    if rho.shape != (j.d_in, j.d_in):
        raise DimensionError(f"state of shape {rho.shape} does not fit channel input dimension {j.d_in}")
    state = CMatrix(rho, j.in_labels, j.in_dims)
    return link(state, j.op).reorder(j.out_labels).mat
