"""Dense operator algebra on truncated Fock spaces.

Everything here is plain, dense complex linear algebra with hbar = 1.
Operators carry the list of local dimensions of their tensor factors so
that partial traces and embeddings know the factorization.  All values
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class DimensionError(ValueError):
    """Invalid Fock-space dimension or mismatched operand shapes."""


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense complex matrix on a (possibly composite) truncated Fock space.

    ``dims`` lists the local dimension of every tensor factor, system
    factor first.  The matrix side must equal ``prod(dims)`` and every
    local dimension must be at least 2.
    """

    dims: tuple
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 2 for d in dims):
            raise DimensionError(f"subsystem dimensions must all be >= 2, got {dims}")
        data = np.asarray(self.data, dtype=complex)
        n = int(np.prod(dims))
        if data.shape != (n, n):
            raise DimensionError(f"matrix of shape {data.shape} does not match dims {dims}")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dagger(self) -> "FockOperator":
        return FockOperator(self.dims, self.data.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def norm_max(self) -> float:
        return float(np.abs(self.data).max())

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.abs(self.data - self.data.conj().T).max() <= tol * max(1.0, self.norm_max()))

    def _check_same_space(self, other: "FockOperator"):
        if self.dims != other.dims:
            raise DimensionError(f"operands live on different spaces: {self.dims} vs {other.dims}")

    def __add__(self, other):
        self._check_same_space(other)
        return FockOperator(self.dims, self.data + other.data)

    def __sub__(self, other):
        self._check_same_space(other)
        return FockOperator(self.dims, self.data - other.data)

    def __neg__(self):
        return FockOperator(self.dims, -self.data)

    def __mul__(self, scalar):
        return FockOperator(self.dims, self.data * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check_same_space(other)
        return FockOperator(self.dims, self.data @ other.data)


def identity_op(dims) -> FockOperator:
    dims = tuple(int(d) for d in (dims if np.iterable(dims) else (dims,)))
    return FockOperator(dims, np.eye(int(np.prod(dims))))


def annihilation_op(dim: int) -> FockOperator:
    """Ladder-down operator: <n-1|a|n> = sqrt(n), zero elsewhere."""
    if dim < 2:
        raise DimensionError(f"Fock truncation needs dim >= 2, got {dim}")
    return FockOperator((dim,), np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1))


def creation_op(dim: int) -> FockOperator:
    return annihilation_op(dim).dagger()


def number_op(dim: int) -> FockOperator:
    if dim < 2:
        raise DimensionError(f"Fock truncation needs dim >= 2, got {dim}")
    return FockOperator((dim,), np.diag(np.arange(dim, dtype=float)))


def tensor_product(a: FockOperator, b: FockOperator) -> FockOperator:
    """Kronecker product; factor dimensions are concatenated."""
    return FockOperator(a.dims + b.dims, np.kron(a.data, b.data))


def embed(op: FockOperator, dims, index: int) -> FockOperator:
    """Embed a single-factor operator at position ``index`` of a composite space."""
    dims = tuple(int(d) for d in dims)
    if index < 0 or index >= len(dims):
        raise DimensionError(f"factor index {index} out of range for dims {dims}")
    if op.dim != dims[index]:
        raise DimensionError(f"operator dim {op.dim} does not match dims[{index}] = {dims[index]}")
    left = int(np.prod(dims[:index])) if index > 0 else 1
    right = int(np.prod(dims[index + 1:])) if index + 1 < len(dims) else 1
    data = np.kron(np.kron(np.eye(left), op.data), np.eye(right))
    return FockOperator(dims, data)


def commutator(a: FockOperator, b: FockOperator) -> FockOperator:
    a._check_same_space(b)
    return FockOperator(a.dims, a.data @ b.data - b.data @ a.data)


def partial_trace_op(op: FockOperator, keep) -> FockOperator:
    """Partial trace of an arbitrary operator, keeping the listed factors.

    ``keep`` is a set of factor indices; the kept factors stay in their
    original order.
    """
    n = len(op.dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise DimensionError("must keep at least one factor")
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} factors")
    tensor = op.data.reshape(op.dims + op.dims)
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    reduced = np.einsum(tensor, row + col, out)
    d = int(np.prod([op.dims[i] for i in keep]))
    return FockOperator(tuple(op.dims[i] for i in keep), reduced.reshape(d, d))


def matrix_exp(op: FockOperator, tol: float = 1e-12) -> FockOperator:
    """Matrix exponential via scaling-and-squaring (scipy.linalg.expm).

    ``tol`` is the relative accuracy this routine is certified against on
    matrices with norm up to ~10; the underlying Pade scheme comfortably
    exceeds the default.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.all(np.isfinite(op.data)):
        raise ValueError("matrix exponential of non-finite matrix")
    return FockOperator(op.dims, scipy.linalg.expm(op.data))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace operator with validation tolerances.

    Positivity is a diagnostic (``min_eigenvalue`` / ``check_positive``),
    not enforced at construction: weak transient negativity is data, not
    an error.
    """

    op: FockOperator
    trace_tol: float = 1e-8
    herm_tol: float = 1e-8

    def __post_init__(self):
        tr = self.op.trace()
        if abs(tr - 1.0) > self.trace_tol:
            raise ValueError(f"trace {tr} deviates from 1 beyond tol {self.trace_tol}")
        defect = float(np.abs(self.op.data - self.op.data.conj().T).max())
        if defect > self.herm_tol:
            raise ValueError(f"hermiticity defect {defect} beyond tol {self.herm_tol}")

    @property
    def data(self) -> np.ndarray:
        return self.op.data

    @property
    def dims(self) -> tuple:
        return self.op.dims

    @property
    def dim(self) -> int:
        return self.op.dim

    def expectation(self, op: FockOperator) -> complex:
        return complex(np.trace(op.data @ self.op.data))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.op.data + self.op.data.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def check_positive(self, pos_tol: float = 1e-10):
        lo = self.min_eigenvalue()
        if lo < -pos_tol:
            raise ValueError(f"minimum eigenvalue {lo} below -{pos_tol}")

    def tail_population(self) -> float:
        """Largest top-Fock-level population over the tensor factors."""
        worst = 0.0
        for i in range(len(self.dims)):
            marginal = partial_trace_op(self.op, [i])
            worst = max(worst, float(marginal.data[-1, -1].real))
        return worst


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    reduced = partial_trace_op(rho.op, keep)
    return DensityMatrix(reduced, trace_tol=rho.trace_tol, herm_tol=rho.herm_tol)


def gibbs_state(h: FockOperator, beta: float, *, herm_tol: float = 1e-10,
                trace_tol: float = 1e-8) -> DensityMatrix:
    """Thermal state exp(-beta*H)/Z, computed from the eigendecomposition.

    The spectrum is shifted by its minimum before exponentiating, so
    arbitrarily large beta never overflows.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    defect = float(np.abs(h.data - h.data.conj().T).max())
    if defect > herm_tol * max(1.0, h.norm_max()):
        raise ValueError(f"Hamiltonian not hermitian: defect {defect}")
    hs = 0.5 * (h.data + h.data.conj().T)
    energies, vectors = np.linalg.eigh(hs)
    weights = np.exp(-beta * (energies - energies.min()))
    rho = (vectors * (weights / weights.sum())) @ vectors.conj().T
    return DensityMatrix(FockOperator(h.dims, rho), trace_tol=trace_tol, herm_tol=herm_tol)
