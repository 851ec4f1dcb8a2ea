"""Dense complex linear algebra and entropy helpers for small Hilbert spaces.

Matrices are plain ``numpy`` arrays of dtype ``complex128`` stored row-major.
Every space handled by this package is at most a few dozen dimensions, so
nothing here tries to be clever about sparsity or conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameterError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
TRACE_IMAG_TOL = 1e-12
PSD_TOL = 1e-10
EIGEN_CLAMP = 1e-12
PROB_TOL = 1e-12


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-D complex array (copy only if needed)."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise InvalidParameterError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``.

    Entry ``(i*rb + k, j*cb + l)`` of the result is ``a[i, j] * b[k, l]``.
    """
    return np.kron(as_matrix(a), as_matrix(b))


def tensor_all(mats: Iterable) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = tensor(out, m)
    return out


def basis(dim: int, index: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return vec


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, np.conj(v))


@dataclass(frozen=True)
class StateVector:
    """A ket, possibly subnormalized.

    ``weight`` is the squared norm. States produced by an attack branch carry
    weight 1; sub-blocks cut out of them (for example the non-vacuum part)
    keep their weight explicitly instead of being renormalized silently.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def weight(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.weight - 1.0) <= tol

    def projector(self) -> np.ndarray:
        return projector(self.amplitudes)


def hermiticity_error(m: np.ndarray) -> float:
    m = as_matrix(m)
    return float(np.max(np.abs(m - dag(m)))) if m.size else 0.0


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive semidefinite matrix with a tensor layout.

    ``factor_dims`` lists the dimensions of the tensor factors in the order
    used by :func:`tensor`; their product must equal the matrix dimension.
    Construction checks every invariant and fails with
    :class:`InvalidParameterError` if one does not hold.
    """

    matrix: np.ndarray
    factor_dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidParameterError(f"density operator must be square, got {m.shape}")
        dims = tuple(int(d) for d in self.factor_dims) or (m.shape[0],)
        if any(d < 1 for d in dims) or prod(dims) != m.shape[0]:
            raise InvalidParameterError(
                f"factor_dims {dims} do not multiply to dimension {m.shape[0]}"
            )
        herm = hermiticity_error(m)
        if herm > HERMITIAN_TOL:
            raise InvalidParameterError(f"matrix is not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(m)
        if abs(tr.real - 1.0) > TRACE_TOL or abs(tr.imag) > TRACE_IMAG_TOL:
            raise InvalidParameterError(f"trace {tr:.12g} is not 1")
        lam_min = float(np.linalg.eigvalsh(m)[0])
        if lam_min < -PSD_TOL:
            raise InvalidParameterError(f"matrix is not positive semidefinite (eigenvalue {lam_min:.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "factor_dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, vec, factor_dims: Sequence[int] = ()) -> "DensityOperator":
        return cls(projector(vec), tuple(factor_dims))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim, (dim,))


def partial_trace(rho: DensityOperator, keep: Iterable[int]) -> DensityOperator:
    """Trace out every factor of ``rho`` whose index is not in ``keep``.

    The kept factors stay in their original relative order.
    """
    keep = sorted(set(keep))
    dims = rho.factor_dims
    n = len(dims)
    if not keep:
        raise InvalidParameterError("keep must name at least one factor")
    bad = [k for k in keep if not 0 <= k < n]
    if bad:
        raise InvalidParameterError(f"factor indices {bad} out of range for factor_dims {dims}")

    t = rho.matrix.reshape(dims + dims)
    # trace from the highest index down so lower axis numbers stay valid
    for idx in reversed(range(n)):
        if idx in keep:
            continue
        cur = t.ndim // 2
        t = np.trace(t, axis1=idx, axis2=idx + cur)
    kept_dims = tuple(dims[k] for k in keep)
    d = prod(kept_dims)
    return DensityOperator(t.reshape(d, d), kept_dims)


def eigenvalues_hermitian(m, tol: float = 1e-10) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix in descending order."""
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise InvalidParameterError(f"matrix must be square, got {m.shape}")
    err = hermiticity_error(m)
    if err > tol:
        raise InvalidParameterError(f"matrix is not Hermitian (max deviation {err:.3g})")
    # symmetrize so round-off in the input cannot leak into the solver
    return np.linalg.eigvalsh((m + dag(m)) / 2)[::-1]


def entropy_of_spectrum(eigvals) -> float:
    lam = np.asarray(eigvals, dtype=float)
    lam = lam[lam > EIGEN_CLAMP]
    return float(-np.sum(lam * np.log2(lam)))


def von_neumann_entropy(rho) -> float:
    """Von Neumann entropy in bits.

    Eigenvalues at or below ``EIGEN_CLAMP`` contribute nothing, which also
    absorbs tiny negative eigenvalues from round-off. Accepts a
    :class:`DensityOperator` or any Hermitian matrix.
    """
    m = rho.matrix if isinstance(rho, DensityOperator) else rho
    return entropy_of_spectrum(eigenvalues_hermitian(m))


def binary_entropy(p: float) -> float:
    """Shannon binary entropy ``h(p)`` in bits, with ``0 log 0 = 0``."""
    p = float(p)
    if not (-PROB_TOL <= p <= 1.0 + PROB_TOL) or np.isnan(p):
        raise InvalidParameterError(f"probability {p!r} outside [0, 1]")
    p = min(max(p, 0.0), 1.0)
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))
