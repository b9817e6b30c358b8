"""Dense complex linear algebra and canonical quantum operators.

Everything here works on plain ``numpy.ndarray`` complex matrices.  Qubit
operators use the ground-first basis ``|0>, |1>`` with ``sigma_z|1> = +|1>``
so that the rotating-frame Hamiltonian reads ``-(delta/2) sz + (omega/2) sx``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, TruncationError

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.diag([-1.0 + 0j, 1.0 + 0j])
IDENTITY_2 = np.eye(2, dtype=complex)

#: displacement leakage accepted on the retained block before TruncationError
DISPLACEMENT_LEAK_TOL = 1e-6


@dataclass(frozen=True)
class FockSpace:
    """Truncated oscillator space: ``dim`` retained levels, ``working_dim`` padding.

    Truncation-sensitive operators (displacement) are built in ``working_dim``
    and only their action on the first ``dim`` levels is trusted.
    """

    dim: int
    working_dim: int = 0

    def __post_init__(self):
        wd = self.working_dim if self.working_dim else self.dim + 20
        object.__setattr__(self, "working_dim", wd)
        if self.dim < 2 or self.working_dim < self.dim:
            raise ValueError(f"need working_dim >= dim >= 2, got {self}")


def padded_space_for(alpha: complex, dim: int) -> FockSpace:
    """FockSpace whose padding keeps displacement leakage below tolerance."""
    a = abs(alpha)
    pad = max(20, int(np.ceil(1.3 * a * a + 5.0 * a * np.sqrt(dim) + 12)))
    return FockSpace(dim, dim + pad)


def destroy(space: FockSpace | int) -> np.ndarray:
    """Ladder operator ``a`` in the working dimension: entries sqrt(k) at (k-1, k)."""
    n = space if isinstance(space, int) else space.working_dim
    return np.diag(np.sqrt(np.arange(1.0, n)), 1).astype(complex)


def create(space: FockSpace | int) -> np.ndarray:
    return destroy(space).conj().T


def number_op(space: FockSpace | int) -> np.ndarray:
    n = space if isinstance(space, int) else space.working_dim
    return np.diag(np.arange(n)).astype(complex)


def fock_state(k: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return v


def fock_density(k: int, dim: int) -> np.ndarray:
    v = fock_state(k, dim)
    return np.outer(v, v.conj())


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product (first factor varies slowest)."""
    return np.kron(a, b)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade core via scipy)."""
    a = np.asarray(a, dtype=complex)
    if a.shape[0] != a.shape[1]:
        raise ValueError("expm needs a square matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("expm input must be finite")
    if np.linalg.norm(a, 1) > 1e8:
        raise ConvergenceError("matrix norm too large for reliable exponential")
    return scipy.linalg.expm(a)


def parity_operator(space: FockSpace | int) -> np.ndarray:
    """Diagonal (-1)^k photon-number parity."""
    n = space if isinstance(space, int) else space.working_dim
    return np.diag((-1.0 + 0j) ** np.arange(n))


def displaced_fock_block(beta: np.ndarray | complex, dim: int) -> np.ndarray:
    """Exact matrix elements ``<m|D(beta)|n>`` for m, n < dim.

    Closed form with associated Laguerre polynomials; vectorized over an
    arbitrary-shaped array of displacements.  This is the infinite-dimensional
    operator's top block, free of truncation error.
    """
    beta = np.asarray(beta, dtype=complex)
    x = beta.real**2 + beta.imag**2
    env = np.exp(-x / 2)
    # L[n, k] = L_n^{(k)}(x) by the three-term recurrence; n, k < dim
    lag = np.zeros((dim, dim) + beta.shape)
    lag[0] = 1.0
    if dim > 1:
        for k in range(dim):
            lag[1, k] = 1.0 + k - x
        for n in range(1, dim - 1):
            for k in range(dim):
                lag[n + 1, k] = ((2 * n + k + 1 - x) * lag[n, k]
                                 - (n + k) * lag[n - 1, k]) / (n + 1)
    pow_b = np.ones(beta.shape + (dim,), dtype=complex)
    pow_bc = np.ones(beta.shape + (dim,), dtype=complex)
    for j in range(1, dim):
        pow_b[..., j] = pow_b[..., j - 1] * beta
        pow_bc[..., j] = pow_bc[..., j - 1] * (-beta.conj())
    half_lg = [0.5 * lgamma(n + 1) for n in range(dim)]
    out = np.zeros(beta.shape + (dim, dim), dtype=complex)
    for m in range(dim):
        for n in range(dim):
            if m >= n:
                c = np.exp(half_lg[n] - half_lg[m])
                out[..., m, n] = c * pow_b[..., m - n] * env * lag[n, m - n]
            else:
                c = np.exp(half_lg[m] - half_lg[n])
                out[..., m, n] = c * pow_bc[..., n - m] * env * lag[m, n - m]
    return out


def displacement_leakage(alpha: complex, space: FockSpace) -> float:
    """Fock weight pushed above ``working_dim`` when displacing the retained levels.

    Computed from the exact columns: 1 - sum_{m < working_dim} |<m|D|n>|^2,
    maximized over n < dim.
    """
    block = displaced_fock_block(complex(alpha), space.working_dim)
    cols = block[:, : space.dim]
    return float(np.max(1.0 - np.sum(np.abs(cols) ** 2, axis=0)))


def displacement_operator(alpha: complex, space: FockSpace) -> np.ndarray:
    """``exp(alpha a^dag - alpha* a)`` on the working space.

    The operator is exactly unitary on the working space; only its action on
    the first ``dim`` levels is guaranteed to match the infinite-dimensional
    displacement.  Raises TruncationError when the true leakage of those
    columns above ``working_dim`` exceeds ``DISPLACEMENT_LEAK_TOL``.
    """
    if not np.isfinite(alpha):
        raise ValueError("displacement amplitude must be finite")
    leak = displacement_leakage(alpha, space)
    if leak > DISPLACEMENT_LEAK_TOL:
        raise TruncationError(
            f"displacement leakage {leak:.2e} at |alpha|={abs(alpha):.3g} exceeds "
            f"{DISPLACEMENT_LEAK_TOL}; enlarge working_dim (have {space.working_dim})")
    a = destroy(space)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def coherent_density(alpha: complex, space: FockSpace) -> np.ndarray:
    """Coherent-state density matrix on the working space."""
    d = displacement_operator(alpha, space)
    vac = fock_state(0, space.working_dim)
    v = d @ vac
    return np.outer(v, v.conj())


def partial_trace_first(rho: np.ndarray, dim_first: int) -> np.ndarray:
    """Trace out the first factor of a bipartite state."""
    n = rho.shape[0] // dim_first
    r = rho.reshape(dim_first, n, dim_first, n)
    return np.einsum('inim->nm', r)


def validate_density(rho: np.ndarray, trace_tol: float = 1e-9,
                     eig_floor: float = -1e-9) -> None:
    """Raise ValueError unless rho is Hermitian, unit-trace, PSD within tolerance."""
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    if np.abs(np.trace(rho) - 1.0) > trace_tol:
        raise ValueError(f"trace defect {abs(np.trace(rho) - 1.0):.2e}")
    if np.abs(rho - rho.conj().T).max() > trace_tol:
        raise ValueError("density matrix not Hermitian")
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if ev.min() < eig_floor:
        raise ValueError(f"negative eigenvalue {ev.min():.2e}")
