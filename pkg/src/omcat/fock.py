"""Truncated Fock-space algebra for the cavity (a) and mechanical (b) modes.

Composite states are stored cavity-major: the basis vector |n>_a |m>_b sits at
index ``n * n_mech + m``.  Ladder and number operators are sparse CSR matrices;
states and density matrices are dense complex arrays.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

#: Above this dimension displacement operators are built from closed-form
#: matrix elements instead of a dense matrix exponential.
EXPM_MAX_DIM = 512


class TruncationWarning(UserWarning):
    """A coherent amplitude is too large for the truncated Fock space."""


@dataclass(frozen=True)
class HilbertConfig:
    """Cutoffs of the two-mode space: cavity levels ``0..n_cavity-1`` and
    mechanical levels ``0..n_mech-1``."""

    n_cavity: int
    n_mech: int

    def __post_init__(self):
        for name in ("n_cavity", "n_mech"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def dim(self) -> int:
        return self.n_cavity * self.n_mech

    def index(self, n: int, m: int) -> int:
        if not (0 <= n < self.n_cavity and 0 <= m < self.n_mech):
            raise IndexError(f"level ({n}, {m}) outside {self}")
        return n * self.n_mech + m

    def levels(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.dim:
            raise IndexError(f"index {i} outside dimension {self.dim}")
        return divmod(i, self.n_mech)


def _check_dim(dim) -> int:
    if int(dim) != dim or dim < 1:
        raise ValueError(f"invalid dimension {dim!r}; must be a positive integer")
    return int(dim)


# ---------------------------------------------------------------------------
# single-mode operators

def destroy(dim: int) -> sp.csr_matrix:
    """Annihilation operator with ``M[k-1, k] = sqrt(k)``."""
    dim = _check_dim(dim)
    return sp.diags(np.sqrt(np.arange(1, dim, dtype=float)), 1,
                    shape=(dim, dim), format="csr", dtype=complex)


def create(dim: int) -> sp.csr_matrix:
    return destroy(dim).conj().T.tocsr()


def number(dim: int) -> sp.csr_matrix:
    dim = _check_dim(dim)
    return sp.diags(np.arange(dim, dtype=float), 0, format="csr", dtype=complex)


def identity(dim: int) -> sp.csr_matrix:
    return sp.identity(_check_dim(dim), dtype=complex, format="csr")


def basis(dim: int, k: int) -> np.ndarray:
    dim = _check_dim(dim)
    if not 0 <= k < dim:
        raise IndexError(f"Fock level {k} outside dimension {dim}")
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return v


def coherent_amplitudes(dim: int, alpha: complex) -> np.ndarray:
    """Raw truncated amplitudes ``exp(-|alpha|^2/2) alpha^n / sqrt(n!)``."""
    dim = _check_dim(dim)
    alpha = complex(alpha)
    n = np.arange(dim)
    if alpha == 0:
        return basis(dim, 0)
    logmag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * _lgamma(n + 1)
    return np.exp(logmag + 1j * n * np.angle(alpha))


def coherent_state(dim: int, alpha: complex, return_loss: bool = False):
    """Coherent state |alpha> renormalised inside ``dim`` levels.

    With ``return_loss=True`` also returns the truncation loss
    ``1 - sum_n |a_n|^2`` of the raw amplitudes.
    """
    amp = coherent_amplitudes(dim, alpha)
    kept = float(np.vdot(amp, amp).real)
    loss = max(0.0, 1.0 - kept)
    psi = amp / math.sqrt(kept)
    if return_loss:
        return psi, loss
    return psi


def thermal_dm(dim: int, n_th: float) -> np.ndarray:
    """Bose-Einstein diagonal state with mean occupation ``n_th`` (renormalised)."""
    dim = _check_dim(dim)
    if n_th == 0:
        p = np.zeros(dim)
        p[0] = 1.0
    else:
        k = np.arange(dim)
        p = (n_th / (1.0 + n_th)) ** k
        p /= p.sum()
    return np.diag(p).astype(complex)


# ---------------------------------------------------------------------------
# displacement matrix elements

def _lgamma(x):
    from scipy.special import gammaln
    return gammaln(x)


def _normalized_laguerre_columns(x, n_max: int, l_max: int):
    """Yield ``(n, u)`` for n = 0..n_max where ``u[L]`` (L = 0..l_max) equals

        sqrt(n!/(n+L)!) L_n^L(x) x^(L/2) exp(-x/2)

    i.e. ``|<n+L|D(beta)|n>|`` up to phase with ``x = |beta|^2``.  ``x`` may be
    an array; ``u`` then has shape ``(l_max+1,) + x.shape``.  The three-term
    recurrence runs upward in n in this normalisation, which keeps every value
    bounded by one.
    """
    x = np.asarray(x, dtype=float)
    L = np.arange(l_max + 1, dtype=float).reshape((-1,) + (1,) * x.ndim)
    with np.errstate(divide="ignore", invalid="ignore"):
        logx = np.log(x)
        logu0 = 0.5 * L * logx - 0.5 * x - 0.5 * _lgamma(L + 1)
    u = np.exp(logu0)
    # x == 0: u_0^0 = 1, u_0^L = 0 for L > 0
    if np.any(x == 0):
        u = np.where(x == 0, (L == 0).astype(float), u)
    u_prev = np.zeros_like(u)
    for n in range(n_max + 1):
        yield n, u
        if n == n_max:
            break
        c_cur = (2 * n + 1 + L - x)
        c_prev = np.sqrt(n * (n + L))
        denom = np.sqrt((n + 1) * (n + 1 + L))
        u, u_prev = (c_cur * u - c_prev * u_prev) / denom, u


def displacement_elements(dim: int, beta: complex) -> np.ndarray:
    """Matrix ``<m|D(beta)|n>`` of the untruncated displacement operator,
    restricted to ``m, n < dim`` (not exactly unitary after restriction)."""
    dim = _check_dim(dim)
    beta = complex(beta)
    x = abs(beta) ** 2
    phase = np.exp(1j * np.angle(beta)) if beta != 0 else 1.0
    out = np.zeros((dim, dim), dtype=complex)
    pw_lower = phase ** np.arange(dim)                # m > n: (beta/|beta|)^L
    pw_upper = (-np.conj(phase)) ** np.arange(dim)    # m < n: (-beta*/|beta|)^L
    for n, u in _normalized_laguerre_columns(x, dim - 1, dim - 1):
        lmax = dim - 1 - n
        L = np.arange(lmax + 1)
        out[n + L, n] = u[: lmax + 1] * pw_lower[: lmax + 1]
        if lmax > 0:
            out[n, n + L[1:]] = u[1: lmax + 1] * pw_upper[1: lmax + 1]
    return out


def displacement_op(dim: int, beta: complex) -> np.ndarray:
    """Dense displacement operator ``exp(beta b^dag - beta^* b)`` in ``dim`` levels.

    Uses the matrix exponential of the truncated generator for ``dim <=``
    :data:`EXPM_MAX_DIM` (exactly unitary) and the closed-form matrix elements
    otherwise.  Warns when ``|beta|^2 > dim/4``.
    """
    dim = _check_dim(dim)
    beta = complex(beta)
    if abs(beta) ** 2 > dim / 4:
        warnings.warn(f"|beta|^2 = {abs(beta)**2:.3g} exceeds dim/4 = {dim/4:.3g}; "
                      "truncated displacement is unreliable", TruncationWarning,
                      stacklevel=2)
    if beta == 0:
        return np.eye(dim, dtype=complex)
    if dim <= EXPM_MAX_DIM:
        b = destroy(dim).toarray()
        return scipy.linalg.expm(beta * b.conj().T - np.conj(beta) * b)
    return displacement_elements(dim, beta)


def displaced_fock_overlap(xi: complex, k: int, zeta: complex, m: int) -> complex:
    """Overlap ``<xi, k | zeta, m>`` of displaced Fock states ``D(xi)|k>`` and
    ``D(zeta)|m>``, via generalised Laguerre polynomials of ``|zeta - xi|^2``.
    """
    if k < 0 or m < 0:
        raise ValueError("Fock indices must be non-negative")
    xi, zeta = complex(xi), complex(zeta)
    delta = zeta - xi
    # <xi|zeta> = exp(i Im(xi^* zeta)) exp(-|delta|^2/2); the Gaussian factor
    # is carried by the normalised Laguerre value below
    phase = np.exp(1j * (np.conj(xi) * zeta).imag)
    lo, L = min(k, m), abs(k - m)
    x = abs(delta) ** 2
    if x == 0:
        return complex(phase) if L == 0 else 0j
    u = None
    for _, col in _normalized_laguerre_columns(x, lo, L):
        u = col[L]
    if k >= m:
        ph = (delta / abs(delta)) ** L
    else:
        ph = (-np.conj(delta) / abs(delta)) ** L
    return complex(phase * u * ph)


# ---------------------------------------------------------------------------
# composite space

def tensor(a, b):
    """Kronecker product with the cavity factor on the left.

    Sparse inputs give a CSR result; dense inputs (or vectors) a dense one.
    """
    if sp.issparse(a) or sp.issparse(b):
        return sp.kron(sp.csr_matrix(a), sp.csr_matrix(b), format="csr")
    return np.kron(a, b)


def cavity_op(op, config: HilbertConfig):
    return tensor(op, identity(config.n_mech))


def mech_op(op, config: HilbertConfig):
    return tensor(identity(config.n_cavity), op)


def product_state(psi_a: np.ndarray, psi_b: np.ndarray) -> np.ndarray:
    return np.kron(psi_a, psi_b)


def ket2dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    return np.outer(psi, psi.conj())


def _as_density(state) -> np.ndarray:
    state = np.asarray(state)
    return ket2dm(state) if state.ndim == 1 else state


def partial_trace_cavity(rho, config: HilbertConfig) -> np.ndarray:
    """Mechanical reduced state ``rho_b[p, p'] = sum_n rho[(n,p), (n,p')]``.

    Accepts a composite density matrix or a composite state vector.
    """
    rho = np.asarray(rho)
    nc, nm = config.n_cavity, config.n_mech
    if rho.shape[0] != config.dim:
        raise ValueError(f"state dimension {rho.shape[0]} does not match {config}")
    if rho.ndim == 1:
        v = rho.reshape(nc, nm)
        return v.T @ v.conj()
    if rho.shape != (config.dim, config.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match {config}")
    return np.einsum("npnq->pq", rho.reshape(nc, nm, nc, nm))


def partial_trace_mech(rho, config: HilbertConfig) -> np.ndarray:
    rho = np.asarray(rho)
    nc, nm = config.n_cavity, config.n_mech
    if rho.ndim == 1:
        v = rho.reshape(nc, nm)
        return v @ v.conj().T
    return np.einsum("pnqn->pq", rho.reshape(nc, nm, nc, nm))


def commutator_expectation(state, mode: str, config: HilbertConfig) -> complex:
    """``<[a, a^dag]>`` (mode ``"cavity"``) or ``<[b, b^dag]>`` (``"mech"``).

    In a truncated space ``[c, c^dag] = 1 - N * |N-1><N-1|``, so the value
    drops below one by ``N`` times the population of the top level.
    """
    state = np.asarray(state)
    if mode in ("cavity", "a"):
        red = partial_trace_mech(state, config)
    elif mode in ("mech", "b"):
        red = partial_trace_cavity(state, config)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    n = red.shape[0]
    return complex(np.trace(red) - n * red[n - 1, n - 1])


# ---------------------------------------------------------------------------
# state diagnostics

def expect(op, state) -> complex:
    state = np.asarray(state)
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.trace(op @ state)) if not sp.issparse(op) else complex((op @ state).trace())


def trace_distance(rho, sigma) -> float:
    """Half the trace norm of ``rho - sigma`` (vectors are promoted to projectors)."""
    diff = _as_density(rho) - _as_density(sigma)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def fidelity_pure(psi, phi) -> float:
    """``|<psi|phi>|^2`` for normalised state vectors."""
    return abs(np.vdot(psi, phi)) ** 2


def check_density(rho, tol_trace: float = 1e-8, tol_herm: float = 1e-10,
                  tol_eig: float = 1e-8, eigenvalues: bool = True) -> None:
    """Raise ``ValueError`` if ``rho`` is not a valid density matrix."""
    rho = np.asarray(rho)
    tr = np.trace(rho)
    if abs(tr - 1) > tol_trace:
        raise ValueError(f"trace {tr} differs from 1")
    herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if herm > tol_herm:
        raise ValueError(f"not Hermitian (max deviation {herm:.3g})")
    if eigenvalues:
        ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        if ev.min() < -tol_eig:
            raise ValueError(f"negative eigenvalue {ev.min():.3g}")
