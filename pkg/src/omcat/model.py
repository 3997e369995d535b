"""Optomechanical Hamiltonians (lab and Lang-Firsov frames) and the Lindblad
generator with cavity loss and thermal mechanical damping."""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .fock import (HilbertConfig, TruncationWarning, cavity_op, destroy,
                   displacement_op, identity, mech_op, number, tensor)

#: Composite dimension up to which the vectorised superoperator is assembled.
SUPEROP_MAX_DIM = 2000


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters in angular-frequency units (hbar = 1).

    The usual convention is ``omega_m = 1`` so every other entry is the
    corresponding ratio to the mechanical frequency.
    """

    delta: float = 0.0      # laser detuning omega_L - omega_c
    omega_m: float = 1.0
    g0: float = 0.0         # single-photon coupling
    epsilon: float = 0.0    # drive strength
    kappa: float = 0.0      # cavity loss rate
    gamma_m: float = 0.0    # mechanical damping rate
    n_th: float = 0.0       # thermal phonon occupation

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ValueError("omega_m must be positive")
        for name in ("epsilon", "kappa", "gamma_m", "n_th"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def kerr(self) -> float:
        return self.g0 ** 2 / self.omega_m

    @property
    def g_tilde(self) -> float:
        return self.g0 / self.omega_m

    @property
    def eps_tilde(self) -> float:
        return self.epsilon / self.omega_m

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega_m

    @property
    def dissipative(self) -> bool:
        return self.kappa > 0 or self.gamma_m > 0

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_ratios(cls, omega_m: float = 1.0, **ratios) -> "SystemParams":
        """Build from parameters quoted as multiples of ``omega_m``."""
        return cls(omega_m=omega_m, **{k: (v if k == "n_th" else v * omega_m)
                                       for k, v in ratios.items()})


def build_lab_hamiltonian(params: SystemParams, config: HilbertConfig) -> sp.csr_matrix:
    """``-Delta a^dag a + Omega_m b^dag b + g0 a^dag a (b + b^dag) + eps (a + a^dag)``."""
    a = destroy(config.n_cavity)
    b = destroy(config.n_mech)
    na = number(config.n_cavity)
    nb = number(config.n_mech)
    h = (-params.delta * cavity_op(na, config)
         + params.omega_m * mech_op(nb, config)
         + params.g0 * tensor(na, b + b.T))
    if params.epsilon:
        h = h + params.epsilon * cavity_op(a + a.T, config)
    return sp.csr_matrix(h)


def lf_energies(params: SystemParams, config: HilbertConfig) -> np.ndarray:
    """Diagonal of H0, ``E_nm = -Delta n - K n^2 + Omega_m m``, cavity-major."""
    n = np.arange(config.n_cavity)[:, None]
    m = np.arange(config.n_mech)[None, :]
    return (-params.delta * n - params.kerr * n ** 2 + params.omega_m * m).ravel()


def build_lf_hamiltonian(params: SystemParams, config: HilbertConfig):
    """Lang-Firsov frame split ``(H0, V)``.

    ``H0 = -Delta a^dag a - K (a^dag a)^2 + Omega_m b^dag b`` is diagonal and
    ``V = eps [D(g) a^dag + D(-g) a]`` with ``g = g0/Omega_m``.
    """
    h0 = sp.diags(lf_energies(params, config).astype(complex), 0, format="csr")
    if params.epsilon == 0:
        return h0, sp.csr_matrix((config.dim, config.dim), dtype=complex)
    a = destroy(config.n_cavity)
    g = params.g_tilde
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        dp = sp.csr_matrix(displacement_op(config.n_mech, g))
    dm = dp.conj().T  # D(-g) = D(g)^dag for real g
    v = params.epsilon * (tensor(a.T, dp) + tensor(a, dm))
    return h0, sp.csr_matrix(v)


def lang_firsov_unitary(params: SystemParams, config: HilbertConfig) -> sp.csr_matrix:
    """``exp(g a^dag a (b^dag - b))``: block n is ``D(n g)`` on the mechanics."""
    g = params.g_tilde
    need = 4 * ((config.n_cavity - 1) * g) ** 2
    if config.n_mech < need:
        warnings.warn(f"n_mech = {config.n_mech} below 4 (N_c g)^2 ~ {need:.0f}; "
                      "Lang-Firsov blocks are truncated", TruncationWarning, stacklevel=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        blocks = [displacement_op(config.n_mech, n * g) for n in range(config.n_cavity)]
    return sp.block_diag(blocks, format="csr")


class Liouvillian:
    """Generator ``L[rho] = -i[H, rho] + sum_j D[c_j] rho`` of the master equation.

    Applies matrix-free on dense density matrices (:meth:`apply`); the sparse
    superoperator acting on column-stacked ``rho`` is assembled on request
    (:meth:`superoperator`) and is what :meth:`matvec` uses for composite
    dimensions up to :data:`SUPEROP_MAX_DIM` when ``assemble=True``.
    """

    def __init__(self, hamiltonian, collapse_ops, config: HilbertConfig,
                 params: SystemParams | None = None, structured: bool = False):
        self.hamiltonian = sp.csr_matrix(hamiltonian)
        self.collapse_ops = [sp.csr_matrix(c) for c in collapse_ops]
        self.config = config
        self.params = params
        damp = sp.csr_matrix(self.hamiltonian.shape, dtype=complex)
        for c in self.collapse_ops:
            damp = damp + c.conj().T @ c
        # H_eff = H - (i/2) sum c^dag c
        self._heff = sp.csr_matrix(self.hamiltonian - 0.5j * damp)
        self._heff_dag_T = sp.csr_matrix(self._heff.conj())  # (H_eff^dag)^T
        self._jumps = [(c, sp.csr_matrix(c.conj())) for c in self.collapse_ops]
        self._superop = None
        # set when H and the jumps are exactly the standard lab-frame model, which
        # enables the compiled kernel
        self.structured = structured and params is not None

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def apply_structured(self, rho: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """``L[rho]`` through the compiled lab-frame kernel (C-ordered ``rho``)."""
        if not self.structured:
            raise ValueError("Liouvillian was not built from the standard lab model")
        nc, nm = self.config.n_cavity, self.config.n_mech
        p = self.params
        r4 = np.ascontiguousarray(rho).reshape(nc, nm, nc, nm)
        if out is None:
            out = np.empty_like(r4)
        _lab_kernel(r4, out.reshape(nc, nm, nc, nm), p.delta, p.omega_m, p.g0, p.epsilon,
                    p.kappa, p.gamma_m * (p.n_th + 1), p.gamma_m * p.n_th)
        return out.reshape(self.dim, self.dim)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """``L[rho]`` for a dense ``dim x dim`` matrix."""
        # -i (H_eff rho - rho H_eff^dag)
        out = -1j * (self._heff @ rho)
        out += 1j * (self._heff_dag_T @ rho.T).T
        for c, c_conj in self._jumps:
            crho = c @ rho
            out += (c_conj @ crho.T).T  # c rho c^dag
        return out

    def superoperator(self) -> sp.csr_matrix:
        """Sparse matrix of ``L`` acting on ``rho.ravel(order='F')``."""
        if self._superop is None:
            n = self.dim
            eye = sp.identity(n, dtype=complex, format="csr")
            s = -1j * sp.kron(eye, self._heff) + 1j * sp.kron(self._heff.conj(), eye)
            for c, c_conj in self._jumps:
                s = s + sp.kron(c_conj, c)
            self._superop = sp.csr_matrix(s)
        return self._superop

    def matvec(self, vec_rho: np.ndarray, assemble: bool = False) -> np.ndarray:
        n = self.dim
        if assemble and n <= SUPEROP_MAX_DIM:
            return self.superoperator() @ vec_rho
        rho = vec_rho.reshape((n, n), order="F")
        return self.apply(rho).ravel(order="F")


def collapse_operators(params: SystemParams, config: HilbertConfig) -> list:
    """``sqrt(kappa) a``, ``sqrt(G (n+1)) b``, ``sqrt(G n) b^dag`` (zero rates dropped)."""
    ops = []
    a = cavity_op(destroy(config.n_cavity), config)
    b = mech_op(destroy(config.n_mech), config)
    if params.kappa > 0:
        ops.append(np.sqrt(params.kappa) * a)
    if params.gamma_m > 0:
        ops.append(np.sqrt(params.gamma_m * (params.n_th + 1)) * b)
        if params.n_th > 0:
            ops.append(np.sqrt(params.gamma_m * params.n_th) * b.conj().T)
    return ops


def build_liouvillian(params: SystemParams, config: HilbertConfig,
                      hamiltonian=None) -> Liouvillian:
    structured = hamiltonian is None
    h = build_lab_hamiltonian(params, config) if structured else hamiltonian
    return Liouvillian(h, collapse_operators(params, config), config, params,
                       structured=structured)


@numba.njit(cache=True)
def _lab_kernel(r, out, delta, om, g0, eps, kappa, gdown, gup):
    """Lab-frame master equation on ``rho[n, m, k, l]`` = <n,m|rho|k,l>.

    Mirrors the truncated sparse operators exactly (including b b^dag = 0 on
    the top mechanical level, which keeps the trace conserved).
    """
    nc, nm = r.shape[0], r.shape[1]
    sq_c = np.sqrt(np.arange(nc + 1) * 1.0)
    sq_m = np.sqrt(np.arange(nm + 1) * 1.0)
    for n in range(nc):
        for m in range(nm):
            bbd_m = m + 1.0 if m + 1 < nm else 0.0
            for k in range(nc):
                for l in range(nm):
                    bbd_l = l + 1.0 if l + 1 < nm else 0.0
                    e = -delta * (n - k) + om * (m - l)
                    d = 0.5 * (kappa * (n + k) + gdown * (m + l) + gup * (bbd_m + bbd_l))
                    acc = complex(-d, -e) * r[n, m, k, l]
                    h = 0j
                    if m + 1 < nm:
                        h += g0 * n * sq_m[m + 1] * r[n, m + 1, k, l]
                    if m > 0:
                        h += g0 * n * sq_m[m] * r[n, m - 1, k, l]
                    if l + 1 < nm:
                        h -= g0 * k * sq_m[l + 1] * r[n, m, k, l + 1]
                    if l > 0:
                        h -= g0 * k * sq_m[l] * r[n, m, k, l - 1]
                    if n + 1 < nc:
                        h += eps * sq_c[n + 1] * r[n + 1, m, k, l]
                    if n > 0:
                        h += eps * sq_c[n] * r[n - 1, m, k, l]
                    if k + 1 < nc:
                        h -= eps * sq_c[k + 1] * r[n, m, k + 1, l]
                    if k > 0:
                        h -= eps * sq_c[k] * r[n, m, k - 1, l]
                    acc += -1j * h
                    if n + 1 < nc and k + 1 < nc:
                        acc += kappa * sq_c[n + 1] * sq_c[k + 1] * r[n + 1, m, k + 1, l]
                    if m + 1 < nm and l + 1 < nm:
                        acc += gdown * sq_m[m + 1] * sq_m[l + 1] * r[n, m + 1, k, l + 1]
                    if m > 0 and l > 0:
                        acc += gup * sq_m[m] * sq_m[l] * r[n, m - 1, k, l - 1]
                    out[n, m, k, l] = acc


def is_hermitian(m, tol: float = 1e-12) -> bool:
    d = m - m.conj().T
    if sp.issparse(d):
        return d.nnz == 0 or abs(d).max() <= tol
    return np.max(np.abs(d)) <= tol
