"""Wigner functions of the mechanical mode and the nonclassical ratio eta.

Convention: ``xi = X + iP`` with ``X = (b + b^dag)/2``, ``P = (b - b^dag)/2i``
(zero-point widths scaled by sqrt 2), so the vacuum is
``W0 = (2/pi) exp(-2 |xi|^2)`` and a coherent state ``|beta>`` is centred at
``xi = beta``.  Every representation integrates to one over ``dX dP``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fock import _normalized_laguerre_columns, displacement_elements

#: Dimension above which ``wigner(method="auto")`` switches from the
#: Fock-element (Laguerre) form to position-space quadrature.
LAGUERRE_MAX_DIM = 60
DEFAULT_SPACING = 0.05
NORM_TOL = 0.02


class InadequateGridError(ValueError):
    """The grid does not contain the state (Wigner integral far from one)."""


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform grid over ``Re xi`` in ``[x_min, x_max]`` and ``Im xi`` in ``[p_min, p_max]``."""

    x_min: float
    x_max: float
    p_min: float
    p_max: float
    nx: int = 201
    np: int = 201

    def __post_init__(self):
        if not self.x_max > self.x_min or not self.p_max > self.p_min:
            raise ValueError("grid bounds must satisfy max > min")
        if self.nx < 2 or self.np < 2:
            raise ValueError("grid needs at least 2 samples per axis")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def ps(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.np)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.np - 1)

    def points(self) -> np.ndarray:
        """Complex ``xi`` of shape ``(nx, np)``."""
        return self.xs[:, None] + 1j * self.ps[None, :]

    def weights(self) -> np.ndarray:
        """Trapezoidal weights of shape ``(nx, np)``."""
        wx = np.full(self.nx, self.dx)
        wx[[0, -1]] *= 0.5
        wp = np.full(self.np, self.dp)
        wp[[0, -1]] *= 0.5
        return wx[:, None] * wp[None, :]

    def refined(self, factor: int = 2) -> "PhaseGrid":
        return PhaseGrid(self.x_min, self.x_max, self.p_min, self.p_max,
                         factor * (self.nx - 1) + 1, factor * (self.np - 1) + 1)

    @classmethod
    def square(cls, radius: float, spacing: float = DEFAULT_SPACING,
               center: complex = 0) -> "PhaseGrid":
        n = int(math.ceil(2 * radius / spacing)) + 1
        c = complex(center)
        return cls(c.real - radius, c.real + radius, c.imag - radius, c.imag + radius, n, n)

    @classmethod
    def covering(cls, rho, spacing: float = DEFAULT_SPACING, margin: float = 3.0,
                 tail: float = 1e-10) -> "PhaseGrid":
        """Square grid containing every Fock level of ``rho`` above ``tail``
        population (radius ``sqrt(N + 1/2) + margin``)."""
        pops = np.real(np.diag(np.asarray(rho))) if np.ndim(rho) == 2 else np.abs(rho) ** 2
        above = np.flatnonzero(pops > tail)
        top = int(above[-1]) if len(above) else 0
        return cls.square(math.sqrt(top + 0.5) + margin, spacing)

    @classmethod
    def for_params(cls, g_tilde: float, n_cavity: int, beta: complex = 0,
                   n: int = 201, margin: float = 3.0) -> "PhaseGrid":
        """Box containing every lab-frame lobe ``beta_n(t)``: the lobes of photon
        number ``n`` circle ``-n g`` with radius ``|beta + n g|``."""
        reach = abs(beta) + g_tilde * (n_cavity - 1)
        x_lo = -g_tilde * (n_cavity - 1) - reach - margin
        x_hi = -g_tilde * (n_cavity - 1) + reach + margin
        x_hi = max(x_hi, abs(beta) + margin)
        return cls(x_lo, x_hi, -reach - margin, reach + margin, n, n)


@dataclass
class WignerGrid:
    grid: PhaseGrid
    values: np.ndarray

    def integral(self) -> float:
        return float(np.sum(self.grid.weights() * self.values))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def at(self, xi: complex) -> float:
        """Value at the grid point nearest to ``xi``."""
        i = int(round((xi.real - self.grid.x_min) / self.grid.dx))
        j = int(round((xi.imag - self.grid.p_min) / self.grid.dp))
        return float(self.values[i, j])


# ---------------------------------------------------------------------------
# evaluation back ends

def _as_dm(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square density matrix, got shape {rho.shape}")
    return rho


def wigner_laguerre(rho, xi) -> np.ndarray:
    """Exact Fock-element form

        W = (2/pi) sum_{m,L} (-1)^m rho_{m,m+L} u_m^L(4|xi|^2) e^{i L arg xi} (+ c.c. for L > 0)

    evaluated at the complex points ``xi`` (any shape).  Cost grows as
    ``dim^2`` per point.
    """
    rho = _as_dm(rho)
    xi = np.asarray(xi, dtype=complex)
    shape = xi.shape
    xi = xi.ravel()
    n = rho.shape[0]
    x = 4 * np.abs(xi) ** 2
    e_theta = np.exp(1j * np.angle(xi))
    # diagonals of rho: d[L][m] = rho[m, m+L]
    acc = np.zeros((n, xi.size), dtype=complex)   # acc[L] = sum_m (-1)^m rho[m,m+L] u_m^L
    for m, u in _normalized_laguerre_columns(x, n - 1, n - 1):
        lmax = n - 1 - m
        coeff = (-1) ** m * rho[m, m: m + lmax + 1]
        acc[: lmax + 1] += coeff[:, None] * u[: lmax + 1]
    total = acc[0].real.copy()
    phase = np.ones_like(e_theta)
    for L in range(1, n):
        phase = phase * e_theta
        total += 2 * (acc[L] * phase).real
    return (2 / math.pi * total).reshape(shape)


def _hermite_functions(u: np.ndarray, n: int) -> np.ndarray:
    """Normalised Hermite functions ``psi_k(u)``, k < n, shape ``(n, len(u))``."""
    out = np.empty((n, len(u)))
    out[0] = math.pi ** -0.25 * np.exp(-0.5 * u ** 2)
    if n > 1:
        out[1] = math.sqrt(2) * u * out[0]
    for k in range(1, n - 1):
        out[k + 1] = math.sqrt(2 / (k + 1)) * u * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def wigner_quadrature(rho, grid: PhaseGrid) -> np.ndarray:
    """``W(X, P) = (2/pi) int dy <X+y|rho|X-y> e^{-4 i P y}`` on ``grid``.

    The position representation uses Hermite functions on a fine lattice
    that contains the output ``X`` values; the ``y`` integral is a plain sum,
    spectrally accurate because the integrand is band-limited by
    ``4 (sqrt(N + 1/2) + |P|)``.
    """
    rho = _as_dm(rho)
    n = rho.shape[0]
    p_abs = max(abs(grid.p_min), abs(grid.p_max))
    omega = 4 * (math.sqrt(n + 0.5) + p_abs) + 8
    h_max = math.pi / omega
    k = max(1, int(math.ceil(grid.dx / h_max)))
    h = grid.dx / k
    support = math.sqrt(n + 0.5) + 4
    lo = min(grid.x_min, -support)
    hi = max(grid.x_max, support)
    # fine lattice aligned with grid.xs
    j_lo = int(math.floor((lo - grid.x_min) / h))
    j_hi = int(math.ceil((hi - grid.x_min) / h))
    fine = grid.x_min + h * np.arange(j_lo, j_hi + 1)
    phi = 2 ** 0.25 * _hermite_functions(math.sqrt(2) * fine, n)   # (n, F)
    pos = phi.T @ rho @ phi                                           # <X|rho|X'>
    nf = len(fine)
    centers = -j_lo + k * np.arange(grid.nx)                         # indices of grid.xs
    jmax = int(min(centers.max(), nf - 1 - centers.min()))
    js = np.arange(-jmax, jmax + 1)
    plus = centers[:, None] + js[None, :]
    minus = centers[:, None] - js[None, :]
    valid = (plus >= 0) & (plus < nf) & (minus >= 0) & (minus < nf)
    vals = np.where(valid, pos[np.clip(plus, 0, nf - 1), np.clip(minus, 0, nf - 1)], 0)
    kernel = np.exp(-4j * np.outer(js * h, grid.ps))
    return (2 / math.pi) * h * (vals @ kernel).real


def wigner_parity(rho, xi, k_max: int | None = None) -> np.ndarray:
    """Literal displaced-parity sum ``(2/pi) sum_k (-1)^k <xi,k|rho|xi,k>``.

    ``<xi,k|j> = <k|D(-xi)|j>`` uses the closed-form displacement elements.
    The ``k`` sum must extend past the dimension of ``rho`` far enough to hold
    ``D(-xi)`` applied to its top level; the default does so.  Slow: intended
    as a reference.
    """
    rho = _as_dm(rho)
    xi = np.asarray(xi, dtype=complex)
    out = np.empty(xi.shape)
    n = rho.shape[0]
    for idx, z in np.ndenumerate(xi):
        kk = k_max or max(n, int((math.sqrt(n) + abs(z) + 8) ** 2))
        d = displacement_elements(kk, -z)[:, :n]
        amp = d @ rho @ d.conj().T
        out[idx] = 2 / math.pi * float(np.sum((-1.0) ** np.arange(kk) * np.diag(amp).real))
    return out if out.ndim else float(out)


def wigner(rho_b, grid: PhaseGrid | None = None, method: str = "auto") -> WignerGrid:
    """Wigner function of a mechanical density matrix (or ket) on ``grid``.

    ``method`` is ``"quadrature"``, ``"laguerre"``, ``"parity"`` or ``"auto"``
    (Laguerre for small dimensions, quadrature otherwise).  The default grid
    covers the Fock support of the state.
    """
    rho = _as_dm(rho_b)
    if grid is None:
        grid = PhaseGrid.covering(rho)
    if method == "auto":
        method = "laguerre" if rho.shape[0] <= LAGUERRE_MAX_DIM else "quadrature"
    if method == "quadrature":
        vals = wigner_quadrature(rho, grid)
    elif method == "laguerre":
        vals = wigner_laguerre(rho, grid.points())
    elif method == "parity":
        vals = wigner_parity(rho, grid.points())
    else:
        raise ValueError(f"unknown method {method!r}")
    out = WignerGrid(grid, vals)
    norm = out.integral()
    if abs(norm - 1) > 0.01:
        warnings.warn(f"Wigner integral {norm:.4f} on this grid; it may not contain the state",
                      RuntimeWarning, stacklevel=2)
    return out


def nonclassical_ratio(w: WignerGrid, tol: float = NORM_TOL) -> float:
    """``eta = int_{W<0} |W| / int_{W>0} W`` with trapezoidal weights and a hard
    sign mask.  Raises :class:`InadequateGridError` if the grid integral of
    ``W`` differs from one by more than ``tol``."""
    wts = w.grid.weights()
    norm = float(np.sum(wts * w.values))
    if abs(norm - 1) > tol:
        raise InadequateGridError(f"Wigner integral {norm:.4f} deviates from 1 by more "
                                  f"than {tol}; enlarge the grid")
    neg = float(np.sum(wts * np.clip(-w.values, 0, None)))
    pos = float(np.sum(wts * np.clip(w.values, 0, None)))
    return neg / pos


def eta(rho_b, grid: PhaseGrid | None = None, **kw) -> float:
    """Shortcut: ``nonclassical_ratio(wigner(rho_b, grid))``."""
    return nonclassical_ratio(wigner(rho_b, grid, **kw))
