"""Closed-form and first-order (weak drive) solutions.

States are assembled from *coherent components*: triples ``(n, c, gamma)``
standing for ``c |n>_a |gamma>_b``.  Components are produced in the
Lang-Firsov interaction picture, where the first-order correction is an
integral over intermediate times, and mapped to the Lang-Firsov Schrodinger
picture or to the lab frame before being materialised on a truncated grid.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .fock import (HilbertConfig, TruncationWarning, coherent_state,
                   displacement_elements)
from .model import SystemParams

FRAMES = ("lab", "lf", "interaction")
GL_ORDER = 8
#: Near-resonance switch for the removable singularity in ``f_m``.
RESONANCE_EPS = 1e-6


class ConvergenceError(RuntimeError):
    """A quadrature or series cut-off did not converge."""


# ---------------------------------------------------------------------------
# undriven solution

@dataclass(frozen=True)
class UndrivenState:
    """Exact undriven evolution of ``|alpha>_a |beta>_b``.

    Cavity amplitudes are those of ``|alpha>`` renormalised inside
    ``n_cavity`` levels; the undriven dynamics never couples different
    photon numbers, so the cavity cut-off is exact.
    """

    params: SystemParams
    alpha: complex
    beta: complex
    n_cavity: int

    @property
    def amplitudes(self) -> np.ndarray:
        return coherent_state(self.n_cavity, self.alpha)

    def beta_bar(self, n):
        return self.beta + n * self.params.g_tilde

    def beta_n(self, n, t):
        """Mechanical coherent parameter ``e^{-i W t}(beta + n g) - n g``."""
        g = self.params.g_tilde
        return np.exp(-1j * self.params.omega_m * t) * (self.beta + n * g) - n * g

    def phase(self, n, t):
        p = self.params
        g, w = p.g_tilde, p.omega_m
        return (p.delta * n * t + p.kerr * n ** 2 * (t - math.sin(w * t) / w)
                + g * n * (self.beta * (np.exp(-1j * w * t) - 1)).imag)

    def components(self, t) -> list:
        a = self.amplitudes
        return [(n, a[n] * np.exp(1j * self.phase(n, t)), self.beta_n(n, t))
                for n in range(self.n_cavity)]


def _coherent_rows(gammas, n_mech: int) -> np.ndarray:
    """Raw truncated coherent amplitudes, one row per ``gamma``."""
    gammas = np.atleast_1d(np.asarray(gammas, dtype=complex))
    m = np.arange(n_mech)
    r = np.abs(gammas)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(r)
        logmag = -0.5 * r ** 2 + m * logr - 0.5 * gammaln(m + 1)
    out = np.exp(logmag + 1j * m * np.angle(gammas)[:, None])
    zero = gammas == 0
    if np.any(zero):
        out[zero] = 0
        out[zero, 0] = 1
    return out


def materialize(components, config: HilbertConfig, normalize: bool = True,
                warn: bool = True) -> np.ndarray:
    """Sum ``c |n> |gamma>`` over ``components`` on the composite grid.

    Coherent states use their raw truncated amplitudes so that the result is
    the exact state projected onto the grid; with ``normalize`` the total is
    rescaled to unit norm.
    """
    nc, nm = config.n_cavity, config.n_mech
    by_n = {}
    for n, c, g in components:
        if 0 <= n < nc:
            by_n.setdefault(n, ([], []))
            by_n[n][0].append(c)
            by_n[n][1].append(g)
    psi = np.zeros((nc, nm), dtype=complex)
    lost = 0.0
    for n, (cs, gs) in by_n.items():
        cs = np.asarray(cs, dtype=complex)
        rows = _coherent_rows(gs, nm)
        psi[n] = cs @ rows
        if warn:
            kept = np.einsum("ij,ij->i", rows, rows.conj()).real
            lost += float(np.sum(np.abs(cs) ** 2 * np.clip(1 - kept, 0, None)))
    if warn and lost > 1e-10:
        warnings.warn(f"coherent components exceed the mechanical cut-off "
                      f"(weighted truncation loss {lost:.2e}; |gamma|^2 > n_mech/4 somewhere)",
                      TruncationWarning, stacklevel=2)
    psi = psi.ravel()
    if normalize:
        psi /= np.linalg.norm(psi)
    return psi


def undriven_state(params: SystemParams, alpha: complex, beta: complex, t: float,
                   config: HilbertConfig) -> np.ndarray:
    """Lab-frame ``sum_n a_n e^{i phi_n(t)} |n> |beta_n(t)>`` on ``config``."""
    st = UndrivenState(params, complex(alpha), complex(beta), config.n_cavity)
    return materialize(st.components(t), config)


def undriven_density_mech(params: SystemParams, alpha: complex, beta: complex, t: float,
                          config: HilbertConfig) -> np.ndarray:
    """Mechanical mixture ``sum_n |a_n|^2 |beta_n(t)><beta_n(t)|`` (unit trace)."""
    st = UndrivenState(params, complex(alpha), complex(beta), config.n_cavity)
    w = np.abs(st.amplitudes) ** 2
    rows = _coherent_rows([st.beta_n(n, t) for n in range(config.n_cavity)], config.n_mech)
    rho = (rows.T * w) @ rows.conj()
    return rho / np.trace(rho).real


def undriven_wigner(params: SystemParams, alpha: complex, beta: complex, t: float,
                    n_cavity: int, xi) -> np.ndarray:
    """Closed-form Wigner function of the undriven mechanical state: the
    Gaussian mixture ``sum_n |a_n|^2 (2/pi) exp(-2|xi - beta_n(t)|^2)``.

    Free of any mechanical cut-off, hence nonnegative to rounding.
    """
    st = UndrivenState(params, complex(alpha), complex(beta), n_cavity)
    xi = np.asarray(xi, dtype=complex)
    out = np.zeros(xi.shape)
    for n, a in enumerate(st.amplitudes):
        out += abs(a) ** 2 * (2 / math.pi) * np.exp(-2 * np.abs(xi - st.beta_n(n, t)) ** 2)
    return out


# ---------------------------------------------------------------------------
# first-order perturbative solution

def gauss_legendre_nodes(upper: float, steps_per_period: int, order: int = GL_ORDER):
    """Composite Gauss-Legendre nodes and weights on ``[0, upper]`` with
    ``steps_per_period`` panels of ``order`` nodes per ``2 pi``."""
    panels = max(1, math.ceil(steps_per_period * upper / (2 * math.pi)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def to_frame(components, params: SystemParams, t: float, frame: str) -> list:
    """Map Lang-Firsov interaction-picture components to ``frame``."""
    if frame == "interaction":
        return list(components)
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}")
    w, g = params.omega_m, params.g_tilde
    rot = np.exp(-1j * w * t)
    out = []
    for n, c, gam in components:
        # exp(-i H0 t): Kerr/detuning phase and mechanical rotation
        c = c * np.exp(1j * (params.delta * n + params.kerr * n ** 2) * t)
        gam = gam * rot
        if frame == "lab":
            # U_LF^dag: D(-n g) |gam> = e^{i n g Im(gam)} |gam - n g>
            c = c * np.exp(1j * n * g * gam.imag)
            gam = gam - n * g
        out.append((n, c, gam))
    return out


def _first_order_components(params: SystemParams, a: np.ndarray, beta: complex,
                            t: float, steps: int) -> list:
    """Interaction-picture components of ``-i eps~ |psi_1>`` (the tau integral
    discretised by composite Gauss-Legendre)."""
    nc = len(a)
    g, w = params.g_tilde, params.omega_m
    dt, kt = params.delta / w, params.kerr / w
    eps = params.eps_tilde
    upper = w * t
    if eps == 0 or upper == 0:
        return []
    tau, wts = gauss_legendre_nodes(upper, steps)
    e_tau = np.exp(1j * tau)
    n = np.arange(nc)
    bbar = beta + n * g
    A = a * np.exp(-1j * n * g * beta.imag)
    comps = []
    for src in range(nc):
        # a^dag branch: src -> src + 1, coherent bbar + g e^{i tau}
        if src + 1 < nc:
            phi = (-dt * tau - kt * (2 * src + 1) * tau
                   + g * (np.conj(bbar[src]) * e_tau).imag)
            c = -1j * eps * wts * math.sqrt(src + 1) * A[src] * np.exp(1j * phi)
            gam = bbar[src] + g * e_tau
            comps.extend(zip([src + 1] * len(tau), c, gam))
        # a branch: src -> src - 1, coherent bbar - g e^{i tau}
        if src >= 1:
            phi = (dt * tau + kt * (2 * src - 1) * tau
                   - g * (np.conj(bbar[src]) * e_tau).imag)
            c = -1j * eps * wts * math.sqrt(src) * A[src] * np.exp(1j * phi)
            gam = bbar[src] - g * e_tau
            comps.extend(zip([src - 1] * len(tau), c, gam))
    return comps


@dataclass
class PerturbativeState:
    """First-order weak-drive state ``N [|psi_0> - i eps~ |psi_1>]``."""

    params: SystemParams
    alpha: complex
    beta: complex
    t: float
    config: HilbertConfig
    quadrature_steps: int = 256

    def __post_init__(self):
        if self.quadrature_steps < 64:
            raise ValueError("quadrature_steps must be at least 64 per period")
        self.alpha, self.beta = complex(self.alpha), complex(self.beta)
        if self.params.eps_tilde > 0.5:
            warnings.warn(f"eps/Omega_m = {self.params.eps_tilde:.3g} is outside the "
                          "weak-drive regime", RuntimeWarning, stacklevel=2)

    @property
    def amplitudes(self) -> np.ndarray:
        return coherent_state(self.config.n_cavity, self.alpha)

    def zeroth_components(self) -> list:
        n = np.arange(self.config.n_cavity)
        g = self.params.g_tilde
        A = self.amplitudes * np.exp(-1j * n * g * self.beta.imag)
        return [(k, A[k], self.beta + k * g) for k in n]

    def first_components(self, steps: int | None = None) -> list:
        return _first_order_components(self.params, self.amplitudes, self.beta, self.t,
                                       steps or self.quadrature_steps)

    def vector(self, frame: str = "lab", steps: int | None = None,
               normalize: bool = True) -> np.ndarray:
        comps = self.zeroth_components() + self.first_components(steps)
        comps = to_frame(comps, self.params, self.t, frame)
        return materialize(comps, self.config, normalize=normalize)

    def first_order_vector(self, frame: str = "lab", steps: int | None = None) -> np.ndarray:
        """Unnormalised ``-i eps~ |psi_1>`` alone."""
        comps = to_frame(self.first_components(steps), self.params, self.t, frame)
        if not comps:
            return np.zeros(self.config.dim, dtype=complex)
        return materialize(comps, self.config, normalize=False, warn=False)

    def normalization(self) -> float:
        return 1.0 / np.linalg.norm(self.vector(normalize=False))


def perturbative_state(params: SystemParams, alpha: complex, beta: complex, t: float,
                       config: HilbertConfig, quadrature_steps: int = 256,
                       frame: str = "lab", check: bool = True,
                       tol: float = 1e-6) -> np.ndarray:
    """Normalised first-order state at time ``t``.

    With ``check`` the quadrature is repeated at twice the node density and a
    :class:`ConvergenceError` raised if the states differ by more than ``tol``.
    """
    ps = PerturbativeState(params, alpha, beta, t, config, quadrature_steps)
    psi = ps.vector(frame)
    if check and params.epsilon:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            fine = ps.vector(frame, steps=2 * quadrature_steps)
        err = np.linalg.norm(fine - psi)
        if err > tol:
            raise ConvergenceError(f"quadrature not converged: doubling the node density "
                                   f"changed the state by {err:.2e}")
    return psi


def perturbative_state_series(params: SystemParams, alpha: complex, beta: complex,
                              t: float, config: HilbertConfig, series_terms: int = 60,
                              normalize: bool = True) -> np.ndarray:
    """Lab-frame first-order state with the tau integrals done term by term.

    Expands every ``exp(Q e^{i tau} + P e^{-i tau})`` as a double power series
    and integrates each exponential exactly.  Cost grows as
    ``n_cavity * n_mech^2 * series_terms^2``; intended as a cross-check of
    :func:`perturbative_state` at small cut-offs.
    """
    nc, nm = config.n_cavity, config.n_mech
    p = params
    g, w = p.g_tilde, p.omega_m
    dt, kt = p.delta / w, p.kerr / w
    eps = p.eps_tilde
    upper = w * t
    alpha, beta = complex(alpha), complex(beta)
    a = coherent_state(nc, alpha)
    n_idx = np.arange(nc)
    A = a * np.exp(-1j * n_idx * g * beta.imag)
    bbar = beta + n_idx * g
    rot = np.exp(-1j * w * t)
    zeroth = [(n, A[n], bbar[n]) for n in range(nc)]
    psi = materialize(to_frame(zeroth, p, t, "lab"), config, normalize=False, warn=False)
    psi = psi.reshape(nc, nm)

    terms = np.arange(series_terms)
    logfact = gammaln(terms + 1)
    m_idx = np.arange(nm)
    log_binom = (gammaln(m_idx[:, None] + 1) - gammaln(m_idx[None, :] + 1)
                 - gammaln(np.clip(m_idx[:, None] - m_idx[None, :], 0, None) + 1))

    def integral(C, Q, P):
        # sum_{p,q} Q^p P^q / (p! q!) * int_0^upper exp(i (C + p - q) tau) dtau
        pw_q = _powers(Q, series_terms) * np.exp(-logfact)
        pw_p = _powers(P, series_terms) * np.exp(-logfact)
        freq = C + terms[:, None] - terms[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(np.abs(freq) < 1e-12, upper,
                           (np.exp(1j * freq * upper) - 1) / (1j * np.where(freq == 0, 1, freq)))
        return pw_q @ val @ pw_p

    for n in range(nc):
        block = np.zeros(nm, dtype=complex)
        for sign, src, amp in ((+1, n - 1, math.sqrt(n)), (-1, n + 1, math.sqrt(n + 1))):
            if not 0 <= src < nc or eps == 0:
                continue
            b_src = bbar[src]
            xi = (-1j * g * n * (np.conj(b_src) / rot).imag
                  - 0.5 * (abs(b_src) ** 2 + g ** 2 * (n ** 2 + 1)
                           - 2 * g * n * (b_src * rot).real))
            Q = sign * g ** 2 * n * rot
            P = -sign * g * b_src
            base = b_src * rot - g * n
            I_k = np.array([integral(-sign * dt - sign * kt * (2 * n - sign) + k, Q, P)
                            for k in range(nm)])
            # coefficient of |m>: sum_k C(m,k) base^{m-k} (sign g)^k e^{-i k W t} I_k / sqrt(m!)
            k = m_idx
            shift = (sign * g * rot) ** k * I_k
            powers_base = _powers(base, nm)
            mk = m_idx[:, None] - k[None, :]
            mat = np.where(mk >= 0, np.exp(log_binom) * powers_base[np.clip(mk, 0, None)], 0)
            coeff = mat @ shift / np.exp(0.5 * gammaln(m_idx + 1))
            block += amp * A[src] * np.exp(xi) * coeff
        phase = np.exp(1j * (p.delta * n + p.kerr * n ** 2) * t)
        psi[n] += -1j * eps * phase * block
    psi = psi.ravel()
    if normalize:
        psi /= np.linalg.norm(psi)
    return psi


def _powers(z, count):
    out = np.ones(count, dtype=complex)
    out[1:] = z
    return np.cumprod(out)


# ---------------------------------------------------------------------------
# short-time expansion

@dataclass
class ShortTimeState:
    """Short-time (``Omega_m t << 1``) multi-component cat expansion in the
    Lang-Firsov interaction picture."""

    params: SystemParams
    alpha: complex
    beta: complex
    t: float
    n_cavity: int

    def __post_init__(self):
        self.alpha, self.beta = complex(self.alpha), complex(self.beta)
        wt = self.params.omega_m * self.t
        if wt > 0.5:
            warnings.warn(f"Omega_m t = {wt:.3g} is outside the short-time regime",
                          RuntimeWarning, stacklevel=2)
        g = self.params.g_tilde
        a = coherent_state(self.n_cavity, self.alpha)
        bbar = self.beta + g * np.arange(self.n_cavity)
        populated = np.abs(a) ** 2 > 1e-6
        if g and np.any(np.abs(g / bbar[populated]) >= 1):
            warnings.warn("|g0/(Omega_m beta_bar_n)| >= 1 for a populated level; "
                          "the coherent-state expansion does not apply", RuntimeWarning,
                          stacklevel=2)

    def coefficients(self) -> dict:
        p = self.params
        nc = self.n_cavity
        g = p.g_tilde
        wt = p.omega_m * self.t
        eps = p.eps_tilde
        dk = p.delta / p.omega_m + 2 * np.arange(nc) * p.kerr / p.omega_m
        a = coherent_state(nc, self.alpha)
        a_ext = np.concatenate([[0], a, [0]])   # a_{-1} = a_{N_c} = 0
        n = np.arange(nc)
        a_lo, a_hi = a_ext[n], a_ext[n + 2]
        ph = np.exp(-1j * g * n * self.beta.imag)
        A = a * ph
        sq_n, sq_n1 = np.sqrt(n), np.sqrt(n + 1)
        A_t = A - 1j * eps * ph * wt * (sq_n * a_lo * (1 - 1j * dk * wt / 2)
                                         + sq_n1 * a_hi * (1 + 1j * dk * wt / 2))
        B_t = eps * g * ph * wt ** 2 / 2 * (sq_n * a_lo - sq_n1 * a_hi)
        bbar = self.beta + g * n
        chi_p = np.exp(-g ** 2 / 2 - g * bbar.real)
        chi_m = np.exp(-g ** 2 / 2 + g * bbar.real)
        if g == 0 or eps == 0:
            B_pm = np.zeros(nc, dtype=complex)
            B0 = A_t + B_t * bbar
        else:
            denom = g * (chi_p - chi_m)
            B_pm = B_t / denom
            B0 = A_t + B_t * (bbar - (chi_p + chi_m) / denom)
        return {"A": A, "A_tilde": A_t, "B_tilde": B_t, "chi_plus": chi_p,
                "chi_minus": chi_m, "B0": B0, "B_plus": B_pm, "B_minus": B_pm.copy(),
                "beta_bar": bbar}

    def components(self) -> list:
        c = self.coefficients()
        g = self.params.g_tilde
        out = []
        for n in range(self.n_cavity):
            b = c["beta_bar"][n]
            out += [(n, c["B0"][n], b), (n, c["B_plus"][n], b + g), (n, c["B_minus"][n], b - g)]
        return out


def short_time_state(params: SystemParams, alpha: complex, beta: complex, t: float,
                     config: HilbertConfig) -> np.ndarray:
    """Normalised short-time state (Lang-Firsov interaction picture)."""
    st = ShortTimeState(params, alpha, beta, t, config.n_cavity)
    return materialize(st.components(), config)


# ---------------------------------------------------------------------------
# vacuum initial state: Wigner correction

def lf_level(params: SystemParams, n: int, m):
    """``E_nm = -Delta n - K n^2 + Omega_m m``."""
    return -params.delta * n - params.kerr * n ** 2 + params.omega_m * np.asarray(m)


def f_coefficients(params: SystemParams, t: float, m_max: int) -> np.ndarray:
    """``f_m(t) = g^m/sqrt(m!) e^{-g^2/2} [1 - e^{-i E_1m t}] / E~_1m`` for m <= m_max."""
    g = params.g_tilde
    m = np.arange(m_max + 1)
    with np.errstate(divide="ignore"):
        logpref = m * math.log(g) - 0.5 * gammaln(m + 1) - g ** 2 / 2 if g else None
    pref = np.exp(logpref) if g else (m == 0).astype(float)
    e = lf_level(params, 1, m)
    e_t = e / params.omega_m
    wt = params.omega_m * t
    out = np.empty(len(m), dtype=complex)
    small = np.abs(e_t) < RESONANCE_EPS
    es = e_t[~small]
    out[~small] = (1 - np.exp(-1j * es * wt)) / es
    ez = e_t[small]
    # series of (1 - e^{-i x wt}) / x about x = 0
    out[small] = 1j * wt + ez * wt ** 2 / 2 - 1j * ez ** 2 * wt ** 3 / 6
    return pref * out


def default_vacuum_cutoff(params: SystemParams) -> int:
    return int(max(8 * params.g_tilde ** 2, 40))


def _w1_at(params, t, xi, k_max, m_max):
    f = f_coefficients(params, t, m_max)
    zeta = -params.g_tilde
    dim = max(k_max, m_max) + 1
    # <xi,k|zeta,m> = e^{i Im(xi^* zeta)} <k|D(zeta - xi)|m>
    d = displacement_elements(dim, zeta - xi)[: k_max + 1, : m_max + 1]
    amp = np.exp(1j * (np.conj(xi) * zeta).imag) * (d @ f)
    signs = (-1.0) ** np.arange(k_max + 1)
    return 2 / math.pi * float(np.sum(signs * np.abs(amp) ** 2))


def vacuum_wigner_correction(params: SystemParams, t: float, xi, k_max: int | None = None,
                             m_max: int | None = None, check: bool = True,
                             tol: float = 1e-8):
    """``W_1(xi) = (2/pi) sum_k (-1)^k |sum_m f_m(t) <xi,k|-g,m>|^2``.

    Accepts a scalar or an array of phase-space points.  Cut-offs default to
    ``max(8 g^2, 40)`` for ``m`` and additionally cover ``|xi + g|`` for ``k``;
    with ``check`` both are doubled and a :class:`ConvergenceError` raised if
    the value moves by more than ``tol``.
    """
    xi_arr = np.asarray(xi, dtype=complex)
    m0 = m_max or default_vacuum_cutoff(params)
    out = np.empty(xi_arr.shape)
    for idx, x in np.ndenumerate(xi_arr):
        reach = int(math.ceil((abs(x + params.g_tilde) + 6) ** 2))
        k0 = k_max or max(m0, reach)
        val = _w1_at(params, t, x, k0, m0)
        if check:
            val2 = _w1_at(params, t, x, 2 * k0, 2 * m0)
            if abs(val2 - val) > tol:
                raise ConvergenceError(f"W1 cut-offs not converged at xi={x}: "
                                       f"{val} vs {val2}")
        out[idx] = val
    return out if out.ndim else float(out)


def vacuum_norm_sq(params: SystemParams, t: float, m_max: int | None = None) -> float:
    """``N^2 = 1 / (1 + eps~^2 sum_m |f_m|^2)`` for the vacuum initial state."""
    f = f_coefficients(params, t, m_max or 2 * default_vacuum_cutoff(params))
    return 1.0 / (1.0 + params.eps_tilde ** 2 * float(np.sum(np.abs(f) ** 2)))


def vacuum_wigner(params: SystemParams, t: float, xi, **kw):
    """Total first-order Wigner function ``N^2 [W_0 + eps~^2 W_1]`` of the
    vacuum-initial state."""
    xi = np.asarray(xi, dtype=complex)
    w0 = 2 / math.pi * np.exp(-2 * np.abs(xi) ** 2)
    w1 = vacuum_wigner_correction(params, t, xi, **kw)
    return vacuum_norm_sq(params, t) * (w0 + params.eps_tilde ** 2 * w1)


def vacuum_mech_density(params: SystemParams, t: float, n_mech: int,
                        m_max: int | None = None) -> np.ndarray:
    """First-order mechanical state ``N^2 [|0><0| + eps~^2 |chi><chi|]`` with
    ``|chi> = sum_m f_m D(-g) |m>``, materialised in ``n_mech`` levels."""
    m_max = m_max or 2 * default_vacuum_cutoff(params)
    f = f_coefficients(params, t, m_max)
    dim = max(n_mech, m_max + 1)
    d = displacement_elements(dim, -params.g_tilde)
    chi = (d[:, : m_max + 1] @ f)[:n_mech]
    rho = np.zeros((n_mech, n_mech), dtype=complex)
    rho[0, 0] = 1
    rho += params.eps_tilde ** 2 * np.outer(chi, chi.conj())
    return rho / np.trace(rho).real


def negativity_threshold_at_minus_g0(params: SystemParams) -> float | None:
    """Critical ``eps/Omega_m`` for ``W(-g) < 0`` at ``t = pi/Omega_m``, ``Delta = 0``,
    keeping only the resonant ``k = g^2`` term of the parity sum.

    Requires ``g^2`` to be a positive integer.  Returns ``None`` when ``g^2``
    is even: the dominant term is then positive and no threshold exists.
    """
    lam = params.g_tilde ** 2
    lam_int = round(lam)
    if lam_int < 1 or abs(lam - lam_int) > 1e-9:
        raise ValueError(f"g0^2/Omega_m^2 = {lam} is not a positive integer")
    if params.delta != 0:
        raise ValueError("threshold formula assumes zero detuning")
    if lam_int % 2 == 0:
        return None
    poisson = math.exp(lam_int * math.log(lam_int) - lam_int - math.lgamma(lam_int + 1))
    return math.sqrt(math.exp(-2 * lam_int) / (math.pi ** 2 * poisson))


def overlap(a, b) -> complex:
    """Inner product ``<a|b>``."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))
