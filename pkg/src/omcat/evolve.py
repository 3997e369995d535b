"""Time propagation: Schrodinger and Lindblad integration with an embedded
Runge-Kutta pair, piecewise-constant drive schedules and truncation checks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .fock import HilbertConfig, commutator_expectation, partial_trace_cavity
from .model import (SUPEROP_MAX_DIM, Liouvillian, SystemParams,
                    build_lab_hamiltonian, build_liouvillian)

log = logging.getLogger(__name__)

CLOSED_TOL = (1e-9, 1e-11)   # (rtol, atol)
OPEN_TOL = (1e-7, 1e-9)
#: Default cap on the number of complex entries of a vectorised density matrix.
MAX_DENSITY_ENTRIES = 4_000_000
METHOD = "DOP853"


class IntegrationError(RuntimeError):
    """The adaptive integrator could not meet the requested tolerance."""


class MemoryBudgetError(RuntimeError):
    """A vectorised density matrix would exceed the configured size cap."""


@dataclass(frozen=True)
class DriveSchedule:
    """Piecewise-constant drive: a list of ``(duration, epsilon)`` segments."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(d), float(e)) for d, e in self.segments)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        for d, e in segs:
            if not (d >= 0 and math.isfinite(d)):
                raise ValueError(f"segment duration {d} must be finite and >= 0")
            if e < 0:
                raise ValueError("drive strength must be non-negative")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def pulse(cls, epsilon: float, omega_m: float = 1.0, t_free: float = 0.0,
              t_pulse: float | None = None) -> "DriveSchedule":
        """Drive for half a mechanical period (or ``t_pulse``), then ``t_free`` undriven."""
        t_pulse = math.pi / omega_m if t_pulse is None else t_pulse
        segs = [(t_pulse, epsilon)]
        if t_free > 0:
            segs.append((t_free, 0.0))
        return cls(tuple(segs))

    @property
    def total(self) -> float:
        return sum(d for d, _ in self.segments)

    @property
    def boundaries(self) -> list[float]:
        return list(np.cumsum([0.0] + [d for d, _ in self.segments]))


@dataclass
class Trajectory:
    """Sampled states plus per-sample diagnostics.

    ``kind`` is ``"ket"`` or ``"dm"``.  When a trajectory is recorded with
    ``store="mech"`` the ``states`` hold mechanical reduced density matrices.
    """

    times: np.ndarray
    states: list
    kind: str
    config: HilbertConfig
    diagnostics: dict = field(default_factory=dict)
    stored: str = "full"
    #: full composite state at the last integration time
    final_state: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def mech_states(self) -> list:
        if self.stored == "mech":
            return self.states
        return [partial_trace_cavity(s, self.config) for s in self.states]

    def final(self):
        return self.states[-1]

    def extend(self, other: "Trajectory", skip_first: bool = True) -> "Trajectory":
        """Concatenate ``other`` (whose times are already absolute)."""
        k = 1 if skip_first else 0
        diags = {key: np.concatenate([self.diagnostics[key], other.diagnostics[key][k:]])
                 for key in self.diagnostics}
        return Trajectory(np.concatenate([self.times, other.times[k:]]),
                          self.states + other.states[k:], self.kind, self.config,
                          diags, self.stored, other.final_state)


def _diagnose(state, config: HilbertConfig, kind: str) -> dict:
    out = {"comm_a": commutator_expectation(state, "cavity", config).real,
           "comm_b": commutator_expectation(state, "mech", config).real}
    if kind == "ket":
        out["norm"] = float(np.linalg.norm(state))
    else:
        out["trace"] = float(np.trace(state).real)
    return out


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if len(times) > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    return times


def _integrate(rhs, y0, times, rtol, atol, t0=None):
    """Run the embedded RK pair from ``t0`` (default ``times[0]``) and return
    the solution sampled at ``times``."""
    t0 = times[0] if t0 is None else t0
    if times[-1] == t0:
        return [y0.copy() for _ in times]
    sol = solve_ivp(rhs, (t0, times[-1]), y0, method=METHOD, t_eval=times,
                    rtol=rtol, atol=atol)
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}")
    log.debug("%s: %d rhs evaluations over [%g, %g]", METHOD, sol.nfev, t0, times[-1])
    return [sol.y[:, i] for i in range(sol.y.shape[1])]


def evolve_state(h, psi0, times, config: HilbertConfig | None = None,
                 rtol: float = CLOSED_TOL[0], atol: float = CLOSED_TOL[1],
                 store: str = "full") -> Trajectory:
    """Integrate ``i d psi/dt = H psi`` and sample at ``times`` (``times[0]`` is
    the time of ``psi0``)."""
    times = _check_times(times)
    psi0 = np.asarray(psi0, dtype=complex)
    if config is None:
        config = HilbertConfig(1, len(psi0))
    norm0 = np.linalg.norm(psi0)
    if abs(norm0 - 1) > 1e-10:
        raise ValueError(f"initial state not normalised (norm {norm0})")
    mih = -1j * h

    def rhs(t, y):
        return mih @ y

    states = _integrate(rhs, psi0, times, rtol, atol)
    return _record(times, states, "ket", config, store)


def evolve_density(liouvillian: Liouvillian, rho0, times,
                   rtol: float = OPEN_TOL[0], atol: float = OPEN_TOL[1],
                   max_entries: int = MAX_DENSITY_ENTRIES,
                   store: str = "full") -> Trajectory:
    """Integrate ``d rho/dt = L[rho]``; samples are Hermitian-symmetrised."""
    times = _check_times(times)
    rho0 = np.asarray(rho0, dtype=complex)
    n = liouvillian.dim
    if rho0.shape != (n, n):
        raise ValueError(f"rho0 shape {rho0.shape} does not match generator dimension {n}")
    if n * n > max_entries:
        raise MemoryBudgetError(f"vectorised density has {n*n} entries, cap is {max_entries}")
    order = "F"
    if liouvillian.structured:
        order = "C"

        def rhs(t, y):
            return liouvillian.apply_structured(y.reshape(n, n)).ravel()
    elif n <= SUPEROP_MAX_DIM:
        sop = liouvillian.superoperator()

        def rhs(t, y):
            return sop @ y
    else:
        def rhs(t, y):
            return liouvillian.matvec(y)

    vecs = _integrate(rhs, rho0.ravel(order=order), times, rtol, atol)
    states = []
    for v in vecs:
        r = v.reshape((n, n), order=order)
        states.append(0.5 * (r + r.conj().T))
    return _record(times, states, "dm", liouvillian.config, store)


def _record(times, states, kind, config, store) -> Trajectory:
    diag = {}
    for s in states:
        for k, v in _diagnose(s, config, kind).items():
            diag.setdefault(k, []).append(v)
    diag = {k: np.asarray(v) for k, v in diag.items()}
    final = states[-1]
    if store == "mech":
        states = [partial_trace_cavity(s, config) for s in states]
    elif store != "full":
        raise ValueError(f"unknown store mode {store!r}")
    return Trajectory(np.asarray(times), states, kind, config, diag, store, final)


def evolve_schedule(params: SystemParams, config: HilbertConfig, schedule: DriveSchedule,
                    initial, samples_per_segment: int = 8, times=None,
                    rtol: float | None = None, atol: float | None = None,
                    store: str = "full", **kw) -> Trajectory:
    """Propagate through each segment with ``epsilon`` set per segment.

    ``initial`` is a state vector (unitary evolution, requires
    ``params.dissipative`` false) or a density matrix (Lindblad evolution).
    Samples are taken ``samples_per_segment`` times uniformly inside each
    segment, or only at the absolute ``times`` if given.  Segment boundaries
    are always integration end points, so the state is handed over exactly.
    """
    initial = np.asarray(initial, dtype=complex)
    kind = "ket" if initial.ndim == 1 else "dm"
    if kind == "ket" and params.dissipative:
        raise ValueError("dissipative parameters need a density-matrix initial state")
    bounds = schedule.boundaries
    if times is not None:
        times = _check_times(times)
        if times[0] < -1e-12 or times[-1] > bounds[-1] + 1e-12:
            raise ValueError("requested times fall outside the schedule")
    traj = None
    state = initial
    for i, (dur, eps) in enumerate(schedule.segments):
        t0, t1 = bounds[i], bounds[i + 1]
        if dur == 0:
            continue
        if times is None:
            seg_t = np.linspace(t0, t1, samples_per_segment + 1)
        else:
            inner = times[(times > t0 + 1e-12) & (times < t1 - 1e-12)]
            seg_t = np.concatenate([[t0], inner, [t1]])
        p = params.replace(epsilon=eps)
        if kind == "ket":
            seg = evolve_state(build_lab_hamiltonian(p, config), state, seg_t - t0, config,
                               rtol=rtol or CLOSED_TOL[0], atol=atol or CLOSED_TOL[1],
                               store=store)
        else:
            seg = evolve_density(build_liouvillian(p, config), state, seg_t - t0,
                                 rtol=rtol or OPEN_TOL[0], atol=atol or OPEN_TOL[1],
                                 store=store, **kw)
        seg.times = seg.times + t0
        state = seg.final_state
        if times is not None:
            keep = np.array([np.any(np.isclose(t, times, rtol=0, atol=1e-12))
                             for t in seg.times])
            if traj is not None:
                keep[0] = False
            seg = _subset(seg, keep)
        if traj is None:
            traj = seg
        else:
            traj = traj.extend(seg, skip_first=_starts_at(traj, seg))
        traj.final_state = state
    if traj is None:
        # every segment had zero duration
        t = np.array([0.0])
        traj = _record(t, [initial], kind, config, store)
    return traj


def _starts_at(traj: Trajectory, seg: Trajectory) -> bool:
    return len(seg.times) > 0 and len(traj.times) > 0 and seg.times[0] == traj.times[-1]


def _subset(traj: Trajectory, mask) -> Trajectory:
    idx = np.flatnonzero(mask)
    out = Trajectory(traj.times[idx], [traj.states[i] for i in idx], traj.kind, traj.config,
                     {k: v[idx] for k, v in traj.diagnostics.items()}, traj.stored)
    out.final_state = traj.final_state
    return out


@dataclass
class TruncationReport:
    threshold: float
    flagged_times: np.ndarray
    max_dev_a: float
    max_dev_b: float

    @property
    def clean(self) -> bool:
        return len(self.flagged_times) == 0

    def __bool__(self):
        return self.clean


def truncation_check(traj: Trajectory, threshold: float = 0.01) -> TruncationReport:
    """Flag samples where ``|<[a,a^dag]> - 1|`` or ``|<[b,b^dag]> - 1|`` exceeds ``threshold``."""
    da = np.abs(np.asarray(traj.diagnostics["comm_a"]) - 1)
    db = np.abs(np.asarray(traj.diagnostics["comm_b"]) - 1)
    bad = (da > threshold) | (db > threshold)
    return TruncationReport(threshold, np.asarray(traj.times)[bad],
                            float(da.max(initial=0.0)), float(db.max(initial=0.0)))
