"""Adiabatic identification of the atomic mode and coupling/frequency sweeps.

At zero coupling the eigenproblem is block diagonal and the atomic mode is
the unit vector on the atom node at the bare frequency.  Ramping chi in small
steps and selecting, at each step, the eigenvector with maximum overlap
against the previous one continues that mode into the hybridized regime,
where neither spatial locality nor spectral proximity identifies it.

Complex frequencies are reported as omega = Re + i Im with Re >= 0 (the
oscillation frequency) and Im <= 0 (negative of the decay rate), i.e. the
half-plane representative of each conjugate pole pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .circuit import CircuitParams, build_closed_system, build_reduced_system
from .errors import DomainError, SolverError, TrackingAmbiguityError
from .spectral import pencil_candidates, refine_pole

__all__ = [
    "AtomicModeTrace",
    "track_atomic_mode",
    "ipr",
    "sweep_chi",
    "sweep_bare_frequency",
]

MAX_DOUBLINGS = 10          # refinement cap: 2**10 * initial_steps ramp points
FREQ_REFINE_TOL = 1e-6      # relative change between refinements to accept


def ipr(mode: np.ndarray) -> float:
    """Inverse participation ratio of a unit-normalized mode vector."""
    mode = np.asarray(mode)
    norm = np.linalg.norm(mode)
    if abs(norm - 1.0) > 1e-8:
        raise DomainError(f"mode must be unit-normalized, got |mode| = {norm!r}")
    return float(np.sum(np.abs(mode) ** 4))


@dataclass
class AtomicModeTrace:
    """One adiabatic ramp of the atomic mode from chi = 0 to chi_target.

    ``frequencies`` holds the complex atomic frequency [rad/s] at each ramp
    point; ``overlaps[j]`` is the matching overlap used at step j (1 at the
    seed).  ``lamb_shift = Re omega(end) - omega_A`` and
    ``decay = |Im omega(end)|``.
    """

    chi_grid: np.ndarray
    frequencies: np.ndarray
    final_mode: np.ndarray
    lamb_shift: float
    decay: float
    ipr: float
    overlaps: np.ndarray
    steps_used: int
    params: CircuitParams = field(repr=False)


def _omega_from_pole(s: complex) -> complex:
    """Half-plane complex frequency (dimensionless) from a Laplace pole."""
    return abs(s.imag) + 1j * s.real


def _candidates(params: CircuitParams, closed: bool):
    """Half-plane pole representatives and unit right vectors at params.chi."""
    if closed:
        Ccl, Lcl = build_closed_system(params)
        lam, vecs = sla.eigh(Lcl, Ccl)
        poles = 1j * np.sqrt(np.clip(lam, 0.0, None))
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
        return None, poles.astype(complex), vecs.astype(complex)
    sys = build_reduced_system(params)
    poles, vecs = pencil_candidates(sys)
    keep = poles.imag >= -1e-12
    return sys, poles[keep], vecs[:, keep]


def _ramp(params: CircuitParams, chi_grid: np.ndarray, seed_vec, seed_freq,
          overlap_threshold: float, closed: bool, polish: bool):
    """Follow the mode along chi_grid.  Returns None on an overlap failure.

    ``seed_vec``/``seed_freq`` describe the mode at chi_grid[0]; the grid's
    first point is not re-solved.
    """
    freqs = [complex(seed_freq)]
    overlaps = [1.0]
    vec = np.asarray(seed_vec, dtype=complex)
    sys = None
    pole = None
    for chi in chi_grid[1:]:
        p = params.replace(chi=float(chi))
        sys, poles, vecs = _candidates(p, closed)
        ov = np.abs(vec.conj() @ vecs)
        i = int(np.argmax(ov))
        if ov[i] <= overlap_threshold:
            return None, float(chi), float(ov[i])
        vec = vecs[:, i]
        pole = poles[i]
        freqs.append(_omega_from_pole(pole))
        overlaps.append(float(ov[i]))
    if polish and not closed and sys is not None and len(chi_grid) > 1:
        s_ref, v_ref, _, _, _ = refine_pole(sys, complex(1j * freqs[-1].real + freqs[-1].imag))
        if abs(v_ref.conj() @ vec) > 0.9:  # still the same branch after polish
            vec = v_ref
            freqs[-1] = _omega_from_pole(s_ref)
    return (np.array(freqs), np.array(overlaps), vec), None, None


def track_atomic_mode(
    params: CircuitParams,
    chi_target: float,
    initial_steps: int = 8,
    overlap_threshold: float = 0.5,
    closed: bool = False,
) -> AtomicModeTrace:
    """Adiabatic continuation of the atomic mode from chi = 0 to chi_target.

    The ramp step count doubles until the final complex frequency changes by
    less than 1e-6 (relative) between refinements; an overlap at or below
    ``overlap_threshold`` after maximal refinement raises
    ``TrackingAmbiguityError`` carrying the offending chi.
    """
    if chi_target < 0:
        raise DomainError(f"chi_target must be >= 0, got {chi_target!r}")
    if initial_steps < 1:
        raise DomainError(f"initial_steps must be >= 1, got {initial_steps!r}")

    M = params.N + (2 if not closed else 1)
    seed_vec = np.zeros(M, dtype=complex)
    seed_vec[0] = 1.0
    seed_freq = params.omega_A / params.Omega0  # exact decoupled value

    if chi_target == 0.0:
        return AtomicModeTrace(
            chi_grid=np.array([0.0]),
            frequencies=np.array([complex(params.omega_A)]),
            final_mode=seed_vec,
            lamb_shift=0.0,
            decay=0.0,
            ipr=1.0,
            overlaps=np.array([1.0]),
            steps_used=0,
            params=params,
        )

    steps = initial_steps
    prev_final = None
    result = grid = None
    last_fail = (None, None)
    for _ in range(MAX_DOUBLINGS + 1):
        grid = np.linspace(0.0, chi_target, steps + 1)
        result, fail_chi, fail_ov = _ramp(
            params, grid, seed_vec, seed_freq, overlap_threshold, closed, polish=True
        )
        if result is None:
            last_fail = (fail_chi, fail_ov)
            prev_final = None
            steps *= 2
            continue
        final = result[0][-1]
        if prev_final is not None and abs(final - prev_final) <= FREQ_REFINE_TOL * abs(final):
            break
        prev_final = final
        steps *= 2
    else:
        if last_fail[0] is not None:
            raise TrackingAmbiguityError(
                f"mode overlap {last_fail[1]:.3f} <= {overlap_threshold} at "
                f"chi = {last_fail[0]:.6g} after maximal refinement",
                chi=last_fail[0],
                overlap=last_fail[1],
            )
        raise TrackingAmbiguityError(
            f"ramp to chi = {chi_target} did not converge within "
            f"{2**MAX_DOUBLINGS} * initial_steps refinement",
            chi=chi_target,
        )
    if result is None:
        raise TrackingAmbiguityError(
            f"mode overlap {last_fail[1]!r} at chi = {last_fail[0]!r}",
            chi=last_fail[0], overlap=last_fail[1],
        )

    freqs, overlaps, vec = result
    freqs_si = freqs * params.Omega0
    freqs_si[0] = complex(params.omega_A)
    final = freqs_si[-1]
    return AtomicModeTrace(
        chi_grid=grid,
        frequencies=freqs_si,
        final_mode=vec,
        lamb_shift=float(final.real - params.omega_A),
        decay=float(abs(final.imag)),
        ipr=ipr(vec / np.linalg.norm(vec)),
        overlaps=overlaps,
        steps_used=len(grid) - 1,
        params=params,
    )


def sweep_chi(
    params: CircuitParams,
    chi_grid,
    overlap_threshold: float = 0.5,
    closed: bool = False,
) -> np.ndarray:
    """Tracked atomic frequency along an ascending coupling grid.

    One continuous ramp: each grid point reuses the previous point's mode as
    the seed, with adaptive sub-stepping per segment.  Returns an array of
    rows (chi, Re omega_A [rad/s], Im omega_A [rad/s]).
    """
    chi_grid = np.asarray(chi_grid, dtype=float)
    if chi_grid.ndim != 1 or len(chi_grid) == 0:
        raise DomainError("chi grid must be a nonempty 1-D array")
    if np.any(chi_grid < 0) or np.any(np.diff(chi_grid) <= 0) and len(chi_grid) > 1:
        raise DomainError("chi grid must be ascending and nonnegative")

    M = params.N + (2 if not closed else 1)
    vec = np.zeros(M, dtype=complex)
    vec[0] = 1.0
    freq = params.omega_A / params.Omega0
    chi_prev = 0.0
    rows = []
    for chi in chi_grid:
        if chi == 0.0:
            rows.append((0.0, params.omega_A, 0.0))
            continue
        steps = 1
        prev_final = None
        accepted = None
        fail = None
        for _ in range(MAX_DOUBLINGS + 1):
            seg = np.linspace(chi_prev, chi, steps + 1)
            result, fail_chi, fail_ov = _ramp(
                params, seg, vec, freq, overlap_threshold, closed, polish=True
            )
            if result is None:
                fail = (fail_chi, fail_ov)
                prev_final = None
                steps *= 2
                continue
            final = result[0][-1]
            if prev_final is not None and abs(final - prev_final) <= FREQ_REFINE_TOL * abs(final):
                accepted = result
                break
            prev_final = final
            accepted = result
            steps *= 2
        if accepted is None:
            raise TrackingAmbiguityError(
                f"sweep lost the atomic branch near chi = {fail[0]!r} "
                f"(overlap {fail[1]!r})",
                chi=fail[0], overlap=fail[1],
            )
        freqs, _, vec = accepted
        freq = freqs[-1]
        chi_prev = float(chi)
        w = freq * params.Omega0
        rows.append((float(chi), float(w.real), float(w.imag)))
    return np.array(rows)


@dataclass
class FrequencySweepPoint:
    omega_A: float
    poles: np.ndarray          # complex frequencies [rad/s], half plane
    atomic_frequency: complex  # [rad/s]
    atomic_index: int
    ipr: float


def sweep_bare_frequency(
    params: CircuitParams,
    omega_A_grid,
    initial_steps: int = 4,
    overlap_threshold: float = 0.5,
) -> list[FrequencySweepPoint]:
    """Full pole set plus tracked atomic identification per bare frequency.

    Grid points are independent (each gets its own chi ramp), so callers may
    parallelize; here they run sequentially in grid order.
    """
    omega_A_grid = np.asarray(omega_A_grid, dtype=float)
    if np.any(omega_A_grid <= 0) or np.any(omega_A_grid >= 2 * params.omega_c):
        raise DomainError("omega_A grid must lie within (0, 2 omega_c)")
    out = []
    for wa in omega_A_grid:
        p = params.replace(omega_A=float(wa))
        trace = track_atomic_mode(
            p, p.chi, initial_steps=initial_steps, overlap_threshold=overlap_threshold
        )
        _, poles, _ = _candidates(p, closed=False)
        omegas = np.array([_omega_from_pole(s) for s in poles]) * p.Omega0
        target = trace.frequencies[-1]
        atomic_index = int(np.argmin(np.abs(omegas - target)))
        out.append(
            FrequencySweepPoint(
                omega_A=float(wa),
                poles=omegas,
                atomic_frequency=complex(target),
                atomic_index=atomic_index,
                ipr=trace.ipr,
            )
        )
    return out
