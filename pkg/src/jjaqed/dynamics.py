"""Spontaneous-emission dynamics from the pole-residue expansion.

With the atom initially holding one excitation and the waveguide injecting
delta-correlated thermal noise at the boundary node, the occupation of the
atom node decomposes into four propagator kernels

    F1(t) = sum_p e^{s_p t} s_p   (R_p C)_{AA}      flux  <- flux IC
    F2(t) = sum_p e^{s_p t} s_p^2 (C R_p C)_{AA}    charge<- flux IC
    F3(t) = sum_p e^{s_p t}       (R_p)_{AA}        flux  <- charge IC
    F4(t) = sum_p e^{s_p t} s_p   (C R_p)_{AA}      charge<- charge IC

plus a thermal double sum over boundary-column residues:

    n_A(t) = 1/2 [F1^2 + (Z_A/Z0)^2 F2^2] + 1/2 [(Z0/Z_A)^2 F3^2 + F4^2]
           + (k_B T Z0^2 / (hbar Omega0 Z_A Z_W))
             * sum_{p,m} [a_p a_m + (Z_A/Z0)^2 b_p b_m]
               (e^{(s_p+s_m)t} - 1)/(s_p + s_m)

with a_p = (R_p)_{A,b}, b_p = s_p (C R_p)_{A,b}.  The residue identities
sum_p R_p = 0 and sum_p s_p R_p = C^{-1} make n_A(0) = 1 exact.  The thermal
factor tends to t as s_p + s_m -> 0 and the whole thermal block is
nonnegative-definite, which fixes its overall sign (the independent
covariance oracle below confirms it).

The oracle integrates the Lyapunov equation for the normal-ordered second
moments Sigma of (Phi, Z0 Q):

    dSigma/dt = A Sigma + Sigma A^T + D,   D = (2 Z0^2 k_B T / (hbar Z_A
                 Omega0 Z_W)) e_b e_b^T  (charge block),

which is exact for linear dynamics with delta-correlated Gaussian noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from threadpoolctl import threadpool_limits

from .circuit import CircuitParams, ReducedSystem, build_reduced_system
from .constants import HBAR, K_B
from .coupling import build_coupling_set
from .errors import DivergenceError, DomainError, IntegrationError, ResolutionError
from .spectral import ModeSet, closed_jja_of, solve_quadratic_modes

__all__ = [
    "DynamicsTrace",
    "eta_zeta",
    "atom_occupation_modal",
    "steady_state",
    "covariance_ode_oracle",
    "matrix_exponential_oracle",
    "beat_spectrum",
    "BeatPeak",
]

SMALL_DENOM = 1e-10   # |s_p + s_m| below this uses the series limit -> t
ZERO_PAIR_TOL = 1e-12  # steady-state divergence guard


@dataclass
class DynamicsTrace:
    """Occupation of the atom node over dimensionless time.

    ``part_initial`` is the block seeded by the initial flux moment,
    ``part_vacuum`` the block seeded by the initial charge moment (the
    impedance-weighted quadrature pair), ``part_thermal`` the waveguide-noise
    block; ``n_A`` is their sum.  ``delta_noise_ratio`` reports
    (hbar / k_B T) * (slowest decay rate): the delta-correlated noise
    approximation needs it small.
    """

    t_grid: np.ndarray
    n_A: np.ndarray
    part_initial: np.ndarray
    part_vacuum: np.ndarray
    part_thermal: np.ndarray
    n_A_inf: float | None
    method: str
    delta_noise_ratio: float = 0.0
    notes: tuple = ()
    params: CircuitParams | None = field(default=None, repr=False)


def eta_zeta(modes: ModeSet, sys: ReducedSystem, observe_node: int):
    """Coefficient tables eta[p, q] = (R_p)_{j,q}, zeta[p, q] = s_p (C R_p)_{j,q}.

    Only simple (non-defective) poles contribute; defective ones are dropped
    with a warning.  Rows follow ``modes.kept()`` ordering.
    """
    if modes.defective.any():
        warnings.warn(
            f"{int(modes.defective.sum())} defective pole(s) excluded from the "
            "eta/zeta expansion",
            stacklevel=2,
        )
    kept = modes.kept()
    j = observe_node
    C = sys.C_red
    eta = np.empty((len(kept), sys.M), dtype=complex)
    zeta = np.empty((len(kept), sys.M), dtype=complex)
    for row, p in enumerate(kept):
        u = modes.left_vectors[:, p]
        v = modes.right_vectors[:, p]
        d = modes.denominators[p]
        eta[row] = v[j] * u.conj() / d
        zeta[row] = modes.poles[p] * (C @ v)[j] * u.conj() / d
    return eta, zeta


def _pole_scalars(modes: ModeSet, sys: ReducedSystem):
    """Per-pole scalar weights entering the occupation formula."""
    kept = modes.kept()
    A = sys.atom_index
    b = sys.boundary_index
    C = sys.C_red
    s = modes.poles[kept]
    vA = modes.right_vectors[A, kept]
    Cv = C @ modes.right_vectors[:, kept]
    Cu = C @ modes.left_vectors[:, kept].conj()
    uA = modes.left_vectors[A, kept].conj()
    ub = modes.left_vectors[b, kept].conj()
    d = modes.denominators[kept]

    f1 = s * vA * Cu[A, :] / d          # s (R C)_{AA}
    f2 = s * s * Cv[A, :] * Cu[A, :] / d  # s^2 (C R C)_{AA}
    f3 = vA * uA / d                    # (R)_{AA}
    f4 = s * Cv[A, :] * uA / d          # s (C R)_{AA}
    a = vA * ub / d                     # (R)_{A,b}
    bb = s * Cv[A, :] * ub / d          # s (C R)_{A,b}
    return s, f1, f2, f3, f4, a, bb


def _impedance_ratio(params: CircuitParams) -> float:
    """Z_A / Z0 with Z_A = sqrt(L_A'/C_A'') from the coupling analysis."""
    cs = build_coupling_set(params, closed_jja_of(params))
    return cs.Z_A / params.Z0


def _thermal_prefactor(params: CircuitParams, T: float, z_ratio_A: float) -> float:
    return K_B * T * params.Z0 / (HBAR * params.Omega0 * z_ratio_A * params.Z_W)


def _delta_noise_ratio(params: CircuitParams, T: float, s: np.ndarray) -> float:
    if T <= 0:
        return 0.0
    damped = np.abs(s.real) * params.Omega0
    damped = damped[(np.abs(s.imag) > 1e-12) & (damped > 0)]
    if len(damped) == 0:
        return 0.0
    gamma_slow = damped.min()
    return float(HBAR / (K_B * T) * gamma_slow)


def atom_occupation_modal(
    params: CircuitParams,
    t_grid,
    T: float | None = None,
    modes: ModeSet | None = None,
) -> DynamicsTrace:
    """Occupation of the atom node via the pole-residue expansion.

    ``t_grid`` is dimensionless time Omega0 * t.  The initial state is one
    excitation at the atom node (impedance Z_A), vacuum elsewhere, with
    thermal noise of temperature T (default: params.T) injected at the
    boundary.
    """
    if T is None:
        T = params.T
    if T < 0:
        raise DomainError(f"temperature must be >= 0, got {T!r}")
    t = np.asarray(t_grid, dtype=float)
    sys = build_reduced_system(params)
    if modes is None:
        modes = solve_quadratic_modes(sys)

    w = _impedance_ratio(params)  # Z_A / Z0
    s, f1, f2, f3, f4, a, bb = _pole_scalars(modes, sys)

    E = np.exp(np.outer(s, t))  # (P, T)
    F1 = (f1 @ E).real
    F2 = (f2 @ E).real
    F3 = (f3 @ E).real
    F4 = (f4 @ E).real
    part_initial = 0.5 * (F1**2 + w**2 * F2**2)
    part_vacuum = 0.5 * (F3**2 / w**2 + F4**2)

    part_thermal = np.zeros_like(t)
    n_inf = 0.0
    if T > 0:
        pref = _thermal_prefactor(params, T, w)
        sig = s[:, None] + s[None, :]
        W = np.outer(a, a) + w**2 * np.outer(bb, bb)
        small = np.abs(sig) < SMALL_DENOM
        Ws = np.where(small, 0.0, W / np.where(small, 1.0, sig))
        G = Ws @ E
        part_thermal = pref * (np.einsum("pt,pt->t", E, G) - Ws.sum()).real
        if small.any():
            idx = np.argwhere(small)
            for p, m in idx:
                sg = sig[p, m]
                series = t * (1.0 + sg * t / 2.0 + (sg * t) ** 2 / 6.0)
                part_thermal += pref * (W[p, m] * series).real
        n_inf = steady_state(params, T, modes=modes)

    n_A = part_initial + part_vacuum + part_thermal
    imag_scale = max(np.max(np.abs(n_A)), 1e-300)
    notes = ()
    ratio = _delta_noise_ratio(params, T, s)
    if T > 0 and ratio > 0.1:
        notes = (
            f"delta-noise approximation marginal: hbar*Gamma_slow/(k_B T) = {ratio:.3g}",
        )
    if np.min(n_A) < -1e-9 * imag_scale:
        raise DivergenceError(
            f"occupation went negative ({np.min(n_A):.3e}); pole set inconsistent"
        )
    return DynamicsTrace(
        t_grid=t,
        n_A=n_A,
        part_initial=part_initial,
        part_vacuum=part_vacuum,
        part_thermal=part_thermal,
        n_A_inf=n_inf if T > 0 else 0.0,
        method="modal",
        delta_noise_ratio=ratio,
        notes=notes,
        params=params,
    )


def steady_state(
    params: CircuitParams, T: float | None = None, modes: ModeSet | None = None
) -> float:
    """Long-time occupation of the atom node (thermal double sum).

    Requires every pole carrying weight at the boundary column to be
    strictly damped; a vanishing pair denominator with non-negligible weight
    raises DivergenceError.
    """
    if T is None:
        T = params.T
    if T < 0:
        raise DomainError(f"temperature must be >= 0, got {T!r}")
    if T == 0:
        return 0.0
    sys = build_reduced_system(params)
    if modes is None:
        modes = solve_quadratic_modes(sys)
    w = _impedance_ratio(params)
    s, _, _, _, _, a, bb = _pole_scalars(modes, sys)
    sig = s[:, None] + s[None, :]
    W = np.outer(a, a) + w**2 * np.outer(bb, bb)
    small = np.abs(sig.real) < ZERO_PAIR_TOL
    scale = np.max(np.abs(W)) + 1e-300
    bad = small & (np.abs(W) > 1e-10 * scale)
    if bad.any():
        p, m = np.argwhere(bad)[0]
        raise DivergenceError(
            f"pole pair ({p}, {m}) has |Re(s_p+s_m)| < {ZERO_PAIR_TOL:g} with "
            f"weight {abs(W[p, m]):.3e}; steady state diverges"
        )
    pref = _thermal_prefactor(params, T, w)
    vals = np.where(small, 0.0, W / np.where(small, 1.0, sig))
    return float(-pref * vals.sum().real)


def _first_order_matrix(sys: ReducedSystem, z_ratio: float | None = None) -> np.ndarray:
    """State matrix of d/dt (Phi, Z0 Q) in dimensionless time."""
    if z_ratio is None:
        z_ratio = sys.Z0 / sys.params.Z_W
    M = sys.M
    Cinv = np.linalg.inv(sys.C_red)
    A = np.zeros((2 * M, 2 * M))
    A[:M, M:] = Cinv
    A[M:, :M] = -sys.L_red_inv
    A[M + sys.boundary_index, M:] = -z_ratio * Cinv[sys.boundary_index, :]
    return A


def _oracle_pieces(params: CircuitParams, T: float):
    sys = build_reduced_system(params)
    A = _first_order_matrix(sys)
    M = sys.M
    w = _impedance_ratio(params)
    D = np.zeros((2 * M, 2 * M))
    if T > 0:
        # noise intensity of Sigma' = Sigma/(hbar Z_A): 2 Z0^2 k_B T/(hbar Z_A Omega0 Z_W)
        D[M + sys.boundary_index, M + sys.boundary_index] = 2.0 * _thermal_prefactor(
            params, T, w
        )
    # initial normal-ordered covariance, scaled by hbar Z_A
    S_flux = np.zeros((2 * M, 2 * M))
    S_flux[sys.atom_index, sys.atom_index] = 1.0
    S_charge = np.zeros((2 * M, 2 * M))
    S_charge[M + sys.atom_index, M + sys.atom_index] = 1.0 / w**2
    return sys, A, D, S_flux, S_charge, w


def _lyapunov_rhs(A):
    def rhs(_, y, n, D):
        S = y.reshape(n, n)
        half = A @ S
        return (half + half.T + D).ravel()

    return rhs


def covariance_ode_oracle(
    params: CircuitParams,
    t_grid,
    T: float | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> DynamicsTrace:
    """Independent occupation trace from the second-moment Lyapunov ODE.

    Integrates dSigma/dt = A Sigma + Sigma A^T + D three times (flux-seeded,
    charge-seeded, noise-only) so the parts decompose exactly as in the
    modal trace.  Exact for linear dynamics with delta-correlated Gaussian
    noise; adaptive eighth-order stepping.
    """
    if T is None:
        T = params.T
    if T < 0:
        raise DomainError(f"temperature must be >= 0, got {T!r}")
    t = np.asarray(t_grid, dtype=float)
    sys, A, D, S_flux, S_charge, w = _oracle_pieces(params, T)
    M = sys.M
    ia, ib = sys.atom_index, M + sys.atom_index

    def occupation(Y):
        # Y: (n*n, T) stacked solution
        saa = Y[ia * 2 * M + ia, :]
        sbb = Y[ib * 2 * M + ib, :]
        return 0.5 * (saa + w**2 * sbb)

    def run(S0, Dmat):
        rhs = _lyapunov_rhs(A)
        # small repeated matmuls: a pinned single BLAS thread is fastest
        with threadpool_limits(limits=1):
            sol = solve_ivp(
                rhs,
                (t[0], t[-1]),
                S0.ravel(),
                t_eval=t,
                method="DOP853",
                rtol=rtol,
                atol=atol,
                args=(2 * M, Dmat),
            )
        if not sol.success:
            raise IntegrationError(
                f"covariance ODE failed: {sol.message}",
                suggested_max_step=1.0 / (np.abs(np.linalg.eigvals(A)).max() + 1e-300),
            )
        return sol.y

    zeros = np.zeros_like(D)
    part_initial = occupation(run(S_flux, zeros))
    part_vacuum = occupation(run(S_charge, zeros))
    if T > 0:
        part_thermal = occupation(run(np.zeros_like(S_flux), D))
        n_inf = steady_state_oracle(params, T)
    else:
        part_thermal = np.zeros_like(t)
        n_inf = 0.0
    n_A = part_initial + part_vacuum + part_thermal
    return DynamicsTrace(
        t_grid=t,
        n_A=n_A,
        part_initial=part_initial,
        part_vacuum=part_vacuum,
        part_thermal=part_thermal,
        n_A_inf=n_inf,
        method="ode-oracle",
        params=params,
    )


def steady_state_oracle(params: CircuitParams, T: float | None = None) -> float:
    """t -> infinity limit of the covariance ODE via the Lyapunov fixed point.

    The boundary-node flux is a pure integrator (its column of L_red_inv is
    zero), so it random-walks under the injected noise and has no stationary
    variance; it also feeds no other equation.  Deleting that coordinate
    leaves a strictly stable system whose fixed point A S + S A^T + D = 0 is
    unique and carries the atom-node occupation.
    """
    if T is None:
        T = params.T
    if T <= 0:
        return 0.0
    sys, A, D, _, _, w = _oracle_pieces(params, T)
    M = sys.M
    keep = np.r_[0 : sys.boundary_index, sys.boundary_index + 1 : 2 * M]
    A_red = A[np.ix_(keep, keep)]
    D_red = D[np.ix_(keep, keep)]
    S = sla.solve_continuous_lyapunov(A_red, -D_red)
    ia = sys.atom_index
    ib = M + sys.atom_index - 1  # one flux coordinate removed before it
    return float(0.5 * (S[ia, ia] + w**2 * S[ib, ib]))


def matrix_exponential_oracle(
    params: CircuitParams,
    t_grid,
    T: float | None = None,
    panel: float = 0.125,
    gl_order: int = 10,
) -> DynamicsTrace:
    """Occupation via direct matrix exponentials and noise quadrature.

    A second oracle route (independent of both the pole expansion and the
    Lyapunov integration): the initial-condition blocks read off e^{A t}
    columns, the thermal block accumulates Gauss-Legendre panels of the
    stationary noise kernel.  Intended for small systems.
    """
    if T is None:
        T = params.T
    t = np.asarray(t_grid, dtype=float)
    sys, A, D, _, _, w = _oracle_pieces(params, T)
    M = sys.M
    ia, ib = sys.atom_index, M + sys.atom_index
    strength = D[M + sys.boundary_index, M + sys.boundary_index]
    b = np.zeros(2 * M)
    b[M + sys.boundary_index] = 1.0

    part_initial = np.empty_like(t)
    part_vacuum = np.empty_like(t)
    part_thermal = np.empty_like(t)
    nodes, weights = np.polynomial.legendre.leggauss(gl_order)

    acc = 0.0
    prev = 0.0
    with threadpool_limits(limits=1):
        for i, ti in enumerate(t):
            G = sla.expm(A * ti)
            part_initial[i] = 0.5 * (G[ia, ia] ** 2 + w**2 * G[ib, ia] ** 2)
            part_vacuum[i] = 0.5 * (G[ia, ib] ** 2 / w**2 + G[ib, ib] ** 2)
            if strength > 0:
                lo = prev
                while lo < ti - 1e-15:
                    hi = min(lo + panel, ti)
                    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
                    for x, wt in zip(nodes, weights):
                        g = sla.expm(A * (mid + half * x)) @ b
                        acc += wt * half * (g[ia] ** 2 + w**2 * g[ib] ** 2)
                    lo = hi
                prev = ti
                part_thermal[i] = 0.5 * strength * acc
            else:
                part_thermal[i] = 0.0
    n_A = part_initial + part_vacuum + part_thermal
    return DynamicsTrace(
        t_grid=t,
        n_A=n_A,
        part_initial=part_initial,
        part_vacuum=part_vacuum,
        part_thermal=part_thermal,
        n_A_inf=None,
        method="ode-oracle",
        params=params,
    )


@dataclass
class BeatPeak:
    frequency: float          # angular, per unit dimensionless time
    magnitude: float
    matched_pair: tuple[int, int] | None
    offset_bins: float | None


def beat_spectrum(trace: DynamicsTrace, modes: ModeSet, floor_factor: float = 10.0):
    """FFT peak table of the occupation trace, matched to pole-pair beats.

    Rectangular window, 4x zero padding.  Peaks are local maxima above
    ``floor_factor`` times the spectral floor (median magnitude); each is
    matched to the nearest candidate |Im s_p + Im s_m| within 2 bins of the
    padded grid.  The grid must be uniform and cover at least 20 periods of
    the smallest nonzero beat.
    """
    t = trace.t_grid
    dt = np.diff(t)
    if len(t) < 16 or not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise ResolutionError("beat spectrum needs a uniform time grid (>= 16 points)")
    dt = float(dt[0])
    span = t[-1] - t[0]

    kept = modes.kept()
    s = modes.poles[kept]
    beats = np.abs(s.imag[:, None] + s.imag[None, :])
    pairs = [(int(kept[p]), int(kept[m])) for p in range(len(s)) for m in range(len(s))]
    beats_flat = beats.ravel()
    nonzero = beats_flat[beats_flat > 1e-12]
    if len(nonzero) and span < 20.0 * (2.0 * np.pi / nonzero.min()):
        raise ResolutionError(
            f"grid spans {span:.1f} but the smallest beat period is "
            f"{2 * np.pi / nonzero.min():.1f}; need >= 20 periods"
        )

    y = trace.n_A - trace.n_A.mean()
    n_pad = 4 * len(y)
    mag = np.abs(np.fft.rfft(y, n=n_pad))
    freqs = 2.0 * np.pi * np.fft.rfftfreq(n_pad, d=dt)  # angular
    bin_width = freqs[1] - freqs[0]

    # Spectral floor: running median, wide enough to ride over Lorentzian
    # peaks but track the leakage envelope of the aperiodic relaxation.
    half = max(32, len(mag) // 100)
    floor = np.empty_like(mag)
    for i in range(len(mag)):
        lo, hi = max(0, i - half), min(len(mag), i + half + 1)
        floor[i] = np.median(mag[lo:hi])

    # A peak is a local maximum over +-4 bins (one unpadded bin each side,
    # rejecting the sidelobe picket of the rectangular window) above
    # floor_factor times the local floor; the DC bin region is excluded.
    peaks = []
    for i in range(4, len(mag) - 4):
        seg = mag[i - 4 : i + 5]
        if mag[i] < seg.max() or mag[i] <= floor_factor * floor[i]:
            continue
        if np.argmax(seg) != 4:
            continue
        k = int(np.argmin(np.abs(beats_flat - freqs[i])))
        off = abs(beats_flat[k] - freqs[i]) / bin_width
        matched = pairs[k] if off <= 2.0 else None
        peaks.append(
            BeatPeak(
                frequency=float(freqs[i]),
                magnitude=float(mag[i]),
                matched_pair=matched,
                offset_bins=float(off),
            )
        )
    return peaks
