"""Cubic atomic nonlinearity at classical amplitude level.

The junction potential keeps a cubic term U_A(Phi_A) = Lambda Phi_A^3, whose
gradient 3 Lambda Phi_A^2 enters the atom's charge equation as a classical
source.  Direct adaptive integration of the nonlinear equations of motion is
compared against linear dynamics plus the first-order correction, which is
the same pole-residue propagator convolved with the source built from the
linear trajectory.  The bookkeeping parameter multiplying the perturbative
ansatz cancels against the 1/lambda in the source and is folded into Lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .circuit import CircuitParams, build_reduced_system
from .constants import HBAR
from .errors import DomainError, InstabilityError, IntegrationError
from .spectral import ModeSet, solve_quadratic_modes

__all__ = [
    "NonlinearConfig",
    "Trajectory",
    "CorrectionTrajectory",
    "integrate_nonlinear_classical",
    "first_order_correction",
]

BLOWUP_FACTOR = 1e6


@dataclass(frozen=True)
class NonlinearConfig:
    """Cubic coefficient [J/Wb^3] and classical initial state.

    ``initial_flux`` and ``initial_scaled_charge`` are the (Phi_red, Z0 Q_red)
    vectors in weber; either may be None for zero.
    """

    Lambda: float
    initial_flux: np.ndarray | None = None
    initial_scaled_charge: np.ndarray | None = None


@dataclass
class Trajectory:
    """Classical (Phi, Z0 Q) trajectory on a dimensionless time grid.

    ``nl_strength`` reports the dimensionless nonlinearity
    Lambda * Phi_typ^3 / (hbar omega_A) with Phi_typ the largest initial
    flux amplitude.
    """

    t_grid: np.ndarray
    phi: np.ndarray      # (M, T)
    q: np.ndarray        # (M, T), stores Z0 * Q
    nl_strength: float
    params: CircuitParams = field(repr=False)


@dataclass
class CorrectionTrajectory:
    t_grid: np.ndarray
    phi1: np.ndarray
    q1: np.ndarray
    nl_strength: float
    params: CircuitParams = field(repr=False)


def _initial_state(params: CircuitParams, nl: NonlinearConfig, M: int):
    phi0 = np.zeros(M) if nl.initial_flux is None else np.asarray(nl.initial_flux, float)
    q0 = (
        np.zeros(M)
        if nl.initial_scaled_charge is None
        else np.asarray(nl.initial_scaled_charge, float)
    )
    if phi0.shape != (M,) or q0.shape != (M,):
        raise DomainError(f"initial amplitude vectors must have shape ({M},)")
    if not np.any(phi0) and not np.any(q0):
        phi0 = phi0.copy()
        phi0[0] = np.sqrt(HBAR * params.Z0)  # zero-point-scale flux kick
    return phi0, q0


def _nl_strength(params: CircuitParams, nl: NonlinearConfig, phi0: np.ndarray) -> float:
    phi_typ = np.max(np.abs(phi0))
    if phi_typ == 0.0:
        phi_typ = np.sqrt(HBAR * params.Z0)
    return float(nl.Lambda * phi_typ**3 / (HBAR * params.omega_A))


def integrate_nonlinear_classical(
    params: CircuitParams,
    nl: NonlinearConfig,
    t_grid,
    rtol: float = 1e-10,
    atol: float = 0.0,
    max_step: float = np.inf,
) -> Trajectory:
    """Adaptive integration of the reduced equations with the cubic source.

    Boundary dissipation is kept, stochastic noise is not (classical
    validation mode).  Raises InstabilityError if any flux exceeds 1e6 times
    the initial scale.
    """
    t = np.asarray(t_grid, dtype=float)
    sys = build_reduced_system(params)
    M = sys.M
    phi0, q0 = _initial_state(params, nl, M)
    Cinv = np.linalg.inv(sys.C_red)
    Linv = sys.L_red_inv
    z_ratio = sys.Z0 / params.Z_W
    b = sys.boundary_index
    scale = max(np.max(np.abs(phi0)), np.max(np.abs(q0)), np.sqrt(HBAR * params.Z0))
    lam3 = 3.0 * params.L * nl.Lambda
    if atol == 0.0:
        atol = 1e-12 * scale

    def rhs(_, y):
        phi = y[:M]
        q = y[M:]
        cq = Cinv @ q
        dq = -(Linv @ phi)
        dq[b] -= z_ratio * cq[b]
        dq[0] -= lam3 * phi[0] ** 2
        return np.concatenate([cq, dq])

    def blowup(_, y):
        return np.max(np.abs(y[:M])) - BLOWUP_FACTOR * scale

    blowup.terminal = True
    sol = solve_ivp(
        rhs,
        (t[0], t[-1]),
        np.concatenate([phi0, q0]),
        t_eval=t,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        max_step=max_step,
        events=blowup,
    )
    if sol.status == 1:
        raise InstabilityError(
            f"flux amplitude exceeded {BLOWUP_FACTOR:g} x initial scale at "
            f"t = {sol.t_events[0][0]:.3f}"
        )
    if not sol.success:
        raise IntegrationError(f"nonlinear integration failed: {sol.message}")
    return Trajectory(
        t_grid=t,
        phi=sol.y[:M],
        q=sol.y[M:],
        nl_strength=_nl_strength(params, nl, phi0),
        params=params,
    )


def first_order_correction(
    params: CircuitParams,
    nl: NonlinearConfig,
    linear_trajectory: Trajectory,
    modes: ModeSet | None = None,
) -> CorrectionTrajectory:
    """First-order trajectory correction via the pole-residue propagator.

    The source 3 Lambda (Phi_A^(0))^2 from the linear trajectory is convolved
    against each pole kernel with the trapezoidal rule on the (uniform)
    trajectory grid; observation covers every node.
    """
    t = np.asarray(linear_trajectory.t_grid, dtype=float)
    if len(t) < 2:
        raise DomainError("linear trajectory must cover at least two grid points")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise DomainError("first-order correction needs a uniform time grid")
    h = float(h[0])
    sys = build_reduced_system(params)
    if modes is None:
        modes = solve_quadratic_modes(sys)
    M = sys.M
    kept = modes.kept()
    s = modes.poles[kept]

    # source enters the atom charge row: -3 L Lambda Phi_A^2 in scaled units
    f = -3.0 * params.L * nl.Lambda * linear_trajectory.phi[0, :] ** 2

    # per-pole convolution I_p(t) = int_0^t e^{s (t - tau)} f(tau) dtau,
    # trapezoidal: I(t+h) = e^{s h} (I(t) + h f(t)/2) + h f(t+h)/2
    T = len(t)
    P = len(kept)
    conv = np.zeros((P, T), dtype=complex)
    growth = np.exp(s * h)
    for i in range(1, T):
        conv[:, i] = growth * (conv[:, i - 1] + 0.5 * h * f[i - 1]) + 0.5 * h * f[i]

    # weights: phi1_j <- (R_p)_{j, atom}; q1_j <- s_p (C R_p)_{j, atom}
    uA = modes.left_vectors[sys.atom_index, kept].conj()
    d = modes.denominators[kept]
    V = modes.right_vectors[:, kept]
    CV = sys.C_red @ V
    w_phi = V * (uA / d)[None, :]            # (M, P)
    w_q = CV * (s * uA / d)[None, :]
    phi1 = (w_phi @ conv).real
    q1 = (w_q @ conv).real
    return CorrectionTrajectory(
        t_grid=t,
        phi1=phi1,
        q1=q1,
        nl_strength=_nl_strength(params, nl, linear_trajectory.phi[:, 0]),
        params=params,
    )
